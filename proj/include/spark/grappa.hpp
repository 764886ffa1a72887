// Tikhonov-regularized GRAPPA. Kernels are calibrated on the ACS block by
// sliding the source stencil over every valid position and solving the
// regularized normal equations; interpolation then fills every non-lattice
// line of the undersampled k-space, including the lines under the ACS (the
// caller decides whether measured data is substituted back afterwards).
#pragma once

#include "spark/core.hpp"
#include "spark/pool.hpp"
#include "spark/solve.hpp"

namespace spark {

struct KernelGeometry {
  int ky_taps = 4;  // acquired source lines per stencil (even)
  int kx_taps = 5;  // readout taps (odd)
  int r = 2;        // acceleration factor

  void validate() const {
    if (ky_taps < 2 || ky_taps % 2 != 0) { throw std::invalid_argument("kernel geometry: ky_taps must be even and >= 2"); }
    if (kx_taps < 1 || kx_taps % 2 != 1) { throw std::invalid_argument("kernel geometry: kx_taps must be odd and >= 1"); }
    if (r < 2) { throw std::invalid_argument("kernel geometry: r must be >= 2"); }
  }

  // source line relative to the block base, tap t in [0, ky_taps)
  int ky_offset(int t) const { return (t - ky_taps / 2 + 1) * r; }
  // lines spanned by the stencil
  int line_span() const { return (ky_taps - 1) * r + 1; }
};

// Shrink ky_taps (keeping it even) until the stencil fits inside an ACS block
// of the given height. Used by the experiment harness so one configured
// geometry works across an R/ACS sweep.
inline KernelGeometry fit_geometry(KernelGeometry geom, int acs_count) {
  while (geom.ky_taps > 2 && geom.line_span() > acs_count) { geom.ky_taps -= 2; }
  return geom;
}

namespace detail {

inline int calibration_rows(const KernelGeometry& geom, int acs_count, int lattice_offset, int nx) {
  const int b_lo = (geom.ky_taps / 2 - 1) * geom.r;
  const int b_hi = acs_count - 1 - (geom.ky_taps / 2) * geom.r;
  int bases = 0;
  for (int b = b_lo + ((lattice_offset - b_lo) % geom.r + geom.r) % geom.r; b <= b_hi; b += geom.r) { ++bases; }
  return bases * std::max(0, nx - geom.kx_taps + 1);
}

}  // namespace detail

// Row-aware variant: additionally shrink ky_taps while the lattice-aligned
// calibration system would be underdetermined for n_src source coils.
inline KernelGeometry fit_geometry(KernelGeometry geom, int acs_count, int lattice_offset, int nx, int n_src) {
  geom = fit_geometry(geom, acs_count);
  while (geom.ky_taps > 2 &&
         detail::calibration_rows(geom, acs_count, lattice_offset, nx) < n_src * geom.ky_taps * geom.kx_taps) {
    geom.ky_taps -= 2;
  }
  return geom;
}

template <typename T>
struct GrappaKernel {
  KernelGeometry geom;
  int n_c = 0;
  // weights indexed [target coil][offset d-1][source coil][ky tap][kx tap]
  std::vector<Cx<T>> weights;

  std::size_t weight_index(int tc, int d, int sc, int t, int e) const {
    return (((static_cast<std::size_t>(tc) * (geom.r - 1) + (d - 1)) * n_c + sc) * geom.ky_taps + t) * geom.kx_taps + e;
  }
  Cx<T>& w(int tc, int d, int sc, int t, int e) { return weights[weight_index(tc, d, sc, t, e)]; }
  const Cx<T>& w(int tc, int d, int sc, int t, int e) const { return weights[weight_index(tc, d, sc, t, e)]; }
};

// Calibrate interpolation weights on a fully sampled ACS block.
// Solves, per (target coil, offset), w = argmin |A w - b|^2 + lambda*mu*|w|^2
// with mu the mean diagonal of A^H A. Calibration block bases are aligned to
// the acquisition lattice (lattice_offset = first in-block row congruent to
// the lattice), so the gathered equations are exactly the ones interpolation
// applies later. The source stencil does not depend on the offset, so one
// Gram matrix serves every right-hand side.
template <typename T>
GrappaKernel<T> calibrate(const MultiCoilKspace<T>& acs, KernelGeometry geom, double lambda, int lattice_offset = 0) {
  geom.validate();
  acs.check_uniform();
  if (lambda < 0) { throw std::invalid_argument("calibrate: lambda must be >= 0"); }
  if (lattice_offset < 0 || lattice_offset >= geom.r) { throw std::invalid_argument("calibrate: bad lattice offset"); }
  const int n_c = acs.n_coils();
  const int na = acs.ny();
  const int nx = acs.nx();
  const int span = geom.line_span();
  if (na < span) { throw std::runtime_error("insufficient calibration data"); }
  const int hx = (geom.kx_taps - 1) / 2;
  const int n_cols = n_c * geom.ky_taps * geom.kx_taps;
  const int nrhs = n_c * (geom.r - 1);
  const int b_lo = (geom.ky_taps / 2 - 1) * geom.r;  // first valid block base
  const int b_hi = na - 1 - (geom.ky_taps / 2) * geom.r;
  std::vector<int> bases;
  for (int b = b_lo + ((lattice_offset - b_lo) % geom.r + geom.r) % geom.r; b <= b_hi; b += geom.r) {
    bases.push_back(b);
  }
  const int nxw = nx - geom.kx_taps + 1;
  if (bases.empty() || nxw < 1) { throw std::runtime_error("insufficient calibration data"); }

  // gather the source matrix and target matrix row by row
  const std::size_t n_rows = bases.size() * static_cast<std::size_t>(nxw);
  std::vector<Cx<T>> a(n_rows * n_cols);
  std::vector<Cx<T>> t_mat(n_rows * nrhs);
  std::size_t row = 0;
  for (const int base : bases) {
    for (int x = hx; x < hx + nxw; ++x, ++row) {
      Cx<T>* arow = a.data() + row * n_cols;
      int col = 0;
      for (int sc = 0; sc < n_c; ++sc) {
        for (int t = 0; t < geom.ky_taps; ++t) {
          const Cx<T>* src = acs.coils[sc].line(base + geom.ky_offset(t));
          for (int e = -hx; e <= hx; ++e) { arow[col++] = src[x + e]; }
        }
      }
      Cx<T>* trow = t_mat.data() + row * nrhs;
      for (int tc = 0; tc < n_c; ++tc) {
        for (int d = 1; d < geom.r; ++d) { trow[tc * (geom.r - 1) + (d - 1)] = acs.coils[tc].at(base + d, x); }
      }
    }
  }

  // normal equations, accumulated and solved in double regardless of the
  // pipeline precision (the systems are tiny and conditioning matters)
  std::vector<Cx<double>> gram(static_cast<std::size_t>(n_cols) * n_cols, Cx<double>(0));
  std::vector<Cx<double>> rhs(static_cast<std::size_t>(n_cols) * nrhs, Cx<double>(0));
  for (std::size_t rix = 0; rix < n_rows; ++rix) {
    const Cx<T>* arow = a.data() + rix * n_cols;
    const Cx<T>* trow = t_mat.data() + rix * nrhs;
    for (int i = 0; i < n_cols; ++i) {
      const Cx<double> ci = std::conj(Cx<double>(arow[i]));
      Cx<double>* grow = gram.data() + static_cast<std::size_t>(i) * n_cols;
      for (int j = i; j < n_cols; ++j) { grow[j] += ci * Cx<double>(arow[j]); }
      Cx<double>* rrow = rhs.data() + static_cast<std::size_t>(i) * nrhs;
      for (int j = 0; j < nrhs; ++j) { rrow[j] += ci * Cx<double>(trow[j]); }
    }
  }
  for (int i = 0; i < n_cols; ++i) {
    for (int j = 0; j < i; ++j) {
      gram[static_cast<std::size_t>(i) * n_cols + j] = std::conj(gram[static_cast<std::size_t>(j) * n_cols + i]);
    }
  }
  double trace = 0;
  for (int i = 0; i < n_cols; ++i) { trace += gram[static_cast<std::size_t>(i) * n_cols + i].real(); }
  if (trace == 0 && lambda > 0) {
    // all-zero calibration data: the regularized minimum-norm solution
    std::fill(rhs.begin(), rhs.end(), Cx<double>(0));
  } else {
    if (lambda > 0) {
      const double ridge = lambda * trace / n_cols;
      for (int i = 0; i < n_cols; ++i) { gram[static_cast<std::size_t>(i) * n_cols + i] += ridge; }
    }
    solve_hermitian_psd(n_cols, gram, nrhs, rhs);
  }

  GrappaKernel<T> kernel;
  kernel.geom = geom;
  kernel.n_c = n_c;
  kernel.weights.resize(static_cast<std::size_t>(n_c) * (geom.r - 1) * n_cols);
  for (int tc = 0; tc < n_c; ++tc) {
    for (int d = 1; d < geom.r; ++d) {
      const int col = tc * (geom.r - 1) + (d - 1);
      int src_row = 0;
      for (int sc = 0; sc < n_c; ++sc) {
        for (int t = 0; t < geom.ky_taps; ++t) {
          for (int e = 0; e < geom.kx_taps; ++e, ++src_row) {
            const Cx<double> v = rhs[static_cast<std::size_t>(src_row) * nrhs + col];
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) { throw std::runtime_error("calibrate: non-finite weights"); }
            kernel.w(tc, d, sc, t, e) = Cx<T>(static_cast<T>(v.real()), static_cast<T>(v.imag()));
          }
        }
      }
    }
  }
  return kernel;
}

// Fill every non-lattice line from the acquired lattice lines. Lattice lines
// (i mod r == 0) pass through unchanged; everything else, ACS rows included,
// is replaced by the kernel estimate. Out-of-range taps read as zero.
template <typename T>
MultiCoilKspace<T> interpolate(const MultiCoilKspace<T>& und, const SamplingMask& mask, const GrappaKernel<T>& kernel) {
  und.check_uniform();
  const KernelGeometry& geom = kernel.geom;
  geom.validate();
  if (mask.r != geom.r) { throw std::invalid_argument("interpolate: geometry/mask mismatch"); }
  if (mask.ny != und.ny()) { throw std::invalid_argument("interpolate: mask length mismatch"); }
  if (kernel.n_c != und.n_coils()) { throw std::invalid_argument("interpolate: coil count mismatch"); }
  const int ny = und.ny(), nx = und.nx(), n_c = und.n_coils();
  const int hx = (geom.kx_taps - 1) / 2;

  MultiCoilKspace<T> out(n_c, ny, nx);
  for (int c = 0; c < n_c; ++c) {
    for (int y = 0; y < ny; y += geom.r) { std::copy_n(und.coils[c].line(y), nx, out.coils[c].line(y)); }
  }
  std::vector<int> missing;
  for (int y = 0; y < ny; ++y) {
    if (y % geom.r != 0) { missing.push_back(y); }
  }
  parallel_for(static_cast<int>(missing.size()), [&](int idx) {
    const int y = missing[idx];
    const int d = y % geom.r;
    const int base = y - d;
    for (int tc = 0; tc < n_c; ++tc) {
      Cx<T>* dst = out.coils[tc].line(y);
      for (int x = 0; x < nx; ++x) { dst[x] = Cx<T>(0); }
      for (int sc = 0; sc < n_c; ++sc) {
        for (int t = 0; t < geom.ky_taps; ++t) {
          const int sy = base + geom.ky_offset(t);
          if (sy < 0 || sy >= ny) { continue; }
          const Cx<T>* src = und.coils[sc].line(sy);
          for (int e = 0; e < geom.kx_taps; ++e) {
            const Cx<T> w = kernel.w(tc, d, sc, t, e);
            const int off = e - hx;
            const int x0 = std::max(0, -off);
            const int x1 = std::min(nx, nx - off);
            for (int x = x0; x < x1; ++x) { dst[x] += w * src[x + off]; }
          }
        }
      }
    }
  });
  return out;
}

// The in-block row index of the first ACS line that sits on the acquisition
// lattice.
inline int acs_lattice_offset(const AcsSpec& acs, int r) { return (r - acs.start % r) % r; }

// Calibrate on the masked data's ACS, interpolate, optionally substitute the
// measured lines back. r == 1 masks have nothing to fill.
template <typename T>
MultiCoilKspace<T> grappa_reconstruct(const MultiCoilKspace<T>& und, const SamplingMask& mask, KernelGeometry geom,
                                      double lambda, bool substitute) {
  if (mask.r == 1) { return und; }
  if (geom.r != mask.r) { throw std::invalid_argument("grappa_reconstruct: geometry/mask mismatch"); }
  const GrappaKernel<T> kernel =
      calibrate(crop_acs(und, mask.acs), geom, lambda, acs_lattice_offset(mask.acs, geom.r));
  MultiCoilKspace<T> recon = interpolate(und, mask, kernel);
  if (substitute) { recon = substitute_acquired(recon, und, mask); }
  return recon;
}

}  // namespace spark
