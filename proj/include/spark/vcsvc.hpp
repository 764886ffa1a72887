// Virtual-coil augmentation and SVC-GRAPPA. Virtual coils are conjugated
// point reflections of the physical k-spaces; SVC-GRAPPA runs VC-GRAPPA on
// horizontally and vertically gradient-weighted copies of the data (both
// weightings are diagonal in k-space) and recombines them per frequency by
// least squares with a data-consistency term.
//
// Index conventions: grids are stored fftshifted, reflection and the gradient
// weights are defined on unshifted integer frequencies and mapped through the
// shift. Reflection closure of the sampling lattice requires ny % r == 0 and
// even grid dimensions.
#pragma once

#include "spark/core.hpp"
#include "spark/grappa.hpp"

namespace spark {

enum class GradientAxis { horizontal, vertical };

namespace detail {

// stored index of the reflected frequency (-k mod N)
inline int reflect_index(int s, int n) {
  const int c = n / 2;
  const int k = ((s - c) % n + n) % n;
  const int kr = (n - k) % n;
  return (kr + c) % n;
}

}  // namespace detail

// Append one conjugate-reflected virtual coil per physical coil. The acquired
// line set must be closed under reflection, which the ny % r == 0 mask
// construction guarantees.
template <typename T>
MultiCoilKspace<T> augment_virtual_coils(const MultiCoilKspace<T>& ksp, const SamplingMask& mask) {
  ksp.check_uniform();
  if (mask.ny % mask.r != 0) { throw std::invalid_argument("augment_virtual_coils: reflection-incompatible mask"); }
  if (ksp.ny() % 2 != 0 || ksp.nx() % 2 != 0) { throw std::invalid_argument("augment_virtual_coils: even grid required"); }
  const int n_c = ksp.n_coils(), ny = ksp.ny(), nx = ksp.nx();
  MultiCoilKspace<T> out(2 * n_c, ny, nx);
  for (int c = 0; c < n_c; ++c) { out.coils[c] = ksp.coils[c]; }
  for (int c = 0; c < n_c; ++c) {
    ComplexGrid<T>& vc = out.coils[n_c + c];
    const ComplexGrid<T>& pc = ksp.coils[c];
    for (int y = 0; y < ny; ++y) {
      const int ry = detail::reflect_index(y, ny);
      for (int x = 0; x < nx; ++x) { vc.at(y, x) = std::conj(pc.at(ry, detail::reflect_index(x, nx))); }
    }
  }
  return out;
}

// Largest ACS sub-block on which both the physical and the reflected data are
// measured. For an even ACS count the reflected block is shifted by one line,
// so the symmetric sub-block loses one line.
inline AcsSpec reflection_symmetric_acs(const SamplingMask& mask) {
  const int n = mask.ny;
  const int a = mask.acs.start;
  const int b = mask.acs.start + mask.acs.count - 1;
  if (mask.acs.count == n) { return mask.acs; }
  if (a < 1) { throw std::invalid_argument("reflection_symmetric_acs: ACS touches line 0"); }
  const int lo = std::max(a, n - b);
  const int hi = std::min(b, n - a);
  if (hi < lo) { throw std::runtime_error("insufficient calibration data"); }
  return AcsSpec{lo, hi - lo + 1};
}

// Per-frequency multipliers of the circular first difference along one axis:
// w(k) = 1 - exp(-i 2 pi k / N), indexed by stored position.
template <typename T>
std::vector<Cx<T>> gradient_weights(int n) {
  const int c = n / 2;
  std::vector<Cx<T>> w(n);
  for (int s = 0; s < n; ++s) {
    const int k = ((s - c) % n + n) % n;
    const double ang = -2.0 * std::numbers::pi * k / n;
    w[s] = Cx<T>(1, 0) - Cx<T>(static_cast<T>(std::cos(ang)), static_cast<T>(std::sin(ang)));
  }
  return w;
}

// Diagonal gradient operator in k-space; equals the image-domain circular
// difference img(p) - img(p-1) along the axis. Sampling support is preserved.
template <typename T>
MultiCoilKspace<T> gradient_weight(const MultiCoilKspace<T>& ksp, GradientAxis axis) {
  ksp.check_uniform();
  const int ny = ksp.ny(), nx = ksp.nx();
  const auto w = gradient_weights<T>(axis == GradientAxis::horizontal ? nx : ny);
  MultiCoilKspace<T> out = ksp;
  for (auto& coil : out.coils) {
    for (int y = 0; y < ny; ++y) {
      Cx<T>* row = coil.line(y);
      if (axis == GradientAxis::horizontal) {
        for (int x = 0; x < nx; ++x) { row[x] *= w[x]; }
      } else {
        const Cx<T> wy = w[y];
        for (int x = 0; x < nx; ++x) { row[x] *= wy; }
      }
    }
  }
  return out;
}

// VC-GRAPPA: GRAPPA over the augmented coil set, calibrated on the
// reflection-symmetric ACS sub-block; returns the physical coils without
// substitution.
template <typename T>
MultiCoilKspace<T> vc_grappa_reconstruct(const MultiCoilKspace<T>& und, const SamplingMask& mask, KernelGeometry geom,
                                         double lambda) {
  if (mask.r == 1) { return und; }
  if (geom.r != mask.r) { throw std::invalid_argument("vc_grappa_reconstruct: geometry/mask mismatch"); }
  const MultiCoilKspace<T> aug = augment_virtual_coils(und, mask);
  const AcsSpec sym = reflection_symmetric_acs(mask);
  geom = fit_geometry(geom, sym.count, acs_lattice_offset(sym, geom.r), und.nx(), aug.n_coils());
  const GrappaKernel<T> kernel = calibrate(crop_acs(aug, sym), geom, lambda, acs_lattice_offset(sym, geom.r));
  const MultiCoilKspace<T> recon = interpolate(aug, mask, kernel);
  MultiCoilKspace<T> out;
  out.coils.assign(recon.coils.begin(), recon.coils.begin() + und.n_coils());
  return out;
}

// Per-frequency least-squares combination of the two gradient-domain
// reconstructions with a soft data-consistency term; acquired samples are
// hard-overwritten afterwards when hard_consistency is set.
template <typename T>
MultiCoilKspace<T> ls_combine(const MultiCoilKspace<T>& xh, const MultiCoilKspace<T>& xv,
                              const MultiCoilKspace<T>& acquired, const SamplingMask& mask,
                              double lambda_dc = 1e3, bool hard_consistency = true) {
  xh.check_uniform();
  if (xv.n_coils() != xh.n_coils() || acquired.n_coils() != xh.n_coils() || xv.ny() != xh.ny() ||
      acquired.ny() != xh.ny() || xv.nx() != xh.nx() || acquired.nx() != xh.nx()) {
    throw std::invalid_argument("ls_combine: shape mismatch");
  }
  const int ny = xh.ny(), nx = xh.nx();
  const auto wh = gradient_weights<T>(nx);
  const auto wv = gradient_weights<T>(ny);
  const T eps = static_cast<T>(1e-12);
  const T ldc = static_cast<T>(lambda_dc);
  MultiCoilKspace<T> out(xh.n_coils(), ny, nx);
  for (int c = 0; c < xh.n_coils(); ++c) {
    for (int y = 0; y < ny; ++y) {
      const bool m = mask.is_acquired(y);
      const Cx<T> wvy = wv[y];
      const T wv2 = std::norm(wvy);
      const Cx<T>* hrow = xh.coils[c].line(y);
      const Cx<T>* vrow = xv.coils[c].line(y);
      const Cx<T>* arow = acquired.coils[c].line(y);
      Cx<T>* orow = out.coils[c].line(y);
      for (int x = 0; x < nx; ++x) {
        const Cx<T> whx = wh[x];
        Cx<T> num = std::conj(whx) * hrow[x] + std::conj(wvy) * vrow[x];
        T den = std::norm(whx) + wv2 + eps;
        if (m) {
          num += ldc * arow[x];
          den += ldc;
        }
        orow[x] = num / den;
      }
      if (m && hard_consistency) { std::copy_n(arow, nx, orow); }
    }
  }
  return out;
}

// SVC-GRAPPA: gradient-weight along both axes, VC-GRAPPA each gradient
// dataset on its own weighted ACS, combine, enforce data consistency.
template <typename T>
MultiCoilKspace<T> svc_grappa_reconstruct(const MultiCoilKspace<T>& und, const SamplingMask& mask, KernelGeometry geom,
                                          double lambda, bool substitute = true) {
  if (mask.r == 1) { return und; }
  const MultiCoilKspace<T> xh = vc_grappa_reconstruct(gradient_weight(und, GradientAxis::horizontal), mask, geom, lambda);
  const MultiCoilKspace<T> xv = vc_grappa_reconstruct(gradient_weight(und, GradientAxis::vertical), mask, geom, lambda);
  return ls_combine(xh, xv, und, mask, 1e3, substitute);
}

}  // namespace spark
