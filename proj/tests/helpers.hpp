// Test-only oracles, deliberately independent of the library code paths they
// check: a direct-summation centered DFT, a planted-kernel data generator
// with its own stencil arithmetic, and a Gauss-Jordan least-squares solver.
#pragma once

#include <complex>
#include <vector>

#include "spark/core.hpp"
#include "spark/grappa.hpp"
#include "spark/rng.hpp"

namespace oracle {

inline std::complex<double> rand_cx(spark::Rng& rng) {
  return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
}

template <typename T>
spark::ComplexGrid<T> random_grid(int ny, int nx, spark::Rng& rng) {
  spark::ComplexGrid<T> g(ny, nx);
  for (auto& v : g.data) {
    v = spark::Cx<T>(static_cast<T>(rng.uniform(-1.0, 1.0)), static_cast<T>(rng.uniform(-1.0, 1.0)));
  }
  return g;
}

template <typename T>
spark::MultiCoilKspace<T> random_stack(int n_c, int ny, int nx, spark::Rng& rng) {
  spark::MultiCoilKspace<T> k(n_c, ny, nx);
  for (auto& c : k.coils) { c = random_grid<T>(ny, nx, rng); }
  return k;
}

// O(N^2) centered DFT with orthonormal scaling, written from the definition.
inline spark::ComplexGrid<double> dft2c(const spark::ComplexGrid<double>& in, bool inverse) {
  const int ny = in.ny, nx = in.nx;
  const int cy = ny / 2, cx = nx / 2;
  const double sign = inverse ? 1.0 : -1.0;
  spark::ComplexGrid<double> out(ny, nx);
  const double scale = 1.0 / std::sqrt(static_cast<double>(ny) * nx);
  for (int ky = 0; ky < ny; ++ky) {
    for (int kx = 0; kx < nx; ++kx) {
      std::complex<double> acc(0, 0);
      for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
          const double ang =
              sign * 2.0 * std::numbers::pi * (static_cast<double>(ky) * y / ny + static_cast<double>(kx) * x / nx);
          // ifftshift of the input folded into the index
          acc += in.at((y + cy) % ny, (x + cx) % nx) * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      }
      out.at((ky + cy) % ny, (kx + cx) % nx) = acc * scale;
    }
  }
  return out;
}

// Dense complex least squares min |A w - b|^2 + ridge |w|^2 via explicit
// normal equations and Gauss-Jordan elimination with partial pivoting.
inline std::vector<std::complex<double>> least_squares(const std::vector<std::complex<double>>& a, int rows, int cols,
                                                       const std::vector<std::complex<double>>& b, double ridge) {
  std::vector<std::complex<double>> m(static_cast<std::size_t>(cols) * (cols + 1), {0, 0});
  for (int i = 0; i < cols; ++i) {
    for (int j = 0; j < cols; ++j) {
      std::complex<double> acc(0, 0);
      for (int r = 0; r < rows; ++r) {
        acc += std::conj(a[static_cast<std::size_t>(r) * cols + i]) * a[static_cast<std::size_t>(r) * cols + j];
      }
      m[static_cast<std::size_t>(i) * (cols + 1) + j] = acc + (i == j ? ridge : 0.0);
    }
    std::complex<double> acc(0, 0);
    for (int r = 0; r < rows; ++r) { acc += std::conj(a[static_cast<std::size_t>(r) * cols + i]) * b[r]; }
    m[static_cast<std::size_t>(i) * (cols + 1) + cols] = acc;
  }
  for (int k = 0; k < cols; ++k) {
    int piv = k;
    for (int i = k + 1; i < cols; ++i) {
      if (std::abs(m[static_cast<std::size_t>(i) * (cols + 1) + k]) >
          std::abs(m[static_cast<std::size_t>(piv) * (cols + 1) + k])) {
        piv = i;
      }
    }
    for (int j = 0; j <= cols; ++j) {
      std::swap(m[static_cast<std::size_t>(k) * (cols + 1) + j], m[static_cast<std::size_t>(piv) * (cols + 1) + j]);
    }
    const std::complex<double> d = m[static_cast<std::size_t>(k) * (cols + 1) + k];
    for (int j = k; j <= cols; ++j) { m[static_cast<std::size_t>(k) * (cols + 1) + j] /= d; }
    for (int i = 0; i < cols; ++i) {
      if (i == k) { continue; }
      const std::complex<double> f = m[static_cast<std::size_t>(i) * (cols + 1) + k];
      if (f == std::complex<double>(0, 0)) { continue; }
      for (int j = k; j <= cols; ++j) {
        m[static_cast<std::size_t>(i) * (cols + 1) + j] -= f * m[static_cast<std::size_t>(k) * (cols + 1) + j];
      }
    }
  }
  std::vector<std::complex<double>> w(cols);
  for (int i = 0; i < cols; ++i) { w[i] = m[static_cast<std::size_t>(i) * (cols + 1) + cols]; }
  return w;
}

// K-space data exactly consistent with a planted interpolation kernel.
// Lattice lines are random; every other line is the stencil combination of
// the source stack's lattice lines (zero outside the grid). With
// virtual_sources the stencil runs over the physical coils plus their
// conjugate point reflections.
struct Planted {
  spark::MultiCoilKspace<double> full;           // physical coils, every line
  std::vector<std::complex<double>> weights;     // [tc][d-1][sc][t][e]
  int n_src = 0;
};

inline Planted make_planted(int ny, int nx, int n_c, spark::KernelGeometry geom, bool virtual_sources,
                            spark::Rng& rng) {
  const int n_src = virtual_sources ? 2 * n_c : n_c;
  const int hx = (geom.kx_taps - 1) / 2;
  Planted p;
  p.n_src = n_src;
  p.weights.resize(static_cast<std::size_t>(n_c) * (geom.r - 1) * n_src * geom.ky_taps * geom.kx_taps);
  for (auto& w : p.weights) { w = rand_cx(rng) * 0.5; }

  p.full = spark::MultiCoilKspace<double>(n_c, ny, nx);
  for (int c = 0; c < n_c; ++c) {
    for (int y = 0; y < ny; y += geom.r) {
      for (int x = 0; x < nx; ++x) { p.full.coils[c].at(y, x) = rand_cx(rng); }
    }
  }
  // source stack on the lattice (virtual part from an explicit reflection)
  spark::MultiCoilKspace<double> src(n_src, ny, nx);
  for (int c = 0; c < n_c; ++c) { src.coils[c] = p.full.coils[c]; }
  if (virtual_sources) {
    auto reflect = [](int s, int n) { return (n - s) % n; };  // even n
    for (int c = 0; c < n_c; ++c) {
      for (int y = 0; y < ny; y += geom.r) {
        for (int x = 0; x < nx; ++x) {
          src.coils[n_c + c].at(y, x) = std::conj(p.full.coils[c].at(reflect(y, ny), reflect(x, nx)));
        }
      }
    }
  }
  auto weight = [&](int tc, int d, int sc, int t, int e) {
    return p.weights[(((static_cast<std::size_t>(tc) * (geom.r - 1) + (d - 1)) * n_src + sc) * geom.ky_taps + t) *
                         geom.kx_taps +
                     e];
  };
  for (int y = 0; y < ny; ++y) {
    const int d = y % geom.r;
    if (d == 0) { continue; }
    const int base = y - d;
    for (int tc = 0; tc < n_c; ++tc) {
      for (int x = 0; x < nx; ++x) {
        std::complex<double> acc(0, 0);
        for (int sc = 0; sc < n_src; ++sc) {
          for (int t = 0; t < geom.ky_taps; ++t) {
            const int sy = base + (t - geom.ky_taps / 2 + 1) * geom.r;
            if (sy < 0 || sy >= ny) { continue; }
            for (int e = -hx; e <= hx; ++e) {
              const int sx = x + e;
              if (sx < 0 || sx >= nx) { continue; }
              acc += weight(tc, d, sc, t, e + hx) * src.coils[sc].at(sy, sx);
            }
          }
        }
        p.full.coils[tc].at(y, x) = acc;
      }
    }
  }
  return p;
}

}  // namespace oracle
