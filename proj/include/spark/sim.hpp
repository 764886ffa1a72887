// Synthetic multi-coil acquisitions: Shepp-Logan phantom, smooth synthetic
// coil sensitivities with per-coil linear phase, complex Gaussian k-space
// noise, and uniform line-undersampling masks. Stands in for scanner data at
// desk scale; everything is deterministic under a fixed seed.
#pragma once

#include <array>
#include <span>

#include "spark/core.hpp"
#include "spark/fft.hpp"
#include "spark/rng.hpp"

namespace spark {

struct Ellipse {
  double a;          // half-axis along x
  double b;          // half-axis along y
  double x0;         // center
  double y0;
  double phi_deg;    // rotation, counter-clockwise
  double intensity;  // additive contribution
};

// The ten-ellipse Shepp-Logan set with the usual [0, 1] intensity scaling.
inline const std::array<Ellipse, 10>& shepp_logan_ellipses() {
  static const std::array<Ellipse, 10> e = {{
      {0.69, 0.92, 0.0, 0.0, 0.0, 1.0},
      {0.6624, 0.874, 0.0, -0.0184, 0.0, -0.8},
      {0.11, 0.31, 0.22, 0.0, -18.0, -0.2},
      {0.16, 0.41, -0.22, 0.0, 18.0, -0.2},
      {0.21, 0.25, 0.0, 0.35, 0.0, 0.1},
      {0.046, 0.046, 0.0, 0.1, 0.0, 0.1},
      {0.046, 0.046, 0.0, -0.1, 0.0, 0.1},
      {0.046, 0.023, -0.08, -0.605, 0.0, 0.1},
      {0.023, 0.023, 0.0, -0.606, 0.0, 0.1},
      {0.023, 0.046, 0.06, -0.605, 0.0, 0.1},
  }};
  return e;
}

// Pixel (iy, ix) maps to (x, y) in [-1, 1]^2 with mirror-symmetric pixel
// centers, so i <-> n-1-i flips the sign of the coordinate exactly.
inline double pixel_coord(int i, int n) { return (2.0 * i - (n - 1)) / n; }

template <typename T>
RealGrid<T> render_ellipses(int n, std::span<const Ellipse> ellipses) {
  if (n < 16) { throw std::invalid_argument("phantom size must be >= 16"); }
  RealGrid<T> img(n, n);
  for (const auto& e : ellipses) {
    const double phi = e.phi_deg * std::numbers::pi / 180.0;
    const double c = std::cos(phi), s = std::sin(phi);
    for (int iy = 0; iy < n; ++iy) {
      const double y = -pixel_coord(iy, n);  // +y points up
      for (int ix = 0; ix < n; ++ix) {
        const double x = pixel_coord(ix, n);
        const double dx = x - e.x0, dy = y - e.y0;
        const double u = (c * dx + s * dy) / e.a;
        const double v = (-s * dx + c * dy) / e.b;
        if (u * u + v * v <= 1.0) { img.at(iy, ix) += static_cast<T>(e.intensity); }
      }
    }
  }
  // intensity sums like 1 - 0.8 - 0.2 land a few ulp below zero
  for (auto& v : img.data) {
    if (v < T(0) && v > T(-1e-9)) { v = T(0); }
  }
  return img;
}

template <typename T>
RealGrid<T> shepp_logan(int n) {
  const auto& e = shepp_logan_ellipses();
  return render_ellipses<T>(n, std::span<const Ellipse>(e.data(), e.size()));
}

struct CoilMapParams {
  double radius_frac = 0.55;  // coil center distance from image center, in units of n
  double width_frac = 0.5;    // Gaussian falloff sigma, in units of n
  double phase_cycles = 0.6;  // linear phase ramp toward the coil, cycles across the FOV
};

template <typename T>
struct CoilMaps {
  std::vector<ComplexGrid<T>> maps;
  CoilMapParams params;

  int n_coils() const { return static_cast<int>(maps.size()); }
};

// Coil c sits at angle 2*pi*c/n_c on a circle of radius radius_frac*n around
// the image center; magnitude is a Gaussian falloff from the coil center and
// phase ramps linearly toward it.
template <typename T>
CoilMaps<T> make_coil_maps(int n, int n_c, CoilMapParams params = {}) {
  if (n_c < 1) { throw std::invalid_argument("coil count must be >= 1"); }
  CoilMaps<T> out;
  out.params = params;
  out.maps.reserve(n_c);
  const double cx = (n - 1) / 2.0, cy = (n - 1) / 2.0;
  const double radius = params.radius_frac * n;
  const double sigma = params.width_frac * n;
  for (int c = 0; c < n_c; ++c) {
    const double theta = 2.0 * std::numbers::pi * c / n_c;
    const double ccx = cx + radius * std::cos(theta);
    const double ccy = cy + radius * std::sin(theta);
    ComplexGrid<T> map(n, n);
    for (int iy = 0; iy < n; ++iy) {
      for (int ix = 0; ix < n; ++ix) {
        const double dx = ix - ccx, dy = iy - ccy;
        const double mag = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        const double along = ((ix - cx) * std::cos(theta) + (iy - cy) * std::sin(theta)) / n;
        const double phase = 2.0 * std::numbers::pi * params.phase_cycles * along;
        map.at(iy, ix) = Cx<T>(static_cast<T>(mag * std::cos(phase)), static_cast<T>(mag * std::sin(phase)));
      }
    }
    out.maps.push_back(std::move(map));
  }
  return out;
}

struct AcquisitionParams {
  int n = 128;
  int n_c = 8;
  double sigma = 5e-4;  // complex Gaussian std, relative to peak |k-space|
  std::uint64_t seed = 1;
};

// Forward model: per-coil k-space = fft2c(map .* img) plus white complex
// Gaussian noise of std sigma * peak. One PRNG stream per coil.
template <typename T>
MultiCoilKspace<T> simulate_acquisition(const RealGrid<T>& img, const CoilMaps<T>& maps, const AcquisitionParams& p) {
  if (p.sigma < 0) { throw std::invalid_argument("simulate_acquisition: sigma must be >= 0"); }
  if (maps.n_coils() < 1) { throw std::invalid_argument("simulate_acquisition: no coils"); }
  if (maps.maps.front().ny != img.ny || maps.maps.front().nx != img.nx) {
    throw std::invalid_argument("simulate_acquisition: shape mismatch");
  }
  MultiCoilKspace<T> ksp;
  ksp.coils.reserve(maps.n_coils());
  for (const auto& map : maps.maps) {
    ComplexGrid<T> weighted(img.ny, img.nx);
    for (std::size_t i = 0; i < weighted.size(); ++i) { weighted.data[i] = map.data[i] * img.data[i]; }
    ksp.coils.push_back(fft2c(weighted));
  }
  if (p.sigma > 0) {
    const T peak = max_abs(ksp);
    const double std_abs = p.sigma * static_cast<double>(peak);
    for (int c = 0; c < ksp.n_coils(); ++c) {
      Rng rng(p.seed, static_cast<std::uint64_t>(c));
      for (auto& v : ksp.coils[c].data) {
        v += Cx<T>(static_cast<T>(std_abs * rng.normal()), static_cast<T>(std_abs * rng.normal()));
      }
    }
  }
  detail::ensure_finite(ksp, "simulate_acquisition");
  return ksp;
}

// Every r-th line plus a centered ACS block of acs_count lines.
inline SamplingMask make_uniform_mask(int ny, int r, int acs_count) {
  if (ny < 1 || r < 1) { throw std::invalid_argument("make_uniform_mask: invalid dimensions"); }
  if (ny % r != 0) { throw std::invalid_argument("make_uniform_mask: grid not divisible by R"); }
  if (acs_count < 0 || acs_count > ny) { throw std::invalid_argument("make_uniform_mask: ACS count out of range"); }
  SamplingMask mask;
  mask.ny = ny;
  mask.r = r;
  mask.acs = AcsSpec::centered(ny, acs_count);
  mask.acquired.assign(ny, 0);
  for (int i = 0; i < ny; ++i) {
    const bool in_acs = (i >= mask.acs.start && i < mask.acs.start + mask.acs.count);
    if (i % r == 0 || in_acs) { mask.acquired[i] = 1; }
  }
  return mask;
}

}  // namespace spark
