// Core value types shared by every reconstruction stage: complex grids,
// multi-coil stacks, sampling masks, ACS descriptors, and the small set of
// operations (crop, mask, substitute, coil-combine, error metric) that the
// pipelines are built from. Everything is templated on the compute scalar
// (float or double); the precision is selected once per run by the caller.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace spark {

template <typename T>
using Cx = std::complex<T>;

// 2D complex array, row-major, ny lines (phase encode) by nx columns (readout).
template <typename T>
struct ComplexGrid {
  int ny = 0;
  int nx = 0;
  std::vector<Cx<T>> data;

  ComplexGrid() = default;
  ComplexGrid(int ny_, int nx_) : ny(ny_), nx(nx_), data(static_cast<std::size_t>(ny_) * nx_) {
    if (ny_ < 1 || nx_ < 1) { throw std::invalid_argument("grid dimensions must be >= 1"); }
  }

  Cx<T>& at(int y, int x) { return data[static_cast<std::size_t>(y) * nx + x]; }
  const Cx<T>& at(int y, int x) const { return data[static_cast<std::size_t>(y) * nx + x]; }
  Cx<T>* line(int y) { return data.data() + static_cast<std::size_t>(y) * nx; }
  const Cx<T>* line(int y) const { return data.data() + static_cast<std::size_t>(y) * nx; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const ComplexGrid& o) const { return ny == o.ny && nx == o.nx; }
};

// Real-valued 2D array (magnitude images, residual targets).
template <typename T>
struct RealGrid {
  int ny = 0;
  int nx = 0;
  std::vector<T> data;

  RealGrid() = default;
  RealGrid(int ny_, int nx_) : ny(ny_), nx(nx_), data(static_cast<std::size_t>(ny_) * nx_, T(0)) {
    if (ny_ < 1 || nx_ < 1) { throw std::invalid_argument("grid dimensions must be >= 1"); }
  }

  T& at(int y, int x) { return data[static_cast<std::size_t>(y) * nx + x]; }
  const T& at(int y, int x) const { return data[static_cast<std::size_t>(y) * nx + x]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const RealGrid& o) const { return ny == o.ny && nx == o.nx; }
};

// Stack of per-coil grids sharing one shape. Holds k-space for most of the
// pipeline, and coil images immediately around the FFT boundary.
template <typename T>
struct MultiCoilKspace {
  std::vector<ComplexGrid<T>> coils;

  MultiCoilKspace() = default;
  MultiCoilKspace(int n_c, int ny, int nx) {
    if (n_c < 1) { throw std::invalid_argument("coil count must be >= 1"); }
    coils.assign(n_c, ComplexGrid<T>(ny, nx));
  }

  int n_coils() const { return static_cast<int>(coils.size()); }
  int ny() const { return coils.empty() ? 0 : coils.front().ny; }
  int nx() const { return coils.empty() ? 0 : coils.front().nx; }

  void check_uniform() const {
    if (coils.empty()) { throw std::invalid_argument("empty coil list"); }
    for (const auto& c : coils) {
      if (!c.same_shape(coils.front())) { throw std::invalid_argument("coil grids differ in shape"); }
    }
  }
};

// Centered block of fully sampled autocalibration lines.
struct AcsSpec {
  int start = 0;
  int count = 0;

  static AcsSpec centered(int ny, int count) {
    if (count < 0 || count > ny) { throw std::invalid_argument("ACS count out of range"); }
    return AcsSpec{(ny - count) / 2, count};
  }
};

// Line-undersampling pattern: full readout, every r-th phase-encode line plus
// a centered ACS block.
struct SamplingMask {
  int ny = 0;
  int r = 1;
  AcsSpec acs;
  std::vector<std::uint8_t> acquired;  // one flag per line

  bool is_acquired(int line) const { return acquired[static_cast<std::size_t>(line)] != 0; }

  int acquired_count() const {
    int n = 0;
    for (auto a : acquired) { n += (a != 0); }
    return n;
  }

  void validate() const {
    if (ny < 1 || r < 1) { throw std::invalid_argument("invalid mask dimensions"); }
    if (static_cast<int>(acquired.size()) != ny) { throw std::invalid_argument("mask length mismatch"); }
    for (int i = 0; i < ny; ++i) {
      bool lattice = (i % r == 0);
      bool in_acs = (i >= acs.start && i < acs.start + acs.count);
      if ((lattice || in_acs) && !acquired[i]) { throw std::invalid_argument("mask violates acquisition invariant"); }
    }
  }
};

namespace detail {

template <typename T>
inline void ensure_finite(const ComplexGrid<T>& g, const char* what) {
  for (const auto& v : g.data) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) { throw std::runtime_error(std::string(what) + ": non-finite samples"); }
  }
}

template <typename T>
inline void ensure_finite(const MultiCoilKspace<T>& k, const char* what) {
  for (const auto& c : k.coils) { ensure_finite(c, what); }
}

}  // namespace detail

// Root-sum-of-squares coil combination of an image-domain stack.
template <typename T>
RealGrid<T> rss_combine(const MultiCoilKspace<T>& coil_images) {
  coil_images.check_uniform();
  RealGrid<T> out(coil_images.ny(), coil_images.nx());
  for (const auto& c : coil_images.coils) {
    for (std::size_t i = 0; i < out.size(); ++i) { out.data[i] += std::norm(c.data[i]); }
  }
  for (auto& v : out.data) { v = std::sqrt(v); }
  return out;
}

// Normalized RMSE: ||recon - ref|| / ||ref||.
template <typename T>
T rmse(const RealGrid<T>& recon, const RealGrid<T>& ref) {
  if (!recon.same_shape(ref)) { throw std::invalid_argument("rmse: shape mismatch"); }
  long double num = 0, den = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    long double d = static_cast<long double>(recon.data[i]) - ref.data[i];
    num += d * d;
    den += static_cast<long double>(ref.data[i]) * ref.data[i];
  }
  if (den == 0) { throw std::invalid_argument("rmse: degenerate reference"); }
  return static_cast<T>(std::sqrt(num / den));
}

// Extract the ACS line block of every coil. Pure; input untouched.
template <typename T>
MultiCoilKspace<T> crop_acs(const MultiCoilKspace<T>& ksp, const AcsSpec& acs) {
  ksp.check_uniform();
  if (acs.start < 0 || acs.count < 1 || acs.start + acs.count > ksp.ny()) {
    throw std::invalid_argument("crop_acs: block out of bounds");
  }
  MultiCoilKspace<T> out(ksp.n_coils(), acs.count, ksp.nx());
  for (int c = 0; c < ksp.n_coils(); ++c) {
    for (int y = 0; y < acs.count; ++y) {
      std::copy_n(ksp.coils[c].line(acs.start + y), ksp.nx(), out.coils[c].line(y));
    }
  }
  return out;
}

// Zero every unacquired line; acquired lines are copied bit-identically.
template <typename T>
MultiCoilKspace<T> apply_mask(const MultiCoilKspace<T>& ksp, const SamplingMask& mask) {
  ksp.check_uniform();
  if (mask.ny != ksp.ny()) { throw std::invalid_argument("apply_mask: mask length mismatch"); }
  MultiCoilKspace<T> out(ksp.n_coils(), ksp.ny(), ksp.nx());
  for (int c = 0; c < ksp.n_coils(); ++c) {
    for (int y = 0; y < ksp.ny(); ++y) {
      if (mask.is_acquired(y)) { std::copy_n(ksp.coils[c].line(y), ksp.nx(), out.coils[c].line(y)); }
    }
  }
  return out;
}

// Overwrite acquired lines of a reconstruction with the measured data;
// unacquired lines pass through untouched.
template <typename T>
MultiCoilKspace<T> substitute_acquired(const MultiCoilKspace<T>& recon, const MultiCoilKspace<T>& acquired,
                                       const SamplingMask& mask) {
  recon.check_uniform();
  acquired.check_uniform();
  if (recon.n_coils() != acquired.n_coils() || recon.ny() != acquired.ny() || recon.nx() != acquired.nx()) {
    throw std::invalid_argument("substitute_acquired: shape mismatch");
  }
  if (mask.ny != recon.ny()) { throw std::invalid_argument("substitute_acquired: mask length mismatch"); }
  MultiCoilKspace<T> out = recon;
  for (int c = 0; c < out.n_coils(); ++c) {
    for (int y = 0; y < out.ny(); ++y) {
      if (mask.is_acquired(y)) { std::copy_n(acquired.coils[c].line(y), out.nx(), out.coils[c].line(y)); }
    }
  }
  return out;
}

template <typename T>
MultiCoilKspace<T> scaled(const MultiCoilKspace<T>& k, Cx<T> factor) {
  MultiCoilKspace<T> out = k;
  for (auto& c : out.coils) {
    for (auto& v : c.data) { v *= factor; }
  }
  return out;
}

template <typename T>
T max_abs(const MultiCoilKspace<T>& k) {
  T m = 0;
  for (const auto& c : k.coils) {
    for (const auto& v : c.data) { m = std::max(m, std::abs(v)); }
  }
  return m;
}

}  // namespace spark
