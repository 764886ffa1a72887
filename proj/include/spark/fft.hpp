// Centered 2D Fourier transforms with orthonormal scaling. K-space is stored
// fftshifted (DC at floor(ny/2), floor(nx/2)); fft2c/ifft2c fold the shifts
// into their index maps so callers never handle them. The 1D engine is an
// iterative radix-2 transform with a Bluestein fallback for arbitrary lengths,
// so non-power-of-two matrix sizes (e.g. 320, 96) work unchanged.
#pragma once

#include <numbers>

#include "spark/core.hpp"

namespace spark {
namespace detail {

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) { p <<= 1; }
  return p;
}

// In-place forward DFT (no scaling), size must be a power of two.
template <typename T>
void fft_radix2(Cx<T>* a, int n) {
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) { j ^= bit; }
    j ^= bit;
    if (i < j) { std::swap(a[i], a[j]); }
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / len;
    for (int i = 0; i < n; i += len) {
      for (int j = 0; j < len / 2; ++j) {
        const Cx<T> w(static_cast<T>(std::cos(ang * j)), static_cast<T>(std::sin(ang * j)));
        Cx<T> u = a[i + j];
        Cx<T> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
}

// Forward DFT of arbitrary length via the chirp-z (Bluestein) identity.
// Chirp angles are reduced mod 2n before multiplying by pi/n to keep the
// phase accurate for large indices.
template <typename T>
void fft_bluestein(Cx<T>* a, int n) {
  const int m = next_pow2(2 * n - 1);
  std::vector<Cx<T>> chirp(n);
  for (int k = 0; k < n; ++k) {
    const long long k2 = (static_cast<long long>(k) * k) % (2LL * n);
    const double ang = -std::numbers::pi * static_cast<double>(k2) / n;
    chirp[k] = Cx<T>(static_cast<T>(std::cos(ang)), static_cast<T>(std::sin(ang)));
  }
  std::vector<Cx<T>> u(m, Cx<T>(0)), v(m, Cx<T>(0));
  for (int k = 0; k < n; ++k) { u[k] = a[k] * chirp[k]; }
  v[0] = std::conj(chirp[0]);
  for (int k = 1; k < n; ++k) { v[k] = v[m - k] = std::conj(chirp[k]); }
  fft_radix2(u.data(), m);
  fft_radix2(v.data(), m);
  for (int k = 0; k < m; ++k) { u[k] *= v[k]; }
  // inverse FFT of u via conjugation
  for (auto& x : u) { x = std::conj(x); }
  fft_radix2(u.data(), m);
  const T inv_m = T(1) / static_cast<T>(m);
  for (int k = 0; k < n; ++k) { a[k] = std::conj(u[k]) * inv_m * chirp[k]; }
}

template <typename T>
void fft_1d(Cx<T>* a, int n, bool inverse) {
  if (n == 1) { return; }
  if (inverse) {
    for (int i = 0; i < n; ++i) { a[i] = std::conj(a[i]); }
  }
  if (is_pow2(n)) {
    fft_radix2(a, n);
  } else {
    fft_bluestein(a, n);
  }
  if (inverse) {
    const T inv_n = T(1) / static_cast<T>(n);
    for (int i = 0; i < n; ++i) { a[i] = std::conj(a[i]) * inv_n; }
  }
}

// Unscaled 2D DFT with centered (fftshifted) input and output layouts.
template <typename T>
ComplexGrid<T> dft2_centered(const ComplexGrid<T>& in, bool inverse) {
  const int ny = in.ny, nx = in.nx;
  const int cy = ny / 2, cx = nx / 2;
  ComplexGrid<T> work(ny, nx);
  // ifftshift both axes while loading
  for (int y = 0; y < ny; ++y) {
    const Cx<T>* src = in.line((y + cy) % ny);
    Cx<T>* dst = work.line(y);
    for (int x = 0; x < nx; ++x) { dst[x] = src[(x + cx) % nx]; }
  }
  for (int y = 0; y < ny; ++y) { fft_1d(work.line(y), nx, inverse); }
  std::vector<Cx<T>> col(ny);
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) { col[y] = work.at(y, x); }
    fft_1d(col.data(), ny, inverse);
    for (int y = 0; y < ny; ++y) { work.at(y, x) = col[y]; }
  }
  // fftshift both axes while storing
  ComplexGrid<T> out(ny, nx);
  for (int y = 0; y < ny; ++y) {
    const Cx<T>* src = work.line(y);
    Cx<T>* dst = out.line((y + cy) % ny);
    for (int x = 0; x < nx; ++x) { dst[(x + cx) % nx] = src[x]; }
  }
  return out;
}

}  // namespace detail

// Image -> centered k-space, orthonormal (divides by sqrt(ny*nx)).
template <typename T>
ComplexGrid<T> fft2c(const ComplexGrid<T>& img) {
  if (img.ny < 1 || img.nx < 1) { throw std::invalid_argument("fft2c: empty grid"); }
  detail::ensure_finite(img, "fft2c");
  ComplexGrid<T> out = detail::dft2_centered(img, false);
  const T scale = T(1) / std::sqrt(static_cast<T>(img.ny) * static_cast<T>(img.nx));
  for (auto& v : out.data) { v *= scale; }
  return out;
}

// Centered k-space -> image; exact inverse of fft2c.
template <typename T>
ComplexGrid<T> ifft2c(const ComplexGrid<T>& ksp) {
  if (ksp.ny < 1 || ksp.nx < 1) { throw std::invalid_argument("ifft2c: empty grid"); }
  detail::ensure_finite(ksp, "ifft2c");
  ComplexGrid<T> out = detail::dft2_centered(ksp, true);
  const T scale = std::sqrt(static_cast<T>(ksp.ny) * static_cast<T>(ksp.nx));
  for (auto& v : out.data) { v *= scale; }
  return out;
}

template <typename T>
MultiCoilKspace<T> fft2c(const MultiCoilKspace<T>& imgs) {
  MultiCoilKspace<T> out;
  out.coils.reserve(imgs.coils.size());
  for (const auto& c : imgs.coils) { out.coils.push_back(fft2c(c)); }
  return out;
}

template <typename T>
MultiCoilKspace<T> ifft2c(const MultiCoilKspace<T>& ksp) {
  MultiCoilKspace<T> out;
  out.coils.reserve(ksp.coils.size());
  for (const auto& c : ksp.coils) { out.coils.push_back(ifft2c(c)); }
  return out;
}

}  // namespace spark
