// Dense Hermitian solver used by kernel calibration: Cholesky with full
// diagonal pivoting, which is rank-revealing for positive semi-definite
// systems. Systems here are tiny (a few hundred unknowns), so a plain O(n^3)
// factorization is plenty.
#pragma once

#include <limits>

#include "spark/core.hpp"

namespace spark {

// Solves H X = B in place for Hermitian positive semi-definite H (row-major,
// n x n) and nrhs right-hand sides (B row-major, n x nrhs). Throws
// "singular calibration" when a pivot drops below rel_tol times the largest
// initial diagonal entry.
template <typename T>
void solve_hermitian_psd(int n, std::vector<Cx<T>>& h, int nrhs, std::vector<Cx<T>>& b,
                         double rel_tol = -1.0) {
  if (rel_tol < 0) { rel_tol = 64.0 * n * std::numeric_limits<T>::epsilon(); }
  auto at = [&](int i, int j) -> Cx<T>& { return h[static_cast<std::size_t>(i) * n + j]; };
  auto rhs = [&](int i, int j) -> Cx<T>& { return b[static_cast<std::size_t>(i) * nrhs + j]; };

  double d0 = 0;
  for (int i = 0; i < n; ++i) { d0 = std::max(d0, static_cast<double>(at(i, i).real())); }
  if (d0 <= 0) { throw std::runtime_error("singular calibration"); }

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) { perm[i] = i; }

  // Left in full storage so symmetric pivot swaps stay simple; the factor L
  // lives in the lower triangle, the upper triangle is scratch after step k.
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int j = k + 1; j < n; ++j) {
      if (at(j, j).real() > at(p, p).real()) { p = j; }
    }
    if (static_cast<double>(at(p, p).real()) <= rel_tol * d0) { throw std::runtime_error("singular calibration"); }
    if (p != k) {
      for (int j = 0; j < n; ++j) { std::swap(at(k, j), at(p, j)); }
      for (int i = 0; i < n; ++i) { std::swap(at(i, k), at(i, p)); }
      for (int j = 0; j < nrhs; ++j) { std::swap(rhs(k, j), rhs(p, j)); }
      std::swap(perm[k], perm[p]);
    }
    const T lkk = std::sqrt(at(k, k).real());
    at(k, k) = Cx<T>(lkk, 0);
    const T inv = T(1) / lkk;
    for (int i = k + 1; i < n; ++i) { at(i, k) *= inv; }
    for (int j = k + 1; j < n; ++j) {
      const Cx<T> ljk = at(j, k);
      Cx<T>* hrow = h.data() + static_cast<std::size_t>(j) * n;
      for (int i = k + 1; i < n; ++i) { hrow[i] -= ljk * std::conj(at(i, k)); }
    }
  }

  // forward substitution L y = P b
  for (int j = 0; j < nrhs; ++j) {
    for (int i = 0; i < n; ++i) {
      Cx<T> sum = rhs(i, j);
      for (int k = 0; k < i; ++k) { sum -= at(i, k) * rhs(k, j); }
      rhs(i, j) = sum / at(i, i).real();
    }
  }
  // back substitution L^H z = y
  for (int j = 0; j < nrhs; ++j) {
    for (int i = n - 1; i >= 0; --i) {
      Cx<T> sum = rhs(i, j);
      for (int k = i + 1; k < n; ++k) { sum -= std::conj(at(k, i)) * rhs(k, j); }
      rhs(i, j) = sum / at(i, i).real();
    }
  }
  // undo the permutation
  std::vector<Cx<T>> x(static_cast<std::size_t>(n) * nrhs);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < nrhs; ++j) { x[static_cast<std::size_t>(perm[i]) * nrhs + j] = rhs(i, j); }
  }
  b = std::move(x);
}

}  // namespace spark
