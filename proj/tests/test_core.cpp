#include <catch2/catch.hpp>

#include "helpers.hpp"
#include "spark/core.hpp"
#include "spark/fft.hpp"
#include "spark/sim.hpp"

using namespace spark;

namespace {

template <typename T>
double max_diff(const ComplexGrid<T>& a, const ComplexGrid<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) { m = std::max(m, static_cast<double>(std::abs(a.data[i] - b.data[i]))); }
  return m;
}

}  // namespace

TEST_CASE("fft2c centers the DC of a constant image", "[core][fft]") {
  ComplexGrid<double> img(4, 4);
  for (auto& v : img.data) { v = 1.0; }
  const auto ksp = fft2c(img);
  CHECK(std::abs(ksp.at(2, 2) - Cx<double>(4.0, 0.0)) < 1e-12);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      if (y != 2 || x != 2) { CHECK(std::abs(ksp.at(y, x)) < 1e-12); }
    }
  }
}

TEST_CASE("ifft2c of a centered delta is a constant image", "[core][fft]") {
  ComplexGrid<double> ksp(4, 4);
  ksp.at(2, 2) = 4.0;
  const auto img = ifft2c(ksp);
  for (const auto& v : img.data) { CHECK(std::abs(v - Cx<double>(1.0, 0.0)) < 1e-12); }
}

TEST_CASE("fft2c/ifft2c are mutual inverses", "[core][fft]") {
  Rng rng(11);
  const auto x = oracle::random_grid<double>(64, 64, rng);
  CHECK(max_diff(ifft2c(fft2c(x)), x) < 1e-10);
  CHECK(max_diff(fft2c(ifft2c(x)), x) < 1e-10);
}

TEST_CASE("fft roundtrip holds in single precision", "[core][fft]") {
  Rng rng(12);
  const auto x = oracle::random_grid<float>(64, 64, rng);
  CHECK(max_diff(ifft2c(fft2c(x)), x) < 1e-4);
}

TEST_CASE("ifft2c is linear", "[core][fft]") {
  Rng rng(13);
  const auto x = oracle::random_grid<double>(16, 16, rng);
  const auto y = oracle::random_grid<double>(16, 16, rng);
  const Cx<double> a(0.7, -1.3);
  ComplexGrid<double> combo(16, 16);
  for (std::size_t i = 0; i < combo.size(); ++i) { combo.data[i] = a * x.data[i] + y.data[i]; }
  const auto lhs = ifft2c(combo);
  const auto ix = ifft2c(x);
  const auto iy = ifft2c(y);
  double m = 0;
  for (std::size_t i = 0; i < combo.size(); ++i) { m = std::max(m, std::abs(lhs.data[i] - (a * ix.data[i] + iy.data[i]))); }
  CHECK(m < 1e-10);
}

TEST_CASE("Parseval energy conservation against direct summation", "[core][fft]") {
  Rng rng(14);
  for (int ny : {64, 96}) {  // power of two and mixed radix
    const auto x = oracle::random_grid<double>(ny, 64, rng);
    const auto k = fft2c(x);
    long double ex = 0, ek = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      ex += std::norm(x.data[i]);
      ek += std::norm(k.data[i]);
    }
    CHECK(std::abs(static_cast<double>(ex - ek)) / static_cast<double>(ex) < 1e-10);
  }
}

TEST_CASE("fft2c matches the direct-summation DFT oracle", "[core][fft]") {
  Rng rng(15);
  for (auto [ny, nx] : {std::pair{16, 16}, std::pair{12, 20}, std::pair{9, 8}}) {
    const auto x = oracle::random_grid<double>(ny, nx, rng);
    CHECK(max_diff(fft2c(x), oracle::dft2c(x, false)) < 1e-10);
    CHECK(max_diff(ifft2c(x), oracle::dft2c(x, true)) < 1e-10);
  }
}

TEST_CASE("fft2c rejects non-finite samples", "[core][fft]") {
  ComplexGrid<double> img(4, 4);
  img.at(1, 2) = Cx<double>(std::numeric_limits<double>::quiet_NaN(), 0);
  CHECK_THROWS_WITH(fft2c(img), Catch::Contains("non-finite samples"));
}

TEST_CASE("rss_combine basics", "[core]") {
  MultiCoilKspace<double> one(1, 3, 3);
  for (auto& v : one.coils[0].data) { v = Cx<double>(3, 4); }
  const auto r1 = rss_combine(one);
  for (const auto& v : r1.data) { CHECK(v == Approx(5.0).margin(1e-12)); }

  MultiCoilKspace<double> two(2, 3, 3);
  for (auto& v : two.coils[0].data) { v = 3.0; }
  for (auto& v : two.coils[1].data) { v = 4.0; }
  const auto r2 = rss_combine(two);
  for (const auto& v : r2.data) { CHECK(v == Approx(5.0).margin(1e-12)); }

  MultiCoilKspace<double> empty;
  CHECK_THROWS_AS(rss_combine(empty), std::invalid_argument);
}

TEST_CASE("rss_combine matches the per-pixel loop oracle", "[core]") {
  Rng rng(16);
  const auto stack = oracle::random_stack<double>(8, 12, 10, rng);
  const auto rss = rss_combine(stack);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 10; ++x) {
      double acc = 0;
      for (int c = 0; c < 8; ++c) { acc += std::norm(stack.coils[c].at(y, x)); }
      CHECK(rss.at(y, x) == std::sqrt(acc));
    }
  }
}

TEST_CASE("rmse definition and oracle", "[core]") {
  Rng rng(17);
  RealGrid<double> x(8, 8), y(8, 8);
  for (auto& v : x.data) { v = rng.uniform(0.1, 2.0); }
  CHECK(rmse(x, x) == 0.0);
  RealGrid<double> x2 = x;
  for (auto& v : x2.data) { v *= 2.0; }
  CHECK(rmse(x2, x) == Approx(1.0).margin(1e-12));

  for (auto& v : y.data) { v = rng.uniform(0.1, 2.0); }
  long double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (y.data[i] - x.data[i]) * (y.data[i] - x.data[i]);
    den += x.data[i] * x.data[i];
  }
  CHECK(rmse(y, x) == Approx(std::sqrt(static_cast<double>(num / den))).margin(1e-12));

  RealGrid<double> zero(8, 8);
  CHECK_THROWS_WITH(rmse(x, zero), Catch::Contains("degenerate reference"));
}

TEST_CASE("crop_acs extracts the centered block", "[core]") {
  Rng rng(18);
  const auto ksp = oracle::random_stack<double>(2, 320, 320, rng);
  const auto acs = AcsSpec::centered(320, 40);
  CHECK(acs.start == 140);
  const auto crop = crop_acs(ksp, acs);
  CHECK(crop.ny() == 40);
  CHECK(crop.nx() == 320);
  for (int c = 0; c < 2; ++c) {
    for (int y = 0; y < 40; ++y) {
      for (int x = 0; x < 320; x += 17) { CHECK(crop.coils[c].at(y, x) == ksp.coils[c].at(140 + y, x)); }
    }
  }

  const auto whole = crop_acs(ksp, AcsSpec::centered(320, 320));
  CHECK(max_diff(whole.coils[0], ksp.coils[0]) == 0.0);

  MultiCoilKspace<double> zeros(2, 16, 8);
  const auto zc = crop_acs(zeros, AcsSpec::centered(16, 4));
  for (const auto& v : zc.coils[0].data) { CHECK(v == Cx<double>(0, 0)); }

  CHECK_THROWS_AS(crop_acs(ksp, AcsSpec{300, 40}), std::invalid_argument);
}

TEST_CASE("crop_acs commutes with linear combinations", "[core]") {
  Rng rng(19);
  const auto a = oracle::random_stack<double>(3, 24, 16, rng);
  const auto b = oracle::random_stack<double>(3, 24, 16, rng);
  const Cx<double> alpha(0.3, 1.1);
  const auto acs = AcsSpec::centered(24, 10);
  MultiCoilKspace<double> combo = a;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < combo.coils[c].size(); ++i) {
      combo.coils[c].data[i] = alpha * a.coils[c].data[i] + b.coils[c].data[i];
    }
  }
  const auto lhs = crop_acs(combo, acs);
  const auto ca = crop_acs(a, acs);
  const auto cb = crop_acs(b, acs);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < lhs.coils[c].size(); ++i) {
      CHECK(lhs.coils[c].data[i] == alpha * ca.coils[c].data[i] + cb.coils[c].data[i]);
    }
  }
}

TEST_CASE("apply_mask zeroes exactly the unacquired lines", "[core]") {
  Rng rng(20);
  const auto ksp = oracle::random_stack<double>(2, 320, 8, rng);
  const auto mask = make_uniform_mask(320, 4, 40);

  const auto und = apply_mask(ksp, mask);
  int nonzero_lines = 0;
  for (int y = 0; y < 320; ++y) {
    bool nz = false;
    for (int x = 0; x < 8; ++x) { nz |= und.coils[0].at(y, x) != Cx<double>(0, 0); }
    if (nz) {
      ++nonzero_lines;
      for (int x = 0; x < 8; ++x) { CHECK(und.coils[0].at(y, x) == ksp.coils[0].at(y, x)); }
    }
  }
  // enumeration oracle: lattice plus ACS minus double-counted lines
  int expected = 0;
  for (int y = 0; y < 320; ++y) {
    if (y % 4 == 0 || (y >= 140 && y < 180)) { ++expected; }
  }
  CHECK(expected == 110);
  CHECK(nonzero_lines == expected);
  CHECK(mask.acquired_count() == expected);

  const auto full_mask = make_uniform_mask(320, 1, 0);
  const auto same = apply_mask(ksp, full_mask);
  for (int c = 0; c < 2; ++c) { CHECK(max_diff(same.coils[c], ksp.coils[c]) == 0.0); }

  const auto twice = apply_mask(und, mask);
  for (int c = 0; c < 2; ++c) { CHECK(max_diff(twice.coils[c], und.coils[c]) == 0.0); }

  MultiCoilKspace<double> zeros(2, 320, 8);
  const auto zm = apply_mask(zeros, mask);
  for (const auto& v : zm.coils[0].data) { CHECK(v == Cx<double>(0, 0)); }
}

TEST_CASE("substitute_acquired restores measured lines", "[core]") {
  Rng rng(21);
  const auto k = oracle::random_stack<double>(3, 32, 8, rng);
  const auto recon = oracle::random_stack<double>(3, 32, 8, rng);
  const auto mask = make_uniform_mask(32, 4, 8);

  const auto self = substitute_acquired(k, k, mask);
  for (int c = 0; c < 3; ++c) { CHECK(max_diff(self.coils[c], k.coils[c]) == 0.0); }

  const auto full_mask = make_uniform_mask(32, 1, 0);
  const auto all = substitute_acquired(recon, k, full_mask);
  for (int c = 0; c < 3; ++c) { CHECK(max_diff(all.coils[c], k.coils[c]) == 0.0); }

  const auto out = substitute_acquired(recon, k, mask);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 32; ++y) {
      const bool acq = (y % 4 == 0) || (y >= 12 && y < 20);  // line-set enumeration
      REQUIRE(acq == mask.is_acquired(y));
      for (int x = 0; x < 8; ++x) {
        if (acq) {
          CHECK(out.coils[c].at(y, x) == k.coils[c].at(y, x));
        } else {
          CHECK(out.coils[c].at(y, x) == recon.coils[c].at(y, x));
        }
      }
    }
  }

  const auto und = apply_mask(k, mask);
  const auto restored = substitute_acquired(und, k, mask);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 32; ++y) {
      if (mask.is_acquired(y)) {
        for (int x = 0; x < 8; ++x) { CHECK(restored.coils[c].at(y, x) == k.coils[c].at(y, x)); }
      }
    }
  }
}
