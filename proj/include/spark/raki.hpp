// Scan-specific nonlinear k-space interpolation: one small CNN per coil,
// trained on the ACS, predicts every missing line offset from the acquired
// lattice lines. The networks see the R-decimated acquired-line grid (rows =
// lattice lines), so plain convolutions stand in for dilated ones. Serves as
// the data-hungry comparator that degrades when the ACS shrinks.
#pragma once

#include "spark/core.hpp"
#include "spark/net.hpp"
#include "spark/pool.hpp"

namespace spark {

struct RakiConfig {
  int epochs = 300;
  double lr = 1e-3;
  double lr_final = -1;
  bool relu = true;  // ReLU-free configs make the model purely linear
  int hidden1 = 32;
  int hidden2 = 8;
};

template <typename T>
struct RakiModel {
  int r = 0;
  int n_c = 0;
  T scale = 1;
  std::vector<Network<T>> nets;  // one per target coil
};

// conv(2n_c -> hidden1, 3x5) / ReLU / conv(hidden1 -> hidden2, 1x1) / ReLU /
// conv(hidden2 -> 2(r-1), 3x3). The ReLU-free configuration spans exactly
// the single 5x7 convolution the stack composes to, so it is built as that
// convolution directly (a product of linear layers trains much worse than
// the equivalent convex problem).
template <typename T>
Network<T> raki_network(int n_c, int r, const RakiConfig& cfg) {
  Network<T> net(2 * n_c);
  if (!cfg.relu) {
    net.conv(2 * (r - 1), 5, 7);
    return net;
  }
  net.conv(cfg.hidden1, 3, 5);
  net.relu();
  net.conv(cfg.hidden2, 1, 1);
  net.relu();
  net.conv(2 * (r - 1), 3, 3);
  return net;
}

namespace detail {

// Decimated rows whose complete missing block lies inside the ACS; these are
// the rows the training loss sees.
struct RakiAcsRows {
  int bt_lo, bt_hi;
};

inline RakiAcsRows raki_acs_rows(const SamplingMask& mask) {
  const int r = mask.r;
  const int start = mask.acs.start;
  const int last = mask.acs.start + mask.acs.count - 1;
  RakiAcsRows rows{};
  rows.bt_lo = (start + r - 2) / r;  // smallest b with b*r + 1 >= start
  rows.bt_hi = (last - (r - 1)) / r;
  return rows;
}

// interleaved real/imag channels of the lattice lines b*r, b in [b0, b0+nb)
template <typename T>
Tensor3<T> raki_input(const MultiCoilKspace<T>& ksp, int r, int b0, int nb, T scale) {
  const int n_c = ksp.n_coils(), nx = ksp.nx();
  Tensor3<T> in(2 * n_c, nb, nx);
  for (int c = 0; c < n_c; ++c) {
    for (int b = 0; b < nb; ++b) {
      const Cx<T>* src = ksp.coils[c].line((b0 + b) * r);
      T* re = in.plane(2 * c) + static_cast<std::size_t>(b) * nx;
      T* im = in.plane(2 * c + 1) + static_cast<std::size_t>(b) * nx;
      for (int x = 0; x < nx; ++x) {
        re[x] = src[x].real() * scale;
        im[x] = src[x].imag() * scale;
      }
    }
  }
  return in;
}

}  // namespace detail

// Train one network per coil. The networks see the full decimated
// acquired-line grid (every lattice line is measured, and the convolution
// context then matches deployment); the loss is restricted to the rows whose
// missing block lies inside the ACS. Requires at least two such rows.
template <typename T>
RakiModel<T> train_raki(const MultiCoilKspace<T>& und, const SamplingMask& mask, const RakiConfig& cfg,
                        std::uint64_t seed) {
  und.check_uniform();
  if (mask.ny != und.ny()) { throw std::invalid_argument("train_raki: mask length mismatch"); }
  if (mask.r < 2) { throw std::invalid_argument("train_raki: r must be >= 2"); }
  if (mask.ny % mask.r != 0) { throw std::invalid_argument("train_raki: grid not divisible by R"); }
  const int r = mask.r;
  const int n_c = und.n_coils();
  const int nx = und.nx();
  const int nb = und.ny() / r;
  const auto rows = detail::raki_acs_rows(mask);
  const int usable = rows.bt_hi - rows.bt_lo + 1;
  if (usable < 2) { throw std::runtime_error("insufficient calibration data"); }

  RakiModel<T> model;
  model.r = r;
  model.n_c = n_c;
  const T peak = max_abs(und);
  model.scale = peak > 0 ? T(1) / peak : T(1);
  const Tensor3<T> input = detail::raki_input(und, r, 0, nb, model.scale);
  const CropRows crop{rows.bt_lo, usable};

  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.lr = cfg.lr;
  tc.lr_final = cfg.lr_final;

  model.nets.assign(n_c, raki_network<T>(n_c, r, cfg));
  parallel_for(n_c, [&](int c) {
    Rng rng(seed, static_cast<std::uint64_t>(c));
    model.nets[c].init_weights(rng);
    Tensor3<T> target(2 * (r - 1), nb, nx);
    for (int b = rows.bt_lo; b <= rows.bt_hi; ++b) {
      for (int d = 1; d < r; ++d) {
        const Cx<T>* src = und.coils[c].line(b * r + d);
        T* re = target.plane(2 * (d - 1)) + static_cast<std::size_t>(b) * nx;
        T* im = target.plane(2 * (d - 1) + 1) + static_cast<std::size_t>(b) * nx;
        for (int x = 0; x < nx; ++x) {
          re[x] = src[x].real() * model.scale;
          im[x] = src[x].imag() * model.scale;
        }
      }
    }
    train(model.nets[c], input, target, crop, tc);
  });
  return model;
}

// Predict all missing offsets from the full acquired lattice, pass acquired
// lattice lines through, then substitute the measured data back.
template <typename T>
MultiCoilKspace<T> raki_reconstruct(const MultiCoilKspace<T>& und, const SamplingMask& mask, const RakiModel<T>& model) {
  und.check_uniform();
  if (model.r != mask.r) { throw std::invalid_argument("raki_reconstruct: model/mask mismatch"); }
  if (model.n_c != und.n_coils()) { throw std::invalid_argument("raki_reconstruct: coil count mismatch"); }
  if (mask.ny % mask.r != 0) { throw std::invalid_argument("raki_reconstruct: grid not divisible by R"); }
  const int r = mask.r, ny = und.ny(), nx = und.nx(), n_c = und.n_coils();
  const int nb = ny / r;
  const Tensor3<T> input = detail::raki_input(und, r, 0, nb, model.scale);
  const T inv_scale = T(1) / model.scale;

  MultiCoilKspace<T> recon(n_c, ny, nx);
  parallel_for(n_c, [&](int c) {
    for (int b = 0; b < nb; ++b) { std::copy_n(und.coils[c].line(b * r), nx, recon.coils[c].line(b * r)); }
    ForwardCache<T> cache;
    const Tensor3<T>& out = forward(model.nets[c], input, cache);
    for (int b = 0; b < nb; ++b) {
      for (int d = 1; d < r; ++d) {
        const T* re = out.plane(2 * (d - 1)) + static_cast<std::size_t>(b) * nx;
        const T* im = out.plane(2 * (d - 1) + 1) + static_cast<std::size_t>(b) * nx;
        Cx<T>* dst = recon.coils[c].line(b * r + d);
        for (int x = 0; x < nx; ++x) { dst[x] = Cx<T>(re[x] * inv_scale, im[x] * inv_scale); }
      }
    }
  });
  return substitute_acquired(recon, und, mask);
}

}  // namespace spark
