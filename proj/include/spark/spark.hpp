// SPARK residual correction. An initial reconstruction is run without
// substituting the measured lines back, so its error is visible on the ACS
// rows; per coil and per real/imaginary part a network is trained to map the
// full reconstructed k-space (all coils, 2 n_c channels) to that error, then
// evaluated over the whole grid as an additive correction. Acquired data is
// substituted into the corrected result by default.
#pragma once

#include "spark/core.hpp"
#include "spark/grappa.hpp"
#include "spark/net.hpp"
#include "spark/pool.hpp"
#include "spark/vcsvc.hpp"

namespace spark {

enum class Part { real_part, imag_part };

enum class InitialMethod { grappa, vc_grappa, svc_grappa };

inline const char* to_string(InitialMethod m) {
  switch (m) {
    case InitialMethod::grappa: return "grappa";
    case InitialMethod::vc_grappa: return "vc-grappa";
    case InitialMethod::svc_grappa: return "svc-grappa";
  }
  return "?";
}

struct SparkConfig {
  int epochs = 200;
  double lr = 1e-3;
  double lr_final = -1;
  int trunk_width = 16;          // residual-trunk channel count
  std::array<int, 2> head_widths{8, 4};
  std::uint64_t seed = 1;
  InitialMethod initial = InitialMethod::grappa;
  bool substitute = true;        // substitute measured lines into the final output
  KernelGeometry geometry{};     // geometry of the initial reconstruction (r must match the mask)
  double lambda = 1e-4;          // Tikhonov factor of the initial reconstruction

  void validate() const {
    if (epochs < 1) { throw std::invalid_argument("spark config: epochs must be >= 1"); }
    if (trunk_width < 1 || head_widths[0] < 1 || head_widths[1] < 1) {
      throw std::invalid_argument("spark config: widths must be >= 1");
    }
  }
};

// One residual-trunk network per (coil, part): conv + ReLU into a residual
// block, then a head that tapers the channel count down to one.
template <typename T>
Network<T> spark_network(int n_c, const SparkConfig& cfg) {
  Network<T> net(2 * n_c);
  net.conv(cfg.trunk_width, 3, 3).relu();
  net.residual_begin().conv(cfg.trunk_width, 3, 3).relu().conv(cfg.trunk_width, 3, 3).residual_end();
  net.conv(cfg.head_widths[0], 3, 3).relu().conv(cfg.head_widths[1], 3, 3).relu().conv(1, 3, 3);
  return net;
}

template <typename T>
struct SparkModel {
  T scale = 1;  // inputs and targets were multiplied by this during training
  std::uint64_t seed = 0;
  InitialMethod initial = InitialMethod::grappa;
  std::vector<Network<T>> nets;  // [2c + part], 2 n_c in total
};

namespace detail {

// all-coil k-space as interleaved real/imag channels, scaled
template <typename T>
Tensor3<T> spark_input(const MultiCoilKspace<T>& ksp, T scale) {
  const int n_c = ksp.n_coils(), ny = ksp.ny(), nx = ksp.nx();
  Tensor3<T> in(2 * n_c, ny, nx);
  for (int c = 0; c < n_c; ++c) {
    for (int y = 0; y < ny; ++y) {
      const Cx<T>* src = ksp.coils[c].line(y);
      T* re = in.plane(2 * c) + static_cast<std::size_t>(y) * nx;
      T* im = in.plane(2 * c + 1) + static_cast<std::size_t>(y) * nx;
      for (int x = 0; x < nx; ++x) {
        re[x] = src[x].real() * scale;
        im[x] = src[x].imag() * scale;
      }
    }
  }
  return in;
}

}  // namespace detail

// d_c on the ACS block: measured minus reconstruction-without-substitution,
// one real part at a time.
template <typename T>
RealGrid<T> build_residual_target(const MultiCoilKspace<T>& recon_no_sub, const MultiCoilKspace<T>& measured,
                                  const AcsSpec& acs, int coil, Part part) {
  recon_no_sub.check_uniform();
  if (recon_no_sub.ny() != measured.ny() || recon_no_sub.nx() != measured.nx() ||
      recon_no_sub.n_coils() != measured.n_coils()) {
    throw std::invalid_argument("build_residual_target: shape mismatch");
  }
  if (coil < 0 || coil >= recon_no_sub.n_coils()) { throw std::invalid_argument("build_residual_target: coil index"); }
  if (acs.start < 0 || acs.count < 1 || acs.start + acs.count > recon_no_sub.ny()) {
    throw std::invalid_argument("build_residual_target: ACS out of bounds");
  }
  const int nx = recon_no_sub.nx();
  RealGrid<T> out(acs.count, nx);
  for (int y = 0; y < acs.count; ++y) {
    const Cx<T>* m = measured.coils[coil].line(acs.start + y);
    const Cx<T>* k = recon_no_sub.coils[coil].line(acs.start + y);
    for (int x = 0; x < nx; ++x) {
      const Cx<T> d = m[x] - k[x];
      out.at(y, x) = (part == Part::real_part) ? d.real() : d.imag();
    }
  }
  return out;
}

// Train the 2 n_c correction networks. Inputs are the full reconstructed
// grids scaled into [-1, 1]; the loss sees only the ACS rows. PRNG stream
// 2c + part makes the result independent of training order.
template <typename T>
SparkModel<T> train_spark(const MultiCoilKspace<T>& recon_no_sub, const MultiCoilKspace<T>& measured,
                          const AcsSpec& acs, const SparkConfig& cfg) {
  cfg.validate();
  recon_no_sub.check_uniform();
  const int n_c = recon_no_sub.n_coils();
  const int ny = recon_no_sub.ny(), nx = recon_no_sub.nx();

  SparkModel<T> model;
  model.seed = cfg.seed;
  model.initial = cfg.initial;
  const T peak = max_abs(recon_no_sub);
  model.scale = peak > 0 ? T(1) / peak : T(1);
  const Tensor3<T> input = detail::spark_input(recon_no_sub, model.scale);
  const CropRows crop{acs.start, acs.count};

  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.lr = cfg.lr;
  tc.lr_final = cfg.lr_final;

  model.nets.assign(2 * n_c, spark_network<T>(n_c, cfg));
  parallel_for(2 * n_c, [&](int idx) {
    const int c = idx / 2;
    const Part part = (idx % 2 == 0) ? Part::real_part : Part::imag_part;
    Rng rng(cfg.seed, static_cast<std::uint64_t>(idx));
    model.nets[idx].init_weights(rng);
    const RealGrid<T> res = build_residual_target(recon_no_sub, measured, acs, c, part);
    Tensor3<T> target(1, ny, nx);
    for (int y = 0; y < acs.count; ++y) {
      T* dst = target.plane(0) + static_cast<std::size_t>(acs.start + y) * nx;
      for (int x = 0; x < nx; ++x) { dst[x] = res.at(y, x) * model.scale; }
    }
    train(model.nets[idx], input, target, crop, tc);
  });
  return model;
}

// Evaluate each coil's correction over the full grid, add it to the
// reconstruction, and (by default) substitute the measured lines back.
template <typename T>
MultiCoilKspace<T> apply_correction(const MultiCoilKspace<T>& recon, const SparkModel<T>& model,
                                    const MultiCoilKspace<T>& measured, const SamplingMask& mask,
                                    bool substitute = true) {
  recon.check_uniform();
  const int n_c = recon.n_coils();
  if (static_cast<int>(model.nets.size()) != 2 * n_c) { throw std::invalid_argument("apply_correction: model size mismatch"); }
  const Tensor3<T> input = detail::spark_input(recon, model.scale);
  const T inv_scale = T(1) / model.scale;
  MultiCoilKspace<T> out = recon;
  parallel_for(n_c, [&](int c) {
    ForwardCache<T> cache;
    const Tensor3<T> re = forward(model.nets[2 * c], input, cache);
    const Tensor3<T>& im = forward(model.nets[2 * c + 1], input, cache);
    for (int y = 0; y < recon.ny(); ++y) {
      const T* rrow = re.plane(0) + static_cast<std::size_t>(y) * recon.nx();
      const T* irow = im.plane(0) + static_cast<std::size_t>(y) * recon.nx();
      Cx<T>* dst = out.coils[c].line(y);
      for (int x = 0; x < recon.nx(); ++x) { dst[x] += Cx<T>(rrow[x] * inv_scale, irow[x] * inv_scale); }
    }
  });
  detail::ensure_finite(out, "apply_correction");
  if (substitute) { out = substitute_acquired(out, measured, mask); }
  return out;
}

// Run the configured initial method without substitution so the ACS error is
// observable, train, correct, substitute.
template <typename T>
MultiCoilKspace<T> spark_reconstruct(const MultiCoilKspace<T>& und, const SamplingMask& mask, const SparkConfig& cfg) {
  cfg.validate();
  if (mask.r == 1) { return und; }
  if (cfg.geometry.r != mask.r) { throw std::invalid_argument("spark_reconstruct: geometry/mask mismatch"); }
  MultiCoilKspace<T> recon_ns;
  switch (cfg.initial) {
    case InitialMethod::grappa:
      recon_ns = grappa_reconstruct(und, mask, cfg.geometry, cfg.lambda, false);
      break;
    case InitialMethod::vc_grappa:
      recon_ns = vc_grappa_reconstruct(und, mask, cfg.geometry, cfg.lambda);
      break;
    case InitialMethod::svc_grappa:
      recon_ns = svc_grappa_reconstruct(und, mask, cfg.geometry, cfg.lambda, false);
      break;
  }
  const SparkModel<T> model = train_spark(recon_ns, und, mask.acs, cfg);
  return apply_correction(recon_ns, model, und, mask, cfg.substitute);
}

}  // namespace spark
