// Minimal deterministic convolutional-network engine: same-padded 2D
// convolutions over multi-channel real grids, ReLU, one level of residual
// skips, MSE loss restricted to a row crop, exact reverse-mode gradients and
// Adam. Just enough vocabulary for the k-space correction and interpolation
// networks; no external ML dependency.
#pragma once

#include <functional>
#include <numeric>

#include "spark/core.hpp"
#include "spark/rng.hpp"

namespace spark {

// Channel-major real tensor (c planes of h x w).
template <typename T>
struct Tensor3 {
  int c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor3() = default;
  Tensor3(int c_, int h_, int w_) { resize(c_, h_, w_); }

  void resize(int c_, int h_, int w_) {
    c = c_;
    h = h_;
    w = w_;
    v.assign(static_cast<std::size_t>(c_) * h_ * w_, T(0));
  }
  T* plane(int ci) { return v.data() + static_cast<std::size_t>(ci) * h * w; }
  const T* plane(int ci) const { return v.data() + static_cast<std::size_t>(ci) * h * w; }
  T& at(int ci, int y, int x) { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
  const T& at(int ci, int y, int x) const { return v[(static_cast<std::size_t>(ci) * h + y) * w + x]; }
  bool same_shape(const Tensor3& o) const { return c == o.c && h == o.h && w == o.w; }
};

template <typename T>
struct ConvLayer {
  int in_c = 0, out_c = 0, kh = 1, kw = 1;
  std::vector<T> weights;  // [out][in][kh][kw]
  std::vector<T> bias;     // [out]

  std::size_t w_index(int o, int i, int dy, int dx) const {
    return ((static_cast<std::size_t>(o) * in_c + i) * kh + dy) * kw + dx;
  }
};

struct NetOp {
  enum class Kind { conv, relu, res_begin, res_end };
  Kind kind;
  int conv_id = -1;   // for conv ops
  int partner = -1;   // for res_end: op index of the matching res_begin
};

template <typename T>
class Network {
 public:
  explicit Network(int in_channels) : in_channels_(in_channels), current_c_(in_channels) {
    if (in_channels < 1) { throw std::invalid_argument("network: input channels must be >= 1"); }
  }

  Network& conv(int out_c, int kh, int kw) {
    if (kh % 2 != 1 || kw % 2 != 1) { throw std::invalid_argument("network: conv kernel dims must be odd"); }
    if (out_c < 1) { throw std::invalid_argument("network: conv out channels must be >= 1"); }
    ConvLayer<T> layer;
    layer.in_c = current_c_;
    layer.out_c = out_c;
    layer.kh = kh;
    layer.kw = kw;
    layer.weights.assign(static_cast<std::size_t>(out_c) * current_c_ * kh * kw, T(0));
    layer.bias.assign(out_c, T(0));
    ops_.push_back({NetOp::Kind::conv, static_cast<int>(convs_.size()), -1});
    convs_.push_back(std::move(layer));
    current_c_ = out_c;
    return *this;
  }

  Network& relu() {
    ops_.push_back({NetOp::Kind::relu, -1, -1});
    return *this;
  }

  Network& residual_begin() {
    begin_stack_.push_back({static_cast<int>(ops_.size()), current_c_});
    ops_.push_back({NetOp::Kind::res_begin, -1, -1});
    return *this;
  }

  Network& residual_end() {
    if (begin_stack_.empty()) { throw std::invalid_argument("network: residual_end without residual_begin"); }
    const auto [begin_op, begin_c] = begin_stack_.back();
    begin_stack_.pop_back();
    if (begin_c != current_c_) { throw std::invalid_argument("network: residual block changes channel count"); }
    ops_.push_back({NetOp::Kind::res_end, -1, begin_op});
    return *this;
  }

  void finish() const {
    if (!begin_stack_.empty()) { throw std::invalid_argument("network: unclosed residual block"); }
  }

  int in_channels() const { return in_channels_; }
  int out_channels() const { return current_c_; }
  const std::vector<NetOp>& ops() const { return ops_; }
  std::vector<ConvLayer<T>>& convs() { return convs_; }
  const std::vector<ConvLayer<T>>& convs() const { return convs_; }

  // Xavier-uniform init per layer; the final conv stays at zero when
  // zero_last is set so an untrained network is the identity correction.
  void init_weights(Rng& rng, bool zero_last = true) {
    finish();
    for (std::size_t li = 0; li < convs_.size(); ++li) {
      auto& layer = convs_[li];
      if (zero_last && li + 1 == convs_.size()) {
        std::fill(layer.weights.begin(), layer.weights.end(), T(0));
        std::fill(layer.bias.begin(), layer.bias.end(), T(0));
        continue;
      }
      const double fan_in = static_cast<double>(layer.in_c) * layer.kh * layer.kw;
      const double fan_out = static_cast<double>(layer.out_c) * layer.kh * layer.kw;
      const double a = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& w : layer.weights) { w = static_cast<T>(rng.uniform(-a, a)); }
      std::fill(layer.bias.begin(), layer.bias.end(), T(0));
    }
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : convs_) { n += l.weights.size() + l.bias.size(); }
    return n;
  }

  T& param(std::size_t idx) {
    for (auto& l : convs_) {
      if (idx < l.weights.size()) { return l.weights[idx]; }
      idx -= l.weights.size();
      if (idx < l.bias.size()) { return l.bias[idx]; }
      idx -= l.bias.size();
    }
    throw std::out_of_range("network: parameter index");
  }

  std::vector<T> snapshot_params() const {
    std::vector<T> out;
    out.reserve(param_count());
    for (const auto& l : convs_) {
      out.insert(out.end(), l.weights.begin(), l.weights.end());
      out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
    return out;
  }

  void restore_params(const std::vector<T>& snap) {
    std::size_t i = 0;
    for (auto& l : convs_) {
      std::copy_n(snap.begin() + i, l.weights.size(), l.weights.begin());
      i += l.weights.size();
      std::copy_n(snap.begin() + i, l.bias.size(), l.bias.begin());
      i += l.bias.size();
    }
  }

 private:
  int in_channels_;
  int current_c_;
  std::vector<NetOp> ops_;
  std::vector<ConvLayer<T>> convs_;
  std::vector<std::pair<int, int>> begin_stack_;
};

namespace detail {

template <typename T>
void conv_forward(const Tensor3<T>& in, const ConvLayer<T>& layer, Tensor3<T>& out) {
  const int height = in.h, width = in.w;
  out.resize(layer.out_c, height, width);
  const int ph = layer.kh / 2, pw = layer.kw / 2;
  for (int o = 0; o < layer.out_c; ++o) {
    T* op = out.plane(o);
    std::fill(op, op + static_cast<std::size_t>(height) * width, layer.bias[o]);
    for (int i = 0; i < layer.in_c; ++i) {
      const T* ip = in.plane(i);
      for (int dy = 0; dy < layer.kh; ++dy) {
        const int ys = dy - ph;
        const int y0 = std::max(0, -ys), y1 = std::min(height, height - ys);
        for (int dx = 0; dx < layer.kw; ++dx) {
          const T wv = layer.weights[layer.w_index(o, i, dy, dx)];
          const int xs = dx - pw;
          const int x0 = std::max(0, -xs), x1 = std::min(width, width - xs);
          for (int y = y0; y < y1; ++y) {
            T* orow = op + static_cast<std::size_t>(y) * width;
            const T* irow = ip + static_cast<std::size_t>(y + ys) * width + xs;
            for (int x = x0; x < x1; ++x) { orow[x] += wv * irow[x]; }
          }
        }
      }
    }
  }
}

// dot product with eight independent accumulators so the reduction
// vectorizes; the summation order is fixed, results are deterministic
template <typename T>
T dot_rows(const T* a, const T* b, int n) {
  T acc[8] = {};
  int x = 0;
  for (; x + 8 <= n; x += 8) {
    for (int l = 0; l < 8; ++l) { acc[l] += a[x + l] * b[x + l]; }
  }
  for (; x < n; ++x) { acc[x & 7] += a[x] * b[x]; }
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

template <typename T>
T sum_plane(const T* a, std::size_t n) {
  T acc[8] = {};
  std::size_t x = 0;
  for (; x + 8 <= n; x += 8) {
    for (int l = 0; l < 8; ++l) { acc[l] += a[x + l]; }
  }
  for (; x < n; ++x) { acc[x & 7] += a[x]; }
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

template <typename T>
void conv_backward(const Tensor3<T>& in, const ConvLayer<T>& layer, const Tensor3<T>& gout, std::vector<T>& dw,
                   std::vector<T>& db, Tensor3<T>& din, bool want_din = true) {
  const int height = in.h, width = in.w;
  const int ph = layer.kh / 2, pw = layer.kw / 2;
  for (int o = 0; o < layer.out_c; ++o) {
    db[o] += sum_plane(gout.plane(o), static_cast<std::size_t>(height) * width);
  }
  for (int o = 0; o < layer.out_c; ++o) {
    const T* gp = gout.plane(o);
    for (int i = 0; i < layer.in_c; ++i) {
      const T* ip = in.plane(i);
      for (int dy = 0; dy < layer.kh; ++dy) {
        const int ys = dy - ph;
        const int y0 = std::max(0, -ys), y1 = std::min(height, height - ys);
        for (int dx = 0; dx < layer.kw; ++dx) {
          const int xs = dx - pw;
          const int x0 = std::max(0, -xs), x1 = std::min(width, width - xs);
          T acc = 0;
          for (int y = y0; y < y1; ++y) {
            acc += dot_rows(gp + static_cast<std::size_t>(y) * width + x0,
                            ip + static_cast<std::size_t>(y + ys) * width + xs + x0, x1 - x0);
          }
          dw[layer.w_index(o, i, dy, dx)] += acc;
        }
      }
    }
  }
  if (!want_din) { return; }
  din.resize(layer.in_c, height, width);
  for (int o = 0; o < layer.out_c; ++o) {
    const T* gp = gout.plane(o);
    for (int i = 0; i < layer.in_c; ++i) {
      T* dp = din.plane(i);
      for (int dy = 0; dy < layer.kh; ++dy) {
        const int ys = dy - ph;
        const int yy0 = std::max(0, ys), yy1 = std::min(height, height + ys);
        for (int dx = 0; dx < layer.kw; ++dx) {
          const T wv = layer.weights[layer.w_index(o, i, dy, dx)];
          const int xs = dx - pw;
          const int xx0 = std::max(0, xs), xx1 = std::min(width, width + xs);
          for (int yy = yy0; yy < yy1; ++yy) {
            T* drow = dp + static_cast<std::size_t>(yy) * width;
            const T* grow = gp + static_cast<std::size_t>(yy - ys) * width - xs;
            for (int xx = xx0; xx < xx1; ++xx) { drow[xx] += wv * grow[xx]; }
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
struct ForwardCache {
  std::vector<Tensor3<T>> a;  // a[i] = input to op i; a[n_ops] = network output
};

template <typename T>
const Tensor3<T>& forward(const Network<T>& net, const Tensor3<T>& input, ForwardCache<T>& cache) {
  net.finish();
  if (input.c != net.in_channels()) { throw std::invalid_argument("forward: input channel mismatch"); }
  const auto& ops = net.ops();
  cache.a.resize(ops.size() + 1);
  cache.a[0] = input;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const Tensor3<T>& x = cache.a[i];
    Tensor3<T>& y = cache.a[i + 1];
    switch (ops[i].kind) {
      case NetOp::Kind::conv:
        detail::conv_forward(x, net.convs()[ops[i].conv_id], y);
        break;
      case NetOp::Kind::relu:
        y.resize(x.c, x.h, x.w);
        for (std::size_t j = 0; j < x.v.size(); ++j) { y.v[j] = x.v[j] > T(0) ? x.v[j] : T(0); }
        break;
      case NetOp::Kind::res_begin:
        y = x;
        break;
      case NetOp::Kind::res_end: {
        const Tensor3<T>& entry = cache.a[ops[i].partner];
        if (!entry.same_shape(x)) { throw std::invalid_argument("forward: residual shape mismatch"); }
        y.resize(x.c, x.h, x.w);
        for (std::size_t j = 0; j < x.v.size(); ++j) { y.v[j] = x.v[j] + entry.v[j]; }
        break;
      }
    }
  }
  return cache.a.back();
}

template <typename T>
struct Gradients {
  std::vector<std::vector<T>> dw, db;  // per conv layer
  Tensor3<T> g, g_prev;                // work buffers
  std::vector<Tensor3<T>> skip;

  void reset(const Network<T>& net) {
    dw.resize(net.convs().size());
    db.resize(net.convs().size());
    for (std::size_t i = 0; i < net.convs().size(); ++i) {
      dw[i].assign(net.convs()[i].weights.size(), T(0));
      db[i].assign(net.convs()[i].bias.size(), T(0));
    }
  }
};

// Exact reverse-mode gradients of a scalar loss with d(loss)/d(output) given.
template <typename T>
void backward(const Network<T>& net, const ForwardCache<T>& cache, const Tensor3<T>& grad_out, Gradients<T>& grads) {
  grads.reset(net);
  const auto& ops = net.ops();
  grads.g = grad_out;
  grads.skip.clear();
  for (int i = static_cast<int>(ops.size()) - 1; i >= 0; --i) {
    const Tensor3<T>& a_in = cache.a[i];
    switch (ops[i].kind) {
      case NetOp::Kind::conv: {
        const int ci = ops[i].conv_id;
        const bool want_din = (i != 0);  // nothing upstream of the first op needs gradients
        detail::conv_backward(a_in, net.convs()[ci], grads.g, grads.dw[ci], grads.db[ci], grads.g_prev, want_din);
        if (want_din) { std::swap(grads.g, grads.g_prev); }
        break;
      }
      case NetOp::Kind::relu:
        for (std::size_t j = 0; j < a_in.v.size(); ++j) {
          if (!(a_in.v[j] > T(0))) { grads.g.v[j] = T(0); }
        }
        break;
      case NetOp::Kind::res_end:
        grads.skip.push_back(grads.g);
        break;
      case NetOp::Kind::res_begin:
        for (std::size_t j = 0; j < grads.g.v.size(); ++j) { grads.g.v[j] += grads.skip.back().v[j]; }
        grads.skip.pop_back();
        break;
    }
  }
}

struct CropRows {
  int start = 0;
  int count = 0;
};

// MSE over the crop rows of every output channel; optionally fills the
// gradient tensor (zero outside the crop).
template <typename T>
double mse_crop(const Tensor3<T>& out, const Tensor3<T>& target, CropRows crop, Tensor3<T>* grad = nullptr) {
  if (!out.same_shape(target)) { throw std::invalid_argument("mse_crop: target shape mismatch"); }
  if (crop.start < 0 || crop.count < 1 || crop.start + crop.count > out.h) {
    throw std::invalid_argument("mse_crop: crop out of bounds");
  }
  const double count = static_cast<double>(out.c) * crop.count * out.w;
  if (grad) { grad->resize(out.c, out.h, out.w); }
  double loss = 0;
  for (int c = 0; c < out.c; ++c) {
    for (int y = crop.start; y < crop.start + crop.count; ++y) {
      const T* orow = out.plane(c) + static_cast<std::size_t>(y) * out.w;
      const T* trow = target.plane(c) + static_cast<std::size_t>(y) * out.w;
      T* grow = grad ? grad->plane(c) + static_cast<std::size_t>(y) * out.w : nullptr;
      for (int x = 0; x < out.w; ++x) {
        const double d = static_cast<double>(orow[x]) - trow[x];
        loss += d * d;
        if (grow) { grow[x] = static_cast<T>(2.0 * d / count); }
      }
    }
  }
  return loss / count;
}

template <typename T>
struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;
  std::vector<std::vector<T>> m_w, v_w, m_b, v_b;

  void init(const Network<T>& net) {
    const auto& convs = net.convs();
    m_w.resize(convs.size());
    v_w.resize(convs.size());
    m_b.resize(convs.size());
    v_b.resize(convs.size());
    for (std::size_t i = 0; i < convs.size(); ++i) {
      m_w[i].assign(convs[i].weights.size(), T(0));
      v_w[i].assign(convs[i].weights.size(), T(0));
      m_b[i].assign(convs[i].bias.size(), T(0));
      v_b[i].assign(convs[i].bias.size(), T(0));
    }
    step = 0;
  }
};

// One bias-corrected Adam update.
template <typename T>
void adam_step(Network<T>& net, const Gradients<T>& grads, AdamState<T>& st, double lr) {
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  auto update = [&](std::vector<T>& p, const std::vector<T>& g, std::vector<T>& m, std::vector<T>& v) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = st.beta1 * m[j] + (1.0 - st.beta1) * gj;
      const double vj = st.beta2 * v[j] + (1.0 - st.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      p[j] -= static_cast<T>(lr * (mj / bc1) / (std::sqrt(vj / bc2) + st.eps));
    }
  };
  auto& convs = net.convs();
  for (std::size_t i = 0; i < convs.size(); ++i) {
    update(convs[i].weights, grads.dw[i], st.m_w[i], st.v_w[i]);
    update(convs[i].bias, grads.db[i], st.m_b[i], st.v_b[i]);
  }
}

struct TrainConfig {
  int epochs = 200;
  double lr = 1e-3;
  double lr_final = -1;  // < 0: constant lr; otherwise exponential decay to this value
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  double lr_at(int epoch) const {
    if (lr_final <= 0 || lr_final >= lr || epochs <= 1) { return lr; }
    const double f = static_cast<double>(epoch) / (epochs - 1);
    return lr * std::pow(lr_final / lr, f);
  }
};

// Full-batch Adam on the crop-restricted MSE. Returns the loss history
// (epochs + 1 entries, first = initial loss). If the last epoch ends above
// the initial loss the initial parameters are restored, so training can never
// leave the network worse than it started.
template <typename T>
std::vector<double> train(Network<T>& net, const Tensor3<T>& input, const Tensor3<T>& target, CropRows crop,
                          const TrainConfig& cfg) {
  if (cfg.epochs < 1) { throw std::invalid_argument("train: epochs must be >= 1"); }
  ForwardCache<T> cache;
  Gradients<T> grads;
  AdamState<T> st;
  st.beta1 = cfg.beta1;
  st.beta2 = cfg.beta2;
  st.eps = cfg.eps;
  st.init(net);
  const std::vector<T> initial = net.snapshot_params();
  std::vector<double> history;
  history.reserve(cfg.epochs + 1);
  Tensor3<T> grad_out;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Tensor3<T>& out = forward(net, input, cache);
    const double loss = mse_crop(out, target, crop, &grad_out);
    if (!std::isfinite(loss)) { throw std::runtime_error("divergence at epoch " + std::to_string(epoch)); }
    history.push_back(loss);
    backward(net, cache, grad_out, grads);
    adam_step(net, grads, st, cfg.lr_at(epoch));
  }
  const double final_loss = mse_crop(forward(net, input, cache), target, crop);
  if (!std::isfinite(final_loss)) { throw std::runtime_error("divergence at epoch " + std::to_string(cfg.epochs)); }
  history.push_back(final_loss);
  if (history.back() > history.front()) {
    net.restore_params(initial);
    history.back() = history.front();
  }
  return history;
}

namespace detail {

// sign pattern of every ReLU input; a finite-difference interval is only
// trustworthy when both endpoints activate the same units
template <typename T>
void relu_pattern(const Network<T>& net, const ForwardCache<T>& cache, std::vector<std::uint8_t>& out) {
  out.clear();
  const auto& ops = net.ops();
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (ops[i].kind != NetOp::Kind::relu) { continue; }
    for (const auto& v : cache.a[i].v) { out.push_back(v > T(0)); }
  }
}

}  // namespace detail

// Central finite differences on randomly sampled parameters against the
// analytic gradients; returns the max relative error. Samples are re-drawn
// when the parameter is exactly zero, when its gradient is too small to
// difference without cancellation, or when the +/- eps evaluations land on
// different sides of a ReLU kink.
template <typename T>
double grad_check(Network<T>& net, const Tensor3<T>& input, const Tensor3<T>& target, CropRows crop,
                  double fd_eps = 1e-5, int n_samples = 200, Rng rng = Rng(0)) {
  ForwardCache<T> cache;
  Gradients<T> grads;
  Tensor3<T> grad_out;
  mse_crop(forward(net, input, cache), target, crop, &grad_out);
  backward(net, cache, grad_out, grads);
  const std::size_t np = net.param_count();
  auto grad_at = [&](std::size_t idx) -> T {
    for (std::size_t i = 0; i < grads.dw.size(); ++i) {
      if (idx < grads.dw[i].size()) { return grads.dw[i][idx]; }
      idx -= grads.dw[i].size();
      if (idx < grads.db[i].size()) { return grads.db[i][idx]; }
      idx -= grads.db[i].size();
    }
    throw std::out_of_range("grad_check: gradient index");
  };
  double g_max = 0;
  for (std::size_t i = 0; i < np; ++i) { g_max = std::max(g_max, std::abs(static_cast<double>(grad_at(i)))); }
  if (g_max == 0) { return 0; }

  double max_rel = 0;
  std::vector<std::uint8_t> pattern_plus, pattern_minus;
  int checked = 0;
  for (int attempt = 0; attempt < 40 * n_samples && checked < n_samples; ++attempt) {
    const std::size_t idx = static_cast<std::size_t>(rng.next_u64() % np);
    const double analytic = static_cast<double>(grad_at(idx));
    if (net.param(idx) == T(0) || std::abs(analytic) < 1e-3 * g_max) { continue; }
    T& p = net.param(idx);
    const T saved = p;
    p = saved + static_cast<T>(fd_eps);
    const double lp = mse_crop(forward(net, input, cache), target, crop);
    detail::relu_pattern(net, cache, pattern_plus);
    p = saved - static_cast<T>(fd_eps);
    const double lm = mse_crop(forward(net, input, cache), target, crop);
    detail::relu_pattern(net, cache, pattern_minus);
    p = saved;
    if (pattern_plus != pattern_minus) { continue; }
    const double numeric = (lp - lm) / (2.0 * fd_eps);
    const double rel = std::abs(numeric - analytic) / std::max(std::abs(numeric), std::abs(analytic));
    max_rel = std::max(max_rel, rel);
    ++checked;
  }
  return max_rel;
}

}  // namespace spark
