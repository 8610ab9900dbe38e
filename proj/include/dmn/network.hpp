// SPDX-License-Identifier: Apache-2.0
//
// Feed-forward rectifier network producing mixture head coordinates, manual
// backpropagation, Adam, and the mini-batch training loop.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dmn/data.hpp"
#include "dmn/error.hpp"
#include "dmn/likelihood.hpp"

namespace dmn {

/// Dense layer y = W x + b, W stored row-major (out × in).
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  Layer() = default;
  Layer(std::size_t n_in, std::size_t n_out) : in(n_in), out(n_out), weight(n_in * n_out, 0.0), bias(n_out, 0.0) {}

  bool operator==(const Layer&) const = default;
};

/// Gradients share the parameter layout.
using ModelGrad = std::vector<Layer>;

/// Rectifier on hidden layers, identity on the output. The output of width
/// K·(1 + d) splits into K weight logits followed by K·d log alphas.
class MlpModel {
 public:
  MlpModel() = default;

  /// All-zero parameters: every input maps to the uniform mixture with α = 1.
  static MlpModel zeros(std::size_t n_in, std::span<const std::size_t> hidden, std::size_t K, std::size_t d) {
    MlpModel model;
    model.K_ = K;
    model.d_ = d;
    if (n_in == 0 || K == 0 || d < 2) throw DimensionMismatch("invalid network shape");
    std::size_t prev = n_in;
    for (std::size_t h : hidden) {
      if (h == 0) throw DimensionMismatch("hidden layer of width 0");
      model.layers_.emplace_back(prev, h);
      prev = h;
    }
    model.layers_.emplace_back(prev, K * (1 + d));
    return model;
  }

  /// He-style uniform fan-in initialization of the weights; all biases 0.
  static MlpModel create(std::size_t n_in, std::span<const std::size_t> hidden, std::size_t K, std::size_t d,
                         std::uint64_t seed) {
    MlpModel model = zeros(n_in, hidden, K, d);
    std::mt19937_64 rng(seed);
    for (auto& layer : model.layers_) {
      const double limit = std::sqrt(6.0 / double(layer.in));
      std::uniform_real_distribution<double> unif(-limit, limit);
      for (double& w : layer.weight) w = unif(rng);
    }
    return model;
  }

  /// Rebuilds a model from explicit layers (checkpoint loading).
  static MlpModel from_layers(std::vector<Layer> layers, std::size_t K, std::size_t d) {
    if (layers.empty()) throw DimensionMismatch("model needs at least one layer");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      if (layer.weight.size() != layer.in * layer.out || layer.bias.size() != layer.out) {
        throw DimensionMismatch("layer " + std::to_string(l) + " has inconsistent parameter sizes");
      }
      if (l > 0 && layers[l - 1].out != layer.in) throw DimensionMismatch("layer sizes do not chain");
    }
    if (layers.back().out != K * (1 + d)) throw DimensionMismatch("output width must equal K·(1 + d)");
    MlpModel model;
    model.layers_ = std::move(layers);
    model.K_ = K;
    model.d_ = d;
    return model;
  }

  std::size_t input_size() const { return layers_.front().in; }
  std::size_t components() const noexcept { return K_; }
  std::size_t classes() const noexcept { return d_; }
  std::span<const Layer> layers() const noexcept { return layers_; }
  std::span<Layer> layers() noexcept { return layers_; }

  std::vector<std::size_t> layer_sizes() const {
    std::vector<std::size_t> sizes{input_size()};
    for (const auto& l : layers_) sizes.push_back(l.out);
    return sizes;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  ModelGrad zero_grad() const {
    ModelGrad g;
    for (const auto& l : layers_) g.emplace_back(l.in, l.out);
    return g;
  }

  bool operator==(const MlpModel&) const = default;

 private:
  std::vector<Layer> layers_;
  std::size_t K_ = 0;
  std::size_t d_ = 0;
};

namespace detail {

// Pre-activation outputs of every layer for one input.
struct ForwardTrace {
  std::vector<std::vector<double>> pre;
};

inline void affine(const Layer& layer, std::span<const double> in, std::vector<double>& out) {
  out.resize(layer.out);
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double* row = layer.weight.data() + o * layer.in;
    double acc = layer.bias[o];
    for (std::size_t i = 0; i < layer.in; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
}

inline void run_forward(const MlpModel& model, std::span<const double> x, ForwardTrace& trace) {
  if (x.size() != model.input_size()) {
    throw DimensionMismatch("input has " + std::to_string(x.size()) + " features, model expects " +
                            std::to_string(model.input_size()));
  }
  const auto layers = model.layers();
  trace.pre.resize(layers.size());
  std::vector<double> act(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    affine(layers[l], act, trace.pre[l]);
    if (l + 1 < layers.size()) {
      act = trace.pre[l];
      for (double& v : act) v = std::max(v, 0.0);
    }
  }
}

inline HeadCoords split_head(const MlpModel& model, std::span<const double> raw) {
  const std::size_t K = model.components();
  const std::size_t d = model.classes();
  HeadCoords head(K, d);
  std::copy_n(raw.begin(), K, head.weight_logits.begin());
  for (std::size_t j = 0; j < K * d; ++j) {
    head.log_alphas[j] = std::clamp(raw[K + j], -kLogAlphaClamp, kLogAlphaClamp);
  }
  return head;
}

// Accumulates scale · ∂(⟨head_grad, head⟩)/∂θ into grad.
inline void run_backward(const MlpModel& model, std::span<const double> x, const ForwardTrace& trace,
                         const HeadCoords& head_grad, ModelGrad& grad, double scale) {
  const std::size_t K = model.components();
  const std::size_t d = model.classes();
  if (head_grad.K != K || head_grad.d != d || head_grad.weight_logits.size() != K ||
      head_grad.log_alphas.size() != K * d) {
    throw DimensionMismatch("head gradient shape does not match the model");
  }
  const auto layers = model.layers();
  const std::size_t L = layers.size();

  std::vector<double> delta(K * (1 + d));
  std::copy(head_grad.weight_logits.begin(), head_grad.weight_logits.end(), delta.begin());
  const auto& raw = trace.pre[L - 1];
  for (std::size_t j = 0; j < K * d; ++j) {
    const double u = raw[K + j];
    delta[K + j] = (u < -kLogAlphaClamp || u > kLogAlphaClamp) ? 0.0 : head_grad.log_alphas[j];
  }
  for (double& v : delta) v *= scale;

  std::vector<double> act;
  std::vector<double> prev_delta;
  for (std::size_t l = L; l-- > 0;) {
    const Layer& layer = layers[l];
    if (l == 0) {
      act.assign(x.begin(), x.end());
    } else {
      act = trace.pre[l - 1];
      for (double& v : act) v = std::max(v, 0.0);
    }
    Layer& g = grad[l];
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double dv = delta[o];
      if (dv == 0.0) continue;
      g.bias[o] += dv;
      double* row = g.weight.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) row[i] += dv * act[i];
    }
    if (l == 0) break;
    prev_delta.assign(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double dv = delta[o];
      if (dv == 0.0) continue;
      const double* row = layer.weight.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) prev_delta[i] += dv * row[i];
    }
    const auto& pre = trace.pre[l - 1];
    for (std::size_t i = 0; i < layer.in; ++i) {
      if (!(pre[i] > 0.0)) prev_delta[i] = 0.0;
    }
    delta.swap(prev_delta);
  }
}

inline void add_into(ModelGrad& acc, const ModelGrad& g) {
  for (std::size_t l = 0; l < acc.size(); ++l) {
    for (std::size_t i = 0; i < acc[l].weight.size(); ++i) acc[l].weight[i] += g[l].weight[i];
    for (std::size_t i = 0; i < acc[l].bias.size(); ++i) acc[l].bias[i] += g[l].bias[i];
  }
}

inline void fill_zero(ModelGrad& g) {
  for (auto& l : g) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

}  // namespace detail

/// Head coordinates for input x; log alphas clamped to ±20.
inline HeadCoords forward(const MlpModel& model, std::span<const double> x) {
  detail::ForwardTrace trace;
  detail::run_forward(model, x, trace);
  return detail::split_head(model, trace.pre.back());
}

/// Parameter gradient of ⟨head_grad, forward(x)⟩. Clamped log alphas pass no
/// gradient.
inline ModelGrad backward(const MlpModel& model, std::span<const double> x, const HeadCoords& head_grad) {
  detail::ForwardTrace trace;
  detail::run_forward(model, x, trace);
  ModelGrad grad = model.zero_grad();
  detail::run_backward(model, x, trace, head_grad, grad, 1.0);
  return grad;
}

struct OptimState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  ModelGrad first;
  ModelGrad second;

  static OptimState for_model(const MlpModel& model, double lr = 1e-3, double b1 = 0.9, double b2 = 0.999,
                              double eps = 1e-8) {
    OptimState s;
    s.learning_rate = lr;
    s.beta1 = b1;
    s.beta2 = b2;
    s.epsilon = eps;
    s.first = model.zero_grad();
    s.second = model.zero_grad();
    return s;
  }
};

/// One bias-corrected Adam update, in place.
inline void adam_step(MlpModel& model, OptimState& state, const ModelGrad& grads) {
  auto layers = model.layers();
  if (grads.size() != layers.size() || state.first.size() != layers.size() || state.second.size() != layers.size()) {
    throw DimensionMismatch("optimizer state or gradient does not match the model");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
  auto update = [&](std::vector<double>& param, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    if (g.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
      throw DimensionMismatch("optimizer state or gradient does not match the model");
    }
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      param[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, grads[l].weight, state.first[l].weight, state.second[l].weight);
    update(layers[l].bias, grads[l].bias, state.first[l].bias, state.second[l].bias);
  }
}

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  /// > 1 evaluates per-example gradients concurrently; reduction order is
  /// fixed, so results match the single-threaded run bit for bit.
  unsigned threads = 1;
};

struct TrainResult {
  MlpModel model;
  std::vector<double> epoch_nll;  // mean per-example NLL of each epoch
};

/// Mean NLL of the model over a dataset.
inline double mean_nll(const MlpModel& model, const Dataset& data) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : data.records) total += nll_grad(forward(model, r.x), label_counts(r, data.d)).value;
  return total / double(data.size());
}

/// Mini-batch Adam on the mixture NLL: indices reshuffled every epoch by a
/// generator seeded from config.seed, gradients averaged over each batch.
inline TrainResult train(MlpModel model, const Dataset& data, const TrainConfig& config) {
  if (data.empty()) throw DomainError("train: empty dataset");
  if (data.d != model.classes()) throw DimensionMismatch("dataset class count does not match the model");
  if (config.batch_size == 0) throw DomainError("train: batch size must be positive");
  std::vector<LabelCounts> counts;
  counts.reserve(data.size());
  bool warned = false;
  for (const auto& r : data.records) {
    if (r.x.size() != model.input_size()) throw DimensionMismatch("record feature count does not match the model");
    counts.push_back(label_counts(r, data.d));
    if (counts.back().single_label() && !warned) {
      std::clog << "warning: records with a single label make the predicted variance weakly identified\n";
      warned = true;
    }
  }

  OptimState state = OptimState::for_model(model, config.learning_rate, config.beta1, config.beta2, config.epsilon);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const unsigned threads = std::max(1u, config.threads);
  std::vector<ModelGrad> per_example;
  std::vector<double> per_loss;
  if (threads > 1) {
    per_example.assign(config.batch_size, model.zero_grad());
    per_loss.assign(config.batch_size, 0.0);
  }
  ModelGrad grad = model.zero_grad();
  detail::ForwardTrace trace;

  TrainResult result;
  result.epoch_nll.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / double(stop - start);
      detail::fill_zero(grad);
      double batch_total = 0.0;
      try {
        if (threads == 1) {
          for (std::size_t p = start; p < stop; ++p) {
            const std::size_t j = order[p];
            detail::run_forward(model, data.records[j].x, trace);
            const auto g = nll_grad(detail::split_head(model, trace.pre.back()), counts[j]);
            detail::run_backward(model, data.records[j].x, trace, g.grad, grad, scale);
            batch_total += g.value;
          }
        } else {
          std::vector<std::string> errors(threads);
          auto worker = [&](unsigned t) {
            detail::ForwardTrace local;
            try {
              for (std::size_t p = start + t; p < stop; p += threads) {
                const std::size_t j = order[p];
                auto& slot = per_example[p - start];
                detail::fill_zero(slot);
                detail::run_forward(model, data.records[j].x, local);
                const auto g = nll_grad(detail::split_head(model, local.pre.back()), counts[j]);
                detail::run_backward(model, data.records[j].x, local, g.grad, slot, scale);
                per_loss[p - start] = g.value;
              }
            } catch (const std::exception& e) {
              errors[t] = e.what();
            }
          };
          {
            std::vector<std::jthread> pool;
            for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
          }
          for (const auto& e : errors) {
            if (!e.empty()) throw Error(e);
          }
          for (std::size_t p = start; p < stop; ++p) {
            detail::add_into(grad, per_example[p - start]);
            batch_total += per_loss[p - start];
          }
        }
      } catch (const std::exception& e) {
        throw TrainingError(epoch, batch_index, e.what());
      }
      if (!std::isfinite(batch_total)) throw TrainingError(epoch, batch_index, "non-finite loss");
      epoch_total += batch_total;
      adam_step(model, state, grad);
    }
    result.epoch_nll.push_back(epoch_total / double(data.size()));
  }
  result.model = std::move(model);
  return result;
}

}  // namespace dmn
