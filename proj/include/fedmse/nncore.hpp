#pragma once

// Dense feed-forward autoencoder with analytic backpropagation, Adam and the
// reconstruction / shrink losses. Samples are stored one per row.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "fedmse/errors.hpp"
#include "fedmse/random.hpp"

namespace fedmse {

enum class Activation { Tanh, Identity };

inline const char* to_string(Activation a) {
  return a == Activation::Tanh ? "tanh" : "identity";
}

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorT = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixT<double>;
using Vector = VectorT<double>;

template <typename Scalar>
struct DenseLayer {
  MatrixT<Scalar> weights;  // out_dim x in_dim
  VectorT<Scalar> biases;   // out_dim
  Activation activation = Activation::Identity;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }

  bool operator==(const DenseLayer&) const = default;
};

/// Encoder and decoder stacks. Also used as the gradient / moment container,
/// since every one of those has exactly the same shape.
template <typename Scalar>
struct BasicModelParams {
  std::vector<DenseLayer<Scalar>> encoder;
  std::vector<DenseLayer<Scalar>> decoder;

  Eigen::Index input_dim() const {
    return encoder.empty() ? 0 : encoder.front().in_dim();
  }
  Eigen::Index latent_dim() const {
    return encoder.empty() ? 0 : encoder.back().out_dim();
  }
  Eigen::Index output_dim() const {
    return decoder.empty() ? 0 : decoder.back().out_dim();
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* stack : {&encoder, &decoder})
      for (const auto& l : *stack) n += l.weights.size() + l.biases.size();
    return n;
  }

  bool operator==(const BasicModelParams&) const = default;
};

using ModelParams = BasicModelParams<double>;

/// floor(1 + sqrt(n)).
inline int latent_dim_rule(int input_dim) {
  return static_cast<int>(std::floor(1.0 + std::sqrt(static_cast<double>(input_dim))));
}

inline int hidden_dim_rule(int input_dim, int latent_dim) {
  return (input_dim + latent_dim + 1) / 2;
}

// ---------------------------------------------------------------------------
// Tensor visitors. Layers are visited encoder-first, weights before biases.

template <typename Scalar, typename F>
void for_each_tensor(BasicModelParams<Scalar>& p, F&& f) {
  for (auto* stack : {&p.encoder, &p.decoder})
    for (auto& l : *stack) {
      f(l.weights);
      f(l.biases);
    }
}

template <typename Scalar, typename F>
void for_each_tensor(const BasicModelParams<Scalar>& p, F&& f) {
  for (const auto* stack : {&p.encoder, &p.decoder})
    for (const auto& l : *stack) {
      f(l.weights);
      f(l.biases);
    }
}

template <typename Scalar>
bool same_shape(const BasicModelParams<Scalar>& a, const BasicModelParams<Scalar>& b) {
  if (a.encoder.size() != b.encoder.size() || a.decoder.size() != b.decoder.size())
    return false;
  auto layers_match = [](const auto& x, const auto& y) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].weights.rows() != y[i].weights.rows() ||
          x[i].weights.cols() != y[i].weights.cols() ||
          x[i].biases.size() != y[i].biases.size())
        return false;
    }
    return true;
  };
  return layers_match(a.encoder, b.encoder) && layers_match(a.decoder, b.decoder);
}

template <typename Scalar>
BasicModelParams<Scalar> zeros_like(const BasicModelParams<Scalar>& p) {
  BasicModelParams<Scalar> z = p;
  for_each_tensor(z, [](auto& t) { t.setZero(); });
  return z;
}

/// Concatenates every parameter in visiting order (column-major within a
/// weight matrix).
template <typename Scalar>
VectorT<Scalar> flatten(const BasicModelParams<Scalar>& p) {
  VectorT<Scalar> out(static_cast<Eigen::Index>(p.parameter_count()));
  Eigen::Index pos = 0;
  for_each_tensor(p, [&](const auto& t) {
    out.segment(pos, t.size()) = t.reshaped();
    pos += t.size();
  });
  return out;
}

template <typename Scalar>
BasicModelParams<Scalar> unflatten(const BasicModelParams<Scalar>& shape,
                                   const VectorT<Scalar>& flat) {
  if (flat.size() != static_cast<Eigen::Index>(shape.parameter_count()))
    throw ConfigError("unflatten: expected " + std::to_string(shape.parameter_count()) +
                      " values, got " + std::to_string(flat.size()));
  BasicModelParams<Scalar> out = shape;
  Eigen::Index pos = 0;
  for_each_tensor(out, [&](auto& t) {
    t.reshaped() = flat.segment(pos, t.size());
    pos += t.size();
  });
  return out;
}

template <typename Scalar>
bool all_finite(const BasicModelParams<Scalar>& p) {
  bool ok = true;
  for_each_tensor(p, [&](const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

// ---------------------------------------------------------------------------
// Construction

struct Architecture {
  int input_dim = 0;
  int hidden_dim = 0;  // 0 = ceil((n + m) / 2); negative = no hidden layer
  int latent_dim = 0;  // 0 = floor(1 + sqrt(n))

  /// Resolves the automatic sizes.
  Architecture resolved() const {
    Architecture a = *this;
    if (a.input_dim < 1) throw ConfigError("architecture: input_dim must be >= 1");
    if (a.latent_dim == 0) a.latent_dim = latent_dim_rule(a.input_dim);
    if (a.latent_dim < 1) throw ConfigError("architecture: latent_dim must be >= 1");
    if (a.hidden_dim == 0) a.hidden_dim = hidden_dim_rule(a.input_dim, a.latent_dim);
    return a;
  }
};

/// input -> hidden (tanh) -> latent (identity) -> hidden (tanh) -> output
/// (identity), Glorot-uniform weights and zero biases.
template <typename Scalar = double>
BasicModelParams<Scalar> init_autoencoder(const Architecture& arch_in, std::uint64_t seed) {
  const Architecture arch = arch_in.resolved();
  Rng rng(seed);
  auto make = [&](int in, int out, Activation act) {
    DenseLayer<Scalar> l;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    l.weights.resize(out, in);
    for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
        l.weights(r, c) = static_cast<Scalar>(u(rng));
    l.biases = VectorT<Scalar>::Zero(out);
    l.activation = act;
    return l;
  };
  BasicModelParams<Scalar> p;
  if (arch.hidden_dim > 0) {
    p.encoder.push_back(make(arch.input_dim, arch.hidden_dim, Activation::Tanh));
    p.encoder.push_back(make(arch.hidden_dim, arch.latent_dim, Activation::Identity));
    p.decoder.push_back(make(arch.latent_dim, arch.hidden_dim, Activation::Tanh));
    p.decoder.push_back(make(arch.hidden_dim, arch.input_dim, Activation::Identity));
  } else {
    p.encoder.push_back(make(arch.input_dim, arch.latent_dim, Activation::Identity));
    p.decoder.push_back(make(arch.latent_dim, arch.input_dim, Activation::Identity));
  }
  return p;
}

/// Throws unless the decoder mirrors the encoder and chains are consistent.
template <typename Scalar>
void validate_params(const BasicModelParams<Scalar>& p) {
  if (p.encoder.empty() || p.decoder.empty())
    throw ConfigError("model: encoder and decoder must each have at least one layer");
  auto check_chain = [](const auto& layers, const char* what) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].biases.size() != layers[i].out_dim())
        throw ConfigError(std::string("model: ") + what + " layer " + std::to_string(i) +
                          " bias length does not match output dim");
      if (i > 0 && layers[i].in_dim() != layers[i - 1].out_dim())
        throw ConfigError(std::string("model: ") + what + " layer " + std::to_string(i) +
                          " input dim does not match previous layer");
    }
  };
  check_chain(p.encoder, "encoder");
  check_chain(p.decoder, "decoder");
  if (p.decoder.front().in_dim() != p.latent_dim())
    throw ConfigError("model: decoder input dim does not match latent dim");
  if (p.output_dim() != p.input_dim())
    throw ConfigError("model: decoder output dim does not match input dim");
}

// ---------------------------------------------------------------------------
// Forward pass

namespace detail {

/// tanh(x) = 1 - 2 / (exp(2x) + 1), on Eigen's vectorized exp.
template <typename Derived>
void tanh_inplace(Eigen::ArrayBase<Derived>&& z) {
  using S = typename Derived::Scalar;
  z = S(1) - S(2) / ((S(2) * z).exp() + S(1));
}

template <typename Scalar>
void apply_activation(MatrixT<Scalar>& z, Activation a) {
  if (a == Activation::Tanh) tanh_inplace(z.array());
}

/// Runs a stack over a batch (rows = samples). When `trace` is non-null every
/// post-activation output is appended to it, input first.
template <typename Scalar>
MatrixT<Scalar> run_stack(const std::vector<DenseLayer<Scalar>>& layers,
                          const MatrixT<Scalar>& input,
                          std::vector<MatrixT<Scalar>>* trace = nullptr) {
  MatrixT<Scalar> a = input;
  if (trace) trace->push_back(a);
  for (const auto& l : layers) {
    if (a.cols() != l.in_dim())
      throw ConfigError("forward: expected " + std::to_string(l.in_dim()) +
                        " input features, got " + std::to_string(a.cols()));
    MatrixT<Scalar> z = a.lazyProduct(l.weights.transpose());
    z.rowwise() += l.biases.transpose();
    apply_activation(z, l.activation);
    a = std::move(z);
    if (trace) trace->push_back(a);
  }
  return a;
}

}  // namespace detail

template <typename Scalar>
MatrixT<Scalar> encode(const MatrixT<Scalar>& batch, const BasicModelParams<Scalar>& p) {
  return detail::run_stack(p.encoder, batch);
}

template <typename Scalar>
MatrixT<Scalar> decode(const MatrixT<Scalar>& latents, const BasicModelParams<Scalar>& p) {
  return detail::run_stack(p.decoder, latents);
}

template <typename Scalar>
MatrixT<Scalar> reconstruct(const MatrixT<Scalar>& batch, const BasicModelParams<Scalar>& p) {
  return decode(encode(batch, p), p);
}

template <typename Scalar>
VectorT<Scalar> forward_encoder(const VectorT<Scalar>& x, const BasicModelParams<Scalar>& p) {
  return encode(MatrixT<Scalar>(x.transpose()), p).transpose();
}

template <typename Scalar>
VectorT<Scalar> forward_decoder(const VectorT<Scalar>& h, const BasicModelParams<Scalar>& p) {
  return decode(MatrixT<Scalar>(h.transpose()), p).transpose();
}

// ---------------------------------------------------------------------------
// Losses

/// Mean over rows of ||x - x_hat||^2.
template <typename Scalar>
Scalar ae_loss(const MatrixT<Scalar>& batch, const BasicModelParams<Scalar>& p) {
  if (batch.rows() == 0) throw InputError("ae_loss: empty batch");
  const MatrixT<Scalar> diff = batch - reconstruct(batch, p);
  return diff.squaredNorm() / static_cast<Scalar>(batch.rows());
}

/// ae_loss + lambda * mean ||h||^2.
template <typename Scalar>
Scalar sae_loss(const MatrixT<Scalar>& batch, const BasicModelParams<Scalar>& p, Scalar lambda) {
  if (lambda < 0) throw ConfigError("sae_loss: lambda must be >= 0");
  if (batch.rows() == 0) throw InputError("sae_loss: empty batch");
  const MatrixT<Scalar> h = encode(batch, p);
  const MatrixT<Scalar> diff = batch - decode(h, p);
  const Scalar n = static_cast<Scalar>(batch.rows());
  const Scalar recon = diff.squaredNorm() / n;
  return recon + lambda * (h.squaredNorm() / n);
}

template <typename Scalar>
Scalar squared_distance(const BasicModelParams<Scalar>& a, const BasicModelParams<Scalar>& b) {
  if (!same_shape(a, b)) throw ConfigError("squared_distance: shape mismatch");
  return (flatten(a) - flatten(b)).squaredNorm();
}

// ---------------------------------------------------------------------------
// Backpropagation

template <typename Scalar>
struct LossTerms {
  Scalar shrink_lambda = 0;
  Scalar prox_mu = 0;
  const BasicModelParams<Scalar>* anchor = nullptr;  // required iff prox_mu > 0
};

/// Objective value (sae_loss plus the proximal term when enabled).
template <typename Scalar>
Scalar objective(const MatrixT<Scalar>& batch, const BasicModelParams<Scalar>& p,
                 const LossTerms<Scalar>& terms) {
  Scalar value = sae_loss(batch, p, terms.shrink_lambda);
  if (terms.prox_mu > 0) {
    if (!terms.anchor) throw ConfigError("objective: prox_mu > 0 requires an anchor");
    value += terms.prox_mu / 2 * squared_distance(p, *terms.anchor);
  }
  return value;
}

/// Buffers reused across backward passes of one training loop.
template <typename Scalar>
struct BackpropWorkspace {
  std::vector<MatrixT<Scalar>> enc_trace, dec_trace;
  MatrixT<Scalar> delta, scratch;
};

namespace detail {

template <typename Scalar>
void run_stack_into(const std::vector<DenseLayer<Scalar>>& layers, const MatrixT<Scalar>& input,
                    std::vector<MatrixT<Scalar>>& trace) {
  trace.resize(layers.size() + 1);
  trace[0] = input;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (trace[k].cols() != l.in_dim())
      throw ConfigError("forward: expected " + std::to_string(l.in_dim()) +
                        " input features, got " + std::to_string(trace[k].cols()));
    auto& z = trace[k + 1];
    z.noalias() = trace[k].lazyProduct(l.weights.transpose());
    z.rowwise() += l.biases.transpose();
    apply_activation(z, l.activation);
  }
}

/// Propagates ws.delta (dL/d stack output) back through `layers`, filling
/// `grads`. With `input_grad`, leaves dL/d stack input in ws.delta.
template <typename Scalar>
void back_stack(const std::vector<DenseLayer<Scalar>>& layers,
                const std::vector<MatrixT<Scalar>>& trace, std::vector<DenseLayer<Scalar>>& grads,
                BackpropWorkspace<Scalar>& ws, bool input_grad) {
  for (std::size_t k = layers.size(); k-- > 0;) {
    if (layers[k].activation == Activation::Tanh)
      ws.delta.array() *= Scalar(1) - trace[k + 1].array().square();
    grads[k].weights.noalias() = ws.delta.transpose().lazyProduct(trace[k]);
    grads[k].biases.noalias() = ws.delta.colwise().sum().transpose();
    if (k > 0 || input_grad) {
      ws.scratch.noalias() = ws.delta.lazyProduct(layers[k].weights);
      ws.delta.swap(ws.scratch);
    }
  }
}

}  // namespace detail

/// Analytic gradient of objective() written into `grads`, which must already
/// have the shape of `p`.
template <typename Scalar>
void backward_into(const MatrixT<Scalar>& batch, const BasicModelParams<Scalar>& p,
                   const LossTerms<Scalar>& terms, BasicModelParams<Scalar>& grads,
                   BackpropWorkspace<Scalar>& ws) {
  if (batch.rows() == 0) throw InputError("backward: empty batch");
  if (terms.shrink_lambda < 0) throw ConfigError("backward: lambda must be >= 0");
  if (terms.prox_mu < 0) throw ConfigError("backward: prox_mu must be >= 0");
  if (terms.prox_mu > 0) {
    if (!terms.anchor) throw ConfigError("backward: prox_mu > 0 requires anchor params");
    if (!same_shape(p, *terms.anchor))
      throw ConfigError("backward: anchor params shape mismatch");
  }

  detail::run_stack_into(p.encoder, batch, ws.enc_trace);
  const MatrixT<Scalar>& h = ws.enc_trace.back();
  detail::run_stack_into(p.decoder, h, ws.dec_trace);

  const Scalar n = static_cast<Scalar>(batch.rows());
  ws.delta.noalias() = (ws.dec_trace.back() - batch) * (Scalar(2) / n);
  detail::back_stack(p.decoder, ws.dec_trace, grads.decoder, ws, true);
  if (terms.shrink_lambda != 0) ws.delta += h * (Scalar(2) * terms.shrink_lambda / n);
  detail::back_stack(p.encoder, ws.enc_trace, grads.encoder, ws, false);

  if (terms.prox_mu > 0) {
    auto add_prox = [&](auto& gs, const auto& ps, const auto& as) {
      for (std::size_t k = 0; k < gs.size(); ++k) {
        gs[k].weights += terms.prox_mu * (ps[k].weights - as[k].weights);
        gs[k].biases += terms.prox_mu * (ps[k].biases - as[k].biases);
      }
    };
    add_prox(grads.encoder, p.encoder, terms.anchor->encoder);
    add_prox(grads.decoder, p.decoder, terms.anchor->decoder);
  }
}

/// Analytic gradient of objective() with respect to every parameter.
template <typename Scalar>
BasicModelParams<Scalar> backward(const MatrixT<Scalar>& batch, const BasicModelParams<Scalar>& p,
                                  const LossTerms<Scalar>& terms) {
  BasicModelParams<Scalar> g = zeros_like(p);
  BackpropWorkspace<Scalar> ws;
  backward_into(batch, p, terms, g, ws);
  return g;
}

// ---------------------------------------------------------------------------
// Adam

template <typename Scalar>
struct AdamState {
  BasicModelParams<Scalar> first_moment;
  BasicModelParams<Scalar> second_moment;
  std::int64_t step_count = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);

  static AdamState zeros_for(const BasicModelParams<Scalar>& p) {
    AdamState s;
    s.first_moment = zeros_like(p);
    s.second_moment = zeros_like(p);
    return s;
  }
};

/// Bias-corrected Adam update in place.
template <typename Scalar>
void adam_step(BasicModelParams<Scalar>& params, const BasicModelParams<Scalar>& grads,
               AdamState<Scalar>& state, Scalar learning_rate) {
  if (!same_shape(params, grads) || !same_shape(params, state.first_moment) ||
      !same_shape(params, state.second_moment))
    throw ConfigError("adam_step: shape mismatch");
  state.step_count += 1;
  const Scalar t = static_cast<Scalar>(state.step_count);
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, t);
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, t);

  auto update = [&](auto& w, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (Scalar(1) - state.beta1) * g;
    v = state.beta2 * v + ((Scalar(1) - state.beta2) * g.array().square()).matrix();
    w.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  };
  auto update_stack = [&](auto& ws, const auto& gs, auto& ms, auto& vs) {
    for (std::size_t k = 0; k < ws.size(); ++k) {
      update(ws[k].weights, gs[k].weights, ms[k].weights, vs[k].weights);
      update(ws[k].biases, gs[k].biases, ms[k].biases, vs[k].biases);
    }
  };
  update_stack(params.encoder, grads.encoder, state.first_moment.encoder,
               state.second_moment.encoder);
  update_stack(params.decoder, grads.decoder, state.first_moment.decoder,
               state.second_moment.decoder);
}

// ---------------------------------------------------------------------------
// Local training

struct TrainConfig {
  double learning_rate = 1e-5;
  int batch_size = 12;
  int local_epochs = 100;
  double shrink_lambda = 10.0;
  double prox_mu = 0.0;
  int patience = 5;
  double min_delta = 1e-6;

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("train: learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (local_epochs < 0) throw ConfigError("train: local_epochs must be >= 0");
    if (!(shrink_lambda >= 0)) throw ConfigError("train: shrink_lambda must be >= 0");
    if (!(prox_mu >= 0)) throw ConfigError("train: prox_mu must be >= 0");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
    if (!(min_delta >= 0)) throw ConfigError("train: min_delta must be >= 0");
  }

  bool operator==(const TrainConfig&) const = default;
};

template <typename Scalar>
struct LocalTrainResult {
  BasicModelParams<Scalar> params;  // best-validation snapshot
  Scalar initial_val_loss = 0;
  Scalar best_val_loss = 0;
  int epochs_run = 0;
};

/// Mini-batch Adam on the shrink objective (plus proximal term when
/// cfg.prox_mu > 0, anchored at `init`). Early stops on validation sae_loss and
/// returns the best snapshot. Pure in (data, val, init, cfg, seed).
template <typename Scalar>
LocalTrainResult<Scalar> train_local_detailed(const MatrixT<Scalar>& data,
                                              const MatrixT<Scalar>& val,
                                              const BasicModelParams<Scalar>& init,
                                              const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (data.rows() == 0) throw InputError("train_local: empty training data");
  if (val.rows() == 0) throw InputError("train_local: empty validation data");
  validate_params(init);
  if (data.cols() != init.input_dim() || val.cols() != init.input_dim())
    throw ConfigError("train_local: data dimension does not match model input");

  const Scalar lambda = static_cast<Scalar>(cfg.shrink_lambda);
  LossTerms<Scalar> terms{lambda, static_cast<Scalar>(cfg.prox_mu), &init};

  LocalTrainResult<Scalar> result;
  result.params = init;
  result.initial_val_loss = sae_loss(val, init, lambda);
  result.best_val_loss = result.initial_val_loss;
  if (cfg.local_epochs == 0) return result;

  BasicModelParams<Scalar> params = init;
  BasicModelParams<Scalar> grads = zeros_like(init);
  BackpropWorkspace<Scalar> ws;
  MatrixT<Scalar> batch;
  auto adam = AdamState<Scalar>::zeros_for(params);
  Rng rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
  const Eigen::Index batch_size = cfg.batch_size;
  int stale = 0;

  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
    std::shuffle(order.begin(), order.end(), rng);

    for (Eigen::Index start = 0; start < data.rows(); start += batch_size) {
      const Eigen::Index len = std::min(batch_size, data.rows() - start);
      batch.resize(len, data.cols());
      for (Eigen::Index r = 0; r < len; ++r)
        batch.row(r) = data.row(order[static_cast<std::size_t>(start + r)]);
      backward_into(batch, params, terms, grads, ws);
      adam_step(params, grads, adam, static_cast<Scalar>(cfg.learning_rate));
    }
    if (!all_finite(params)) throw NumericError("train_local: non-finite parameters after update");

    result.epochs_run = epoch + 1;
    const Scalar val_loss = sae_loss(val, params, lambda);
    if (val_loss < result.best_val_loss - static_cast<Scalar>(cfg.min_delta)) {
      result.best_val_loss = val_loss;
      result.params = params;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

template <typename Scalar>
BasicModelParams<Scalar> train_local(const MatrixT<Scalar>& data, const MatrixT<Scalar>& val,
                                     const BasicModelParams<Scalar>& init, const TrainConfig& cfg,
                                     std::uint64_t seed) {
  return train_local_detailed(data, val, init, cfg, seed).params;
}

}  // namespace fedmse
