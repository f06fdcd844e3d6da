#pragma once

// Monotone shared-weight scorer for similarity training. Every weight is the
// softplus of a free parameter, hidden and output units are logistic, so the
// score is nondecreasing in every input and lies in (0,1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "aqi/cohort.hpp"
#include "aqi/error.hpp"
#include "aqi/features.hpp"

namespace aqi {

namespace detail {

inline double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double softplus(double v) { return v > 30 ? v : std::log1p(std::exp(v)); }

inline double inverse_softplus(double w) { return w > 30 ? w : std::log(std::expm1(w)); }

inline double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace detail

struct DenseLayer {
  Eigen::MatrixXd free;  // effective weight = softplus(free), shape out x in
  Eigen::VectorXd bias;

  Eigen::MatrixXd effective() const { return free.unaryExpr(&detail::softplus); }
  bool operator==(const DenseLayer& o) const { return free == o.free && bias == o.bias; }
};

struct SiameseNet {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., 1
  std::vector<DenseLayer> layers;

  bool operator==(const SiameseNet&) const = default;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.free.size() + l.bias.size());
    return n;
  }
};

inline std::vector<std::size_t> default_architecture() { return {kFeatureCount, 16, 8, 1}; }

inline void check_architecture(const std::vector<std::size_t>& sizes) {
  if (sizes.size() < 3) throw Error(ErrorCode::BadArchitecture, "need an input, at least one hidden, and an output layer", "layer_sizes");
  if (sizes.front() != kFeatureCount) throw Error(ErrorCode::BadArchitecture, "input layer must have 21 units", "layer_sizes[0]");
  if (sizes.back() != 1) throw Error(ErrorCode::BadArchitecture, "output layer must have exactly 1 unit", "layer_sizes");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) throw Error(ErrorCode::BadArchitecture, "layer sizes must be positive", "layer_sizes[" + std::to_string(i) + "]");
  }
}

/// Effective weights start near scale/fan_in with jitter; biases center each
/// unit's pre-activation for inputs around 0.5.
inline SiameseNet init_network(const std::vector<std::size_t>& sizes, std::uint64_t seed, double init_scale = 2.0) {
  check_architecture(sizes);
  if (!(init_scale > 0)) throw Error(ErrorCode::BadSpec, "init_scale must be positive", "init_scale");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.5);
  SiameseNet net;
  net.layer_sizes = sizes;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(sizes[l - 1]);
    const auto out = static_cast<Eigen::Index>(sizes[l]);
    const double center = detail::inverse_softplus(init_scale / static_cast<double>(in));
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) layer.free(r, c) = center + jitter(rng);
    layer.bias = -0.5 * layer.effective().rowwise().sum();
    net.layers.push_back(std::move(layer));
  }
  return net;
}

/// Activations of every layer for one input; front() is the input itself.
struct ForwardCache {
  std::vector<Eigen::VectorXd> activations;
  double output() const { return activations.back()(0); }
};

inline ForwardCache forward_cached(const SiameseNet& net, std::span<const double> x) {
  ForwardCache cache;
  cache.activations.reserve(net.layers.size() + 1);
  cache.activations.emplace_back(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
  for (const auto& layer : net.layers) {
    const Eigen::VectorXd z = layer.effective() * cache.activations.back() + layer.bias;
    cache.activations.push_back(z.unaryExpr(&detail::logistic));
  }
  return cache;
}

inline double forward(const SiameseNet& net, std::span<const double> x) { return forward_cached(net, x).output(); }

inline double forward(const SiameseNet& net, const FeatureVector& x) {
  return forward(net, std::span<const double>(x.values));
}

/// Same layout as the network's parameters.
struct Gradient {
  std::vector<Eigen::MatrixXd> free;
  std::vector<Eigen::VectorXd> bias;

  static Gradient zeros_like(const SiameseNet& net) {
    Gradient g;
    for (const auto& l : net.layers) {
      g.free.push_back(Eigen::MatrixXd::Zero(l.free.rows(), l.free.cols()));
      g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    return g;
  }
};

/// Adds scale * d(output)/d(parameters) at input x into g.
inline void accumulate_output_gradient(const SiameseNet& net, std::span<const double> x, double scale, Gradient& g) {
  if (scale == 0.0) return;
  const auto cache = forward_cached(net, x);
  const std::size_t n_layers = net.layers.size();
  const double out = cache.output();
  Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, scale * out * (1.0 - out));
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = net.layers[l];
    const auto& a_in = cache.activations[l];
    const Eigen::MatrixXd d_eff = delta * a_in.transpose();
    g.free[l] += d_eff.cwiseProduct(layer.free.unaryExpr(&detail::logistic));
    g.bias[l] += delta;
    if (l > 0) {
      const Eigen::VectorXd back = layer.effective().transpose() * delta;
      delta = back.cwiseProduct(a_in.cwiseProduct((1.0 - a_in.array()).matrix()));
    }
  }
}

// ---------------------------------------------------------------------------
// Losses

/// y d^2 + (1 - y) max(m - d, 0)^2 with d = |s_i - s_j|.
inline double contrastive_loss(double s_i, double s_j, int similar, double margin) {
  const double d = std::abs(s_i - s_j);
  if (similar) return d * d;
  const double h = std::max(margin - d, 0.0);
  return h * h;
}

/// max(|s_a - s_p| - |s_a - s_n| + m, 0)^2.
inline double triplet_loss(double s_a, double s_p, double s_n, double margin) {
  const double h = std::max(std::abs(s_a - s_p) - std::abs(s_a - s_n) + margin, 0.0);
  return h * h;
}

/// Partial derivatives w.r.t. (s_i, s_j); subgradient 0 at |.| and hinge kinks.
inline std::array<double, 2> contrastive_loss_grad(double s_i, double s_j, int similar, double margin) {
  const double diff = s_i - s_j;
  if (similar) return {2.0 * diff, -2.0 * diff};
  const double h = margin - std::abs(diff);
  if (h <= 0) return {0.0, 0.0};
  const double dd = -2.0 * h * detail::sign(diff);
  return {dd, -dd};
}

/// Partial derivatives w.r.t. (s_a, s_p, s_n).
inline std::array<double, 3> triplet_loss_grad(double s_a, double s_p, double s_n, double margin) {
  const double h = std::abs(s_a - s_p) - std::abs(s_a - s_n) + margin;
  if (h <= 0) return {0.0, 0.0, 0.0};
  const double sp = detail::sign(s_a - s_p);
  const double sn = detail::sign(s_a - s_n);
  return {2.0 * h * (sp - sn), -2.0 * h * sp, 2.0 * h * sn};
}

// Per-sample adapters so training and checking share one code path.

inline double sample_loss(const SiameseNet& net, const TrainingPair& p, double margin) {
  return contrastive_loss(forward(net, p.first), forward(net, p.second), p.similar, margin);
}

inline double sample_loss(const SiameseNet& net, const TrainingTriplet& t, double margin) {
  return triplet_loss(forward(net, t.anchor), forward(net, t.positive), forward(net, t.negative), margin);
}

inline double accumulate_sample_gradient(const SiameseNet& net, const TrainingPair& p, double margin, double weight,
                                         Gradient& g) {
  const double si = forward(net, p.first), sj = forward(net, p.second);
  const auto d = contrastive_loss_grad(si, sj, p.similar, margin);
  accumulate_output_gradient(net, p.first.values, weight * d[0], g);
  accumulate_output_gradient(net, p.second.values, weight * d[1], g);
  return contrastive_loss(si, sj, p.similar, margin);
}

inline double accumulate_sample_gradient(const SiameseNet& net, const TrainingTriplet& t, double margin, double weight,
                                         Gradient& g) {
  const double sa = forward(net, t.anchor), sp = forward(net, t.positive), sn = forward(net, t.negative);
  const auto d = triplet_loss_grad(sa, sp, sn, margin);
  accumulate_output_gradient(net, t.anchor.values, weight * d[0], g);
  accumulate_output_gradient(net, t.positive.values, weight * d[1], g);
  accumulate_output_gradient(net, t.negative.values, weight * d[2], g);
  return triplet_loss(sa, sp, sn, margin);
}

/// Mean loss over the batch and its analytic gradient.
template <typename Sample>
std::pair<double, Gradient> batch_loss_and_gradient(const SiameseNet& net, std::span<const Sample> batch, double margin) {
  Gradient g = Gradient::zeros_like(net);
  if (batch.empty()) return {0.0, std::move(g)};
  const double w = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& s : batch) loss += accumulate_sample_gradient(net, s, margin, w, g);
  return {loss * w, std::move(g)};
}

template <typename Sample>
double mean_loss(const SiameseNet& net, std::span<const Sample> batch, double margin) {
  if (batch.empty()) return 0.0;
  double loss = 0.0;
  for (const auto& s : batch) loss += sample_loss(net, s, margin);
  return loss / static_cast<double>(batch.size());
}

// ---------------------------------------------------------------------------
// Flat parameter access (free parameters layer by layer, then biases)

inline std::vector<double> flatten(const SiameseNet& net) {
  std::vector<double> out;
  out.reserve(net.parameter_count());
  for (const auto& l : net.layers) {
    out.insert(out.end(), l.free.data(), l.free.data() + l.free.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

inline std::vector<double> flatten(const Gradient& g) {
  std::vector<double> out;
  for (std::size_t l = 0; l < g.free.size(); ++l) {
    out.insert(out.end(), g.free[l].data(), g.free[l].data() + g.free[l].size());
    out.insert(out.end(), g.bias[l].data(), g.bias[l].data() + g.bias[l].size());
  }
  return out;
}

inline void unflatten(SiameseNet& net, std::span<const double> p) {
  std::size_t k = 0;
  for (auto& l : net.layers) {
    std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(k), l.free.size(), l.free.data());
    k += static_cast<std::size_t>(l.free.size());
    std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(k), l.bias.size(), l.bias.data());
    k += static_cast<std::size_t>(l.bias.size());
  }
}

// ---------------------------------------------------------------------------
// Gradient checking

namespace detail {

inline bool near_kink(const SiameseNet& net, const TrainingPair& p, double margin, double guard) {
  if (p.similar) return false;
  const double d = std::abs(forward(net, p.first) - forward(net, p.second));
  return d < guard || std::abs(margin - d) < guard;
}

inline bool near_kink(const SiameseNet& net, const TrainingTriplet& t, double margin, double guard) {
  const double sa = forward(net, t.anchor);
  const double dp = std::abs(sa - forward(net, t.positive));
  const double dn = std::abs(sa - forward(net, t.negative));
  return dp < guard || dn < guard || std::abs(dp - dn + margin) < guard;
}

}  // namespace detail

/// Drops samples within 10 * epsilon of a non-differentiable point.
template <typename Sample>
std::vector<Sample> smooth_samples(const SiameseNet& net, std::span<const Sample> batch, double margin, double epsilon) {
  std::vector<Sample> out;
  for (const auto& s : batch)
    if (!detail::near_kink(net, s, margin, 10.0 * epsilon)) out.push_back(s);
  return out;
}

/// Largest per-parameter relative error |a - n| / max(|a|, |n|) between
/// `analytic` and central differences of the mean batch loss. A parameter
/// whose two gradients are both zero contributes 0.
template <typename Sample>
double gradient_check_against(const SiameseNet& net, std::span<const Sample> batch, double margin, double epsilon,
                              const Gradient& analytic) {
  const auto a = flatten(analytic);
  SiameseNet probe = net;
  auto params = flatten(net);
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + epsilon;
    unflatten(probe, params);
    const double up = mean_loss(probe, batch, margin);
    params[k] = saved - epsilon;
    unflatten(probe, params);
    const double down = mean_loss(probe, batch, margin);
    params[k] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max(std::abs(a[k]), std::abs(numeric));
    if (denom == 0.0) continue;
    worst = std::max(worst, std::abs(a[k] - numeric) / denom);
  }
  return worst;
}

template <typename Sample>
double gradient_check(const SiameseNet& net, std::span<const Sample> batch, double margin, double epsilon = 1e-5) {
  if (!(epsilon >= 1e-6 && epsilon <= 1e-4)) throw Error(ErrorCode::BadSpec, "epsilon must lie in [1e-6, 1e-4]", "epsilon");
  const auto smooth = smooth_samples(net, batch, margin, epsilon);
  const auto [loss, g] = batch_loss_and_gradient(net, std::span<const Sample>(smooth), margin);
  (void)loss;
  return gradient_check_against(net, std::span<const Sample>(smooth), margin, epsilon, g);
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double margin = 0.5;
  double learning_rate = 0.5;
  double momentum = 0.9;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
  double init_scale = 2.0;
  std::vector<std::size_t> layer_sizes = default_architecture();
};

inline void check_train_config(const TrainConfig& c) {
  if (!(c.margin > 0 && c.margin <= 1)) throw Error(ErrorCode::BadSpec, "margin must lie in (0,1]", "margin");
  if (!(c.learning_rate > 0)) throw Error(ErrorCode::BadSpec, "learning_rate must be positive", "learning_rate");
  if (!(c.momentum >= 0 && c.momentum < 1)) throw Error(ErrorCode::BadSpec, "momentum must lie in [0,1)", "momentum");
  if (c.batch_size < 1) throw Error(ErrorCode::BadSpec, "batch_size must be at least 1", "batch_size");
  check_architecture(c.layer_sizes);
}

struct SiameseTrainResult {
  SiameseNet net;
  std::vector<double> loss_history;  // mean per-sample loss of each epoch
};

/// Mini-batch SGD with momentum over seeded epoch shuffles. Gradients are
/// accumulated in batch order, so a fixed seed gives bit-identical runs.
template <typename Sample>
SiameseTrainResult train(SiameseNet net, std::span<const Sample> samples, const TrainConfig& cfg) {
  check_train_config(cfg);
  if (samples.empty()) throw Error(ErrorCode::EmptyInput, "no training samples", "samples");
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto params = flatten(net);
  std::vector<double> velocity(params.size(), 0.0);
  SiameseTrainResult result;
  std::vector<Sample> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(samples[order[i]]);
      const auto [loss, grad] = batch_loss_and_gradient(net, std::span<const Sample>(batch), cfg.margin);
      epoch_loss += loss * static_cast<double>(batch.size());
      const auto g = flatten(grad);
      for (std::size_t k = 0; k < params.size(); ++k) {
        velocity[k] = cfg.momentum * velocity[k] - cfg.learning_rate * g[k];
        params[k] += velocity[k];
      }
      unflatten(net, params);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(samples.size()));
  }
  result.net = std::move(net);
  return result;
}

inline SiameseTrainResult train_contrastive(SiameseNet net, const std::vector<TrainingPair>& pairs, const TrainConfig& cfg) {
  return train(std::move(net), std::span<const TrainingPair>(pairs), cfg);
}

inline SiameseTrainResult train_triplet(SiameseNet net, const std::vector<TrainingTriplet>& triplets,
                                        const TrainConfig& cfg) {
  return train(std::move(net), std::span<const TrainingTriplet>(triplets), cfg);
}

// ---------------------------------------------------------------------------
// Documents

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"margin", c.margin},         {"learning_rate", c.learning_rate}, {"momentum", c.momentum},
          {"epochs", c.epochs},         {"batch_size", c.batch_size},       {"seed", c.seed},
          {"init_scale", c.init_scale}, {"layer_sizes", c.layer_sizes}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.margin = j.value("margin", c.margin);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.init_scale = j.value("init_scale", c.init_scale);
    c.layer_sizes = j.value("layer_sizes", c.layer_sizes);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed training config: ") + e.what(), "config");
  }
  check_train_config(c);
  return c;
}

inline nlohmann::json network_to_json(const SiameseNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.free.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(l.free.cols()));
      for (Eigen::Index c = 0; c < l.free.cols(); ++c) row[static_cast<std::size_t>(c)] = l.free(r, c);
      rows.push_back(row);
    }
    layers.push_back({{"free", rows}, {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return {{"layer_sizes", net.layer_sizes},
          {"hidden_activation", "logistic"},
          {"output_activation", "logistic"},
          {"weight_transform", "softplus"},
          {"layers", layers}};
}

inline SiameseNet network_from_json(const nlohmann::json& j) {
  SiameseNet net;
  try {
    net.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    check_architecture(net.layer_sizes);
    const auto& layers = j.at("layers");
    if (layers.size() + 1 != net.layer_sizes.size()) throw Error(ErrorCode::BadArchitecture, "layer count mismatch", "layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto in = static_cast<Eigen::Index>(net.layer_sizes[l]);
      const auto out = static_cast<Eigen::Index>(net.layer_sizes[l + 1]);
      const auto rows = layers[l].at("free").get<std::vector<std::vector<double>>>();
      const auto bias = layers[l].at("bias").get<std::vector<double>>();
      const std::string path = "layers[" + std::to_string(l) + "]";
      if (static_cast<Eigen::Index>(rows.size()) != out || static_cast<Eigen::Index>(bias.size()) != out) {
        throw Error(ErrorCode::BadArchitecture, path + " has the wrong number of units", path);
      }
      DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
      for (Eigen::Index r = 0; r < out; ++r) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != in) {
          throw Error(ErrorCode::BadArchitecture, path + " has the wrong fan-in", path + ".free");
        }
        for (Eigen::Index c = 0; c < in; ++c) layer.free(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        layer.bias(r) = bias[static_cast<std::size_t>(r)];
      }
      net.layers.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed network document: ") + e.what(), "network");
  }
  return net;
}

}  // namespace aqi
