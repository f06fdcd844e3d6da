#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aqi/error.hpp"
#include "aqi/features.hpp"

namespace aqi {

enum class ModelKind { M1, M2 };

inline const char* to_string(ModelKind k) { return k == ModelKind::M1 ? "M1" : "M2"; }

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "M1" || s == "m1") return ModelKind::M1;
  if (s == "M2" || s == "m2") return ModelKind::M2;
  throw Error(ErrorCode::ParseError, "model kind must be M1 or M2, got '" + s + "'", "kind");
}

/// Length of the basis (and weight) vector for `n_features` inputs:
/// d for the linear model, d + d + d(d-1)/2 for the quadratic one.
inline constexpr std::size_t basis_size(ModelKind kind, std::size_t n_features = kFeatureCount) {
  return kind == ModelKind::M1 ? n_features : 2 * n_features + n_features * (n_features - 1) / 2;
}

/// Linear terms, then squares, then cross terms x_i x_j for i<j in
/// lexicographic (i, j) order.
inline std::vector<double> basis(ModelKind kind, std::span<const double> x) {
  const std::size_t d = x.size();
  std::vector<double> phi;
  phi.reserve(basis_size(kind, d));
  phi.insert(phi.end(), x.begin(), x.end());
  if (kind == ModelKind::M2) {
    for (double v : x) phi.push_back(v * v);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) phi.push_back(x[i] * x[j]);
  }
  return phi;
}

inline std::vector<double> basis(ModelKind kind, const FeatureVector& x) {
  return basis(kind, std::span<const double>(x.values));
}

/// Human-readable label for every basis slot, e.g. "theta:n_q1*h_ind".
inline std::vector<std::string> basis_manifest(ModelKind kind, std::size_t n_features = kFeatureCount) {
  auto name = [&](std::size_t i) {
    return n_features == kFeatureCount ? std::string(kFeatureNames[i]) : "x" + std::to_string(i + 1);
  };
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n_features; ++i) out.push_back("alpha:" + name(i));
  if (kind == ModelKind::M2) {
    for (std::size_t i = 0; i < n_features; ++i) out.push_back("beta:" + name(i));
    for (std::size_t i = 0; i < n_features; ++i)
      for (std::size_t j = i + 1; j < n_features; ++j) out.push_back("theta:" + name(i) + "*" + name(j));
  }
  return out;
}

/// Flattened weights of a regression scorer, laid out like `basis`.
struct ModelWeights {
  ModelKind kind = ModelKind::M1;
  std::size_t n_features = kFeatureCount;
  std::vector<double> w;

  bool operator==(const ModelWeights&) const = default;

  static ModelWeights uniform(ModelKind kind, std::size_t n_features = kFeatureCount) {
    const auto n = basis_size(kind, n_features);
    return {kind, n_features, std::vector<double>(n, 1.0 / static_cast<double>(n))};
  }

  std::span<const double> alpha() const { return {w.data(), n_features}; }
  std::span<const double> beta() const {
    return kind == ModelKind::M2 ? std::span<const double>(w.data() + n_features, n_features)
                                 : std::span<const double>{};
  }
  std::span<const double> theta() const {
    return kind == ModelKind::M2 ? std::span<const double>(w).subspan(2 * n_features)
                                 : std::span<const double>{};
  }
};

inline constexpr double kSimplexTolerance = 1e-9;

inline void check_weights(const ModelWeights& m) {
  if (m.w.size() != basis_size(m.kind, m.n_features)) {
    throw Error(ErrorCode::BadSpec,
                std::string(to_string(m.kind)) + " needs " + std::to_string(basis_size(m.kind, m.n_features)) +
                    " weights, got " + std::to_string(m.w.size()),
                "weights");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < m.w.size(); ++k) {
    if (!(m.w[k] >= 0.0 && m.w[k] <= 1.0)) {
      throw Error(ErrorCode::BadSpec, "weight " + std::to_string(k) + " outside [0,1]",
                  "weights[" + std::to_string(k) + "]");
    }
    sum += m.w[k];
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    throw Error(ErrorCode::BadSpec, "weights must sum to 1 (sum is " + csv::format_double(sum) + ")", "weights");
  }
}

/// Score f = w . basis(x), in [0,1] for simplex weights and x in [0,1]^d.
inline double eval(const ModelWeights& m, std::span<const double> x) {
  assert(x.size() == m.n_features);
  const auto phi = basis(m.kind, x);
  const double f = std::inner_product(phi.begin(), phi.end(), m.w.begin(), 0.0);
  // Only rounding and the simplex tolerance can push f outside [0,1].
  assert(f >= -1e-8 && f <= 1.0 + 1e-8);
  return std::clamp(f, 0.0, 1.0);
}

inline double eval(const ModelWeights& m, const FeatureVector& x) {
  return eval(m, std::span<const double>(x.values));
}

struct AQIScore {
  std::string candidate_id;
  double f_value = 0.0;
  double aqi = 0.0;
};

inline double aqi_from_f(double f) { return 100.0 * f; }

inline AQIScore aqi(const ModelWeights& m, const FeatureVector& x) {
  const double f = eval(m, x);
  return {x.candidate_id, f, aqi_from_f(f)};
}

inline nlohmann::json weights_to_json(const ModelWeights& m) {
  return {{"kind", to_string(m.kind)},
          {"n_features", m.n_features},
          {"basis", basis_manifest(m.kind, m.n_features)},
          {"weights", m.w}};
}

inline ModelWeights weights_from_json(const nlohmann::json& j) {
  ModelWeights m;
  m.kind = model_kind_from_string(j.at("kind").get<std::string>());
  m.n_features = j.value("n_features", kFeatureCount);
  m.w = j.at("weights").get<std::vector<double>>();
  if (j.contains("basis") && j.at("basis").get<std::vector<std::string>>() != basis_manifest(m.kind, m.n_features)) {
    throw Error(ErrorCode::ParseError, "basis manifest does not match the expected layout", "basis");
  }
  check_weights(m);
  return m;
}

}  // namespace aqi
