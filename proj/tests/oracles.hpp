#pragma once

// Independent reference computations used to freeze expected values. Nothing
// here calls into the optimizer's closed-form assembly or the network's
// backpropagation.

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "aqi/qp_optimizer.hpp"
#include "aqi/siamese.hpp"

namespace aqi::oracle {

/// f = sum_k w_k phi_k(x) written out term by term.
inline double score(ModelKind kind, const std::vector<double>& w, const std::vector<double>& x) {
  const std::size_t d = x.size();
  double f = 0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < d; ++i) f += w[k++] * x[i];
  if (kind == ModelKind::M2) {
    for (std::size_t i = 0; i < d; ++i) f += w[k++] * x[i] * x[i];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) f += w[k++] * x[i] * x[j];
  }
  return f;
}

/// Ordered double sum of squared AQI differences, exactly as the objective is
/// written: sum_{Sp x Sp} (AQI_i - AQI_j)^2 - gamma sum_{Sp x Sn} (...)^2.
inline double pair_sum_objective(ModelKind kind, const std::vector<double>& w,
                                 const std::vector<std::vector<double>>& pos,
                                 const std::vector<std::vector<double>>& neg, double gamma) {
  auto aqi = [&](const std::vector<double>& x) { return 100.0 * score(kind, w, x); };
  double within = 0, across = 0;
  for (const auto& a : pos)
    for (const auto& b : pos) within += std::pow(aqi(a) - aqi(b), 2);
  for (const auto& a : pos)
    for (const auto& b : neg) across += std::pow(aqi(a) - aqi(b), 2);
  return within - gamma * across;
}

/// Q by explicit accumulation of outer products over every ordered pair.
inline Eigen::MatrixXd pair_sum_matrix(const std::vector<std::vector<double>>& pos_basis,
                                       const std::vector<std::vector<double>>& neg_basis, double gamma) {
  const auto n = static_cast<Eigen::Index>(pos_basis.front().size());
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  auto add = [&](const std::vector<double>& a, const std::vector<double>& b, double weight) {
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c)
        q(r, c) += weight * 1e4 * (a[r] - b[r]) * (a[c] - b[c]);
  };
  for (const auto& a : pos_basis)
    for (const auto& b : pos_basis) add(a, b, 1.0);
  for (const auto& a : pos_basis)
    for (const auto& b : neg_basis) add(a, b, -gamma);
  return q;
}

inline bool feasible(const std::vector<double>& w, const ConstraintSet& cs, double tol) {
  return residuals(w, cs).max() <= tol;
}

/// Minimum of w'Qw over the grid {w = (i, j, N-i-j)/N} of the 2-simplex,
/// keeping only grid points that satisfy every constraint.
inline double grid_minimum_3(const Eigen::MatrixXd& q, const ConstraintSet& cs, int steps = 100) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; i + j <= steps; ++j) {
      std::vector<double> w = {double(i) / steps, double(j) / steps, double(steps - i - j) / steps};
      if (!feasible(w, cs, 1e-12)) continue;
      Eigen::Vector3d v(w[0], w[1], w[2]);
      best = std::min(best, v.dot(q * v));
    }
  }
  return best;
}

/// Central differences of `loss` with respect to every entry of `params`.
inline std::vector<double> central_differences(const std::function<double(const std::vector<double>&)>& loss,
                                               std::vector<double> params, double eps) {
  std::vector<double> g(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + eps;
    const double up = loss(params);
    params[k] = saved - eps;
    const double down = loss(params);
    params[k] = saved;
    g[k] = (up - down) / (2 * eps);
  }
  return g;
}

/// Forward pass in extended precision, straight from the definition: every
/// unit is logistic(sum_j softplus(v_kj) a_j + b_k).
inline long double reference_score(const SiameseNet& net, const FeatureVector& x) {
  std::vector<long double> a(x.values.begin(), x.values.end());
  for (const auto& layer : net.layers) {
    std::vector<long double> next(static_cast<std::size_t>(layer.free.rows()));
    for (Eigen::Index k = 0; k < layer.free.rows(); ++k) {
      long double z = layer.bias[k];
      for (Eigen::Index j = 0; j < layer.free.cols(); ++j)
        z += std::log1p(std::exp(static_cast<long double>(layer.free(k, j)))) * a[static_cast<std::size_t>(j)];
      next[static_cast<std::size_t>(k)] = 1.0L / (1.0L + std::exp(-z));
    }
    a = std::move(next);
  }
  return a.front();
}

inline long double reference_loss(const SiameseNet& net, const TrainingPair& p, double margin) {
  const long double d = std::abs(reference_score(net, p.first) - reference_score(net, p.second));
  if (p.similar) return d * d;
  const long double h = std::max(margin - d, 0.0L);
  return h * h;
}

inline long double reference_loss(const SiameseNet& net, const TrainingTriplet& t, double margin) {
  const long double a = reference_score(net, t.anchor);
  const long double h = std::max(std::abs(a - reference_score(net, t.positive)) -
                                     std::abs(a - reference_score(net, t.negative)) + margin,
                                 0.0L);
  return h * h;
}

/// Central differences of the extended-precision mean batch loss. Double
/// precision leaves about 1e-16 / epsilon of roundoff in each difference,
/// which swamps gradient components near 1e-9.
template <typename Sample>
std::vector<double> precise_gradient(const SiameseNet& net, const std::vector<Sample>& batch, double margin,
                                     double eps) {
  SiameseNet probe = net;
  auto params = flatten(net);
  auto loss = [&] {
    unflatten(probe, params);
    long double s = 0;
    for (const auto& b : batch) s += reference_loss(probe, b, margin);
    return s / static_cast<long double>(batch.size());
  };
  std::vector<double> g(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + eps;
    const long double up = loss();
    params[k] = saved - eps;
    const long double down = loss();
    params[k] = saved;
    g[k] = static_cast<double>((up - down) / (2.0L * static_cast<long double>(eps)));
  }
  return g;
}

inline std::vector<double> random_unit_vector(std::mt19937_64& rng, std::size_t d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(d);
  for (auto& v : x) v = u(rng);
  return x;
}

}  // namespace aqi::oracle
