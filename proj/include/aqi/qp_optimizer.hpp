#pragma once

// Weight tuning for the regression scorers: an indefinite quadratic objective
// over a polytope (bounded simplex, optional rank-order chain, mean-AQI
// halfspace), solved by multi-start projected gradient with Dykstra
// projections.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "aqi/cohort.hpp"
#include "aqi/error.hpp"
#include "aqi/features.hpp"
#include "aqi/isotonic.hpp"
#include "aqi/regression.hpp"

namespace aqi {

/// objective(w) = w' Q w.
struct QuadraticForm {
  Eigen::MatrixXd Q;
};

/// Polytope the weights must lie in. Every component is optional so the
/// projection can be exercised one set at a time.
struct ConstraintSet {
  std::vector<double> r_min;  // empty: no box
  std::vector<double> r_max;
  /// Indices from most to least important; weights must be nonincreasing
  /// along the chain.
  std::optional<std::vector<std::size_t>> ordering;
  /// c with the constraint c . w >= 0.
  std::optional<std::vector<double>> halfspace;
  bool simplex = true;

  bool has_box() const { return !r_min.empty(); }
};

/// Per-constraint violation magnitudes (all zero at a feasible point).
struct ConstraintResiduals {
  double sum = 0;
  double bounds = 0;
  double ordering = 0;
  double halfspace = 0;

  double max() const { return std::max({sum, bounds, ordering, halfspace}); }
};

inline ConstraintResiduals residuals(std::span<const double> w, const ConstraintSet& cs) {
  ConstraintResiduals r;
  if (cs.simplex) {
    double s = 0;
    for (double v : w) s += v;
    r.sum = std::abs(s - 1.0);
  }
  if (cs.has_box()) {
    for (std::size_t k = 0; k < w.size(); ++k)
      r.bounds = std::max({r.bounds, cs.r_min[k] - w[k], w[k] - cs.r_max[k]});
  }
  if (cs.ordering) {
    const auto& chain = *cs.ordering;
    for (std::size_t i = 1; i < chain.size(); ++i) r.ordering = std::max(r.ordering, w[chain[i]] - w[chain[i - 1]]);
  }
  if (cs.halfspace) {
    double dot = 0;
    for (std::size_t k = 0; k < w.size(); ++k) dot += (*cs.halfspace)[k] * w[k];
    r.halfspace = std::max(0.0, -dot);
  }
  return r;
}

struct Feasibility {
  bool ok = true;
  std::string reason;
  std::string field;
};

/// Necessary-and-sufficient check for box + chain + simplex; the halfspace is
/// checked exactly when no chain is present and otherwise left to the
/// projection's stall detection.
inline Feasibility check_feasibility(const ConstraintSet& cs, std::size_t n) {
  auto fail = [](std::string reason, std::string field) { return Feasibility{false, std::move(reason), std::move(field)}; };
  if (cs.has_box() && (cs.r_min.size() != n || cs.r_max.size() != n)) {
    return fail("bound vectors must have length " + std::to_string(n), "bounds");
  }
  std::vector<double> lo(n, cs.simplex ? 0.0 : -std::numeric_limits<double>::infinity());
  std::vector<double> hi(n, cs.simplex ? 1.0 : std::numeric_limits<double>::infinity());
  if (cs.has_box()) {
    for (std::size_t k = 0; k < n; ++k) {
      const auto field = "bounds[" + std::to_string(k) + "]";
      if (!(cs.r_min[k] >= 0.0 && cs.r_max[k] <= 1.0)) return fail("bounds must lie in [0,1] at weight " + std::to_string(k), field);
      if (cs.r_min[k] > cs.r_max[k]) return fail("r_min exceeds r_max at weight " + std::to_string(k), field);
      lo[k] = cs.r_min[k];
      hi[k] = cs.r_max[k];
    }
  }
  if (cs.ordering) {
    const auto& chain = *cs.ordering;
    std::vector<bool> seen(n, false);
    for (auto k : chain) {
      if (k >= n || seen[k]) return fail("ordering must list distinct weight indices below " + std::to_string(n), "ordering");
      seen[k] = true;
    }
    // A weight must be able to reach every lower bound below it in the chain
    // and stay under every upper bound above it.
    for (std::size_t i = chain.size(); i-- > 1;) lo[chain[i - 1]] = std::max(lo[chain[i - 1]], lo[chain[i]]);
    for (std::size_t i = 1; i < chain.size(); ++i) hi[chain[i]] = std::min(hi[chain[i]], hi[chain[i - 1]]);
    for (std::size_t k = 0; k < n; ++k) {
      if (lo[k] > hi[k]) {
        return fail("rank ordering contradicts the bounds at weight " + std::to_string(k), "ordering");
      }
    }
  }
  if (cs.simplex) {
    double sum_lo = 0, sum_hi = 0;
    for (std::size_t k = 0; k < n; ++k) {
      sum_lo += lo[k];
      sum_hi += hi[k];
    }
    if (sum_lo > 1.0 + 1e-12) return fail("lower bounds sum to " + csv::format_double(sum_lo) + " > 1", "bounds");
    if (sum_hi < 1.0 - 1e-12) return fail("upper bounds sum to " + csv::format_double(sum_hi) + " < 1", "bounds");
  }
  if (cs.halfspace && cs.halfspace->size() != n) return fail("halfspace normal has the wrong length", "halfspace");
  if (cs.halfspace && cs.simplex && !cs.ordering) {
    // Greedy maximum of c . w over box-and-simplex.
    const auto& c = *cs.halfspace;
    std::vector<std::size_t> idx(n);
    for (std::size_t k = 0; k < n; ++k) idx[k] = k;
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return c[a] > c[b]; });
    double budget = 1.0, best = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      budget -= lo[k];
      best += c[k] * lo[k];
    }
    for (auto k : idx) {
      const double take = std::min(budget, hi[k] - lo[k]);
      best += c[k] * take;
      budget -= take;
    }
    if (best < -1e-12) {
      return fail("no feasible weights give the positive class a mean AQI at least that of the negative class",
                  "halfspace");
    }
  }
  return {};
}

inline void require_feasible(const ConstraintSet& cs, std::size_t n) {
  const auto f = check_feasibility(cs, n);
  if (!f.ok) throw Error(ErrorCode::InfeasibleConstraints, f.reason, f.field);
}

// ---------------------------------------------------------------------------
// Projections

namespace detail {

/// Projection onto { w : sum w = 1, lo <= w <= hi } (or the bare hyperplane
/// when there is no box). Exact: locates the threshold tau with
/// sum clip(v - tau, lo, hi) = 1 among the sorted breakpoints.
inline void project_bounded_simplex(std::span<double> v, const ConstraintSet& cs) {
  const std::size_t n = v.size();
  if (!cs.has_box()) {
    double s = 0;
    for (double x : v) s += x;
    const double tau = (s - 1.0) / static_cast<double>(n);
    for (double& x : v) x -= tau;
    return;
  }
  const auto& lo = cs.r_min;
  const auto& hi = cs.r_max;
  auto total = [&](double tau) {
    double s = 0;
    for (std::size_t k = 0; k < n; ++k) s += std::clamp(v[k] - tau, lo[k], hi[k]);
    return s;
  };
  std::vector<double> bp;
  bp.reserve(2 * n);
  for (std::size_t k = 0; k < n; ++k) {
    bp.push_back(v[k] - hi[k]);
    bp.push_back(v[k] - lo[k]);
  }
  std::sort(bp.begin(), bp.end());
  // total() is nonincreasing in tau and linear between breakpoints.
  double tau = 0;
  if (total(bp.front()) <= 1.0) {
    tau = bp.front();
  } else if (total(bp.back()) >= 1.0) {
    tau = bp.back();
  } else {
    std::size_t a = 0, b = bp.size() - 1;  // total(bp[a]) > 1 > total(bp[b])
    while (b - a > 1) {
      const std::size_t mid = (a + b) / 2;
      (total(bp[mid]) > 1.0 ? a : b) = mid;
    }
    const double ta = total(bp[a]), tb = total(bp[b]);
    tau = ta == tb ? bp[a] : bp[a] + (ta - 1.0) * (bp[b] - bp[a]) / (ta - tb);
  }
  for (std::size_t k = 0; k < n; ++k) v[k] = std::clamp(v[k] - tau, lo[k], hi[k]);
}

inline void project_box(std::span<double> v, const ConstraintSet& cs) {
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::clamp(v[k], cs.r_min[k], cs.r_max[k]);
}

inline void project_halfspace(std::span<double> v, std::span<const double> c) {
  double dot = 0, cc = 0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    dot += c[k] * v[k];
    cc += c[k] * c[k];
  }
  if (dot >= 0 || cc == 0) return;
  const double scale = dot / cc;
  for (std::size_t k = 0; k < v.size(); ++k) v[k] -= scale * c[k];
}

}  // namespace detail

struct ProjectionOptions {
  double tolerance = 1e-12;
  std::size_t max_sweeps = 20000;
};

struct ProjectionResult {
  std::vector<double> w;
  std::size_t sweeps = 0;
  double residual = 0;
};

/// Dykstra's alternating projections over (a) bounded simplex, (b) the
/// rank-order chain, (c) the mean halfspace, swept in that order. Converges to
/// the Euclidean projection onto the intersection.
inline ProjectionResult project(std::span<const double> w, const ConstraintSet& cs,
                                const ProjectionOptions& opts = {}) {
  const std::size_t n = w.size();
  ProjectionResult out;
  out.w.assign(w.begin(), w.end());

  using Step = void (*)(std::span<double>, const ConstraintSet&);
  std::vector<Step> steps;
  if (cs.simplex) {
    steps.push_back(&detail::project_bounded_simplex);
  } else if (cs.has_box()) {
    steps.push_back(&detail::project_box);
  }
  if (cs.ordering) {
    steps.push_back([](std::span<double> v, const ConstraintSet& c) { project_chain(v, *c.ordering); });
  }
  if (cs.halfspace) {
    steps.push_back([](std::span<double> v, const ConstraintSet& c) { detail::project_halfspace(v, *c.halfspace); });
  }
  if (steps.empty()) return out;
  if (steps.size() == 1) {
    steps.front()(out.w, cs);
    out.sweeps = 1;
    out.residual = residuals(out.w, cs).max();
    return out;
  }

  std::vector<std::vector<double>> corrections(steps.size(), std::vector<double>(n, 0.0));
  std::vector<double> x = out.w, y(n), prev(n);
  for (std::size_t sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    prev = x;
    // The end-of-sweep point can stall while corrections still shift, so
    // both must settle before stopping.
    double moved = 0;
    for (std::size_t s = 0; s < steps.size(); ++s) {
      auto& p = corrections[s];
      for (std::size_t k = 0; k < n; ++k) y[k] = x[k] + p[k];
      std::vector<double> z = y;
      steps[s](z, cs);
      for (std::size_t k = 0; k < n; ++k) {
        const double next = y[k] - z[k];
        moved = std::max(moved, std::abs(next - p[k]));
        p[k] = next;
      }
      x = std::move(z);
    }
    for (std::size_t k = 0; k < n; ++k) moved = std::max(moved, std::abs(x[k] - prev[k]));
    out.residual = residuals(x, cs).max();
    out.sweeps = sweep;
    if (out.residual <= opts.tolerance && moved <= opts.tolerance) break;
  }
  if (out.residual > opts.tolerance) {
    throw Error(ErrorCode::InfeasibleConstraints,
                "alternating projections stalled with constraint residual " + csv::format_double(out.residual),
                "constraints");
  }
  out.w = std::move(x);
  return out;
}

// ---------------------------------------------------------------------------
// Problem assembly

inline constexpr double kAqiScale = 100.0;

/// Heuristic trade-off balancing the two pair sums by their sizes.
inline double default_gamma(std::size_t n_pos, std::size_t n_neg) {
  return 0.1 * static_cast<double>(n_pos * n_pos) / static_cast<double>(n_pos * n_neg);
}

/// Rows are basis vectors of the positive and negative members.
inline QuadraticForm assemble_form(const Eigen::MatrixXd& phi_pos, const Eigen::MatrixXd& phi_neg, double gamma) {
  if (phi_pos.rows() == 0) throw Error(ErrorCode::EmptyClass, "positive class is empty", "positives");
  if (phi_neg.rows() == 0) throw Error(ErrorCode::EmptyClass, "negative class is empty", "negatives");
  const double np = static_cast<double>(phi_pos.rows());
  const double nn = static_cast<double>(phi_neg.rows());
  const Eigen::MatrixXd gram_p = phi_pos.transpose() * phi_pos;
  const Eigen::MatrixXd gram_n = phi_neg.transpose() * phi_neg;
  const Eigen::VectorXd sum_p = phi_pos.colwise().sum().transpose();
  const Eigen::VectorXd sum_n = phi_neg.colwise().sum().transpose();
  // Sums over ordered pairs of (phi_i - phi_j)(phi_i - phi_j)'.
  const Eigen::MatrixXd d_pp = 2.0 * np * gram_p - 2.0 * sum_p * sum_p.transpose();
  const Eigen::MatrixXd d_pn =
      nn * gram_p + np * gram_n - sum_p * sum_n.transpose() - sum_n * sum_p.transpose();
  Eigen::MatrixXd q = kAqiScale * kAqiScale * (d_pp - gamma * d_pn);
  q = 0.5 * (q + q.transpose()).eval();
  return {std::move(q)};
}

inline Eigen::MatrixXd basis_matrix(ModelKind kind, const std::vector<FeatureVector>& xs) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(basis_size(kind)));
  for (std::size_t r = 0; r < xs.size(); ++r) {
    const auto phi = basis(kind, xs[r]);
    for (std::size_t k = 0; k < phi.size(); ++k) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = phi[k];
  }
  return m;
}

/// Weight bounds applied uniformly to every weight.
struct UniformBounds {
  double r_min = 0.0;
  double r_max = 1.0;
};

struct AssembledProblem {
  QuadraticForm form;
  ConstraintSet constraints;
};

/// Builds the objective and constraint set for one model kind. The rank-order
/// chain applies to the linear model only; `ranking` defaults to the
/// canonical feature order.
inline AssembledProblem assemble(const Cohort& cohort, ModelKind kind, double gamma, UniformBounds bounds = {},
                                 const std::optional<FeatureRanking>& ranking = std::nullopt) {
  require_both_classes(cohort);
  if (!(gamma >= 0)) throw Error(ErrorCode::BadSpec, "gamma must be non-negative", "gamma");
  const auto phi_p = basis_matrix(kind, cohort.positives);
  const auto phi_n = basis_matrix(kind, cohort.negatives);
  AssembledProblem prob{assemble_form(phi_p, phi_n, gamma), {}};
  const std::size_t n = basis_size(kind);
  auto& cs = prob.constraints;
  cs.r_min.assign(n, bounds.r_min);
  cs.r_max.assign(n, bounds.r_max);
  cs.simplex = true;
  const Eigen::VectorXd c = phi_p.colwise().mean().transpose() - phi_n.colwise().mean().transpose();
  cs.halfspace = std::vector<double>(c.data(), c.data() + c.size());
  if (kind == ModelKind::M1) {
    const auto r = ranking.value_or(FeatureRanking::canonical());
    if (r.rank.size() != kFeatureCount || !r.is_permutation()) {
      throw Error(ErrorCode::InvalidPermutation, "feature ranking must be a permutation of 1..21", "ranking");
    }
    cs.ordering = r.order();
  }
  return prob;
}

inline double objective(std::span<const double> w, const QuadraticForm& form) {
  const Eigen::Map<const Eigen::VectorXd> v(w.data(), static_cast<Eigen::Index>(w.size()));
  return v.dot(form.Q * v);
}

// ---------------------------------------------------------------------------
// Solver

struct OptimizerConfig {
  std::optional<double> gamma;  // unset: default_gamma()
  std::size_t max_iters = 2000;
  /// Initial step as a multiple of 1/L, L an upper bound on the gradient's
  /// Lipschitz constant.
  double step_size_init = 1.0;
  double backtrack = 0.5;
  /// Stationarity (gradient-mapping) tolerance in weight units.
  double tolerance = 1e-9;
  /// Feasibility tolerance for the projection.
  double projection_tolerance = 1e-12;
  std::size_t n_starts = 8;
  std::uint64_t seed = 42;
  UniformBounds bounds;
};

inline void check_config(const OptimizerConfig& c) {
  if (c.gamma && !(*c.gamma > 0)) throw Error(ErrorCode::BadSpec, "gamma must be positive", "gamma");
  if (!(c.tolerance > 0) || !(c.projection_tolerance > 0)) throw Error(ErrorCode::BadSpec, "tolerances must be positive", "tolerance");
  if (!(c.backtrack > 0 && c.backtrack < 1)) throw Error(ErrorCode::BadSpec, "backtrack factor must be in (0,1)", "backtrack");
  if (!(c.step_size_init > 0)) throw Error(ErrorCode::BadSpec, "step_size_init must be positive", "step_size_init");
  if (c.n_starts < 1) throw Error(ErrorCode::BadSpec, "n_starts must be at least 1", "n_starts");
  if (c.max_iters < 1) throw Error(ErrorCode::BadSpec, "max_iters must be at least 1", "max_iters");
}

struct StartTrace {
  std::size_t start = 0;
  std::vector<double> objective;  // value after each accepted iterate, first entry is the start
  double stationarity = 0;
  bool converged = false;
};

struct SolveResult {
  std::vector<double> w;
  double objective_value = 0;
  std::size_t iterations = 0;
  ConstraintResiduals constraint_residuals;
  std::size_t start_index_of_best = 0;
  /// False when the best start hit max_iters above the stationarity tolerance.
  bool converged = true;
  std::vector<StartTrace> traces;
};

namespace detail {

inline std::vector<std::vector<double>> starting_points(std::size_t n, const OptimizerConfig& cfg) {
  std::vector<std::vector<double>> starts;
  starts.emplace_back(n, 1.0 / static_cast<double>(n));
  // Unit vectors: after projection these become the polytope's "corners" in
  // each weight's direction, where indefinite objectives tend to bottom out.
  const std::size_t n_vertex = std::min(n, (cfg.n_starts - 1) / 2);
  for (std::size_t k = 0; k < n_vertex; ++k) {
    std::vector<double> e(n, 0.0);
    e[k] = 1.0;
    starts.push_back(std::move(e));
  }
  while (starts.size() < cfg.n_starts) {
    std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(starts.size())};
    std::mt19937_64 rng(seq);
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> p(n);
    double s = 0;
    for (auto& v : p) s += (v = expo(rng));
    for (auto& v : p) v /= s;
    starts.push_back(std::move(p));
  }
  return starts;
}

}  // namespace detail

/// Multi-start projected gradient with backtracking. Each accepted step
/// satisfies a sufficient-decrease test, so objective traces are
/// nonincreasing. Ties between starts go to the lowest start index.
inline SolveResult solve(const QuadraticForm& form, const ConstraintSet& cs, const OptimizerConfig& cfg) {
  check_config(cfg);
  const auto n = static_cast<std::size_t>(form.Q.rows());
  require_feasible(cs, n);
  const ProjectionOptions popts{cfg.projection_tolerance, 20000};
  const double lipschitz = 2.0 * form.Q.norm();
  const double t0 = lipschitz > 0 ? cfg.step_size_init / lipschitz : 1.0;
  const double t_max = 64.0 * t0;
  constexpr double kArmijo = 1e-4;

  SolveResult best;
  best.objective_value = std::numeric_limits<double>::infinity();
  const auto starts = detail::starting_points(n, cfg);
  for (std::size_t s = 0; s < starts.size(); ++s) {
    StartTrace trace;
    trace.start = s;
    std::vector<double> w = project(starts[s], cs, popts).w;
    double f = objective(w, form);
    trace.objective.push_back(f);
    std::size_t iters = 0;
    double t = t0;
    double stationarity = 0;
    if (lipschitz == 0) {
      trace.converged = true;  // constant objective: every feasible point is optimal
    }
    while (!trace.converged && iters < cfg.max_iters) {
      ++iters;
      const Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(n));
      const Eigen::VectorXd grad = 2.0 * (form.Q * wv);
      t = std::min(t / cfg.backtrack, t_max);
      bool accepted = false;
      std::vector<double> cand(n);
      double f_new = f;
      double step_norm2 = 0, step_inf = 0;
      while (t > 1e-12 * t0) {
        for (std::size_t k = 0; k < n; ++k) cand[k] = w[k] - t * grad[static_cast<Eigen::Index>(k)];
        cand = project(cand, cs, popts).w;
        step_norm2 = 0;
        step_inf = 0;
        for (std::size_t k = 0; k < n; ++k) {
          const double d = cand[k] - w[k];
          step_norm2 += d * d;
          step_inf = std::max(step_inf, std::abs(d));
        }
        f_new = objective(cand, form);
        if (f_new <= f - kArmijo / t * step_norm2) {
          accepted = true;
          break;
        }
        t *= cfg.backtrack;
      }
      if (!accepted || step_inf == 0) {
        stationarity = 0;
        trace.converged = true;
        break;
      }
      assert(f_new <= f);
      // Gradient-mapping norm, rescaled to a step of 1/L.
      stationarity = step_inf * t0 / t;
      w = std::move(cand);
      f = f_new;
      trace.objective.push_back(f);
      if (stationarity <= cfg.tolerance) trace.converged = true;
    }
    trace.stationarity = stationarity;
    if (f < best.objective_value) {
      best.objective_value = f;
      best.w = w;
      best.iterations = iters;
      best.start_index_of_best = s;
      best.converged = trace.converged;
    }
    best.traces.push_back(std::move(trace));
  }
  best.constraint_residuals = residuals(best.w, cs);
  return best;
}

struct RegressionTrainResult {
  ModelWeights model;
  SolveResult solve;
  double gamma = 0;
};

/// assemble + solve for one cohort, returning simplex weights ready to score.
inline RegressionTrainResult train_regression(const Cohort& cohort, ModelKind kind, const OptimizerConfig& cfg = {},
                                              const std::optional<FeatureRanking>& ranking = std::nullopt) {
  check_config(cfg);
  require_both_classes(cohort);
  const double gamma = cfg.gamma.value_or(default_gamma(cohort.positives.size(), cohort.negatives.size()));
  const auto prob = assemble(cohort, kind, gamma, cfg.bounds, ranking);
  RegressionTrainResult out;
  out.gamma = gamma;
  out.solve = solve(prob.form, prob.constraints, cfg);
  out.model = {kind, kFeatureCount, out.solve.w};
  return out;
}

// ---------------------------------------------------------------------------
// Documents

inline nlohmann::json optimizer_config_to_json(const OptimizerConfig& c) {
  return {{"gamma", c.gamma ? nlohmann::json(*c.gamma) : nlohmann::json(nullptr)},
          {"max_iters", c.max_iters},
          {"step_size_init", c.step_size_init},
          {"backtrack", c.backtrack},
          {"tolerance", c.tolerance},
          {"projection_tolerance", c.projection_tolerance},
          {"n_starts", c.n_starts},
          {"seed", c.seed},
          {"bounds", {{"r_min", c.bounds.r_min}, {"r_max", c.bounds.r_max}}}};
}

inline OptimizerConfig optimizer_config_from_json(const nlohmann::json& j) {
  OptimizerConfig c;
  try {
    if (j.contains("gamma") && !j.at("gamma").is_null()) c.gamma = j.at("gamma").get<double>();
    c.max_iters = j.value("max_iters", c.max_iters);
    c.step_size_init = j.value("step_size_init", c.step_size_init);
    c.backtrack = j.value("backtrack", c.backtrack);
    c.tolerance = j.value("tolerance", c.tolerance);
    c.projection_tolerance = j.value("projection_tolerance", c.projection_tolerance);
    c.n_starts = j.value("n_starts", c.n_starts);
    c.seed = j.value("seed", c.seed);
    if (j.contains("bounds")) {
      c.bounds.r_min = j.at("bounds").value("r_min", 0.0);
      c.bounds.r_max = j.at("bounds").value("r_max", 1.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed optimizer config: ") + e.what(), "config");
  }
  check_config(c);
  return c;
}

inline nlohmann::json solve_log_to_json(const SolveResult& r) {
  nlohmann::json starts = nlohmann::json::array();
  for (const auto& t : r.traces) {
    starts.push_back({{"start", t.start},
                      {"objective", t.objective},
                      {"stationarity", t.stationarity},
                      {"converged", t.converged}});
  }
  return {{"objective_value", r.objective_value},
          {"iterations", r.iterations},
          {"start_index_of_best", r.start_index_of_best},
          {"converged", r.converged},
          {"constraint_residuals",
           {{"sum", r.constraint_residuals.sum},
            {"bounds", r.constraint_residuals.bounds},
            {"ordering", r.constraint_residuals.ordering},
            {"halfspace", r.constraint_residuals.halfspace}}},
          {"starts", starts}};
}

}  // namespace aqi
