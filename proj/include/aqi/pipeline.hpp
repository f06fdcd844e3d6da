#pragma once

// Train and score end to end. Everything here is a pure function of its
// inputs so that the CLI and the HTTP service produce identical artifacts.

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aqi/cohort.hpp"
#include "aqi/qp_optimizer.hpp"
#include "aqi/scoring.hpp"
#include "aqi/screening.hpp"
#include "aqi/siamese.hpp"

namespace aqi {

struct TrainRequest {
  ScorerKind kind = ScorerKind::M1;
  OptimizerConfig optimizer;
  TrainConfig siamese;
  std::optional<FeatureRanking> ranking;  // linear model only
};

/// {"kind": ..., "optimizer": {...}, "siamese": {...}, "ranking": [...]}.
/// Unrelated config blocks are ignored.
inline TrainRequest train_request_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "training request must be an object");
  TrainRequest r;
  try {
    r.kind = scorer_kind_from_string(j.at("kind").get<std::string>());
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::ParseError, "training request needs a string 'kind'", "kind");
  }
  auto block = [&](const char* key) { return j.contains(key) ? j.at(key) : nlohmann::json::object(); };
  try {
    if (r.kind == ScorerKind::M1 || r.kind == ScorerKind::M2) {
      r.optimizer = optimizer_config_from_json(block("optimizer"));
    } else {
      r.siamese = train_config_from_json(block("siamese"));
    }
  } catch (const Error& e) {
    const char* prefix = (r.kind == ScorerKind::M1 || r.kind == ScorerKind::M2) ? "optimizer." : "siamese.";
    throw Error(e.code(), e.what(), prefix + e.field());
  }
  if (j.contains("ranking") && !j.at("ranking").is_null()) {
    try {
      r.ranking = ranking_from_json(j.at("ranking"));
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::ParseError, "ranking must be a list of integers", "ranking");
    }
  }
  return r;
}

inline nlohmann::json train_request_to_json(const TrainRequest& r) {
  nlohmann::json j = {{"kind", to_string(r.kind)}};
  if (r.kind == ScorerKind::M1 || r.kind == ScorerKind::M2) j["optimizer"] = optimizer_config_to_json(r.optimizer);
  else j["siamese"] = train_config_to_json(r.siamese);
  if (r.ranking) j["ranking"] = r.ranking->rank;
  return j;
}

inline std::string cohort_digest(const Cohort& c) { return checksum(cohort_to_json(c).dump()); }

/// One entry per optimizer iteration (best start) or training epoch.
struct TraceEntry {
  std::size_t index = 0;
  double value = 0;
};

struct TrainOutcome {
  TrainedModel model;
  std::string metric;  // "objective" or "loss"
  std::vector<TraceEntry> trace;
  nlohmann::json details = nlohmann::json::object();
};

inline TrainOutcome train_model(const Cohort& cohort, const TrainRequest& req) {
  require_both_classes(cohort);
  check_cohort(cohort);
  TrainOutcome out;
  out.model.kind = req.kind;
  out.model.caps = cohort.caps;
  nlohmann::json meta = {{"cohort_hash", cohort_digest(cohort)},
                         {"level", to_string(cohort.level)},
                         {"n_pos", cohort.positives.size()},
                         {"n_neg", cohort.negatives.size()}};

  if (req.kind == ScorerKind::M1 || req.kind == ScorerKind::M2) {
    const auto kind = req.kind == ScorerKind::M1 ? ModelKind::M1 : ModelKind::M2;
    const auto r = train_regression(cohort, kind, req.optimizer, req.ranking);
    out.model.scorer = r.model;
    meta["config"] = optimizer_config_to_json(req.optimizer);
    meta["seed"] = req.optimizer.seed;
    meta["gamma"] = r.gamma;
    meta["objective"] = r.solve.objective_value;
    meta["converged"] = r.solve.converged;
    if (kind == ModelKind::M1) {
      meta["ranking"] = req.ranking.value_or(FeatureRanking::canonical()).rank;
    }
    out.metric = "objective";
    const auto& best = r.solve.traces.at(r.solve.start_index_of_best).objective;
    for (std::size_t i = 0; i < best.size(); ++i) out.trace.push_back({i, best[i]});
    out.details = solve_log_to_json(r.solve);
  } else {
    const auto net = init_network(req.siamese.layer_sizes, req.siamese.seed, req.siamese.init_scale);
    SiameseTrainResult r;
    if (req.kind == ScorerKind::SiameseContrastive) {
      r = train_contrastive(net, make_pairs(cohort), req.siamese);
    } else {
      const auto anchor = cohort.anchor.value_or(default_anchor(cohort));
      r = train_triplet(net, make_triplets(cohort, anchor), req.siamese);
      meta["anchor"] = anchor.values;
    }
    out.model.scorer = r.net;
    meta["config"] = train_config_to_json(req.siamese);
    meta["seed"] = req.siamese.seed;
    meta["final_loss"] = r.loss_history.empty() ? 0.0 : r.loss_history.back();
    out.metric = "loss";
    for (std::size_t i = 0; i < r.loss_history.size(); ++i) out.trace.push_back({i, r.loss_history[i]});
  }
  out.model.training = std::move(meta);
  return out;
}

/// Records from a JSON array, each optionally carrying a "class" label.
inline std::vector<RecordRow> records_from_json(const nlohmann::json& j, const std::string& path = "records") {
  if (!j.is_array()) throw Error(ErrorCode::ParseError, "records must be an array", path);
  std::vector<RecordRow> rows;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = path + "[" + std::to_string(i) + "]";
    RecordRow row;
    row.line = i;
    row.record = record_from_json(j[i], where);
    if (j[i].contains("class")) row.label = j[i].at("class").is_string() ? j[i].at("class").get<std::string>() : "";
    rows.push_back(std::move(row));
  }
  return rows;
}

/// validate -> derive -> normalize every record with `caps`. All failures
/// are collected and reported together with field paths.
inline std::vector<FeatureVector> featurize_all(const std::vector<RecordRow>& rows, const NormalizationCaps& caps,
                                                const std::string& path = "records") {
  std::vector<FeatureVector> xs;
  std::string failures, first_field;
  auto note = [&](const std::string& field, const std::string& message) {
    if (first_field.empty()) first_field = field;
    failures += (failures.empty() ? "" : "; ") + field + ": " + message;
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = path + "[" + std::to_string(i) + "]";
    const auto report = validate_record(rows[i].record, caps.gpa_scale);
    if (!report.ok()) {
      for (const auto& v : report.violations) note(where + "." + v.field, v.message);
      continue;
    }
    try {
      xs.push_back(normalize(derive_features(rows[i].record), caps));
    } catch (const Error& e) {
      note(where + "." + e.field(), e.what());
    }
  }
  if (!failures.empty()) throw Error(ErrorCode::ValidationFailed, failures, first_field);
  return xs;
}

/// Full scoring pass. Without an explicit filter the one for the training
/// cohort's academic level is used.
inline AQIReport score_records(const TrainedModel& model, const std::string& model_id,
                               const std::vector<RecordRow>& rows, const std::optional<FilterSpec>& filter) {
  const auto xs = featurize_all(rows, model.caps);
  FilterSpec spec;
  if (filter) {
    spec = *filter;
  } else {
    const auto level = model.training.value("level", std::string("AssistProf"));
    spec = FilterSpec::for_level(level_from_string(level));
    spec.gpa_scale = model.caps.gpa_scale;
  }
  std::vector<FilterResult> results;
  for (const auto& row : rows) results.push_back(apply_filter(row.record, spec));
  auto report = rank_candidates(model, CandidateBatch{model.caps, xs}, results);
  report.model_id = model_id;
  return report;
}

inline nlohmann::json filter_results_to_json(const std::vector<FilterResult>& results) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : results) {
    out.push_back({{"candidate_id", r.candidate_id}, {"passed", r.passed}, {"reasons", r.reasons}});
  }
  return out;
}

}  // namespace aqi
