#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "aqi/cohort.hpp"
#include "aqi/csv.hpp"
#include "aqi/error.hpp"
#include "aqi/features.hpp"
#include "aqi/scoring.hpp"

namespace aqi {

// ---------------------------------------------------------------------------
// Minimum-requirements filter

struct FilterSpec {
  AcademicLevel level = AcademicLevel::AssistProf;
  int k = 1;  // Q1 first-author multiplier
  int l = 1;  // total-paper multiplier
  int min_q1_first_author = 2;
  int min_total_papers = 2;
  int max_national_rank = 10;       // BSc and PhD institutions
  int max_international_rank = 100;  // BSc and PhD institutions
  double min_grad_gpa = 3.5;         // on a 4.00 scale
  double gpa_scale = 4.0;            // scale the candidates' GPAs are reported on

  static FilterSpec for_level(AcademicLevel level) {
    FilterSpec s;
    s.level = level;
    switch (level) {
      case AcademicLevel::AssistProf: s.k = 1; s.l = 1; break;
      case AcademicLevel::AssocProf: s.k = 3; s.l = 5; break;
      case AcademicLevel::Prof: s.k = 5; s.l = 8; break;
    }
    s.min_q1_first_author = 2 * s.k;
    s.min_total_papers = 2 * s.l;
    return s;
  }
};

struct FilterResult {
  std::string candidate_id;
  bool passed = true;
  std::vector<std::string> reasons;
};

/// Pass iff every applicable threshold is met. Rank thresholds apply only to
/// ranks that are present; a rank passes when it is at or better than the
/// threshold position.
inline FilterResult apply_filter(const RawAcademicRecord& r, const FilterSpec& spec) {
  FilterResult out{r.candidate_id, true, {}};
  auto fail = [&](std::string why) {
    out.passed = false;
    out.reasons.push_back(std::move(why));
  };
  if (r.n_q1_fa < spec.min_q1_first_author) {
    fail("needs ≥ " + std::to_string(spec.min_q1_first_author) + " Q1 first-author papers (has " +
         std::to_string(r.n_q1_fa) + ")");
  }
  const int total = r.n_q1 + r.n_q2 + r.n_q3 + r.n_q4;
  if (total < spec.min_total_papers) {
    fail("needs ≥ " + std::to_string(spec.min_total_papers) + " SCI-SCIE papers in Q1-Q4 (has " +
         std::to_string(total) + ")");
  }
  auto check_rank = [&](const std::optional<int>& rank, int limit, const char* what) {
    if (rank && *rank > limit) {
      fail(std::string(what) + " rank " + std::to_string(*rank) + " is worse than " + std::to_string(limit));
    }
  };
  check_rank(r.r_nat_bs, spec.max_national_rank, "national BSc university");
  check_rank(r.r_nat_phd, spec.max_national_rank, "national PhD university");
  check_rank(r.r_inat_bs, spec.max_international_rank, "international BSc university");
  check_rank(r.r_inat_phd, spec.max_international_rank, "international PhD university");
  const double gpa4 = r.gpa_g * 4.0 / spec.gpa_scale;
  if (gpa4 < spec.min_grad_gpa) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "graduate GPA %.2f below %.1f/4.00", gpa4, spec.min_grad_gpa);
    fail(buf);
  }
  return out;
}

inline nlohmann::json filter_spec_to_json(const FilterSpec& s) {
  return {{"level", to_string(s.level)},
          {"K", s.k},
          {"L", s.l},
          {"min_q1_first_author", s.min_q1_first_author},
          {"min_total_papers", s.min_total_papers},
          {"max_national_rank", s.max_national_rank},
          {"max_international_rank", s.max_international_rank},
          {"min_grad_gpa", s.min_grad_gpa},
          {"gpa_scale", s.gpa_scale}};
}

/// The level fixes K and L and the derived paper minimums; explicit keys
/// override individual thresholds.
inline FilterSpec filter_spec_from_json(const nlohmann::json& j) {
  try {
    auto s = FilterSpec::for_level(level_from_string(j.value("level", std::string("AssistProf"))));
    s.min_q1_first_author = j.value("min_q1_first_author", s.min_q1_first_author);
    s.min_total_papers = j.value("min_total_papers", s.min_total_papers);
    s.max_national_rank = j.value("max_national_rank", s.max_national_rank);
    s.max_international_rank = j.value("max_international_rank", s.max_international_rank);
    s.min_grad_gpa = j.value("min_grad_gpa", s.min_grad_gpa);
    s.gpa_scale = j.value("gpa_scale", s.gpa_scale);
    if (s.min_q1_first_author < 0 || s.min_total_papers < 0 || s.max_national_rank < 1 ||
        s.max_international_rank < 1 || !(s.min_grad_gpa > 0) || !(s.gpa_scale > 0)) {
      throw Error(ErrorCode::BadSpec, "filter thresholds must be positive", "filter");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed filter spec: ") + e.what(), "filter");
  }
}

// ---------------------------------------------------------------------------
// Committee rank aggregation

/// Averages each feature's rank over the poll and re-ranks by that average.
/// Equal averages keep the canonical feature order.
inline FeatureRanking aggregate_rankings(const std::vector<FeatureRanking>& rankings) {
  if (rankings.empty()) throw Error(ErrorCode::EmptyInput, "no rankings to aggregate", "rankings");
  const std::size_t n = rankings.front().rank.size();
  for (std::size_t r = 0; r < rankings.size(); ++r) {
    if (rankings[r].rank.size() != n || !rankings[r].is_permutation()) {
      throw Error(ErrorCode::InvalidPermutation,
                  "ranking " + std::to_string(r) + " is not a permutation of 1.." + std::to_string(n),
                  "rankings[" + std::to_string(r) + "]");
    }
  }
  // Rank sums order exactly like averages and stay integral.
  std::vector<long long> sums(n, 0);
  for (const auto& r : rankings)
    for (std::size_t i = 0; i < n; ++i) sums[i] += r.rank[i];
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return sums[a] < sums[b]; });
  FeatureRanking out;
  out.rank.assign(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos) out.rank[idx[pos]] = static_cast<int>(pos + 1);
  return out;
}

/// One ranking per CSV row; columns are feature names (any order) or, when
/// the header is absent from the known names, positional.
inline std::vector<FeatureRanking> read_rankings_csv(std::istream& in) {
  const auto table = csv::read(in);
  std::vector<std::size_t> col_to_feature(table.header.size());
  bool named = true;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const auto idx = feature_index(table.header[c]);
    if (!idx) {
      named = false;
      break;
    }
    col_to_feature[c] = *idx;
  }
  if (named && table.header.size() != kFeatureCount) {
    throw Error(ErrorCode::InvalidPermutation, "a named ranking header must list all 21 features", "header");
  }
  std::vector<FeatureRanking> out;
  for (const auto& row : table.rows) {
    FeatureRanking r;
    r.rank.assign(row.cells.size(), 0);
    for (std::size_t c = 0; c < row.cells.size(); ++c) {
      const auto v = csv::parse_number<int>(row.cells[c]);
      if (!v) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(row.line) + ": rank must be an integer",
                    "line " + std::to_string(row.line));
      }
      r.rank[named ? col_to_feature[c] : c] = *v;
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline nlohmann::json ranking_to_json(const FeatureRanking& r) {
  nlohmann::json j = {{"rank", r.rank}};
  if (r.rank.size() == kFeatureCount) {
    nlohmann::json named = nlohmann::json::object();
    for (std::size_t i = 0; i < kFeatureCount; ++i) named[std::string(kFeatureNames[i])] = r.rank[i];
    j["by_feature"] = named;
  }
  return j;
}

inline FeatureRanking ranking_from_json(const nlohmann::json& j) {
  FeatureRanking r;
  if (j.is_array()) r.rank = j.get<std::vector<int>>();
  else if (j.contains("rank")) r.rank = j.at("rank").get<std::vector<int>>();
  else throw Error(ErrorCode::ParseError, "ranking must be an array or an object with 'rank'", "rank");
  return r;
}

// ---------------------------------------------------------------------------
// Reports

struct ReportEntry {
  std::string candidate_id;
  double aqi = 0;
  double f_value = 0;
  bool passed_filter = true;
  std::vector<std::string> reasons;
  std::size_t position = 0;  // 1-based
};

/// Sorted by AQI descending, ties by candidate id ascending.
struct AQIReport {
  std::string model_id;
  std::vector<ReportEntry> entries;
};

/// Candidates normalized with one set of caps.
struct CandidateBatch {
  NormalizationCaps caps;
  std::vector<FeatureVector> candidates;
};

/// Scores every candidate, including ones that failed the filter (those are
/// flagged, not dropped). `filter_results` is matched by candidate id.
inline AQIReport rank_candidates(const TrainedModel& model, const CandidateBatch& batch,
                                 const std::vector<FilterResult>& filter_results = {}) {
  if (!(batch.caps == model.caps)) {
    throw Error(ErrorCode::CapsMismatch, "candidates were normalized with caps that differ from the model's snapshot",
                "caps");
  }
  std::map<std::string, const FilterResult*> by_id;
  for (const auto& f : filter_results) by_id[f.candidate_id] = &f;
  AQIReport report;
  for (const auto& x : batch.candidates) {
    ReportEntry e;
    e.candidate_id = x.candidate_id;
    e.f_value = score_f(model, x);
    e.aqi = aqi_from_f(e.f_value);
    if (auto it = by_id.find(x.candidate_id); it != by_id.end()) {
      e.passed_filter = it->second->passed;
      e.reasons = it->second->reasons;
    }
    report.entries.push_back(std::move(e));
  }
  std::sort(report.entries.begin(), report.entries.end(), [](const ReportEntry& a, const ReportEntry& b) {
    if (a.aqi != b.aqi) return a.aqi > b.aqi;
    return a.candidate_id < b.candidate_id;
  });
  for (std::size_t i = 0; i < report.entries.size(); ++i) report.entries[i].position = i + 1;
  return report;
}

inline nlohmann::json report_to_json(const AQIReport& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"position", e.position},
                       {"candidate_id", e.candidate_id},
                       {"aqi", e.aqi},
                       {"f_value", e.f_value},
                       {"passed_filter", e.passed_filter},
                       {"reasons", e.reasons}});
  }
  return {{"model_id", r.model_id}, {"entries", entries}};
}

inline void write_report_csv(std::ostream& out, const AQIReport& r) {
  csv::write_row(out, {"position", "candidate_id", "aqi", "passed_filter", "reasons"});
  for (const auto& e : r.entries) {
    std::string reasons;
    for (const auto& s : e.reasons) reasons += (reasons.empty() ? "" : "; ") + s;
    char aqi[32];
    std::snprintf(aqi, sizeof(aqi), "%.4f", e.aqi);
    csv::write_row(out, {std::to_string(e.position), e.candidate_id, aqi, e.passed_filter ? "true" : "false", reasons});
  }
}

}  // namespace aqi
