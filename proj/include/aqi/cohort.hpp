#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "aqi/error.hpp"
#include "aqi/features.hpp"

namespace aqi {

enum class AcademicLevel { AssistProf, AssocProf, Prof };
enum class ResearchType { Theoretical, Applied };

inline const char* to_string(AcademicLevel l) {
  switch (l) {
    case AcademicLevel::AssistProf: return "AssistProf";
    case AcademicLevel::AssocProf: return "AssocProf";
    case AcademicLevel::Prof: return "Prof";
  }
  return "AssistProf";
}

inline AcademicLevel level_from_string(const std::string& s) {
  if (s == "AssistProf") return AcademicLevel::AssistProf;
  if (s == "AssocProf") return AcademicLevel::AssocProf;
  if (s == "Prof") return AcademicLevel::Prof;
  throw Error(ErrorCode::ParseError, "level must be AssistProf, AssocProf or Prof, got '" + s + "'", "level");
}

inline const char* to_string(ResearchType t) { return t == ResearchType::Theoretical ? "theoretical" : "applied"; }

inline ResearchType research_type_from_string(const std::string& s) {
  if (s == "theoretical") return ResearchType::Theoretical;
  if (s == "applied") return ResearchType::Applied;
  throw Error(ErrorCode::ParseError, "research_type must be theoretical or applied, got '" + s + "'",
              "research_type");
}

/// Non-fatal diagnostics collected by operations that can proceed anyway.
using Warnings = std::vector<std::string>;

/// Reference data: a positive (top-institution) class and a negative
/// (average-institution) class, normalized with `caps`.
struct Cohort {
  std::vector<FeatureVector> positives;
  std::vector<FeatureVector> negatives;
  AcademicLevel level = AcademicLevel::AssistProf;
  std::string field_tag = "general";
  ResearchType research_type = ResearchType::Applied;
  NormalizationCaps caps = NormalizationCaps::defaults();
  std::optional<FeatureVector> anchor;

  bool operator==(const Cohort&) const = default;
};

inline bool in_unit_cube(const FeatureVector& x) {
  return std::all_of(x.values.begin(), x.values.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

inline void check_cohort(const Cohort& c) {
  std::set<std::string> ids;
  auto check = [&](const FeatureVector& x, const char* cls) {
    if (!in_unit_cube(x)) {
      throw Error(ErrorCode::BadSpec, std::string(cls) + " member '" + x.candidate_id + "' has features outside [0,1]",
                  x.candidate_id);
    }
    if (!ids.insert(x.candidate_id).second) {
      throw Error(ErrorCode::BadSpec, "duplicate candidate id '" + x.candidate_id + "'", x.candidate_id);
    }
  };
  for (const auto& x : c.positives) check(x, "positive");
  for (const auto& x : c.negatives) check(x, "negative");
  if (c.anchor && !in_unit_cube(*c.anchor)) throw Error(ErrorCode::BadSpec, "anchor outside [0,1]", "anchor");
}

inline void require_both_classes(const Cohort& c) {
  if (c.positives.empty()) throw Error(ErrorCode::EmptyClass, "positive class is empty", "positives");
  if (c.negatives.empty()) throw Error(ErrorCode::EmptyClass, "negative class is empty", "negatives");
}

// ---------------------------------------------------------------------------
// Synthetic generation

struct SyntheticSpec {
  std::size_t n_pos = 20;
  std::size_t n_neg = 20;
  std::array<double, kFeatureCount> pos_location = default_pos_location();
  std::array<double, kFeatureCount> neg_location = default_neg_location();
  double dispersion = 0.1;
  std::uint64_t seed = 42;

  // Top-institution profiles sit well above average-institution ones in every
  // feature; GPA is the least separating, matching how little it varies.
  static constexpr std::array<double, kFeatureCount> default_pos_location() {
    return {0.80, 0.75, 0.70, 0.72, 0.45, 0.55, 0.90, 0.40, 0.60, 0.60, 0.65,
            0.95, 0.85, 0.92, 0.60, 0.92, 0.88, 0.45, 0.35, 0.45, 0.65};
  }
  static constexpr std::array<double, kFeatureCount> default_neg_location() {
    return {0.30, 0.35, 0.25, 0.30, 0.15, 0.15, 0.45, 0.10, 0.20, 0.20, 0.45,
            0.60, 0.40, 0.55, 0.40, 0.82, 0.78, 0.35, 0.25, 0.30, 0.45};
  }
};

inline void check_spec(const SyntheticSpec& s) {
  if (s.n_pos < 1 || s.n_neg < 1) throw Error(ErrorCode::BadSpec, "n_pos and n_neg must be at least 1", "n_pos");
  if (!(s.dispersion >= 0)) throw Error(ErrorCode::BadSpec, "dispersion must be non-negative", "dispersion");
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const auto name = std::string(kFeatureNames[i]);
    if (!(s.pos_location[i] >= 0 && s.pos_location[i] <= 1))
      throw Error(ErrorCode::BadSpec, "positive location outside [0,1]", "pos_location." + name);
    if (!(s.neg_location[i] >= 0 && s.neg_location[i] <= 1))
      throw Error(ErrorCode::BadSpec, "negative location outside [0,1]", "neg_location." + name);
    if (s.pos_location[i] < s.neg_location[i])
      throw Error(ErrorCode::BadSpec, "positive location below negative location", "pos_location." + name);
  }
}

namespace detail {

/// Normal(location, dispersion) restricted to [0,1] by rejection.
inline double sample_truncated(std::mt19937_64& rng, double location, double dispersion) {
  if (dispersion == 0.0) return location;
  std::normal_distribution<double> dist(location, dispersion);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double v = dist(rng);
    if (v >= 0.0 && v <= 1.0) return v;
  }
  return std::clamp(location, 0.0, 1.0);
}

inline std::string member_id(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%03zu", prefix, i + 1);
  return buf;
}

inline std::array<double, kFeatureCount> class_mean(const std::vector<FeatureVector>& xs) {
  std::array<double, kFeatureCount> m{};
  for (const auto& x : xs)
    for (std::size_t i = 0; i < kFeatureCount; ++i) m[i] += x.values[i];
  for (auto& v : m) v /= static_cast<double>(xs.size());
  return m;
}

}  // namespace detail

/// Draws a cohort from `spec`. If a draw leaves some positive-class feature
/// mean below the negative-class mean, it is redrawn from the next seed and
/// a warning is recorded.
inline Cohort generate(const SyntheticSpec& spec, Warnings* warnings = nullptr) {
  check_spec(spec);
  constexpr int kMaxAttempts = 64;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::mt19937_64 rng(spec.seed + static_cast<std::uint64_t>(attempt));
    Cohort c;
    auto draw = [&](char prefix, std::size_t n, const std::array<double, kFeatureCount>& loc,
                    std::vector<FeatureVector>& out) {
      for (std::size_t k = 0; k < n; ++k) {
        FeatureVector x;
        x.candidate_id = detail::member_id(prefix, k);
        for (std::size_t i = 0; i < kFeatureCount; ++i) x.values[i] = detail::sample_truncated(rng, loc[i], spec.dispersion);
        out.push_back(std::move(x));
      }
    };
    draw('p', spec.n_pos, spec.pos_location, c.positives);
    draw('n', spec.n_neg, spec.neg_location, c.negatives);
    const auto mp = detail::class_mean(c.positives);
    const auto mn = detail::class_mean(c.negatives);
    bool separated = true;
    for (std::size_t i = 0; i < kFeatureCount; ++i) separated = separated && mp[i] >= mn[i];
    if (separated) return c;
    if (warnings) {
      warnings->push_back("draw with seed " + std::to_string(spec.seed + attempt) +
                          " had a positive-class mean below the negative-class mean; redrawing");
    }
  }
  throw Error(ErrorCode::BadSpec, "could not draw a cohort whose positive means dominate the negative means",
              "pos_location");
}

// ---------------------------------------------------------------------------
// Anchors, pairs, triplets

/// Componentwise percentile (linear interpolation between order statistics).
inline FeatureVector percentile_vector(const std::vector<FeatureVector>& xs, double q) {
  if (xs.empty()) throw Error(ErrorCode::EmptyClass, "cannot take a percentile of an empty class");
  FeatureVector out;
  out.candidate_id = "anchor";
  std::vector<double> col(xs.size());
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    for (std::size_t k = 0; k < xs.size(); ++k) col[k] = xs[k].values[i];
    std::sort(col.begin(), col.end());
    const double pos = q * static_cast<double>(col.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, col.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    out.values[i] = std::min(1.0, col[lo] + frac * (col[hi] - col[lo]));
  }
  return out;
}

/// Ideal-but-realistic reference profile: the 95th percentile of the
/// positive class in every feature.
inline FeatureVector default_anchor(const Cohort& c) { return percentile_vector(c.positives, 0.95); }

struct TrainingPair {
  FeatureVector first;
  FeatureVector second;
  int similar = 0;  // 1 for same-class pairs, 0 for cross-class pairs
};

struct TrainingTriplet {
  FeatureVector anchor;
  FeatureVector positive;
  FeatureVector negative;
};

/// Unordered positive pairs (label 1) followed by all positive x negative
/// pairs (label 0). Self pairs are excluded.
inline std::vector<TrainingPair> make_pairs(const Cohort& c, Warnings* warnings = nullptr) {
  require_both_classes(c);
  std::vector<TrainingPair> pairs;
  pairs.reserve(c.positives.size() * (c.positives.size() - 1) / 2 + c.positives.size() * c.negatives.size());
  for (std::size_t i = 0; i < c.positives.size(); ++i)
    for (std::size_t j = i + 1; j < c.positives.size(); ++j) pairs.push_back({c.positives[i], c.positives[j], 1});
  if (c.positives.size() == 1 && warnings) {
    warnings->push_back("positive class has a single member; no similar pairs can be formed");
  }
  for (const auto& p : c.positives)
    for (const auto& n : c.negatives) pairs.push_back({p, n, 0});
  return pairs;
}

/// One triplet per (positive, negative) combination, all sharing `anchor`.
inline std::vector<TrainingTriplet> make_triplets(const Cohort& c, const FeatureVector& anchor) {
  require_both_classes(c);
  if (!in_unit_cube(anchor)) throw Error(ErrorCode::BadSpec, "anchor outside [0,1]", "anchor");
  std::vector<TrainingTriplet> out;
  out.reserve(c.positives.size() * c.negatives.size());
  for (const auto& p : c.positives)
    for (const auto& n : c.negatives) out.push_back({anchor, p, n});
  return out;
}

// ---------------------------------------------------------------------------
// Documents

inline constexpr int kCohortFormatVersion = 1;

inline nlohmann::json cohort_to_json(const Cohort& c) {
  nlohmann::json members = nlohmann::json::array();
  auto add = [&](const FeatureVector& x, const char* cls) {
    members.push_back({{"id", x.candidate_id}, {"class", cls}, {"features", x.values}});
  };
  for (const auto& x : c.positives) add(x, "positive");
  for (const auto& x : c.negatives) add(x, "negative");
  nlohmann::json names = nlohmann::json::array();
  for (auto n : kFeatureNames) names.push_back(std::string(n));
  return {{"format", "aqi-cohort"},
          {"version", kCohortFormatVersion},
          {"level", to_string(c.level)},
          {"field", c.field_tag},
          {"research_type", to_string(c.research_type)},
          {"feature_names", names},
          {"caps", caps_to_json(c.caps)},
          {"members", members},
          {"anchor", c.anchor ? nlohmann::json(c.anchor->values) : nlohmann::json(nullptr)}};
}

inline Cohort cohort_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "aqi-cohort") {
      throw Error(ErrorCode::ParseError, "not a cohort document", "format");
    }
    if (j.value("version", 0) != kCohortFormatVersion) {
      throw Error(ErrorCode::ParseError, "unsupported cohort document version", "version");
    }
    Cohort c;
    c.level = level_from_string(j.value("level", std::string("AssistProf")));
    c.field_tag = j.value("field", std::string("general"));
    c.research_type = research_type_from_string(j.value("research_type", std::string("applied")));
    if (j.contains("caps")) c.caps = caps_from_json(j.at("caps"));
    const auto& members = j.at("members");
    for (std::size_t k = 0; k < members.size(); ++k) {
      const auto& m = members[k];
      const std::string path = "members[" + std::to_string(k) + "]";
      FeatureVector x;
      x.candidate_id = m.at("id").get<std::string>();
      const auto values = m.at("features").get<std::vector<double>>();
      if (values.size() != kFeatureCount) {
        throw Error(ErrorCode::ParseError, path + " must have 21 features", path + ".features");
      }
      std::copy(values.begin(), values.end(), x.values.begin());
      const auto cls = m.at("class").get<std::string>();
      if (cls == "positive") c.positives.push_back(std::move(x));
      else if (cls == "negative") c.negatives.push_back(std::move(x));
      else throw Error(ErrorCode::ParseError, path + ": class must be positive or negative", path + ".class");
    }
    if (j.contains("anchor") && !j.at("anchor").is_null()) {
      FeatureVector a;
      a.candidate_id = "anchor";
      const auto values = j.at("anchor").get<std::vector<double>>();
      if (values.size() != kFeatureCount) throw Error(ErrorCode::ParseError, "anchor must have 21 features", "anchor");
      std::copy(values.begin(), values.end(), a.values.begin());
      c.anchor = a;
    }
    check_cohort(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed cohort document: ") + e.what());
  }
}

struct ImportOptions {
  AcademicLevel level = AcademicLevel::AssistProf;
  std::string field_tag = "general";
  ResearchType research_type = ResearchType::Applied;
};

/// Builds a cohort from raw record rows carrying a positive/negative label.
/// Every row is validated; all failures are reported together, each naming
/// its source line.
inline Cohort cohort_from_records(const std::vector<RecordRow>& rows, const NormalizationCaps& caps,
                                  const ImportOptions& opts = {}) {
  check_caps(caps);
  Cohort c;
  c.level = opts.level;
  c.field_tag = opts.field_tag;
  c.research_type = opts.research_type;
  c.caps = caps;
  std::string failures;
  std::string first_field;
  for (const auto& row : rows) {
    const std::string where = "row " + std::to_string(row.line);
    auto report = validate_record(row.record, caps.gpa_scale);
    if (row.label != "positive" && row.label != "negative") {
      report.violations.push_back({"class", "class must be 'positive' or 'negative'"});
    }
    if (!report.ok()) {
      for (const auto& v : report.violations) {
        if (first_field.empty()) first_field = where + "." + v.field;
        failures += (failures.empty() ? "" : "; ") + where + " (" + row.record.candidate_id + "): " + v.message;
      }
      continue;
    }
    try {
      auto x = normalize(derive_features(row.record), caps);
      (row.label == "positive" ? c.positives : c.negatives).push_back(std::move(x));
    } catch (const Error& e) {
      if (first_field.empty()) first_field = where + "." + e.field();
      failures += (failures.empty() ? "" : "; ") + where + " (" + row.record.candidate_id + "): " + e.what();
    }
  }
  if (!failures.empty()) throw Error(ErrorCode::ValidationFailed, failures, first_field);
  require_both_classes(c);
  check_cohort(c);
  return c;
}

/// Loads a cohort from a cohort JSON document or a labelled record CSV,
/// chosen by file extension. `caps` applies to CSV input only; a JSON
/// document carries its own.
inline Cohort import_cohort(const std::filesystem::path& path, const NormalizationCaps& caps,
                            const ImportOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string(), "path");
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ": " + e.what(), "path");
    }
    auto c = cohort_from_json(j);
    require_both_classes(c);
    return c;
  }
  return cohort_from_records(read_records_csv(in), caps, opts);
}

inline void export_cohort(const Cohort& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path.string(), "path");
  out << cohort_to_json(c).dump(2) << '\n';
}

}  // namespace aqi
