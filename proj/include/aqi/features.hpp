#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "aqi/csv.hpp"
#include "aqi/error.hpp"

namespace aqi {

inline constexpr std::size_t kFeatureCount = 21;

/// Feature slots, in the canonical importance order. The enumerator value is
/// the position in every feature vector and also the default rank minus one.
enum class Feature : std::size_t {
  Q1Papers,
  HIndex,
  Citations,
  I10Index,
  Books,
  Awards,
  IntlRankPhD,
  Patents,
  Projects,
  PhDStudents,
  Q2Papers,
  NatRankPhD,
  IntlRankBS,
  NatRankBS,
  MSStudents,
  GradGPA,
  UndergradGPA,
  Q3Papers,
  Q4Papers,
  BookChapters,
  ConferencePapers,
};

enum class FeatureKind { Ratio, Rank, Gpa };

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "n_q1",     "h_ind",      "n_cit",     "i10_ind",   "n_book",    "n_award_recog_work",
    "r_inat_phd", "n_pat",    "n_prj",     "n_phd_stud", "n_q2",     "r_nat_phd",
    "r_inat_bs", "r_nat_bs",  "n_ms_stud", "gpa_g",     "gpa_u",     "n_q3",
    "n_q4",     "n_book_chp", "n_conf",
};

inline constexpr FeatureKind feature_kind(std::size_t index) {
  switch (static_cast<Feature>(index)) {
    case Feature::IntlRankPhD:
    case Feature::NatRankPhD:
    case Feature::IntlRankBS:
    case Feature::NatRankBS:
      return FeatureKind::Rank;
    case Feature::GradGPA:
    case Feature::UndergradGPA:
      return FeatureKind::Gpa;
    default:
      return FeatureKind::Ratio;
  }
}

inline constexpr std::size_t index_of(Feature f) { return static_cast<std::size_t>(f); }

inline std::optional<std::size_t> feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (kFeatureNames[i] == name) return i;
  }
  return std::nullopt;
}

/// Raw inputs for one candidate. Ranks are absent when they do not apply.
struct RawAcademicRecord {
  std::string candidate_id;
  int n_q1 = 0, n_q2 = 0, n_q3 = 0, n_q4 = 0;
  double n_q1_ave_auth = 1, n_q2_ave_auth = 1, n_q3_ave_auth = 1, n_q4_ave_auth = 1;
  int n_q1_fa = 0;
  int n_conf = 0;
  double n_conf_ave_auth = 1;
  int n_book = 0;
  double n_book_ave_auth = 1;
  int n_book_chp = 0;
  double n_book_chp_ave_auth = 1;
  int n_cit = 0;
  int h_ind = 0;
  int i10_ind = 0;
  int n_pat = 0;
  double n_pat_ave_auth = 1;
  int n_prj = 0;
  int n_award_recog_work = 0;
  int n_ms_stud = 0;
  int n_phd_stud = 0;
  double t_res = 1;
  double t_res_prime = 0;
  std::optional<int> r_nat_bs, r_nat_phd, r_inat_bs, r_inat_phd;
  double gpa_u = 0, gpa_g = 0;
  // Ingested for completeness; no feature consumes the course counts.
  int n_course_u = 0, n_course_g = 0;

  bool operator==(const RawAcademicRecord&) const = default;
};

namespace detail {

using RecordMember = std::variant<int RawAcademicRecord::*, double RawAcademicRecord::*,
                                  std::optional<int> RawAcademicRecord::*>;

struct RecordField {
  std::string_view name;
  RecordMember member;
};

using R = RawAcademicRecord;
inline const std::array<RecordField, 34>& record_fields() {
  static const std::array<RecordField, 34> fields = {{
      {"n_q1", &R::n_q1},
      {"n_q2", &R::n_q2},
      {"n_q3", &R::n_q3},
      {"n_q4", &R::n_q4},
      {"n_q1_ave_auth", &R::n_q1_ave_auth},
      {"n_q2_ave_auth", &R::n_q2_ave_auth},
      {"n_q3_ave_auth", &R::n_q3_ave_auth},
      {"n_q4_ave_auth", &R::n_q4_ave_auth},
      {"n_q1_fa", &R::n_q1_fa},
      {"n_conf", &R::n_conf},
      {"n_conf_ave_auth", &R::n_conf_ave_auth},
      {"n_book", &R::n_book},
      {"n_book_ave_auth", &R::n_book_ave_auth},
      {"n_book_chp", &R::n_book_chp},
      {"n_book_chp_ave_auth", &R::n_book_chp_ave_auth},
      {"n_cit", &R::n_cit},
      {"h_ind", &R::h_ind},
      {"i10_ind", &R::i10_ind},
      {"n_pat", &R::n_pat},
      {"n_pat_ave_auth", &R::n_pat_ave_auth},
      {"n_prj", &R::n_prj},
      {"n_award_recog_work", &R::n_award_recog_work},
      {"n_ms_stud", &R::n_ms_stud},
      {"n_phd_stud", &R::n_phd_stud},
      {"t_res", &R::t_res},
      {"t_res_prime", &R::t_res_prime},
      {"r_nat_bs", &R::r_nat_bs},
      {"r_nat_phd", &R::r_nat_phd},
      {"r_inat_bs", &R::r_inat_bs},
      {"r_inat_phd", &R::r_inat_phd},
      {"gpa_u", &R::gpa_u},
      {"gpa_g", &R::gpa_g},
      {"n_course_u", &R::n_course_u},
      {"n_course_g", &R::n_course_g},
  }};
  return fields;
}
inline constexpr std::size_t kRecordFieldCount = 34;

}  // namespace detail

/// Names of the numeric record columns, in canonical CSV order.
inline std::vector<std::string> record_field_names() {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < detail::kRecordFieldCount; ++i)
    names.emplace_back(detail::record_fields()[i].name);
  return names;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool mentions(std::string_view text) const {
    return std::any_of(violations.begin(), violations.end(),
                       [&](const Violation& v) { return v.message.find(text) != std::string::npos; });
  }
};

inline ValidationReport validate_record(const RawAcademicRecord& r, double gpa_scale = 4.0) {
  ValidationReport report;
  auto fail = [&](std::string field, std::string message) {
    report.violations.push_back({std::move(field), std::move(message)});
  };
  for (std::size_t i = 0; i < detail::kRecordFieldCount; ++i) {
    const auto& f = detail::record_fields()[i];
    if (const auto* m = std::get_if<int RawAcademicRecord::*>(&f.member)) {
      if (r.*(*m) < 0) fail(std::string(f.name), std::string(f.name) + " must be non-negative");
    }
  }
  const std::array<std::tuple<std::string_view, int, double>, 8> authored = {{
      {"n_q1_ave_auth", r.n_q1, r.n_q1_ave_auth},
      {"n_q2_ave_auth", r.n_q2, r.n_q2_ave_auth},
      {"n_q3_ave_auth", r.n_q3, r.n_q3_ave_auth},
      {"n_q4_ave_auth", r.n_q4, r.n_q4_ave_auth},
      {"n_conf_ave_auth", r.n_conf, r.n_conf_ave_auth},
      {"n_book_ave_auth", r.n_book, r.n_book_ave_auth},
      {"n_book_chp_ave_auth", r.n_book_chp, r.n_book_chp_ave_auth},
      {"n_pat_ave_auth", r.n_pat, r.n_pat_ave_auth},
  }};
  for (const auto& [name, count, ave] : authored) {
    if (count > 0 && !(ave >= 1.0)) {
      fail(std::string(name), std::string(name) + " must be at least 1 when its count is positive");
    }
  }
  if (!(r.t_res > 0)) fail("t_res", "t_res must be positive");
  if (!(r.t_res_prime >= 0)) fail("t_res_prime", "t_res_prime must be non-negative");
  if (r.t_res > 0 && r.t_res_prime > r.t_res) {
    fail("t_res_prime", "t_res_prime must not exceed t_res");
  }
  const std::array<std::pair<std::string_view, const std::optional<int>*>, 4> ranks = {{
      {"r_nat_bs", &r.r_nat_bs},
      {"r_nat_phd", &r.r_nat_phd},
      {"r_inat_bs", &r.r_inat_bs},
      {"r_inat_phd", &r.r_inat_phd},
  }};
  for (const auto& [name, rank] : ranks) {
    if (rank->has_value() && **rank < 1) fail(std::string(name), std::string(name) + " must be at least 1");
  }
  for (const auto& [name, gpa] : {std::pair<std::string_view, double>{"gpa_u", r.gpa_u}, {"gpa_g", r.gpa_g}}) {
    if (!(gpa >= 0 && gpa <= gpa_scale)) {
      fail(std::string(name), std::string(name) + " outside GPA range [0, " + csv::format_double(gpa_scale) + "]");
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Derivation and normalization

/// Per-candidate features on their natural scale. Rank slots hold the rank
/// itself and may be absent.
struct DerivedFeatures {
  std::string candidate_id;
  std::array<double, kFeatureCount> values{};
  std::array<bool, kFeatureCount> present{};
};

inline DerivedFeatures derive_features(const RawAcademicRecord& r) {
  if (!(r.t_res > 0)) {
    throw Error(ErrorCode::ZeroResearchTime, "t_res must be positive for " + r.candidate_id, "t_res");
  }
  const bool supervises = r.n_ms_stud + r.n_phd_stud > 0;
  if (supervises && !(r.t_res_prime > 0)) {
    throw Error(ErrorCode::ZeroPostPhDTime,
                "t_res_prime is zero but supervised students are reported for " + r.candidate_id,
                "t_res_prime");
  }
  DerivedFeatures d;
  d.candidate_id = r.candidate_id;
  d.present.fill(true);
  auto per_author_year = [&](int count, double ave_auth) {
    return count == 0 ? 0.0 : count / (ave_auth * r.t_res);
  };
  auto per_year = [&](int count) { return count / r.t_res; };
  auto per_post_phd_year = [&](int count) { return count == 0 ? 0.0 : count / r.t_res_prime; };
  auto set = [&](Feature f, double v) { d.values[index_of(f)] = v; };
  auto set_rank = [&](Feature f, const std::optional<int>& rank) {
    d.present[index_of(f)] = rank.has_value();
    d.values[index_of(f)] = rank ? static_cast<double>(*rank) : 0.0;
  };

  set(Feature::Q1Papers, per_author_year(r.n_q1, r.n_q1_ave_auth));
  set(Feature::HIndex, per_year(r.h_ind));
  set(Feature::Citations, per_year(r.n_cit));
  set(Feature::I10Index, per_year(r.i10_ind));
  set(Feature::Books, per_author_year(r.n_book, r.n_book_ave_auth));
  set(Feature::Awards, per_year(r.n_award_recog_work));
  set_rank(Feature::IntlRankPhD, r.r_inat_phd);
  set(Feature::Patents, per_author_year(r.n_pat, r.n_pat_ave_auth));
  set(Feature::Projects, per_year(r.n_prj));
  set(Feature::PhDStudents, per_post_phd_year(r.n_phd_stud));
  set(Feature::Q2Papers, per_author_year(r.n_q2, r.n_q2_ave_auth));
  set_rank(Feature::NatRankPhD, r.r_nat_phd);
  set_rank(Feature::IntlRankBS, r.r_inat_bs);
  set_rank(Feature::NatRankBS, r.r_nat_bs);
  set(Feature::MSStudents, per_post_phd_year(r.n_ms_stud));
  set(Feature::GradGPA, r.gpa_g);
  set(Feature::UndergradGPA, r.gpa_u);
  set(Feature::Q3Papers, per_author_year(r.n_q3, r.n_q3_ave_auth));
  set(Feature::Q4Papers, per_author_year(r.n_q4, r.n_q4_ave_auth));
  set(Feature::BookChapters, per_author_year(r.n_book_chp, r.n_book_chp_ave_auth));
  set(Feature::ConferencePapers, per_author_year(r.n_conf, r.n_conf_ave_auth));
  return d;
}

enum class AbsentRankPolicy {
  Zero,  // a missing rank contributes nothing
  Cap,   // a missing rank is treated as saturated (no penalty)
};

/// Saturation constants that map derived features onto [0,1].
struct NormalizationCaps {
  /// Value at which a ratio feature saturates to 1. Entries at rank and GPA
  /// slots are unused.
  std::array<double, kFeatureCount> ratio_caps{};
  int rank_cap = 500;
  double gpa_scale = 4.0;
  AbsentRankPolicy absent_rank_policy = AbsentRankPolicy::Zero;

  bool operator==(const NormalizationCaps&) const = default;

  /// Engineering defaults, expressed per research year and per author.
  static NormalizationCaps defaults() {
    NormalizationCaps caps;
    caps.ratio_caps.fill(1.0);
    auto set = [&](Feature f, double v) { caps.ratio_caps[index_of(f)] = v; };
    set(Feature::Q1Papers, 1.5);
    set(Feature::HIndex, 2.0);
    set(Feature::Citations, 150.0);
    set(Feature::I10Index, 2.5);
    set(Feature::Books, 0.2);
    set(Feature::Awards, 0.5);
    set(Feature::Patents, 0.5);
    set(Feature::Projects, 0.5);
    set(Feature::PhDStudents, 0.8);
    set(Feature::Q2Papers, 1.0);
    set(Feature::MSStudents, 1.5);
    set(Feature::Q3Papers, 1.0);
    set(Feature::Q4Papers, 1.0);
    set(Feature::BookChapters, 0.5);
    set(Feature::ConferencePapers, 2.0);
    return caps;
  }
};

inline void check_caps(const NormalizationCaps& caps) {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (feature_kind(i) == FeatureKind::Ratio && !(caps.ratio_caps[i] > 0)) {
      throw Error(ErrorCode::BadSpec, "ratio cap for " + std::string(kFeatureNames[i]) + " must be positive",
                  "ratio_caps." + std::string(kFeatureNames[i]));
    }
  }
  if (caps.rank_cap < 2) throw Error(ErrorCode::BadSpec, "rank_cap must be at least 2", "rank_cap");
  if (!(caps.gpa_scale > 0)) throw Error(ErrorCode::BadSpec, "gpa_scale must be positive", "gpa_scale");
}

/// Normalized feature vector; every component lies in [0,1].
struct FeatureVector {
  std::string candidate_id;
  std::array<double, kFeatureCount> values{};

  bool operator==(const FeatureVector&) const = default;
};

inline double normalize_rank(double rank, int rank_cap) {
  return std::max(0.0, 1.0 - (rank - 1.0) / (rank_cap - 1.0));
}

inline FeatureVector normalize(const DerivedFeatures& d, const NormalizationCaps& caps) {
  check_caps(caps);
  FeatureVector x;
  x.candidate_id = d.candidate_id;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    double v = 0.0;
    switch (feature_kind(i)) {
      case FeatureKind::Ratio:
        v = std::min(d.values[i] / caps.ratio_caps[i], 1.0);
        break;
      case FeatureKind::Rank:
        if (d.present[i]) {
          v = normalize_rank(d.values[i], caps.rank_cap);
        } else {
          v = caps.absent_rank_policy == AbsentRankPolicy::Cap ? 1.0 : 0.0;
        }
        break;
      case FeatureKind::Gpa:
        v = d.values[i] / caps.gpa_scale;
        break;
    }
    x.values[i] = std::clamp(v, 0.0, 1.0);
  }
  return x;
}

/// validate -> derive -> normalize; throws ValidationFailed on the first
/// invariant violation.
inline FeatureVector featurize(const RawAcademicRecord& r, const NormalizationCaps& caps) {
  const auto report = validate_record(r, caps.gpa_scale);
  if (!report.ok()) {
    throw Error(ErrorCode::ValidationFailed, r.candidate_id + ": " + report.violations.front().message,
                report.violations.front().field);
  }
  return normalize(derive_features(r), caps);
}

// ---------------------------------------------------------------------------
// Feature rankings

/// rank[i] is the importance rank of feature i; a bijection onto 1..n.
struct FeatureRanking {
  std::vector<int> rank;

  bool operator==(const FeatureRanking&) const = default;

  static FeatureRanking canonical(std::size_t n = kFeatureCount) {
    FeatureRanking r;
    for (std::size_t i = 0; i < n; ++i) r.rank.push_back(static_cast<int>(i + 1));
    return r;
  }

  bool is_permutation() const {
    std::vector<bool> seen(rank.size(), false);
    for (int r : rank) {
      if (r < 1 || static_cast<std::size_t>(r) > rank.size() || seen[r - 1]) return false;
      seen[r - 1] = true;
    }
    return true;
  }

  /// Feature indices from most to least important.
  std::vector<std::size_t> order() const {
    std::vector<std::size_t> idx(rank.size());
    for (std::size_t i = 0; i < rank.size(); ++i) idx[static_cast<std::size_t>(rank[i] - 1)] = i;
    return idx;
  }
};

// ---------------------------------------------------------------------------
// Serialization

inline const char* to_string(AbsentRankPolicy p) { return p == AbsentRankPolicy::Cap ? "cap" : "zero"; }

inline nlohmann::json caps_to_json(const NormalizationCaps& caps) {
  nlohmann::json ratio = nlohmann::json::object();
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (feature_kind(i) == FeatureKind::Ratio) ratio[std::string(kFeatureNames[i])] = caps.ratio_caps[i];
  }
  return {{"ratio_caps", ratio},
          {"rank_cap", caps.rank_cap},
          {"gpa_scale", caps.gpa_scale},
          {"absent_rank_policy", to_string(caps.absent_rank_policy)}};
}

/// Missing keys keep their defaults, so a partial document overrides only
/// what it names.
inline NormalizationCaps caps_from_json(const nlohmann::json& j) {
  auto caps = NormalizationCaps::defaults();
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "caps document must be an object");
  if (auto it = j.find("ratio_caps"); it != j.end()) {
    for (const auto& [key, value] : it->items()) {
      const auto idx = feature_index(key);
      if (!idx || feature_kind(*idx) != FeatureKind::Ratio) {
        throw Error(ErrorCode::ParseError, "unknown ratio feature '" + key + "'", "ratio_caps." + key);
      }
      caps.ratio_caps[*idx] = value.get<double>();
    }
  }
  if (j.contains("rank_cap")) caps.rank_cap = j.at("rank_cap").get<int>();
  if (j.contains("gpa_scale")) caps.gpa_scale = j.at("gpa_scale").get<double>();
  if (j.contains("absent_rank_policy")) {
    const auto p = j.at("absent_rank_policy").get<std::string>();
    if (p == "zero") caps.absent_rank_policy = AbsentRankPolicy::Zero;
    else if (p == "cap") caps.absent_rank_policy = AbsentRankPolicy::Cap;
    else throw Error(ErrorCode::ParseError, "absent_rank_policy must be 'zero' or 'cap'", "absent_rank_policy");
  }
  check_caps(caps);
  return caps;
}

inline nlohmann::json record_to_json(const RawAcademicRecord& r) {
  nlohmann::json j = {{"candidate_id", r.candidate_id}};
  for (std::size_t i = 0; i < detail::kRecordFieldCount; ++i) {
    const auto& f = detail::record_fields()[i];
    const std::string key(f.name);
    std::visit(
        [&](auto member) {
          using T = std::decay_t<decltype(r.*member)>;
          if constexpr (std::is_same_v<T, std::optional<int>>) {
            j[key] = (r.*member) ? nlohmann::json(*(r.*member)) : nlohmann::json(nullptr);
          } else {
            j[key] = r.*member;
          }
        },
        f.member);
  }
  return j;
}

inline RawAcademicRecord record_from_json(const nlohmann::json& j, const std::string& path = "") {
  RawAcademicRecord r;
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "record must be a JSON object", path);
  r.candidate_id = j.value("candidate_id", std::string{});
  for (std::size_t i = 0; i < detail::kRecordFieldCount; ++i) {
    const auto& f = detail::record_fields()[i];
    const std::string key(f.name);
    auto it = j.find(key);
    if (it == j.end()) continue;
    try {
      std::visit(
          [&](auto member) {
            using T = std::decay_t<decltype(r.*member)>;
            if constexpr (std::is_same_v<T, std::optional<int>>) {
              if (it->is_null()) r.*member = std::nullopt;
              else r.*member = it->template get<int>();
            } else {
              r.*member = it->template get<T>();
            }
          },
          f.member);
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::ParseError, "field '" + key + "' has the wrong type",
                  path.empty() ? key : path + "." + key);
    }
  }
  return r;
}

/// A parsed CSV row, with the optional class label column kept verbatim.
struct RecordRow {
  std::size_t line = 0;
  RawAcademicRecord record;
  std::string label;
};

/// Reads the record CSV format: a header naming candidate_id and any subset
/// of the record fields (missing columns keep defaults), plus an optional
/// `class` column. Empty rank cells mean "does not apply".
inline std::vector<RecordRow> read_records_csv(std::istream& in) {
  const auto table = csv::read(in);
  const auto id_col = table.column("candidate_id");
  if (!id_col) throw Error(ErrorCode::ParseError, "CSV header lacks candidate_id", "candidate_id");
  const auto class_col = table.column("class");
  std::vector<std::pair<std::size_t, const detail::RecordField*>> cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == *id_col || (class_col && c == *class_col)) continue;
    const detail::RecordField* match = nullptr;
    for (std::size_t i = 0; i < detail::kRecordFieldCount; ++i) {
      if (detail::record_fields()[i].name == table.header[c]) match = &detail::record_fields()[i];
    }
    if (!match) throw Error(ErrorCode::ParseError, "unknown CSV column '" + table.header[c] + "'", table.header[c]);
    cols.emplace_back(c, match);
  }

  std::vector<RecordRow> rows;
  for (const auto& row : table.rows) {
    RecordRow out;
    out.line = row.line;
    out.record.candidate_id = row.cells[*id_col];
    if (class_col) out.label = row.cells[*class_col];
    for (const auto& [c, field] : cols) {
      const std::string& cell = row.cells[c];
      const std::string where = "row " + std::to_string(row.line) + ", column " + std::string(field->name);
      std::visit(
          [&](auto member) {
            using T = std::decay_t<decltype(out.record.*member)>;
            if constexpr (std::is_same_v<T, std::optional<int>>) {
              if (cell.empty()) {
                out.record.*member = std::nullopt;
                return;
              }
              auto v = csv::parse_number<int>(cell);
              if (!v) throw Error(ErrorCode::ParseError, where + ": not an integer: '" + cell + "'", where);
              out.record.*member = *v;
            } else {
              auto v = csv::parse_number<T>(cell);
              if (!v) throw Error(ErrorCode::ParseError, where + ": not a number: '" + cell + "'", where);
              out.record.*member = *v;
            }
          },
          field->member);
    }
    rows.push_back(std::move(out));
  }
  return rows;
}

inline void write_records_csv(std::ostream& out, const std::vector<RecordRow>& rows, bool with_class) {
  std::vector<std::string> header = {"candidate_id"};
  for (auto& n : record_field_names()) header.push_back(n);
  if (with_class) header.emplace_back("class");
  csv::write_row(out, header);
  for (const auto& row : rows) {
    std::vector<std::string> cells = {row.record.candidate_id};
    for (std::size_t i = 0; i < detail::kRecordFieldCount; ++i) {
      std::visit(
          [&](auto member) {
            using T = std::decay_t<decltype(row.record.*member)>;
            const auto& v = row.record.*member;
            if constexpr (std::is_same_v<T, std::optional<int>>) {
              cells.push_back(v ? std::to_string(*v) : std::string{});
            } else if constexpr (std::is_same_v<T, int>) {
              cells.push_back(std::to_string(v));
            } else {
              cells.push_back(csv::format_double(v));
            }
          },
          detail::record_fields()[i].member);
    }
    if (with_class) cells.push_back(row.label);
    csv::write_row(out, cells);
  }
}

}  // namespace aqi
