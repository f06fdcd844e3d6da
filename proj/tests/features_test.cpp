#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "aqi/features.hpp"

namespace aqi {
namespace {

RawAcademicRecord valid_record() {
  RawAcademicRecord r;
  r.candidate_id = "c1";
  r.n_q1 = 6;
  r.n_q1_ave_auth = 2;
  r.n_q2 = 3;
  r.n_q2_ave_auth = 3;
  r.n_q1_fa = 2;
  r.n_cit = 300;
  r.h_ind = 8;
  r.i10_ind = 6;
  r.t_res = 3;
  r.t_res_prime = 1;
  r.n_phd_stud = 1;
  r.r_inat_phd = 50;
  r.gpa_u = 3.6;
  r.gpa_g = 3.8;
  return r;
}

double feature(const DerivedFeatures& d, Feature f) { return d.values[index_of(f)]; }

TEST(DeriveFeatures, AuthorNormalizedPerYearRates) {
  auto r = valid_record();
  const auto d = derive_features(r);
  EXPECT_DOUBLE_EQ(feature(d, Feature::Q1Papers), 1.0);  // 6 / (2 * 3)
  EXPECT_DOUBLE_EQ(feature(d, Feature::Q2Papers), 3.0 / 9.0);
  EXPECT_DOUBLE_EQ(feature(d, Feature::Citations), 100.0);
  EXPECT_DOUBLE_EQ(feature(d, Feature::HIndex), 8.0 / 3.0);
  EXPECT_DOUBLE_EQ(feature(d, Feature::IntlRankPhD), 50.0);
  EXPECT_FALSE(d.present[index_of(Feature::NatRankBS)]);
  EXPECT_DOUBLE_EQ(feature(d, Feature::GradGPA), 3.8);
}

TEST(DeriveFeatures, ZeroCitationsGiveZero) {
  auto r = valid_record();
  r.n_cit = 0;
  r.t_res = 7.5;
  EXPECT_EQ(feature(derive_features(r), Feature::Citations), 0.0);
}

TEST(DeriveFeatures, StudentsUsePostPhDTime) {
  auto r = valid_record();
  r.n_phd_stud = 4;
  r.t_res_prime = 2;
  r.n_ms_stud = 3;
  const auto d = derive_features(r);
  EXPECT_DOUBLE_EQ(feature(d, Feature::PhDStudents), 2.0);
  EXPECT_DOUBLE_EQ(feature(d, Feature::MSStudents), 1.5);
}

TEST(DeriveFeatures, ZeroTimesAreErrors) {
  auto r = valid_record();
  r.t_res = 0;
  try {
    derive_features(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroResearchTime);
  }
  r = valid_record();
  r.t_res_prime = 0;
  r.n_phd_stud = 1;
  try {
    derive_features(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroPostPhDTime);
  }
  r.n_phd_stud = 0;
  r.n_ms_stud = 0;
  EXPECT_NO_THROW(derive_features(r));
}

TEST(DeriveFeatures, ScaleConsistent) {
  auto r = valid_record();
  const double before = feature(derive_features(r), Feature::Q1Papers);
  r.n_q1 *= 2;
  r.t_res *= 2;
  EXPECT_DOUBLE_EQ(feature(derive_features(r), Feature::Q1Papers), before);
}

TEST(Normalize, DocumentedExamples) {
  const auto caps = NormalizationCaps::defaults();
  DerivedFeatures d;
  d.present.fill(true);
  d.values[index_of(Feature::IntlRankPhD)] = 1;
  d.values[index_of(Feature::GradGPA)] = 3.5;
  auto x = normalize(d, caps);
  EXPECT_EQ(x.values[index_of(Feature::IntlRankPhD)], 1.0);
  EXPECT_DOUBLE_EQ(x.values[index_of(Feature::GradGPA)], 0.875);

  auto c100 = caps;
  c100.ratio_caps[index_of(Feature::Citations)] = 100;
  d.values[index_of(Feature::Citations)] = 20;
  EXPECT_DOUBLE_EQ(normalize(d, c100).values[index_of(Feature::Citations)], 0.2);
  d.values[index_of(Feature::Citations)] = 150;
  EXPECT_EQ(normalize(d, c100).values[index_of(Feature::Citations)], 1.0);
}

TEST(Normalize, RankInversionAndAbsentPolicy) {
  auto caps = NormalizationCaps::defaults();
  EXPECT_DOUBLE_EQ(normalize_rank(500, 500), 0.0);
  EXPECT_DOUBLE_EQ(normalize_rank(1000, 500), 0.0);
  EXPECT_NEAR(normalize_rank(250.5, 500), 0.5, 1e-15);

  DerivedFeatures d;
  d.present.fill(true);
  d.present[index_of(Feature::NatRankBS)] = false;
  EXPECT_EQ(normalize(d, caps).values[index_of(Feature::NatRankBS)], 0.0);
  caps.absent_rank_policy = AbsentRankPolicy::Cap;
  EXPECT_EQ(normalize(d, caps).values[index_of(Feature::NatRankBS)], 1.0);
}

TEST(Normalize, RejectsBadCaps) {
  auto caps = NormalizationCaps::defaults();
  caps.rank_cap = 1;
  EXPECT_THROW(normalize(DerivedFeatures{}, caps), Error);
  caps = NormalizationCaps::defaults();
  caps.ratio_caps[0] = 0;
  EXPECT_THROW(normalize(DerivedFeatures{}, caps), Error);
}

// Random derived features, then one input made "better": the normalized
// vector must not decrease anywhere, and always stays in the unit cube.
TEST(Normalize, MonotoneAndBoundedProperty) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto caps = NormalizationCaps::defaults();
  for (int trial = 0; trial < 2000; ++trial) {
    DerivedFeatures a;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      a.present[i] = u(rng) > 0.2;
      switch (feature_kind(i)) {
        case FeatureKind::Ratio: a.values[i] = 3 * caps.ratio_caps[i] * u(rng); break;
        case FeatureKind::Rank: a.values[i] = 1 + std::floor(900 * u(rng)); break;
        case FeatureKind::Gpa: a.values[i] = 4 * u(rng); break;
      }
      if (feature_kind(i) != FeatureKind::Rank) a.present[i] = true;
    }
    DerivedFeatures b = a;
    const auto i = static_cast<std::size_t>(u(rng) * kFeatureCount);
    switch (feature_kind(i)) {
      case FeatureKind::Ratio: b.values[i] += u(rng); break;
      case FeatureKind::Rank:
        if (b.present[i]) b.values[i] = std::max(1.0, b.values[i] - std::floor(100 * u(rng)));
        else { b.present[i] = true; b.values[i] = 1 + std::floor(900 * u(rng)); }
        break;
      case FeatureKind::Gpa: b.values[i] = std::min(4.0, b.values[i] + u(rng)); break;
    }
    const auto xa = normalize(a, caps);
    const auto xb = normalize(b, caps);
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      ASSERT_GE(xb.values[k], xa.values[k]);
      ASSERT_GE(xa.values[k], 0.0);
      ASSERT_LE(xa.values[k], 1.0);
    }
  }
}

TEST(Normalize, IdempotentWhenSaturated) {
  const auto caps = NormalizationCaps::defaults();
  DerivedFeatures d;
  d.present.fill(true);
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    d.values[i] = feature_kind(i) == FeatureKind::Ratio ? 10 * caps.ratio_caps[i]
                  : feature_kind(i) == FeatureKind::Rank ? 1.0 : 4.0;
  }
  const auto x = normalize(d, caps);
  for (double v : x.values) EXPECT_EQ(v, 1.0);
  d.values[0] *= 5;
  EXPECT_EQ(normalize(d, caps), x);
}

TEST(ValidateRecord, Examples) {
  EXPECT_TRUE(validate_record(valid_record()).ok());

  auto r = valid_record();
  r.t_res = -1;
  const auto report = validate_record(r);
  EXPECT_FALSE(report.ok());
  EXPECT_TRUE(report.mentions("t_res must be positive"));

  r = valid_record();
  r.gpa_u = 4.2;
  const auto gpa = validate_record(r, 4.0);
  EXPECT_TRUE(gpa.mentions("GPA range"));
  EXPECT_EQ(gpa.violations.front().field, "gpa_u");
}

TEST(ValidateRecord, OtherInvariants) {
  auto r = valid_record();
  r.n_q1_ave_auth = 0.5;
  EXPECT_TRUE(validate_record(r).mentions("n_q1_ave_auth must be at least 1"));
  r = valid_record();
  r.n_q1 = 0;
  r.n_q1_fa = 0;
  r.n_q1_ave_auth = 0;  // irrelevant without Q1 papers
  EXPECT_TRUE(validate_record(r).ok());
  r = valid_record();
  r.t_res_prime = 5;
  EXPECT_TRUE(validate_record(r).mentions("must not exceed t_res"));
  r = valid_record();
  r.r_nat_bs = 0;
  EXPECT_TRUE(validate_record(r).mentions("r_nat_bs must be at least 1"));
  r = valid_record();
  r.n_cit = -3;
  EXPECT_TRUE(validate_record(r).mentions("n_cit must be non-negative"));
}

TEST(RecordCsv, ReadsAbsentRanksAndRoundTrips) {
  std::stringstream in;
  in << "candidate_id,n_q1,n_q1_ave_auth,t_res,t_res_prime,r_nat_bs,r_inat_phd,gpa_g,class\n"
     << "a,6,2,3,1,,12,3.9,positive\n"
     << "b,1,1,2,0,4,,3.1,negative\n";
  const auto rows = read_records_csv(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].record.n_q1, 6);
  EXPECT_FALSE(rows[0].record.r_nat_bs.has_value());
  EXPECT_EQ(rows[0].record.r_inat_phd, 12);
  EXPECT_EQ(rows[1].record.r_nat_bs, 4);
  EXPECT_EQ(rows[1].label, "negative");
  EXPECT_EQ(rows[1].line, 3u);

  std::stringstream out;
  write_records_csv(out, rows, true);
  const auto again = read_records_csv(out);
  ASSERT_EQ(again.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(again[i].record, rows[i].record);
    EXPECT_EQ(again[i].label, rows[i].label);
  }
}

TEST(RecordCsv, RejectsUnknownColumnsAndBadCells) {
  std::stringstream unknown("candidate_id,n_q9\nx,1\n");
  EXPECT_THROW(read_records_csv(unknown), Error);
  std::stringstream bad("candidate_id,n_q1\nx,abc\n");
  try {
    read_records_csv(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST(CapsDocument, PartialOverridesAndRoundTrip) {
  const auto caps = caps_from_json(nlohmann::json{{"rank_cap", 200}, {"ratio_caps", {{"n_cit", 80.0}}}});
  EXPECT_EQ(caps.rank_cap, 200);
  EXPECT_EQ(caps.ratio_caps[index_of(Feature::Citations)], 80.0);
  EXPECT_EQ(caps.ratio_caps[index_of(Feature::Q1Papers)], NormalizationCaps::defaults().ratio_caps[0]);
  EXPECT_EQ(caps_from_json(caps_to_json(caps)), caps);
  EXPECT_THROW(caps_from_json(nlohmann::json{{"ratio_caps", {{"gpa_g", 1.0}}}}), Error);
}

TEST(FeatureRankingType, OrderAndPermutation) {
  FeatureRanking r{{3, 1, 2}};
  EXPECT_TRUE(r.is_permutation());
  EXPECT_EQ(r.order(), (std::vector<std::size_t>{1, 2, 0}));
  EXPECT_FALSE((FeatureRanking{{1, 1, 2}}).is_permutation());
  EXPECT_FALSE((FeatureRanking{{0, 1, 2}}).is_permutation());
  EXPECT_TRUE(FeatureRanking::canonical().is_permutation());
}

}  // namespace
}  // namespace aqi
