// Generates a synthetic cohort, fits the linear model, and ranks a few
// hand-written candidates.

#include <iostream>

#include "aqi/aqi.hpp"

int main() {
  using namespace aqi;

  const Cohort cohort = generate(SyntheticSpec{});
  TrainRequest req;
  req.kind = ScorerKind::M1;
  const auto outcome = train_model(cohort, req);
  const auto& w = std::get<ModelWeights>(outcome.model.scorer);

  std::cout << "M1 weights (importance order):\n";
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    std::cout << "  " << kFeatureNames[i] << "  " << w.w[i] << '\n';
  }

  std::vector<RecordRow> rows(2);
  rows[0].record.candidate_id = "strong";
  rows[0].record.n_q1 = 10;
  rows[0].record.n_q1_ave_auth = 2.5;
  rows[0].record.n_q1_fa = 4;
  rows[0].record.n_cit = 1500;
  rows[0].record.h_ind = 14;
  rows[0].record.t_res = 5;
  rows[0].record.r_inat_phd = 30;
  rows[0].record.gpa_g = 3.9;
  rows[1].record.candidate_id = "junior";
  rows[1].record.n_q1 = 2;
  rows[1].record.n_q1_ave_auth = 3;
  rows[1].record.n_q1_fa = 1;
  rows[1].record.n_cit = 40;
  rows[1].record.h_ind = 2;
  rows[1].record.t_res = 2;
  rows[1].record.gpa_g = 3.6;

  const auto report = score_records(outcome.model, "quickstart", rows, std::nullopt);
  for (const auto& e : report.entries) {
    std::cout << e.position << ". " << e.candidate_id << "  AQI " << e.aqi << (e.passed_filter ? "" : "  (filtered)");
    for (const auto& r : e.reasons) std::cout << "  " << r;
    std::cout << '\n';
  }
}
