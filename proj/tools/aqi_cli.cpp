#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "aqi/aqi.hpp"
#include "aqi/http.hpp"

namespace {

using namespace aqi;

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path, "out");
  out << text;
}

nlohmann::json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, std::string("cannot open ") + what + " " + path, what);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what(), what);
  }
}

std::vector<RecordRow> read_records_file(const std::string& path) {
  if (path.ends_with(".json")) {
    auto j = read_json_file(path, "input");
    return records_from_json(j.is_object() && j.contains("records") ? j.at("records") : j);
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open input " + path, "input");
  return read_records_csv(in);
}

FilterSpec load_filter(const std::string& file, const std::string& level, double gpa_scale) {
  if (!file.empty()) return filter_spec_from_json(read_json_file(file, "filter"));
  auto spec = FilterSpec::for_level(level_from_string(level));
  spec.gpa_scale = gpa_scale;
  return spec;
}

std::pair<double, double> parse_bounds(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw Error(ErrorCode::ParseError, "bounds must look like lo,hi", "bounds");
  const auto lo = csv::parse_number<double>(text.substr(0, comma));
  const auto hi = csv::parse_number<double>(text.substr(comma + 1));
  if (!lo || !hi) throw Error(ErrorCode::ParseError, "bounds must be two numbers", "bounds");
  return {*lo, *hi};
}

FeatureRanking load_ranking(const std::string& path) {
  if (path.ends_with(".json")) return ranking_from_json(read_json_file(path, "ranking"));
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open ranking " + path, "ranking");
  const auto polls = read_rankings_csv(in);
  return polls.size() == 1 ? polls.front() : aggregate_rankings(polls);
}

void emit_training(const TrainOutcome& outcome, const std::string& out, const std::string& log) {
  write_output(out, model_artifact(outcome.model));
  if (!log.empty()) {
    RunLog run;
    run.kind = outcome.model.kind;
    run.status = RunStatus::Succeeded;
    run.metric = outcome.metric;
    run.trace = outcome.trace;
    run.details = outcome.details;
    run.run_id = "local";
    write_output(log, run_to_json(run).dump(2) + "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Academic quality index: train, score, filter and rank candidates"};
  app.require_subcommand(1);

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "Write a synthetic labelled cohort");
  SyntheticSpec spec;
  std::string gen_out;
  gen->add_option("--n-pos", spec.n_pos, "Positive-class size")->capture_default_str();
  gen->add_option("--n-neg", spec.n_neg, "Negative-class size")->capture_default_str();
  gen->add_option("--dispersion", spec.dispersion, "Per-feature standard deviation")->capture_default_str();
  gen->add_option("--seed", spec.seed)->capture_default_str();
  gen->add_option("--out,-o", gen_out, "Cohort JSON path (default stdout)");

  // import-cohort
  auto* imp = app.add_subcommand("import-cohort", "Validate and normalize labelled records into a cohort");
  std::string imp_in, imp_out, imp_caps, imp_level = "AssistProf", imp_field = "general", imp_type = "applied";
  imp->add_option("--input,-i", imp_in, "CSV or JSON records with a class column")->required();
  imp->add_option("--caps", imp_caps, "Normalization caps JSON");
  imp->add_option("--level", imp_level)->capture_default_str();
  imp->add_option("--field", imp_field)->capture_default_str();
  imp->add_option("--research-type", imp_type)->capture_default_str();
  imp->add_option("--out,-o", imp_out);

  // train-opt
  auto* topt = app.add_subcommand("train-opt", "Fit M1 or M2 weights by constrained optimization");
  std::string topt_cohort, topt_model = "m1", topt_bounds, topt_ranking, topt_out, topt_log;
  std::optional<double> topt_gamma;
  OptimizerConfig ocfg;
  topt->add_option("--cohort,-c", topt_cohort, "Cohort JSON")->required();
  topt->add_option("--model,-m", topt_model)->check(CLI::IsMember({"m1", "m2"}))->capture_default_str();
  topt->add_option("--gamma", topt_gamma, "Cross-class weight (default from class sizes)");
  topt->add_option("--bounds", topt_bounds, "Per-weight bounds lo,hi");
  topt->add_option("--ranking-file", topt_ranking, "Feature ranking (CSV polls or JSON)");
  topt->add_option("--seed", ocfg.seed)->capture_default_str();
  topt->add_option("--max-iters", ocfg.max_iters)->capture_default_str();
  topt->add_option("--n-starts", ocfg.n_starts)->capture_default_str();
  topt->add_option("--out,-o", topt_out, "Model artifact path");
  topt->add_option("--log", topt_log, "Run log path");

  // train-siamese
  auto* tsia = app.add_subcommand("train-siamese", "Train a monotone siamese scorer");
  std::string tsia_cohort, tsia_loss = "contrastive", tsia_out, tsia_log;
  TrainConfig scfg;
  tsia->add_option("--cohort,-c", tsia_cohort, "Cohort JSON")->required();
  tsia->add_option("--loss", tsia_loss)->check(CLI::IsMember({"contrastive", "triplet"}))->capture_default_str();
  tsia->add_option("--margin", scfg.margin)->capture_default_str();
  tsia->add_option("--epochs", scfg.epochs)->capture_default_str();
  tsia->add_option("--seed", scfg.seed)->capture_default_str();
  tsia->add_option("--learning-rate", scfg.learning_rate)->capture_default_str();
  tsia->add_option("--batch-size", scfg.batch_size)->capture_default_str();
  tsia->add_option("--out,-o", tsia_out, "Model artifact path");
  tsia->add_option("--log", tsia_log, "Run log path");

  // score
  auto* score = app.add_subcommand("score", "Score and rank candidate records with a trained model");
  std::string sc_model, sc_in, sc_out, sc_filter, sc_level, sc_format = "json";
  score->add_option("--model,-m", sc_model, "Model artifact")->required();
  score->add_option("--input,-i", sc_in, "Candidate records (CSV or JSON)")->required();
  score->add_option("--filter", sc_filter, "Filter spec JSON");
  score->add_option("--level", sc_level, "Filter level (default: the training cohort's)");
  score->add_option("--format", sc_format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  score->add_option("--out,-o", sc_out);

  // filter
  auto* filt = app.add_subcommand("filter", "Apply the minimum-requirements filter");
  std::string f_in, f_out, f_spec, f_level = "AssistProf";
  double f_gpa_scale = 4.0;
  filt->add_option("--input,-i", f_in)->required();
  filt->add_option("--filter", f_spec, "Filter spec JSON");
  filt->add_option("--level", f_level)->capture_default_str();
  filt->add_option("--gpa-scale", f_gpa_scale)->capture_default_str();
  filt->add_option("--out,-o", f_out);

  // aggregate-ranks
  auto* agg = app.add_subcommand("aggregate-ranks", "Average committee feature rankings");
  std::string a_in, a_out;
  agg->add_option("--input,-i", a_in, "CSV, one ranking per row")->required();
  agg->add_option("--out,-o", a_out);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP JSON API");
  int port = 8080;
  std::string host = "127.0.0.1", store_dir = "aqi-store";
  std::size_t sync_threshold = ServiceOptions{}.sync_threshold;
  serve->add_option("--port,-p", port)->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--store", store_dir, "Document store directory")->capture_default_str();
  serve->add_option("--sync-threshold", sync_threshold)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      Warnings warnings;
      const auto c = generate(spec, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
      write_output(gen_out, cohort_to_json(c).dump(2) + "\n");
    } else if (*imp) {
      const auto caps = imp_caps.empty() ? NormalizationCaps::defaults() : caps_from_json(read_json_file(imp_caps, "caps"));
      ImportOptions opts{level_from_string(imp_level), imp_field, research_type_from_string(imp_type)};
      Cohort c;
      if (imp_in.ends_with(".json")) c = cohort_from_records(read_records_file(imp_in), caps, opts);
      else c = import_cohort(imp_in, caps, opts);
      write_output(imp_out, cohort_to_json(c).dump(2) + "\n");
    } else if (*topt) {
      const auto cohort = import_cohort(topt_cohort, NormalizationCaps::defaults());
      TrainRequest req;
      req.kind = topt_model == "m1" ? ScorerKind::M1 : ScorerKind::M2;
      ocfg.gamma = topt_gamma;
      if (!topt_bounds.empty()) {
        const auto [lo, hi] = parse_bounds(topt_bounds);
        ocfg.bounds = {lo, hi};
      }
      check_config(ocfg);
      req.optimizer = ocfg;
      if (!topt_ranking.empty()) req.ranking = load_ranking(topt_ranking);
      emit_training(train_model(cohort, req), topt_out, topt_log);
    } else if (*tsia) {
      const auto cohort = import_cohort(tsia_cohort, NormalizationCaps::defaults());
      TrainRequest req;
      req.kind = tsia_loss == "contrastive" ? ScorerKind::SiameseContrastive : ScorerKind::SiameseTriplet;
      check_train_config(scfg);
      req.siamese = scfg;
      emit_training(train_model(cohort, req), tsia_out, tsia_log);
    } else if (*score) {
      const auto model = model_from_json(read_json_file(sc_model, "model"));
      std::optional<FilterSpec> filter;
      if (!sc_filter.empty() || !sc_level.empty()) {
        filter = load_filter(sc_filter, sc_level.empty() ? "AssistProf" : sc_level, model.caps.gpa_scale);
      }
      std::ifstream art(sc_model, std::ios::binary);
      std::stringstream bytes;
      bytes << art.rdbuf();
      const auto report = score_records(model, checksum(bytes.str()), read_records_file(sc_in), filter);
      if (sc_format == "csv") {
        std::ostringstream out;
        write_report_csv(out, report);
        write_output(sc_out, out.str());
      } else {
        write_output(sc_out, report_to_json(report).dump(2) + "\n");
      }
    } else if (*filt) {
      const auto spec_used = load_filter(f_spec, f_level, f_gpa_scale);
      std::vector<FilterResult> results;
      for (const auto& row : read_records_file(f_in)) results.push_back(apply_filter(row.record, spec_used));
      const nlohmann::json out = {{"filter", filter_spec_to_json(spec_used)}, {"results", filter_results_to_json(results)}};
      write_output(f_out, out.dump(2) + "\n");
    } else if (*agg) {
      std::ifstream in(a_in);
      if (!in) throw Error(ErrorCode::ParseError, "cannot open input " + a_in, "input");
      write_output(a_out, ranking_to_json(aggregate_rankings(read_rankings_csv(in))).dump(2) + "\n");
    } else if (*serve) {
      ServiceOptions opts;
      opts.sync_threshold = sync_threshold;
      Service service(store_dir, opts);
      Api api(service);
      auto server = make_http_server(api);
      std::cerr << "listening on http://" << host << ":" << port << '\n';
      if (!server->listen(host, port)) {
        std::cerr << "could not bind " << host << ":" << port << '\n';
        return 1;
      }
    }
  } catch (const Error& e) {
    std::cerr << nlohmann::json{{"error", error_to_json(e)}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", {{"code", "InternalError"}, {"message", e.what()}, {"field", ""}}}}.dump()
              << '\n';
    return 1;
  }
  return 0;
}
