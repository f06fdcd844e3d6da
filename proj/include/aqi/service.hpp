#pragma once

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "aqi/pipeline.hpp"

namespace aqi {

inline constexpr int kStoreVersion = 1;

// ---------------------------------------------------------------------------
// Document store

/// One JSON document per object under root/{cohorts,models,runs}. Writes go
/// to a temporary file that is renamed into place, so readers only ever see
/// complete documents.
class DocumentStore {
 public:
  explicit DocumentStore(std::filesystem::path root) : root_(std::move(root)) {
    for (const char* dir : {"cohorts", "models", "runs"}) std::filesystem::create_directories(root_ / dir);
  }

  const std::filesystem::path& root() const { return root_; }

  void put(const std::string& collection, const std::string& id, const nlohmann::json& doc) {
    const auto target = path_of(collection, id);
    const auto tmp = target.string() + ".tmp." + std::to_string(++tmp_counter_);
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + tmp);
      nlohmann::json wrapped = {{"store_version", kStoreVersion}, {"document", doc}};
      out << wrapped.dump(2) << '\n';
      out.flush();
      if (!out) throw std::runtime_error("short write to " + tmp);
    }
    std::filesystem::rename(tmp, target);
  }

  std::optional<nlohmann::json> get(const std::string& collection, const std::string& id) const {
    std::ifstream in(path_of(collection, id), std::ios::binary);
    if (!in) return std::nullopt;
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;
    }
    if (j.value("store_version", 0) != kStoreVersion) return std::nullopt;
    return j.at("document");
  }

  bool contains(const std::string& collection, const std::string& id) const {
    return std::filesystem::exists(path_of(collection, id));
  }

 private:
  std::filesystem::path path_of(const std::string& collection, const std::string& id) const {
    // Ids are generated here or validated by the router; this guards direct use.
    if (id.empty() || id.find_first_of("/\\.") != std::string::npos) {
      throw Error(ErrorCode::ParseError, "invalid document id '" + id + "'", "id");
    }
    return root_ / collection / (id + ".json");
  }

  std::filesystem::path root_;
  std::atomic<std::uint64_t> tmp_counter_{0};
};

// ---------------------------------------------------------------------------
// Registry records

struct ModelRegistryEntry {
  std::string model_id;
  TrainedModel model;
  std::string checksum;  // of the serialized artifact
  std::string cohort_id;
  std::string run_id;
  std::string created_at;
};

inline nlohmann::json entry_to_json(const ModelRegistryEntry& e) {
  const auto& w = e.model.scorer;
  nlohmann::json j = {{"model_id", e.model_id},
                      {"kind", to_string(e.model.kind)},
                      {"checksum", e.checksum},
                      {"cohort_id", e.cohort_id},
                      {"run_id", e.run_id},
                      {"created_at", e.created_at},
                      {"model", model_to_json(e.model)}};
  if (const auto* m = std::get_if<ModelWeights>(&w)) j["n_weights"] = m->w.size();
  else j["n_parameters"] = std::get<SiameseNet>(w).parameter_count();
  return j;
}

inline ModelRegistryEntry entry_from_json(const nlohmann::json& j) {
  ModelRegistryEntry e;
  e.model_id = j.at("model_id").get<std::string>();
  e.model = model_from_json(j.at("model"));
  e.checksum = j.at("checksum").get<std::string>();
  e.cohort_id = j.value("cohort_id", std::string{});
  e.run_id = j.value("run_id", std::string{});
  e.created_at = j.value("created_at", std::string{});
  return e;
}

enum class RunStatus { Running, Succeeded, Failed };

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Running: return "running";
    case RunStatus::Succeeded: return "succeeded";
    case RunStatus::Failed: return "failed";
  }
  return "unknown";
}

struct RunLog {
  std::string run_id;
  std::string cohort_id;
  ScorerKind kind = ScorerKind::M1;
  RunStatus status = RunStatus::Running;
  std::string model_id;
  std::string metric;
  std::vector<TraceEntry> trace;  // indices strictly increasing
  nlohmann::json details = nlohmann::json::object();
  nlohmann::json error = nullptr;
};

inline nlohmann::json run_to_json(const RunLog& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : r.trace) trace.push_back({{"index", t.index}, {"value", t.value}});
  return {{"run_id", r.run_id},   {"cohort_id", r.cohort_id}, {"kind", to_string(r.kind)},
          {"status", to_string(r.status)},
          {"model_id", r.model_id}, {"metric", r.metric},     {"trace", trace},
          {"details", r.details},   {"error", r.error}};
}

inline nlohmann::json error_to_json(const Error& e) {
  return {{"code", to_string(e.code())}, {"message", e.what()}, {"field", e.field()}};
}

// ---------------------------------------------------------------------------
// Service

struct ServiceOptions {
  /// Cohorts with more members than this train as background jobs.
  std::size_t sync_threshold = 400;
  /// Wall clock for registry timestamps; replaceable in tests.
  std::function<std::string()> clock = [] {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
  };
};

struct TrainResponse {
  bool completed = false;
  std::string run_id;
  std::optional<ModelRegistryEntry> entry;
};

class Service {
 public:
  explicit Service(std::filesystem::path root, ServiceOptions opts = {})
      : store_(std::move(root)), opts_(std::move(opts)) {}

  ~Service() { wait_for_jobs(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  DocumentStore& store() { return store_; }

  // Cohorts are content-addressed, so storing the same cohort twice is a no-op.
  std::string put_cohort(const Cohort& c) {
    check_cohort(c);
    require_both_classes(c);
    const auto doc = cohort_to_json(c);
    const std::string id = "cohort-" + checksum(doc.dump());
    std::unique_lock lock(registry_mutex_);
    if (!store_.contains("cohorts", id)) store_.put("cohorts", id, doc);
    return id;
  }

  Cohort get_cohort(const std::string& id) const {
    std::shared_lock lock(registry_mutex_);
    auto doc = valid_id(id) ? store_.get("cohorts", id) : std::nullopt;
    if (!doc) throw Error(ErrorCode::UnknownCohort, "unknown cohort '" + id + "'", "cohort_id");
    return cohort_from_json(*doc);
  }

  ModelRegistryEntry get_model(const std::string& id) const {
    std::shared_lock lock(registry_mutex_);
    auto doc = valid_id(id) ? store_.get("models", id) : std::nullopt;
    if (!doc) throw Error(ErrorCode::UnknownModel, "unknown model '" + id + "'", "model_id");
    return entry_from_json(*doc);
  }

  RunLog get_run(const std::string& id) const {
    std::shared_lock lock(registry_mutex_);
    auto doc = valid_id(id) ? store_.get("runs", id) : std::nullopt;
    if (!doc) throw Error(ErrorCode::UnknownRun, "unknown run '" + id + "'", "run_id");
    const auto& j = *doc;
    RunLog r;
    r.run_id = j.at("run_id");
    r.cohort_id = j.at("cohort_id");
    r.kind = scorer_kind_from_string(j.at("kind"));
    const auto status = j.at("status").get<std::string>();
    r.status = status == "running" ? RunStatus::Running : status == "succeeded" ? RunStatus::Succeeded : RunStatus::Failed;
    r.model_id = j.value("model_id", std::string{});
    r.metric = j.value("metric", std::string{});
    for (const auto& t : j.at("trace")) r.trace.push_back({t.at("index"), t.at("value")});
    r.details = j.value("details", nlohmann::json::object());
    r.error = j.value("error", nlohmann::json(nullptr));
    return r;
  }

  /// Trains on a stored cohort. Small cohorts finish before returning;
  /// larger ones run in the background and are polled through the run log.
  TrainResponse handle_train(const std::string& cohort_id, const TrainRequest& req) {
    const auto cohort = get_cohort(cohort_id);
    const std::string request_key = cohort_id + "\n" + train_request_to_json(req).dump();
    const std::string run_id = "run-" + checksum(request_key);
    {
      std::lock_guard lock(busy_mutex_);
      if (!busy_.insert(cohort_id).second) {
        throw Error(ErrorCode::CohortBusy, "cohort '" + cohort_id + "' already has a training job running",
                    "cohort_id");
      }
    }
    RunLog run;
    run.run_id = run_id;
    run.cohort_id = cohort_id;
    run.kind = req.kind;
    put_run(run);

    const std::size_t members = cohort.positives.size() + cohort.negatives.size();
    if (members <= opts_.sync_threshold) {
      auto entry = execute(cohort, cohort_id, req, run);  // rethrows after logging failure
      return {true, run_id, std::move(entry)};
    }
    std::lock_guard lock(jobs_mutex_);
    jobs_.emplace_back([this, cohort, cohort_id, req, run]() mutable {
      try {
        execute(cohort, cohort_id, req, run);
      } catch (...) {
        // Already recorded in the run log.
      }
    });
    return {false, run_id, std::nullopt};
  }

  AQIReport handle_score(const std::string& model_id, const std::vector<RecordRow>& rows,
                         const std::optional<FilterSpec>& filter = std::nullopt) const {
    const auto entry = get_model(model_id);
    return score_records(entry.model, model_id, rows, filter);
  }

  void wait_for_jobs() {
    std::vector<std::thread> jobs;
    {
      std::lock_guard lock(jobs_mutex_);
      jobs.swap(jobs_);
    }
    for (auto& t : jobs)
      if (t.joinable()) t.join();
  }

 private:
  static bool valid_id(const std::string& id) {
    return !id.empty() && id.size() < 128 && id.find_first_of("/\\.") == std::string::npos;
  }

  void put_run(const RunLog& run) {
    std::unique_lock lock(registry_mutex_);
    store_.put("runs", run.run_id, run_to_json(run));
  }

  ModelRegistryEntry execute(const Cohort& cohort, const std::string& cohort_id, const TrainRequest& req, RunLog run) {
    struct Release {
      Service* s;
      std::string id;
      ~Release() {
        std::lock_guard lock(s->busy_mutex_);
        s->busy_.erase(id);
      }
    } release{this, cohort_id};
    try {
      auto outcome = train_model(cohort, req);
      ModelRegistryEntry entry;
      entry.model = std::move(outcome.model);
      const auto artifact = model_artifact(entry.model);
      entry.checksum = checksum(artifact);
      entry.model_id = std::string(to_string(entry.model.kind)) + "-" + entry.checksum;
      entry.cohort_id = cohort_id;
      entry.run_id = run.run_id;
      {
        std::unique_lock lock(registry_mutex_);
        // Identical artifacts share an id; keep the first registration.
        if (auto existing = store_.get("models", entry.model_id)) {
          entry.created_at = existing->value("created_at", opts_.clock());
        } else {
          entry.created_at = opts_.clock();
        }
        store_.put("models", entry.model_id, entry_to_json(entry));
      }
      run.status = RunStatus::Succeeded;
      run.model_id = entry.model_id;
      run.metric = outcome.metric;
      run.trace = std::move(outcome.trace);
      run.details = std::move(outcome.details);
      put_run(run);
      return entry;
    } catch (const Error& e) {
      run.status = RunStatus::Failed;
      run.error = error_to_json(e);
      put_run(run);
      throw;
    } catch (const std::exception& e) {
      run.status = RunStatus::Failed;
      run.error = {{"code", "InternalError"}, {"message", e.what()}, {"field", ""}};
      put_run(run);
      throw;
    }
  }

  DocumentStore store_;
  ServiceOptions opts_;
  mutable std::shared_mutex registry_mutex_;
  std::mutex busy_mutex_;
  std::set<std::string> busy_;
  std::mutex jobs_mutex_;
  std::vector<std::thread> jobs_;
};

// ---------------------------------------------------------------------------
// JSON API

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownCohort:
    case ErrorCode::UnknownModel:
    case ErrorCode::UnknownRun: return 404;
    case ErrorCode::CohortBusy: return 409;
    case ErrorCode::ValidationFailed:
    case ErrorCode::ZeroResearchTime:
    case ErrorCode::ZeroPostPhDTime:
    case ErrorCode::InfeasibleConstraints:
    case ErrorCode::EmptyClass:
    case ErrorCode::CapsMismatch: return 422;
    default: return 400;
  }
}

/// Transport-independent request router. The HTTP binding and the tests
/// both go through handle().
class Api {
 public:
  explicit Api(Service& service) : service_(service) {}

  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body) {
    try {
      return route(method, path, body);
    } catch (const Error& e) {
      return {http_status(e.code()), {{"error", error_to_json(e)}}};
    } catch (const std::exception& e) {
      return {500, {{"error", {{"code", "InternalError"}, {"message", e.what()}, {"field", ""}}}}};
    }
  }

 private:
  static nlohmann::json parse_body(const std::string& body) {
    if (body.empty()) return nlohmann::json::object();
    try {
      return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("request body is not valid JSON: ") + e.what(), "body");
    }
  }

  static ApiResponse not_found(const std::string& method, const std::string& path) {
    return {404, {{"error", {{"code", "NotFound"}, {"message", "no route for " + method + " " + path}, {"field", ""}}}}};
  }

  ApiResponse route(const std::string& method, const std::string& path, const std::string& body) {
    static const std::regex cohort_re("^/cohorts/([^/]+)$");
    static const std::regex model_re("^/models/([^/]+)$");
    static const std::regex score_re("^/models/([^/]+)/score$");
    static const std::regex run_re("^/runs/([^/]+)$");
    std::smatch m;
    if (method == "POST" && path == "/cohorts") return post_cohort(parse_body(body));
    if (method == "GET" && std::regex_match(path, m, cohort_re)) {
      auto doc = cohort_to_json(service_.get_cohort(m[1]));
      doc["cohort_id"] = m[1];
      return {200, doc};
    }
    if (method == "POST" && path == "/train") return post_train(parse_body(body));
    if (method == "GET" && std::regex_match(path, m, model_re)) return {200, entry_to_json(service_.get_model(m[1]))};
    if (method == "POST" && std::regex_match(path, m, score_re)) return post_score(m[1], parse_body(body));
    if (method == "POST" && path == "/filter") return post_filter(parse_body(body));
    if (method == "POST" && path == "/rankings/aggregate") return post_aggregate(parse_body(body));
    if (method == "GET" && std::regex_match(path, m, run_re)) return {200, run_to_json(service_.get_run(m[1]))};
    return not_found(method, path);
  }

  // Accepts a cohort document, labelled raw records, or a synthetic spec.
  ApiResponse post_cohort(const nlohmann::json& j) {
    Cohort c;
    Warnings warnings;
    if (j.value("format", std::string{}) == "aqi-cohort") {
      c = cohort_from_json(j);
    } else if (j.contains("records")) {
      const auto caps = j.contains("caps") ? caps_from_json(j.at("caps")) : NormalizationCaps::defaults();
      ImportOptions opts;
      try {
        opts.level = level_from_string(j.value("level", std::string("AssistProf")));
        opts.field_tag = j.value("field", opts.field_tag);
        opts.research_type = research_type_from_string(j.value("research_type", std::string("applied")));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, e.what(), "level");
      }
      auto rows = records_from_json(j.at("records"));
      for (std::size_t i = 0; i < rows.size(); ++i) rows[i].line = i;
      c = cohort_from_json_records(rows, caps, opts);
    } else if (j.contains("synthetic")) {
      c = generate(synthetic_spec_from_json(j.at("synthetic")), &warnings);
    } else {
      throw Error(ErrorCode::ParseError, "expected a cohort document, 'records' or 'synthetic'", "body");
    }
    const auto id = service_.put_cohort(c);
    return {201,
            {{"cohort_id", id},
             {"n_pos", c.positives.size()},
             {"n_neg", c.negatives.size()},
             {"warnings", warnings}}};
  }

  // Row errors from JSON input carry array paths rather than CSV line numbers.
  static Cohort cohort_from_json_records(const std::vector<RecordRow>& rows, const NormalizationCaps& caps,
                                         const ImportOptions& opts) {
    std::string bad;
    for (std::size_t i = 0; i < rows.size() && bad.empty(); ++i) {
      if (rows[i].label != "positive" && rows[i].label != "negative") bad = "records[" + std::to_string(i) + "].class";
    }
    if (!bad.empty()) throw Error(ErrorCode::ValidationFailed, "class must be 'positive' or 'negative'", bad);
    Cohort c;
    c.level = opts.level;
    c.field_tag = opts.field_tag;
    c.research_type = opts.research_type;
    c.caps = caps;
    c.positives = featurize_all(rows_in(rows, "positive"), caps);
    c.negatives = featurize_all(rows_in(rows, "negative"), caps);
    require_both_classes(c);
    return c;
  }

  static std::vector<RecordRow> rows_in(const std::vector<RecordRow>& rows, const std::string& label) {
    std::vector<RecordRow> out;
    for (const auto& r : rows)
      if (r.label == label) out.push_back(r);
    return out;
  }

  static SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
    SyntheticSpec s;
    try {
      s.n_pos = j.value("n_pos", s.n_pos);
      s.n_neg = j.value("n_neg", s.n_neg);
      s.dispersion = j.value("dispersion", s.dispersion);
      s.seed = j.value("seed", s.seed);
      if (j.contains("pos_location")) s.pos_location = j.at("pos_location").get<std::array<double, kFeatureCount>>();
      if (j.contains("neg_location")) s.neg_location = j.at("neg_location").get<std::array<double, kFeatureCount>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("malformed synthetic spec: ") + e.what(), "synthetic");
    }
    return s;
  }

  ApiResponse post_train(const nlohmann::json& j) {
    if (!j.contains("cohort_id") || !j.at("cohort_id").is_string()) {
      throw Error(ErrorCode::ParseError, "training request needs a string 'cohort_id'", "cohort_id");
    }
    const auto req = train_request_from_json(j);
    const auto r = service_.handle_train(j.at("cohort_id"), req);
    if (!r.completed) return {202, {{"status", "running"}, {"run_id", r.run_id}}};
    return {200, {{"status", "completed"}, {"run_id", r.run_id}, {"model", entry_to_json(*r.entry)}}};
  }

  static std::optional<FilterSpec> filter_from(const nlohmann::json& j) {
    if (!j.contains("filter") || j.at("filter").is_null()) return std::nullopt;
    return filter_spec_from_json(j.at("filter"));
  }

  ApiResponse post_score(const std::string& model_id, const nlohmann::json& j) {
    if (!j.contains("records")) throw Error(ErrorCode::ParseError, "score request needs 'records'", "records");
    const auto rows = records_from_json(j.at("records"));
    return {200, report_to_json(service_.handle_score(model_id, rows, filter_from(j)))};
  }

  static ApiResponse post_filter(const nlohmann::json& j) {
    if (!j.contains("records")) throw Error(ErrorCode::ParseError, "filter request needs 'records'", "records");
    const auto rows = records_from_json(j.at("records"));
    const auto spec = filter_from(j).value_or(FilterSpec::for_level(AcademicLevel::AssistProf));
    std::vector<FilterResult> results;
    for (const auto& r : rows) results.push_back(apply_filter(r.record, spec));
    return {200, {{"filter", filter_spec_to_json(spec)}, {"results", filter_results_to_json(results)}}};
  }

  static ApiResponse post_aggregate(const nlohmann::json& j) {
    if (!j.contains("rankings") || !j.at("rankings").is_array()) {
      throw Error(ErrorCode::ParseError, "aggregate request needs a 'rankings' array", "rankings");
    }
    std::vector<FeatureRanking> polls;
    for (std::size_t i = 0; i < j.at("rankings").size(); ++i) {
      try {
        polls.push_back(ranking_from_json(j.at("rankings")[i]));
      } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::ParseError, "ranking must be a list of integers", "rankings[" + std::to_string(i) + "]");
      }
    }
    return {200, ranking_to_json(aggregate_rankings(polls))};
  }

  Service& service_;
};

}  // namespace aqi
