#include <gtest/gtest.h>

#include <filesystem>
#include <thread>

#include "aqi/http.hpp"

namespace aqi {
namespace {

namespace fs = std::filesystem;

class HttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / "aqi_http_test";
    fs::remove_all(root_);
    service_ = std::make_unique<Service>(root_);
    api_ = std::make_unique<Api>(*service_);
    server_ = make_http_server(*api_);
    port_ = server_->bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  void TearDown() override {
    server_->stop();
    if (thread_.joinable()) thread_.join();
    client_.reset();
    server_.reset();
    api_.reset();
    service_.reset();
    fs::remove_all(root_);
  }

  std::pair<int, nlohmann::json> post(const std::string& path, const nlohmann::json& body) {
    auto res = client_->Post(path, body.dump(), "application/json");
    if (!res) return {0, nullptr};
    EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
    return {res->status, nlohmann::json::parse(res->body)};
  }

  std::pair<int, nlohmann::json> get(const std::string& path) {
    auto res = client_->Get(path);
    if (!res) return {0, nullptr};
    return {res->status, nlohmann::json::parse(res->body)};
  }

  fs::path root_;
  std::unique_ptr<Service> service_;
  std::unique_ptr<Api> api_;
  std::unique_ptr<httplib::Server> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpTest, TrainThenScoreOverTheWire) {
  const auto [s1, cohort] = post("/cohorts", {{"synthetic", {{"n_pos", 6}, {"n_neg", 6}}}});
  ASSERT_EQ(s1, 201);
  EXPECT_EQ(cohort["n_pos"], 6);

  const auto [s2, got] = get("/cohorts/" + cohort["cohort_id"].get<std::string>());
  ASSERT_EQ(s2, 200);
  EXPECT_EQ(got["format"], "aqi-cohort");

  const auto [s3, trained] = post("/train", {{"cohort_id", cohort["cohort_id"]}, {"kind", "M1"}});
  ASSERT_EQ(s3, 200) << trained.dump();
  const std::string model_id = trained["model"]["model_id"];
  EXPECT_EQ(trained["model"]["n_weights"], 21);

  const auto [s4, model] = get("/models/" + model_id);
  ASSERT_EQ(s4, 200);
  EXPECT_EQ(model["checksum"], trained["model"]["checksum"]);

  const nlohmann::json strong = {{"candidate_id", "s"}, {"n_q1", 9}, {"n_q1_fa", 4}, {"n_cit", 900},
                                 {"t_res", 4.0},        {"gpa_g", 3.9}};
  const nlohmann::json weak = {{"candidate_id", "w"}, {"n_q1", 1}, {"n_cit", 20}, {"t_res", 4.0}, {"gpa_g", 3.0}};
  const auto [s5, report] = post("/models/" + model_id + "/score", {{"records", {weak, strong}}});
  ASSERT_EQ(s5, 200) << report.dump();
  EXPECT_EQ(report["entries"][0]["candidate_id"], "s");
  EXPECT_EQ(report["entries"][0]["position"], 1);
  EXPECT_GT(report["entries"][0]["aqi"].get<double>(), report["entries"][1]["aqi"].get<double>());

  const auto [s6, run] = get("/runs/" + trained["run_id"].get<std::string>());
  ASSERT_EQ(s6, 200);
  EXPECT_EQ(run["model_id"], model_id);
}

TEST_F(HttpTest, ErrorPayloadShape) {
  const auto [status, body] = post("/train", {{"cohort_id", "cohort-absent"}, {"kind", "M2"}});
  EXPECT_EQ(status, 404);
  ASSERT_TRUE(body.contains("error"));
  EXPECT_EQ(body["error"]["code"], "UnknownCohort");
  EXPECT_TRUE(body["error"]["message"].is_string());
  EXPECT_EQ(body["error"]["field"], "cohort_id");
}

TEST_F(HttpTest, FilterAndAggregate) {
  const nlohmann::json record = {{"candidate_id", "x"}, {"gpa_g", 3.4}, {"n_q1", 4}, {"n_q1_fa", 3}};
  const auto [s1, filtered] =
      post("/filter", {{"records", nlohmann::json::array({record})}, {"filter", {{"level", "AssistProf"}}}});
  ASSERT_EQ(s1, 200) << filtered.dump();
  EXPECT_EQ(filtered["results"][0]["passed"], false);

  const auto [s2, agg] = post("/rankings/aggregate", {{"rankings", {{1, 2, 3}, {3, 2, 1}}}});
  ASSERT_EQ(s2, 200);
  EXPECT_EQ(agg["rank"], (std::vector<int>{1, 2, 3}));
}

TEST_F(HttpTest, UnknownRoute) {
  const auto [status, body] = get("/definitely/not/here");
  EXPECT_EQ(status, 404);
  EXPECT_EQ(body["error"]["code"], "NotFound");
}

}  // namespace
}  // namespace aqi
