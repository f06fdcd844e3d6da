#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;

const std::string kCli = AQI_CLI_PATH;
const fs::path kData = AQI_TEST_DATA_DIR;

struct Result {
  int status = -1;
  std::string out;
};

// Runs the CLI with stderr folded into the captured output.
Result run(const std::string& args) {
  const std::string cmd = "'" + kCli + "' " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("aqi_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, GenerateIsSeeded) {
  ASSERT_EQ(run("generate-data --n-pos 5 --n-neg 4 --seed 9 -o " + path("a.json")).status, 0);
  ASSERT_EQ(run("generate-data --n-pos 5 --n-neg 4 --seed 9 -o " + path("b.json")).status, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  const auto j = nlohmann::json::parse(slurp(path("a.json")));
  EXPECT_EQ(j["members"].size(), 9u);
}

TEST_F(CliTest, TrainOptIsByteIdentical) {
  ASSERT_EQ(run("generate-data --n-pos 8 --n-neg 8 -o " + path("c.json")).status, 0);
  for (const char* model : {"m1", "m2"}) {
    const std::string base = "train-opt -c " + path("c.json") + " --model " + model + " --seed 5 ";
    ASSERT_EQ(run(base + "-o " + path("1.json") + " --log " + path("log.json")).status, 0);
    ASSERT_EQ(run(base + "-o " + path("2.json")).status, 0);
    EXPECT_EQ(slurp(path("1.json")), slurp(path("2.json")));
    const auto m = nlohmann::json::parse(slurp(path("1.json")));
    EXPECT_EQ(m["regression"]["weights"].size(), std::string(model) == "m1" ? 21u : 252u);
    const auto log = nlohmann::json::parse(slurp(path("log.json")));
    EXPECT_EQ(log["metric"], "objective");
  }
}

TEST_F(CliTest, TrainOptFlags) {
  ASSERT_EQ(run("generate-data --n-pos 6 --n-neg 6 -o " + path("c.json")).status, 0);
  const auto r = run("train-opt -c " + path("c.json") + " --gamma 0.2 --bounds 0,0.3 --ranking-file " +
                     (kData / "rankings.csv").string() + " -o " + path("m.json"));
  ASSERT_EQ(r.status, 0) << r.out;
  const auto m = nlohmann::json::parse(slurp(path("m.json")));
  EXPECT_EQ(m["training"]["gamma"], 0.2);
  for (double w : m["regression"]["weights"].get<std::vector<double>>()) EXPECT_LE(w, 0.3 + 1e-8);

  const auto bad = run("train-opt -c " + path("c.json") + " --bounds 0,0.01 -o " + path("x.json"));
  EXPECT_EQ(bad.status, 1);
  EXPECT_NE(bad.out.find("InfeasibleConstraints"), std::string::npos) << bad.out;
}

TEST_F(CliTest, TrainSiameseIsByteIdentical) {
  ASSERT_EQ(run("generate-data --n-pos 5 --n-neg 5 -o " + path("c.json")).status, 0);
  for (const char* loss : {"contrastive", "triplet"}) {
    const std::string base = "train-siamese -c " + path("c.json") + " --loss " + loss + " --epochs 8 --seed 3 ";
    ASSERT_EQ(run(base + "-o " + path("1.json")).status, 0);
    ASSERT_EQ(run(base + "-o " + path("2.json") + " --log " + path("log.json")).status, 0);
    EXPECT_EQ(slurp(path("1.json")), slurp(path("2.json")));
    EXPECT_EQ(nlohmann::json::parse(slurp(path("log.json")))["trace"].size(), 8u);
  }
}

TEST_F(CliTest, ImportScoreFilterAggregate) {
  auto r = run("import-cohort -i " + (kData / "cohort_records.csv").string() + " --level AssistProf -o " + path("c.json"));
  ASSERT_EQ(r.status, 0) << r.out;
  ASSERT_EQ(run("train-opt -c " + path("c.json") + " -o " + path("m.json")).status, 0);

  r = run("score -m " + path("m.json") + " -i " + (kData / "candidates.csv").string() + " --format csv");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(r.out.rfind("position,candidate_id,aqi,passed_filter,reasons\n", 0), 0u) << r.out;
  EXPECT_NE(r.out.find("\n3,bilal,"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find(",false,needs ≥ 2 Q1 first-author papers (has 1)"), std::string::npos) << r.out;

  r = run("score -m " + path("m.json") + " -i " + (kData / "candidates.csv").string());
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(nlohmann::json::parse(r.out)["entries"].size(), 3u);

  r = run("filter -i " + (kData / "candidates.csv").string() + " --level AssistProf");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto f = nlohmann::json::parse(r.out);
  EXPECT_EQ(f["results"][1]["candidate_id"], "bilal");
  EXPECT_EQ(f["results"][1]["passed"], false);

  r = run("aggregate-ranks -i " + (kData / "rankings.csv").string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(nlohmann::json::parse(r.out)["by_feature"]["n_q1"], 1);
}

TEST_F(CliTest, ImportReportsBadRow) {
  const auto r = run("import-cohort -i " + (kData / "bad_row.csv").string());
  EXPECT_EQ(r.status, 1);
  const auto err = nlohmann::json::parse(r.out);
  EXPECT_EQ(err["error"]["code"], "ValidationFailed");
  EXPECT_NE(err["error"]["message"].get<std::string>().find("row 3"), std::string::npos);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_NE(run("").status, 0);
  EXPECT_NE(run("train-opt --model m3 -c x.json").status, 0);
  EXPECT_NE(run("train-siamese -c x.json --loss hinge").status, 0);
  const auto missing = run("train-opt -c " + path("absent.json"));
  EXPECT_EQ(missing.status, 1);
  EXPECT_NE(missing.out.find("ParseError"), std::string::npos);
}

}  // namespace
