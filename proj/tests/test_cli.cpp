#include "cli.hpp"

#include "adaflow/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Invocation {
  int code;
  std::string out, err;
};

Invocation run(std::vector<std::string> args) {
  args.insert(args.begin(), "adaflow");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = adaflow::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("adaflow_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"adapt", "--model", "m.json"}).code, 2);
  EXPECT_EQ(run({"train", "--data", "x", "--out", "y", "--model-type", "gan"}).code, 2);
}

TEST_F(CliTest, RuntimeFailureExitsOneWithStage) {
  const Invocation r = run({"eval", "--model", path("missing.json"), "--data", path("missing.csv")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("eval"), std::string::npos);
}

TEST_F(CliTest, FullLifecycle) {
  ASSERT_EQ(run({"synth", "--seed", "3", "--out", path("data"), "--dim", "4", "--n-train", "300", "--n-test", "200"}).code, 0);
  ASSERT_TRUE(fs::exists(path("data/pretrain.csv")));
  ASSERT_EQ(run({"train", "--data", path("data/pretrain.csv"), "--out", path("flow.json"), "--epochs", "3",
                 "--batch-size", "50", "--loss-curve", path("curve.csv")})
                .code,
            0);
  EXPECT_EQ(slurp(path("curve.csv")).substr(0, 20), "epoch,domain_id,nll\n");

  const Invocation a = run({"adapt", "--model", path("flow.json"), "--data", path("data/target_train.csv"), "--domain-id",
                     "target", "--out", path("adapted.json"), "--report", path("timing.csv"), "--n-adapt", "100"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(slurp(path("timing.csv")).substr(0, 14), "phase,seconds\n");
  const adaflow::FlowModel m = adaflow::flow_from_json(adaflow::read_json_file(path("adapted.json")));
  EXPECT_TRUE(m.has_domain("target"));
  EXPECT_EQ(m.domains().size(), 4u);

  ASSERT_EQ(run({"score", "--model", path("adapted.json"), "--data", path("data/target_test.csv"), "--domain-id",
                 "target", "--out", path("scores.csv")})
                .code,
            0);
  EXPECT_EQ(slurp(path("scores.csv")).substr(0, 24), "sample_index,score,label");

  ASSERT_EQ(run({"eval", "--model", path("adapted.json"), "--data", path("data/target_test.csv"), "--domain-id",
                 "target", "--out", path("report.json")})
                .code,
            0);
  const auto rep = adaflow::read_json_file(path("report.json"));
  EXPECT_TRUE(rep["auroc"].is_number());
  EXPECT_TRUE(rep["mean_nll"].is_number());

  const Invocation t = run({"translate", "--model", path("adapted.json"), "--data", path("data/target_train.csv"), "--from",
                     "target", "--to", "domain0", "--out", path("translated.csv")});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(adaflow::read_dataset(path("translated.csv")).size(), 300);

  const Invocation f = run({"finetune", "--model", path("flow.json"), "--data", path("data/target_train.csv"), "--domain-id",
                     "target", "--out", path("ft.json"), "--epochs", "2", "--batch-size", "50", "--report",
                     path("ft_timing.csv")});
  ASSERT_EQ(f.code, 0) << f.err;

  EXPECT_EQ(run({"score", "--model", path("adapted.json"), "--data", path("data/target_test.csv"), "--out",
                 path("s.csv")})
                .code,
            1);
  EXPECT_EQ(run({"eval", "--model", path("adapted.json"), "--data", path("data/target_test.csv"), "--domain-id",
                 "nope"})
                .code,
            1);
}

TEST_F(CliTest, AutoencoderReportsAurocOnly) {
  ASSERT_EQ(run({"synth", "--out", path("data"), "--dim", "6", "--n-train", "200", "--n-test", "100"}).code, 0);
  ASSERT_EQ(run({"train", "--model-type", "ae", "--data", path("data/pretrain.csv"), "--out", path("ae.json"),
                 "--epochs", "2", "--batch-size", "32"})
                .code,
            0);
  ASSERT_EQ(run({"eval", "--model-type", "ae", "--model", path("ae.json"), "--data", path("data/target_test.csv"),
                 "--out", path("r.json")})
                .code,
            0);
  const auto rep = adaflow::read_json_file(path("r.json"));
  EXPECT_TRUE(rep["mean_nll"].is_null());
  EXPECT_TRUE(rep["auroc"].is_number());
  EXPECT_EQ(run({"adapt", "--model", path("ae.json"), "--data", path("data/target_train.csv"), "--domain-id", "t",
                 "--out", path("x.json")})
                .code,
            1);
  EXPECT_EQ(run({"eval", "--model-type", "flow", "--model", path("ae.json"), "--data", path("data/target_test.csv")})
                .code,
            1);
}

TEST_F(CliTest, BenchWritesSixMethodRows) {
  const Invocation r = run({"bench", "--seeds", "1", "--out", path("bench")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(slurp(path("bench/results.csv")));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "method,n_samples,mean_nll,auroc,seconds");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 6);
  EXPECT_TRUE(fs::exists(path("bench/timing.csv")));
  EXPECT_TRUE(fs::exists(path("bench/results_per_seed.csv")));
}
