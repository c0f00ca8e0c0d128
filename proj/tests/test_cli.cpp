#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ddpb/cli.hpp"
#include "ddpb/error.hpp"
#include "ddpb/results.hpp"

namespace ddpb {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = 0;
  std::string out;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "ddpb");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  testing::internal::CaptureStdout();
  testing::internal::CaptureStderr();
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data());
  r.out = testing::internal::GetCapturedStdout();
  testing::internal::GetCapturedStderr();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ddpb_cli_" + std::string(::testing::UnitTest::GetInstance()
                                          ->current_test_info()
                                          ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::vector<std::string> small(std::vector<std::string> args) {
    for (const char* s :
         {"dataset.n=500", "dataset.n_test=200", "dataset.n_ghost=500",
          "layer_sizes=[20,8,2]", "alphas=[0,0.2,0.4]", "seeds=[0,1]",
          "sigma_p_grid=[0.001,0.01]", "mc_samples=50", "test_mc_samples=3",
          "bound_opt_steps=20", "bound_opt_log_every=10",
          "oracle_variance_steps=10"}) {
      args.push_back("--set");
      args.push_back(s);
    }
    return args;
  }

  fs::path dir_;
};

TEST_F(CliTest, ToyFigureWritesCsvAndArgmin) {
  const CliRun r = run({"toy-fig1", "--trials", "0", "--out", (dir_ / "toy").string()});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("argmin m=24"), std::string::npos) << r.out;
  const Table t = read_csv(dir_ / "toy" / "toy_fig1.csv");
  EXPECT_EQ(t.rows().size(), 100u);
  EXPECT_TRUE(fs::exists(dir_ / "toy" / "manifest.json"));
}

TEST_F(CliTest, ToyFigurePaperLiteralPreset) {
  const CliRun r = run({"toy-fig1", "--preset", "paper-literal", "--trials", "0",
                     "--out", (dir_ / "toy").string()});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("argmin m=14"), std::string::npos) << r.out;
  EXPECT_EQ(run({"toy-fig1", "--preset", "nope", "--out", (dir_ / "x").string()}).code,
            kExitConfig);
}

TEST_F(CliTest, InvertKl) {
  const CliRun r = run({"invert-kl", "--q", "0.1", "--b", "0.368074"});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_EQ(r.out, "0.500006\n");
  EXPECT_EQ(run({"invert-kl", "--q", "1.5", "--b", "0.1"}).code, kExitConfig);
}

TEST_F(CliTest, MissingConfigIsAConfigError) {
  const CliRun r = run({"sgd-bound", "--config", (dir_ / "absent.json").string(),
                     "--out", (dir_ / "o").string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_FALSE(fs::exists(dir_ / "o"));
}

TEST_F(CliTest, UnknownOverrideKeyIsAConfigError) {
  EXPECT_EQ(run({"sgd-bound", "--set", "no_such_key=1", "--out",
                 (dir_ / "o").string()}).code,
            kExitConfig);
}

TEST_F(CliTest, MissingIdxFileIsADataError) {
  const CliRun r = run({"sgd-bound", "--set", "dataset.kind=idx", "--set",
                     "dataset.train_images=" + (dir_ / "nope").string(), "--set",
                     "dataset.train_labels=" + (dir_ / "nope").string(), "--set",
                     "dataset.test_images=" + (dir_ / "nope").string(), "--set",
                     "dataset.test_labels=" + (dir_ / "nope").string(), "--out",
                     (dir_ / "o").string()});
  EXPECT_EQ(r.code, kExitData);
}

TEST_F(CliTest, DryRunPrintsPlanWithoutOutputs) {
  const CliRun r = run(small({"sgd-bound", "--dry-run", "--out", (dir_ / "o").string()}));
  ASSERT_EQ(r.code, kExitOk);
  const auto plan = nlohmann::json::parse(r.out);
  ASSERT_EQ(plan["alphas"].size(), 3u);
  EXPECT_EQ(plan["alphas"][0]["t_grid"], nlohmann::json::array({0}));
  EXPECT_EQ(plan["alphas"][1]["delta_accounting"]["grid_size"], 8);
  EXPECT_FALSE(fs::exists(dir_ / "o"));
}

TEST_F(CliTest, RefusesToReplaceForeignDirectory) {
  fs::create_directories(dir_ / "o");
  std::ofstream(dir_ / "o" / "keep.txt") << "x";
  EXPECT_EQ(run(small({"l2-sweep", "--out", (dir_ / "o").string()})).code, kExitConfig);
  EXPECT_TRUE(fs::exists(dir_ / "o" / "keep.txt"));
}

TEST_F(CliTest, SgdBoundIsReproducibleAcrossRunsAndJobs) {
  ASSERT_EQ(run(small({"sgd-bound", "--out", (dir_ / "a").string()})).code, kExitOk);
  ASSERT_EQ(run(small({"sgd-bound", "--out", (dir_ / "b").string(), "--jobs", "3"})).code,
            kExitOk);
  const std::string a = slurp(dir_ / "a" / "bound_sweep.csv");
  EXPECT_EQ(a, slurp(dir_ / "b" / "bound_sweep.csv"));
  const Table t = read_csv(dir_ / "a" / "bound_sweep.csv");
  EXPECT_EQ(t.rows().size(), 6u);

  const auto manifest = nlohmann::json::parse(slurp(dir_ / "a" / "manifest.json"));
  EXPECT_EQ(manifest["command"], "sgd-bound");
  EXPECT_TRUE(manifest["grids_declared_before_data"].get<bool>());
  EXPECT_EQ(manifest["config"]["dataset"]["n"], 500);
  EXPECT_FALSE(manifest["config_hash"].get<std::string>().empty());
}

TEST_F(CliTest, OtherExperimentsWriteTheirTables) {
  ASSERT_EQ(run(small({"direct-opt", "--out", (dir_ / "d").string()})).code, kExitOk);
  EXPECT_FALSE(read_csv(dir_ / "d" / "direct_opt.csv").rows().empty());
  ASSERT_EQ(run(small({"oracle-variance", "--out", (dir_ / "v").string()})).code,
            kExitOk);
  EXPECT_EQ(read_csv(dir_ / "v" / "oracle_variance.csv").rows().size(), 6u);
  ASSERT_EQ(run(small({"l2-sweep", "--set", "scatter_params=4", "--out",
                       (dir_ / "l").string()})).code,
            kExitOk);
  EXPECT_EQ(read_csv(dir_ / "l" / "l2_sweep.csv").rows().size(), 6u);
  EXPECT_TRUE(fs::exists(dir_ / "l" / "scatter.csv"));
  ASSERT_EQ(run(small({"sgd-bound", "--ghost", "--out", (dir_ / "g").string()})).code,
            kExitOk);
}

}  // namespace
}  // namespace ddpb
