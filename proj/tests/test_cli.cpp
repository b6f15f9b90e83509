#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(HELIOCAST_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string arg(const fs::path& p) { return "'" + p.string() + "'"; }

// Each test gets its own directory; ctest may run them concurrently.
class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    work_ = fs::temp_directory_path() /
            (std::string("heliocast_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(work_);
    fs::create_directories(work_);
  }
  void TearDown() override { fs::remove_all(work_); }

  fs::path work_;
};

}  // namespace

TEST_F(Cli, GenerateOneDay) {
  const auto out = work_ / "day.csv";
  ASSERT_EQ(run("generate --days 1 --seed 7 --out " + arg(out)), 0);
  const auto text = slurp(out);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 289);
  EXPECT_EQ(text.substr(0, text.find('\n')), "timestamp,irradiance_wm2,temperature_k");
  ASSERT_EQ(run("generate --days 1 --seed 7 --out " + arg(work_ / "again.csv")), 0);
  EXPECT_EQ(text, slurp(work_ / "again.csv"));
}

TEST_F(Cli, EvaluateIsReproducible) {
  ASSERT_EQ(run("evaluate --data " + arg(HELIOCAST_SAMPLE) + " --out-dir " + arg(work_ / "a")), 0);
  ASSERT_EQ(run("evaluate --data " + arg(HELIOCAST_SAMPLE) + " --out-dir " + arg(work_ / "b")), 0);
  for (const char* name : {"report.csv", "report.txt", "evaluation.json"}) {
    const auto a = slurp(work_ / "a" / name);
    EXPECT_FALSE(a.empty()) << name;
    EXPECT_EQ(a, slurp(work_ / "b" / name)) << name;
  }
  const auto csv = slurp(work_ / "a" / "report.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
}

TEST_F(Cli, TrainThenExportPlot) {
  const auto model = work_ / "gbr.hcm";
  ASSERT_EQ(run("train --model gbr --data " + arg(HELIOCAST_SAMPLE) + " --trained-at fixed --out " + arg(model)), 0);
  const auto first = slurp(model);
  ASSERT_EQ(run("train --model gbr --data " + arg(HELIOCAST_SAMPLE) + " --trained-at fixed --out " + arg(model)), 0);
  EXPECT_EQ(first, slurp(model));

  const auto plot = work_ / "plot.csv";
  ASSERT_EQ(run("export-plots --model " + arg(model) + " --data " + arg(HELIOCAST_SAMPLE) +
                " --day 2020-05-02 --out " + arg(plot)),
            0);
  const auto text = slurp(plot);
  EXPECT_EQ(text.substr(0, text.find('\n')), "timestamp,actual_wm2,predicted_wm2,temperature_k");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 289);
  EXPECT_NE(run("export-plots --model " + arg(model) + " --data " + arg(HELIOCAST_SAMPLE) + " --day 2019-01-01"), 0);
}

TEST_F(Cli, SummarizeAndCorrelate) {
  EXPECT_EQ(run("summarize --data " + arg(HELIOCAST_SAMPLE) + " --out " + arg(work_ / "s.csv")), 0);
  EXPECT_FALSE(slurp(work_ / "s.csv").empty());
  EXPECT_EQ(run("correlate --data " + arg(HELIOCAST_SAMPLE) + " --out " + arg(work_ / "c.csv")), 0);
  EXPECT_FALSE(slurp(work_ / "c.csv").empty());
}

TEST_F(Cli, RejectsBadInvocations) {
  EXPECT_NE(run("frobnicate"), 0);
  EXPECT_NE(run("train --model nope --data " + arg(HELIOCAST_SAMPLE) + " --out " + arg(work_ / "x.hcm")), 0);
  EXPECT_NE(run("summarize --data " + arg(work_ / "missing.csv")), 0);
  EXPECT_NE(run("export-plots --model " + arg(work_ / "missing.hcm")), 0);
}
