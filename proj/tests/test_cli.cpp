#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <sstream>
#include <string>

#include "commands.hpp"

namespace rpgo {
namespace {

namespace fs = std::filesystem;

int run_binary(const std::string& args) {
  const std::string cmd = std::string(RPGO_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Run {
  int code;
  std::string out;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rpgo_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

double report_number(const std::string& report_path, const char* key) {
  const std::string text = read_file(report_path);
  const auto pos = text.find(std::string("\"") + key + "\": ");
  EXPECT_NE(pos, std::string::npos) << key;
  return std::stod(text.substr(pos + std::string(key).size() + 4));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run_binary(""), 1);
  EXPECT_EQ(run_binary("frobnicate"), 1);
  EXPECT_EQ(run_binary("--help"), 0);
  EXPECT_EQ(run_binary("optimize --out x"), 1);
  EXPECT_EQ(run_binary("simulate --dimension se4 --out " + path("s")), 1);
  EXPECT_EQ(run_binary("simulate --poses 10 --loops 1000 --out " + path("s")), 1);
  EXPECT_EQ(run_binary("optimize --input " + path("missing.g2o") + " --out " + path("o")), 3);

  write_file(path("bad.g2o"), "VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 1 0\n");
  EXPECT_EQ(run_binary("optimize --input " + path("bad.g2o") + " --out " + path("o")), 3);
  write_file(path("nan.g2o"), "VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 nan 0 0\nEDGE_SE2 0 1 1 0 0 1 0 0 1 0 1\n");
  EXPECT_EQ(run_binary("optimize --input " + path("nan.g2o") + " --out " + path("o")), 2);
  write_file(path("ok.g2o"), "VERTEX_SE2 0 0 0 0\nVERTEX_SE2 1 1 0 0\nEDGE_SE2 0 1 1 0 0 1 0 0 1 0 1\n");
  EXPECT_EQ(run_binary("optimize --input " + path("ok.g2o") + " --robust bogus --out " + path("o")), 1);
  EXPECT_EQ(run_binary("optimize --input " + path("ok.g2o") + " --gnc-confidence 1.5 --out " + path("o")), 1);
  EXPECT_EQ(run_binary("optimize --input " + path("ok.g2o") + " --out " + path("o")), 0);
}

TEST_F(Cli, SimulateWritesParseableDeterministicFiles) {
  ASSERT_EQ(run({"simulate", "--outlier-ratio", "0.3", "--out", path("a")}).code, 0);
  ASSERT_EQ(run({"simulate", "--outlier-ratio", "0.3", "--out", path("b")}).code, 0);
  for (const char* name : {"dataset.g2o", "ground_truth.tum", "external_odometry.tum", "features.csv"}) {
    EXPECT_EQ(read_file(path("a/") + name), read_file(path("b/") + name)) << name;
  }
  const auto g = std::get<G2oGraph<Pose2>>(parse_g2o(read_file(path("a/dataset.g2o"))).document);
  EXPECT_EQ(g.vertices.size(), 500u);
  EXPECT_EQ(g.labels.size(), 143u);
  EXPECT_EQ(parse_tum(read_file(path("a/ground_truth.tum"))).poses.size(), 500u);
  EXPECT_EQ(parse_tum(read_file(path("a/external_odometry.tum"))).poses.size(), 500u);
  EXPECT_EQ(parse_feature_csv(read_file(path("a/features.csv")), ImageSize{}).size(), 500u);

  ASSERT_EQ(run({"simulate", "--dimension", "se3", "--poses", "150", "--loops", "10", "--out", path("c")}).code, 0);
  EXPECT_TRUE(std::holds_alternative<G2oGraph<Pose3>>(parse_g2o(read_file(path("c/dataset.g2o"))).document));
}

TEST_F(Cli, ZeroOutlierModesAgree) {
  ASSERT_EQ(run({"simulate", "--poses", "200", "--loops", "30", "--sigma-rot", "0", "--sigma-trans", "0", "--out",
                 path("clean")})
                .code,
            0);
  ASSERT_EQ(run({"simulate", "--poses", "200", "--loops", "30", "--seed", "3", "--out", path("noisy")}).code, 0);
  for (const char* data : {"clean", "noisy"}) {
    const std::string in = path(std::string(data) + "/dataset.g2o");
    const std::string gt = path(std::string(data) + "/ground_truth.tum");
    ASSERT_EQ(run({"optimize", "--input", in, "--ground-truth", gt, "--out", path("none")}).code, 0);
    const double base = report_number(path("none/report.json"), "ate_rmse");
    // Default PCM thresholds are tighter than the accumulated drift of noisy data.
    const std::vector<std::string> modes =
        std::string(data) == "clean" ? std::vector<std::string>{"pcm", "gnc", "pcm+gnc"} : std::vector<std::string>{"gnc"};
    for (const auto& m : modes) {
      ASSERT_EQ(run({"optimize", "--input", in, "--ground-truth", gt, "--robust", m, "--out", path(m)}).code, 0);
      EXPECT_NEAR(report_number(path(m + "/report.json"), "ate_rmse"), base, 1e-6) << data << " " << m;
    }
  }
}

TEST_F(Cli, GncBeatsPlainWithOutliers) {
  ASSERT_EQ(run({"simulate", "--poses", "300", "--loops", "50", "--outlier-ratio", "0.3", "--out", path("d")}).code, 0);
  const std::string in = path("d/dataset.g2o"), gt = path("d/ground_truth.tum");
  ASSERT_EQ(run({"optimize", "--input", in, "--ground-truth", gt, "--out", path("none")}).code, 0);
  ASSERT_EQ(run({"optimize", "--input", in, "--ground-truth", gt, "--robust", "gnc", "--out", path("gnc")}).code, 0);
  EXPECT_LT(report_number(path("gnc/report.json"), "ate_rmse"), report_number(path("none/report.json"), "ate_rmse"));
  EXPECT_GE(report_number(path("gnc/report.json"), "precision"), 0.9);

  ASSERT_EQ(run({"optimize", "--input", in, "--ground-truth", gt, "--robust", "gnc", "--out", path("gnc2")}).code, 0);
  EXPECT_EQ(read_file(path("gnc/trajectory.tum")), read_file(path("gnc2/trajectory.tum")));
  EXPECT_EQ(read_file(path("gnc/report.json")), read_file(path("gnc2/report.json")));
}

TEST_F(Cli, EmptyLoopSetKeepsOdometry) {
  ASSERT_EQ(run({"simulate", "--poses", "100", "--loops", "0", "--out", path("d")}).code, 0);
  ASSERT_EQ(run({"optimize", "--input", path("d/dataset.g2o"), "--out", path("o")}).code, 0);
  const auto g = std::get<G2oGraph<Pose2>>(parse_g2o(read_file(path("d/dataset.g2o"))).document);
  const auto est = parse_tum(read_file(path("o/trajectory.tum"))).poses;
  ASSERT_EQ(est.size(), g.vertices.size());
  for (std::size_t k = 0; k < est.size(); ++k) {
    EXPECT_LT((est[k].pose.translation() - to_pose3(g.vertices.at(k)).translation()).norm(), 1e-8);
  }
}

TEST_F(Cli, ExternalOdometryIsAdded) {
  ASSERT_EQ(run({"simulate", "--poses", "100", "--loops", "10", "--out", path("d")}).code, 0);
  ASSERT_EQ(run({"optimize", "--input", path("d/dataset.g2o"), "--external-odom", path("d/external_odometry.tum"),
                 "--out", path("o")})
                .code,
            0);
  EXPECT_EQ(report_number(path("o/report.json"), "external_factors"), 99.0);
}

TEST_F(Cli, EvaluateIdenticalIsZero) {
  ASSERT_EQ(run({"simulate", "--poses", "50", "--loops", "5", "--out", path("d")}).code, 0);
  const auto r = run({"evaluate", "--input", path("d/ground_truth.tum"), "--ground-truth", path("d/ground_truth.tum"),
                      "--out", path("e")});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("ate_rmse 0\n"), std::string::npos);
  EXPECT_EQ(report_number(path("e/evaluation.json"), "ate_rmse"), 0.0);
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

TEST_F(Cli, AblateStdMatchesSampleOracle) {
  ASSERT_EQ(run({"ablate", "--poses", "150", "--loops", "20", "--outlier-ratio", "0.2", "--robust", "gnc", "--trials",
                 "3", "--out", path("a")})
                .code,
            0);
  const auto trials = read_csv(read_file(path("a/ablation_trials.csv")));
  ASSERT_EQ(trials.size(), 4u);
  const double x0 = std::stod(trials[1][4]), x1 = std::stod(trials[2][4]), x2 = std::stod(trials[3][4]);
  const double m = (x0 + x1 + x2) / 3.0;
  const double sd = std::sqrt(((x0 - m) * (x0 - m) + (x1 - m) * (x1 - m) + (x2 - m) * (x2 - m)) / 2.0);
  const auto summary = read_csv(read_file(path("a/ablation_summary.csv")));
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_NEAR(std::stod(summary[1][4]), m, 1e-12);
  EXPECT_NEAR(std::stod(summary[1][5]), sd, 1e-12);
  EXPECT_GT(sd, 0.0);
}

TEST_F(Cli, AblateFixedInputHasZeroStdAndOneRowPerConfig) {
  ASSERT_EQ(run({"simulate", "--poses", "150", "--loops", "20", "--outlier-ratio", "0.2", "--out", path("d")}).code, 0);
  ASSERT_EQ(run({"ablate", "--input", path("d/dataset.g2o"), "--ground-truth", path("d/ground_truth.tum"), "--robust",
                 "pcm,gnc", "--trials", "3", "--out", path("a")})
                .code,
            0);
  const auto summary = read_csv(read_file(path("a/ablation_summary.csv")));
  ASSERT_EQ(summary.size(), 3u);
  EXPECT_EQ(summary[1][1], "pcm");
  EXPECT_EQ(summary[2][1], "gnc");
  for (std::size_t r = 1; r < 3; ++r) EXPECT_EQ(std::stod(summary[r][5]), 0.0);
  EXPECT_EQ(run({"ablate", "--robust", "gnc", "--trials", "0", "--out", path("b")}).code, 1);
}

TEST(AblationTable, FailedRowsRenderAsDashes) {
  const std::vector<cli::AblationRow> rows{{"ds", "gnc", {1.0, 2.0, 4.0}, 0}, {"ds", "none", {1.0}, 2}};
  const std::string table = cli::ablation_table(rows);
  EXPECT_NE(table.find("Avg[m]"), std::string::npos);
  EXPECT_NE(table.find("2.3333"), std::string::npos);
  EXPECT_NE(table.find("1.5275"), std::string::npos);
  const auto csv = cli::ablation_summary_csv(rows);
  EXPECT_NE(csv.find("ds,none,3,2,--,--"), std::string::npos);
}

TEST_F(Cli, KeyframeSweep) {
  const auto r = run({"keyframe-sim", "--out", path("k")});
  ASSERT_EQ(r.code, 0);
  const auto rows = read_csv(read_file(path("k/keyframes.csv")));
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0][0], "mdsl");
  std::size_t prev = SIZE_MAX;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto n = std::stoul(rows[i][1]);
    EXPECT_LE(n, prev);
    prev = n;
  }
  EXPECT_EQ(rows.back()[0], "1000");
  EXPECT_EQ(rows.back()[3], "0");  // no disparity-triggered keyframes

  std::vector<TrackedFeatureFrame> still;
  for (int i = 0; i <= 100; ++i) still.push_back({0.05 * i, {{Vector2(10, 10), 1.0, 1}, {Vector2(20, 30), 0.5, 2}}, {}});
  write_file(path("still.csv"), write_feature_csv(still));
  const auto s = run({"keyframe-sim", "--input", path("still.csv")});
  ASSERT_EQ(s.code, 0);
  const auto srows = read_csv(s.out);
  for (std::size_t i = 2; i < srows.size(); ++i) EXPECT_EQ(srows[i][1], srows[1][1]);
  EXPECT_EQ(srows[1][1], "6");
}

}  // namespace
}  // namespace rpgo
