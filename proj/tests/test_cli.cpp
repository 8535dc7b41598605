#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = RBK_CLI;
const std::string kConfigs = RBK_CONFIGS;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rbk_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// runs the binary, stdout+stderr to dir/log.txt; returns the exit status
int rbk(const std::string& args, const fs::path& dir) {
  const std::string cmd = "'" + kCli + "' " + args + " > '" + (dir / "log.txt").string() + "' 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path write_conf(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "c.conf";
  std::ofstream(p) << text;
  return p;
}

TEST(Cli, RunWritesArtifactsAndPasses) {
  const auto dir = scratch("run");
  const auto out = dir / "out";
  ASSERT_EQ(rbk("run -c " + kConfigs + "/monodisperse.conf -o " + out.string(), dir), 0) << slurp(dir / "log.txt");
  for (const char* f : {"trajectory.csv", "trajectory.json", "report.json", "report.txt", "resolved.conf",
                        "plotdata/moments.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const std::string csv = slurp(out / "trajectory.csv");
  EXPECT_EQ(csv.rfind("# rbk trajectory v1\nt,i,f_i\n0,1,1\n", 0), 0u);
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_TRUE(report["pass"].get<bool>());
  EXPECT_EQ(report["checks"].size(), 7u);
  EXPECT_NE(slurp(dir / "log.txt").find("verdict: PASS"), std::string::npos);
}

TEST(Cli, ReportIsDeterministicApartFromTiming) {
  const auto dir = scratch("det");
  const auto conf = kConfigs + "/monodisperse.conf";
  ASSERT_EQ(rbk("check -c " + conf + " -j 1 -o " + (dir / "a").string(), dir), 0);
  ASSERT_EQ(rbk("check -c " + conf + " -j 3 -o " + (dir / "b").string(), dir), 0);
  EXPECT_FALSE(fs::exists(dir / "a" / "trajectory.csv"));
  auto a = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  auto b = nlohmann::json::parse(slurp(dir / "b" / "report.json"));
  ASSERT_TRUE(a.contains("timing"));
  a.erase("timing");
  b.erase("timing");
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Cli, SeedChangesRandomWeightsOnly) {
  const auto dir = scratch("seed");
  const auto conf = kConfigs + "/monodisperse.conf";
  ASSERT_EQ(rbk("check -c " + conf + " --seed 5 -o " + (dir / "a").string(), dir), 0);
  ASSERT_EQ(rbk("check -c " + conf + " --seed 6 -o " + (dir / "b").string(), dir), 0);
  auto a = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  auto b = nlohmann::json::parse(slurp(dir / "b" / "report.json"));
  EXPECT_EQ(a["seed"], 5);
  EXPECT_NE(a["checks"], b["checks"]);
}

TEST(Cli, PrintConfigRoundTrips) {
  const auto dir = scratch("print");
  ASSERT_EQ(rbk("run --print-config -c " + kConfigs + "/stress.conf --tol 1e-5", dir), 0);
  const std::string printed = slurp(dir / "log.txt");
  EXPECT_NE(printed.find("tol = 1e-05"), std::string::npos);
  const auto conf = write_conf(dir, printed);
  ASSERT_EQ(rbk("run --print-config -c " + conf.string(), dir), 0);
  EXPECT_EQ(slurp(dir / "log.txt"), printed);
}

TEST(Cli, ConfigErrorsExitTwoNamingField) {
  const auto dir = scratch("bad");
  EXPECT_EQ(rbk("run -c " + kConfigs + "/bad_ratio.conf", dir), 2);
  EXPECT_NE(slurp(dir / "log.txt").find("ic.q"), std::string::npos);
  EXPECT_EQ(rbk("run -c " + write_conf(dir, "[kernel]\nfamly = sum\n").string(), dir), 2);
  EXPECT_NE(slurp(dir / "log.txt").find("kernel.famly"), std::string::npos);
  EXPECT_EQ(rbk("run --no-such-flag", dir), 2);
  EXPECT_EQ(rbk("", dir), 2);
}

TEST(Cli, BenchRejectsNonProductKernel) {
  const auto dir = scratch("bench");
  const auto conf = write_conf(dir, "[kernel]\nfamily = sum\n[bench]\nn_list = [16]\n");
  EXPECT_EQ(rbk("bench -c " + conf.string() + " -o " + (dir / "o").string(), dir), 2);
}

TEST(Cli, IntegratorFailureExitsThreeWithPartialTrajectory) {
  const auto dir = scratch("fail");
  const auto conf = write_conf(dir, "[ic]\nn = 20\n[integrator]\nmax_steps = 2\n");
  EXPECT_EQ(rbk("run -c " + conf.string() + " -o " + (dir / "o").string(), dir), 3);
  const auto report = nlohmann::json::parse(slurp(dir / "o" / "report.json"));
  EXPECT_EQ(report["failure"]["kind"], "step_limit");
  EXPECT_TRUE(fs::exists(dir / "o" / "trajectory.csv"));
}

TEST(Cli, FailingCheckExitsOne) {
  const auto dir = scratch("tol");
  // a loose integration cannot meet a roundoff-level tolerance
  const auto conf = write_conf(dir, "[ic]\nfamily = geometric\nn = 50\n"
                                    "[integrator]\nrel_tol = 1e-3\nt_end = 5\n"
                                    "[diagnostics]\ntol = 1e-17\nchecks = [\"weight_balance\"]\n"
                                    "random_weights = 3\n");
  EXPECT_EQ(rbk("check -c " + conf.string() + " -o " + (dir / "o").string(), dir), 1) << slurp(dir / "log.txt");
}

TEST(Cli, StabilityAndConvergeWriteTables) {
  const auto dir = scratch("studies");
  const auto st = write_conf(dir, "[ic]\nn = 20\n[integrator]\nt_end = 1\nsamples = 4\n");
  ASSERT_EQ(rbk("stability -c " + st.string() + " -o " + (dir / "s").string(), dir), 0) << slurp(dir / "log.txt");
  EXPECT_EQ(slurp(dir / "s" / "table.csv").rfind("# rbk stability v1\ndelta,t,distance,bound\n", 0), 0u);
  const auto cv = write_conf(dir, "[ic]\nfamily = monodisperse\n[integrator]\nt_end = 1\nsamples = 3\n"
                                  "[study]\nn_list = [5, 10]\nwatch = [1]\n");
  ASSERT_EQ(rbk("converge -c " + cv.string() + " -o " + (dir / "c").string(), dir), 0) << slurp(dir / "log.txt");
  EXPECT_TRUE(fs::exists(dir / "c" / "plotdata" / "watched.csv"));
  const auto report = nlohmann::json::parse(slurp(dir / "c" / "report.json"));
  EXPECT_EQ(report["table"]["differences"][0]["sup_diff"], 0.0);
}

} // namespace
