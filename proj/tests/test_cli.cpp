#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("qcurv_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

CliRun run(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt";
  const std::string command =
      std::string("'") + QCURV_CLI_PATH + "' " + args + " > '" + out.string() + "' 2> '" + (dir / "stderr.txt").string() + "'";
  const int status = std::system(command.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path path = dir / "config.json";
  std::ofstream(path) << text;
  return path;
}

int count_lines(const std::string& s) { return int(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Cli, DegreeSingleBubble) {
  const fs::path dir = scratch("degree");
  const fs::path config = write_config(dir, R"({"m": 1, "mbar": 0, "crit": []})");
  const CliRun r = run("degree --config " + config.string(), dir);
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["d_m"], 1);
  EXPECT_EQ(j["chi_barycenter"], 1);
  EXPECT_EQ(j["chi_sublevel_form"], 1);
}

TEST(Cli, DegreeBlockInsideFullConfig) {
  const fs::path dir = scratch("degree_block");
  const fs::path config = write_config(dir, R"({"degree": {"m": 1, "mbar": 0, "crit": [{"i_inf": 3}]}})");
  const CliRun r = run("degree --config " + config.string(), dir);
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::json::parse(r.out)["d_m"], 2);
}

TEST(Cli, CritptsTiltedKHasTwoRows) {
  const fs::path dir = scratch("critpts");
  const CliRun r = run("critpts --out " + (dir / "out").string(), dir);
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "a_coords,F,gradnorm,morse,L_K,l_K,i_inf,in_Finf");
  EXPECT_EQ(count_lines(r.out), 3);
  EXPECT_EQ(slurp(dir / "out" / "critpts.csv"), r.out);
  EXPECT_TRUE(fs::exists(dir / "out" / "critpts.json"));
}

TEST(Cli, GreenProfileHeaderAndRows) {
  const fs::path dir = scratch("green");
  const fs::path config = write_config(dir, R"({"green": {"samples": 25}})");
  const CliRun r = run("green --config " + config.string(), dir);
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "dist,G,logpart,H");
  EXPECT_EQ(count_lines(r.out), 26);
}

TEST(Cli, SingleThreadedRerunIsByteIdentical) {
  const fs::path dir = scratch("rerun");
  const fs::path config = write_config(dir, R"({"critpts": {"m": 2, "random_seeds": 6}})");
  const CliRun first = run("critpts --threads 1 --config " + config.string(), dir);
  const CliRun second = run("critpts --threads 1 --config " + config.string(), dir);
  ASSERT_EQ(first.code, 0);
  EXPECT_FALSE(first.out.empty());
  EXPECT_EQ(first.out, second.out);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("exit_codes");
  EXPECT_EQ(run("no-such-command", dir).code, 64);
  EXPECT_EQ(run("", dir).code, 64);
  EXPECT_EQ(run("--help", dir).code, 0);

  std::ofstream(dir / "broken.json") << "{\"model\": ";
  EXPECT_EQ(run("critpts --config " + (dir / "broken.json").string(), dir).code, 65);
  std::ofstream(dir / "wrong_type.json") << R"({"model": {"k_max": "many"}})";
  EXPECT_EQ(run("critpts --config " + (dir / "wrong_type.json").string(), dir).code, 65);

  // m = 0 violates the degree preconditions.
  std::ofstream(dir / "bad_degree.json") << R"({"m": 0, "mbar": 0, "crit": []})";
  EXPECT_EQ(run("degree --config " + (dir / "bad_degree.json").string(), dir).code, 2);

  // A Green function on a model with only 8 degrees is under-resolved.
  std::ofstream(dir / "coarse.json") << R"({"model": {"k_max": 8}})";
  EXPECT_EQ(run("green --config " + (dir / "coarse.json").string(), dir).code, 3);
}

TEST(Cli, ContinueWritesBranchArtifacts) {
  const fs::path dir = scratch("continue");
  const fs::path config = write_config(dir, R"({"model": {"k_max": 40}, "continuation": {"schedule": {"steps": 8}}})");
  const CliRun r = run("continue --config " + config.string() + " --out " + (dir / "out").string(), dir);
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "t,max_u,lambda,a_theta,tau,J,grad_norm,y_lambda_form,y_maxu_form");
  const auto branch = nlohmann::json::parse(slurp(dir / "out" / "branch.json"));
  EXPECT_EQ(branch["rows"].size(), std::size_t(count_lines(r.out) - 1));
}

TEST(Cli, VerifyGradientsCsv) {
  const fs::path dir = scratch("gradients");
  const fs::path config = write_config(dir, R"({"verify_gradients": {"lambdas": [10, 20], "expansions": ["a"]}})");
  const CliRun r = run("verify-gradients --config " + config.string(), dir);
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "expansion,lambda,lhs,prediction,residual");
  EXPECT_EQ(count_lines(r.out), 3);
}

TEST(Cli, SelftestPasses) {
  const fs::path dir = scratch("selftest");
  const CliRun r = run("selftest --threads 1 --out " + (dir / "out").string(), dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(nlohmann::json::parse(r.out)["passed"].get<bool>());
  EXPECT_TRUE(fs::exists(dir / "out" / "selftest.csv"));
}
