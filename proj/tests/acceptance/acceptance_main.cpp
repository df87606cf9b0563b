#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "qcurv/io.hpp"
#include "qcurv/parallel.hpp"
#include "suites.hpp"

namespace fs = std::filesystem;
using namespace qcurv;
using namespace qcurv::tools;

namespace {

struct Criterion {
  int number;
  double time_limit;  // seconds
  std::function<SuiteReport()> run;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

std::string quoted(const std::string& s) { return "'" + s + "'"; }

// Runs the CLI with stdout and stderr captured in files under dir; returns the exit status.
int run_cli(const std::string& cli, const std::string& args, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string command = quoted(cli) + " " + args + " > " + quoted((dir / "stdout.txt").string()) + " 2> " +
                              quoted((dir / "stderr.txt").string());
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Check holds(std::string name, bool ok, std::string detail = {}) {
  return {std::move(name), ok, ok ? 1.0 : 0.0, 1.0, "==", std::move(detail)};
}

SuiteReport with_cli_checks(SuiteReport report, std::vector<Check> extra) {
  for (auto& c : extra) report.checks.push_back(std::move(c));
  return report;
}

std::vector<Check> critpts_cli_check(const std::string& cli, const fs::path& work) {
  const fs::path dir = work / "critpts";
  const int code = run_cli(cli, "critpts --threads 1", dir);
  const std::string csv = read_file(dir / "stdout.txt");
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  return {holds("cli_critpts_two_rows", code == 0 && lines == 3,
                fmt::format("exit {}, {} data rows", code, lines > 0 ? lines - 1 : 0))};
}

std::vector<Check> degree_cli_check(const std::string& cli, const fs::path& work) {
  const fs::path dir = work / "degree";
  fs::create_directories(dir);
  write_text_file(dir / "input.json", R"({"m": 1, "mbar": 0, "crit": []})");
  const int code = run_cli(cli, "degree --config " + quoted((dir / "input.json").string()), dir);
  bool ok = code == 0;
  try {
    ok = ok && nlohmann::json::parse(read_file(dir / "stdout.txt")).at("d_m").get<int>() == 1;
  } catch (const std::exception&) {
    ok = false;
  }
  return {holds("cli_degree_single_bubble", ok, fmt::format("exit {}", code))};
}

SuiteReport determinism(const std::string& cli, const fs::path& work) {
  SuiteReport report;
  report.name = "determinism";
  const auto start = std::chrono::steady_clock::now();
  const std::vector<std::string> artifacts = {"selftest.json", "selftest.csv", "stdout.txt"};
  std::string first[3];
  int codes[2] = {-1, -1};
  bool identical = true;
  for (int pass = 0; pass < 2; ++pass) {
    const fs::path dir = work / fmt::format("selftest_{}", pass);
    fs::remove_all(dir);
    codes[pass] = run_cli(cli, "selftest --threads 1 --out " + quoted(dir.string()), dir);
    for (std::size_t i = 0; i < artifacts.size(); ++i) {
      const std::string text = read_file(dir / artifacts[i]);
      if (pass == 0)
        first[i] = text;
      else
        identical = identical && !text.empty() && text == first[i];
    }
  }
  report.checks.push_back(holds("selftest_exit_zero", codes[0] == 0 && codes[1] == 0,
                                fmt::format("exit {} and {}", codes[0], codes[1])));
  report.checks.push_back(holds("selftest_artifacts_identical", identical));

  std::string csv[2];
  for (int pass = 0; pass < 2; ++pass) {
    const fs::path dir = work / fmt::format("continue_{}", pass);
    run_cli(cli, "continue --threads 1", dir);
    csv[pass] = read_file(dir / "stdout.txt");
  }
  report.checks.push_back(holds("continue_csv_identical", !csv[0].empty() && csv[0] == csv[1]));
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-10"};
  std::string cli;
  std::string workdir = "acceptance_work";
  std::vector<int> only;
  int rate_k_max = 1280;
  int rate_steps = 100;
  int threads = 1;
  app.add_option("--cli", cli, "path of the qcurv executable")->required();
  app.add_option("--workdir", workdir, "scratch directory for CLI artifacts");
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  app.add_option("--rate-k-max", rate_k_max, "base k_max of the bubbling-rate experiment (halved for doubling)");
  app.add_option("--rate-steps", rate_steps, "continuation schedule steps for the bubbling-rate experiment");
  app.add_option("--threads", threads, "worker threads for the in-process suites");
  CLI11_PARSE(app, argc, argv);

  set_thread_count(threads);
  const fs::path work = fs::absolute(workdir);
  fs::create_directories(work);

  const std::vector<Criterion> criteria = {
      {1, 10.0, [] { return operator_suite(Level::Full); }},
      {2, 60.0, [] { return green_suite(Level::Full); }},
      {3, 1.0, [] { return bubble_pde_suite(Level::Full); }},
      {4, 120.0, [&] { return with_cli_checks(reduced_suite(Level::Full), critpts_cli_check(cli, work)); }},
      {5, 600.0, [] { return expansion_suite(Level::Full); }},
      {6, 300.0, [] { return quadratic_suite(Level::Full); }},
      {7, 60.0, [] { return fitting_suite(Level::Full); }},
      {8, 1800.0, [&] { return bubbling_rate_suite(rate_k_max, rate_steps); }},
      {9, 1.0, [&] { return with_cli_checks(degree_suite(Level::Full), degree_cli_check(cli, work)); }},
      {10, 0.0, [&] { return determinism(cli, work); }},
  };
  const std::set<int> selected(only.begin(), only.end());

  bool all = true;
  std::vector<SuiteReport> reports;
  for (const auto& criterion : criteria) {
    if (!selected.empty() && !selected.count(criterion.number)) continue;
    SuiteReport report = criterion.run();
    report.time_limit = criterion.time_limit;
    const bool in_time = report.time_limit <= 0.0 || report.seconds < report.time_limit;
    const bool ok = report.passed() && in_time;
    all = all && ok;
    const std::string limit = report.time_limit > 0.0 ? fmt::format(" (limit {} s)", report.time_limit) : "";
    std::cout << fmt::format("criterion {:>2} {:<22} {}  {:.2f} s{}", criterion.number, report.name,
                             ok ? "PASS" : "FAIL", report.seconds, limit)
              << std::endl;
    for (const auto& c : report.checks) {
      std::cout << fmt::format("      {} {:<38} {:.6g} {} {:.6g}{}", c.passed ? "ok  " : "FAIL", c.name, c.value,
                               c.relation, c.threshold, c.detail.empty() ? "" : "  [" + c.detail + "]")
                << "\n";
    }
    if (!in_time) std::cout << "      FAIL runtime over limit\n";
    reports.push_back(std::move(report));
  }
  suites_table(reports).write(work / "acceptance.csv");
  std::cout << (all ? "all acceptance criteria passed" : "some acceptance criteria failed") << std::endl;
  return all ? 0 : 1;
}
