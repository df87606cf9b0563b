#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "qcurv/io.hpp"

namespace qcurv::tools {

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // how value is compared with threshold, e.g. "<"
  std::string detail;
};

struct SuiteReport {
  std::string name;
  std::vector<Check> checks;
  double seconds = 0.0;
  double time_limit = 0.0;  // 0 means no limit

  bool passed() const;
  // Timing is left out so that reruns produce identical artifacts.
  nlohmann::json to_json() const;
};

// Quick trims sample counts for selftest; Full uses the acceptance settings.
enum class Level { Quick, Full };

SuiteReport operator_suite(Level level);
SuiteReport green_suite(Level level);
SuiteReport bubble_pde_suite(Level level);
SuiteReport reduced_suite(Level level);
SuiteReport expansion_suite(Level level);
SuiteReport quadratic_suite(Level level);
SuiteReport fitting_suite(Level level);
SuiteReport solver_suite(Level level);
// Continuation at base_k_max and base_k_max / 2 for K = 1 + 0.3 Y_1.
SuiteReport bubbling_rate_suite(int base_k_max, int schedule_steps);
SuiteReport degree_suite(Level level);

CsvTable suites_table(const std::vector<SuiteReport>& suites);

}  // namespace qcurv::tools
