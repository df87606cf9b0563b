#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace qcurv {

// Unordered: each critical configuration is listed once. Ordered: every
// permutation of a configuration is listed, and the sum is divided by m!.
enum class CountingConvention { Unordered, Ordered };

CountingConvention convention_from_string(const std::string& s);
std::string to_string(CountingConvention c);

struct DegreeInput {
  int dimension = 4;
  int m = 1;
  int mbar = 0;
  int chi_m = 2;
  std::vector<int> i_inf;  // one index per listed critical configuration at infinity
  CountingConvention convention = CountingConvention::Unordered;

  // Throws ValidationError on m < 1, mbar < 0, odd dimension or an index
  // outside [m - 1, (dimension + 1) m - 1].
  void validate() const;
};

DegreeInput degree_input_from_json(const nlohmann::json& j);
nlohmann::json degree_input_to_json(const DegreeInput& input);

struct DegreeReport {
  std::int64_t d_m = 0;
  std::int64_t chi_sublevel_form = 0;  // chi of the sublevel pair minus the signed critical sum
  std::int64_t chi_barycenter = 0;     // 1 - chi of the formal barycenter set
  std::int64_t signed_sum = 0;         // sum of (-1)^{i_inf}, before any 1/m! division

  nlohmann::json to_json() const;
};

// 1 - chi(A_{m-1, mbar}). Throws ValidationError when the product is not
// divisible by (m-1)!, which would signal a transcription error.
std::int64_t chi_barycenter(int m, int mbar, int chi_m);

// Evaluates both closed forms and throws ValidationError if they disagree or
// if the ordered sum is not a multiple of m!.
DegreeReport leray_schauder_degree(const DegreeInput& input);

}  // namespace qcurv
