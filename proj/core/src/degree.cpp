#include "qcurv/degree.hpp"

#include <fmt/format.h>

#include "qcurv/errors.hpp"

namespace qcurv {

namespace {

using Wide = __int128;

constexpr int kMaxResonance = 20;  // keeps m! and the product inside 128 bits

Wide factorial_exact(int k) {
  Wide f = 1;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

int parity_sign(long long k) { return (k % 2 == 0) ? 1 : -1; }

// Generalized binomial coefficient C(x, k) by the running product
// C(x-k+j, j) = C(x-k+j-1, j-1) (x-k+j) / j, each quotient exact.
Wide generalized_binomial(Wide x, int k) {
  Wide c = 1;
  for (int j = 1; j <= k; ++j) c = c * (x - k + j) / j;
  return c;
}

std::int64_t narrow(Wide v, const char* what) {
  if (v > INT64_MAX || v < INT64_MIN) throw ValidationError(fmt::format("{} overflows 64 bits", what));
  return static_cast<std::int64_t>(v);
}

}  // namespace

CountingConvention convention_from_string(const std::string& s) {
  if (s == "unordered") return CountingConvention::Unordered;
  if (s == "ordered") return CountingConvention::Ordered;
  throw ConfigError("unknown counting convention '" + s + "' (expected ordered or unordered)");
}

std::string to_string(CountingConvention c) {
  return c == CountingConvention::Ordered ? "ordered" : "unordered";
}

void DegreeInput::validate() const {
  require(dimension >= 4 && dimension % 2 == 0, "dimension must be even and at least 4");
  require(m >= 1 && m <= kMaxResonance, fmt::format("m must lie in [1, {}]", kMaxResonance));
  require(mbar >= 0, "mbar must be non-negative");
  require(chi_m >= -1000 && chi_m <= 1000, "|chi(M)| must be at most 1000");
  const int lo = m - 1;
  const int hi = (dimension + 1) * m - 1;
  for (int index : i_inf)
    require(index >= lo && index <= hi,
            fmt::format("index at infinity {} outside the legal range [{}, {}]", index, lo, hi));
}

DegreeInput degree_input_from_json(const nlohmann::json& j) {
  DegreeInput input;
  try {
    input.dimension = j.value("n", 4);
    input.m = j.at("m").get<int>();
    input.mbar = j.value("mbar", 0);
    input.chi_m = j.value("chiM", 2);
    input.i_inf.clear();
    for (const auto& entry : j.value("crit", nlohmann::json::array())) {
      input.i_inf.push_back(entry.is_object() ? entry.at("i_inf").get<int>() : entry.get<int>());
    }
    input.convention = convention_from_string(j.value("convention", std::string("unordered")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed degree input: ") + e.what());
  }
  return input;
}

nlohmann::json degree_input_to_json(const DegreeInput& input) {
  nlohmann::json crit = nlohmann::json::array();
  for (int index : input.i_inf) crit.push_back({{"i_inf", index}});
  return {{"n", input.dimension}, {"m", input.m},   {"mbar", input.mbar},
          {"chiM", input.chi_m},  {"crit", crit}, {"convention", to_string(input.convention)}};
}

nlohmann::json DegreeReport::to_json() const {
  return {{"d_m", d_m},
          {"chi_sublevel_form", chi_sublevel_form},
          {"chi_barycenter", chi_barycenter},
          {"signed_sum", signed_sum}};
}

std::int64_t chi_barycenter(int m, int mbar, int chi_m) {
  require(m >= 1 && m <= kMaxResonance, fmt::format("m must lie in [1, {}]", kMaxResonance));
  require(mbar >= 0, "mbar must be non-negative");
  Wide product = 1;
  for (int i = 1; i <= m - 1; ++i) product *= static_cast<Wide>(i - chi_m);
  const Wide divisor = factorial_exact(m - 1);
  if (product % divisor != 0)
    throw ValidationError(fmt::format("barycenter product not divisible by {}! (m={}, chi={})", m - 1, m, chi_m));
  return narrow(parity_sign(mbar) * (product / divisor), "chi_barycenter");
}

DegreeReport leray_schauder_degree(const DegreeInput& input) {
  input.validate();
  DegreeReport report;
  report.chi_barycenter = chi_barycenter(input.m, input.mbar, input.chi_m);

  Wide signed_sum = 0;
  for (int index : input.i_inf) signed_sum += parity_sign(index);
  report.signed_sum = narrow(signed_sum, "signed sum");

  // The 1/m! weight only applies to ordered lists.
  Wide weighted = signed_sum;
  if (input.convention == CountingConvention::Ordered && input.m >= 2) {
    const Wide divisor = factorial_exact(input.m);
    if (signed_sum % divisor != 0)
      throw ValidationError(fmt::format(
          "ordered critical sum {} is not a multiple of {}! (list not closed under permutations)",
          report.signed_sum, input.m));
    weighted = signed_sum / divisor;
  }

  const int sign_mbar = parity_sign(input.mbar);
  // (-1)^mbar (B - S) with B the unsigned barycenter term.
  const Wide unsigned_barycenter = sign_mbar * static_cast<Wide>(report.chi_barycenter);
  const Wide first_form = sign_mbar * (unsigned_barycenter - weighted);
  // chi(J^L, J^-L) - sum (-1)^{mbar + i}, with the sublevel characteristic
  // rebuilt as (-1)^mbar C(m - 1 - chi, m - 1).
  const Wide sublevel_chi = sign_mbar * generalized_binomial(input.m - 1 - input.chi_m, input.m - 1);
  const Wide second_form = sublevel_chi - sign_mbar * weighted;
  if (first_form != second_form)
    throw ValidationError(fmt::format("degree forms disagree: {} vs {}", narrow(first_form, "d_m"),
                                      narrow(second_form, "d_m")));
  report.d_m = narrow(first_form, "d_m");
  report.chi_sublevel_form = narrow(second_form, "d_m");
  return report;
}

}  // namespace qcurv
