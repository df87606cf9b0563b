#include <gtest/gtest.h>

#include <random>

#include "qcurv/degree.hpp"
#include "qcurv/errors.hpp"

using namespace qcurv;

namespace {

DegreeInput input_of(int m, int mbar, int chi_m, std::vector<int> indices = {},
                     CountingConvention convention = CountingConvention::Unordered) {
  DegreeInput input;
  input.m = m;
  input.mbar = mbar;
  input.chi_m = chi_m;
  input.i_inf = std::move(indices);
  input.convention = convention;
  return input;
}

}  // namespace

TEST(ChiBarycenter, WorkedValues) {
  EXPECT_EQ(chi_barycenter(1, 0, 2), 1);
  EXPECT_EQ(chi_barycenter(1, 1, 2), -1);
  EXPECT_EQ(chi_barycenter(2, 0, 2), -1);
  EXPECT_EQ(chi_barycenter(3, 1, 0), -1);
  // C(4 - 1 - (-2), 3) = C(5, 3) = 10
  EXPECT_EQ(chi_barycenter(4, 0, -2), 10);
}

TEST(ChiBarycenter, RejectsIllegalResonance) {
  EXPECT_THROW(chi_barycenter(0, 0, 2), ValidationError);
  EXPECT_THROW(chi_barycenter(2, -1, 2), ValidationError);
}

TEST(LeraySchauder, SingleBubbleExamples) {
  EXPECT_EQ(leray_schauder_degree(input_of(1, 0, 2)).d_m, 1);
  EXPECT_EQ(leray_schauder_degree(input_of(1, 0, 2, {4})).d_m, 0);
  EXPECT_EQ(leray_schauder_degree(input_of(1, 0, 2, {3})).d_m, 2);
}

TEST(LeraySchauder, EmptyListEqualsBarycenterValue) {
  const DegreeReport report = leray_schauder_degree(input_of(2, 0, 2));
  EXPECT_EQ(report.d_m, -1);
  EXPECT_EQ(report.d_m, report.chi_barycenter);
  EXPECT_EQ(report.chi_sublevel_form, report.d_m);
}

TEST(LeraySchauder, ParityFlipNegatesEmptyDegree) {
  for (int m = 1; m <= 6; ++m)
    for (int chi = -4; chi <= 4; ++chi) {
      const auto even = leray_schauder_degree(input_of(m, 2, chi)).d_m;
      const auto odd = leray_schauder_degree(input_of(m, 3, chi)).d_m;
      EXPECT_EQ(even, -odd) << "m=" << m << " chi=" << chi;
    }
}

TEST(LeraySchauder, OrderedSymmetrizationMatchesUnordered) {
  // Two unordered configurations with m = 3, each listed 3! = 6 times when ordered.
  const std::vector<int> unordered = {4, 7};
  std::vector<int> ordered;
  for (int index : unordered) ordered.insert(ordered.end(), 6, index);
  const auto a = leray_schauder_degree(input_of(3, 1, 2, unordered));
  const auto b = leray_schauder_degree(input_of(3, 1, 2, ordered, CountingConvention::Ordered));
  EXPECT_EQ(a.d_m, b.d_m);
}

TEST(LeraySchauder, OrderedListNotClosedUnderPermutationsIsRejected) {
  EXPECT_THROW(leray_schauder_degree(input_of(2, 0, 2, {3}, CountingConvention::Ordered)), ValidationError);
}

TEST(LeraySchauder, IndexOutsideLegalRangeIsRejected) {
  // m = 1 on a 4-manifold: i_inf in [0, 4]
  EXPECT_THROW(leray_schauder_degree(input_of(1, 0, 2, {5})), ValidationError);
  EXPECT_THROW(leray_schauder_degree(input_of(2, 0, 2, {0})), ValidationError);
}

TEST(LeraySchauder, RandomInputsAgreeAndStayIntegral) {
  std::mt19937_64 rng(20261018);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = std::uniform_int_distribution<int>(1, 8)(rng);
    const int mbar = std::uniform_int_distribution<int>(0, 5)(rng);
    const int chi = std::uniform_int_distribution<int>(-10, 10)(rng);
    const int count = std::uniform_int_distribution<int>(0, 6)(rng);
    std::uniform_int_distribution<int> index(m - 1, 5 * m - 1);
    std::vector<int> indices;
    for (int i = 0; i < count; ++i) indices.push_back(index(rng));
    DegreeReport report;
    ASSERT_NO_THROW(report = leray_schauder_degree(input_of(m, mbar, chi, indices)));
    EXPECT_EQ(report.d_m, report.chi_sublevel_form);
  }
}

TEST(DegreeJson, RoundTripAndReport) {
  const DegreeInput input = degree_input_from_json(nlohmann::json::parse(R"({"m":1,"mbar":0,"crit":[]})"));
  EXPECT_EQ(input.chi_m, 2);
  EXPECT_EQ(input.convention, CountingConvention::Unordered);
  const auto j = leray_schauder_degree(input).to_json();
  EXPECT_EQ(j["d_m"].get<int>(), 1);
  EXPECT_TRUE(j.contains("chi_sublevel_form"));
  EXPECT_TRUE(j.contains("chi_barycenter"));
  EXPECT_EQ(degree_input_from_json(degree_input_to_json(input)).m, 1);
  EXPECT_THROW(degree_input_from_json(nlohmann::json::parse(R"({"mbar":0})")), ConfigError);
  EXPECT_THROW(degree_input_from_json(nlohmann::json::parse(R"({"m":1,"convention":"sorted"})")), ConfigError);
}
