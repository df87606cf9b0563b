#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "qcurv/continuation.hpp"
#include "qcurv/errors.hpp"
#include "qcurv/functional.hpp"
#include "qcurv/reduced.hpp"

using namespace qcurv;

namespace {

ManifoldModel sphere(int k_max) {
  ModelSpec spec;
  spec.k_max = k_max;
  return ManifoldModel(spec);
}

KField tilted_k(const ManifoldModel& model, const Point& axis) {
  return make_kfield(model, model.constant(1.0) + model.harmonic(axis, 1, 0.3));
}

Point polar_point(double theta, double phi = 0.0) {
  Point p = Point::Zero(5);
  p(0) = std::cos(theta);
  p(1) = std::sin(theta) * std::cos(phi);
  p(2) = std::sin(theta) * std::sin(phi);
  return p;
}

// Largest |dJ_t(u)[y]| over unit zonal harmonics y about the axis, through the
// functional module rather than the solver's own Galerkin system.
double max_weak_residual(const ManifoldModel& model, const KField& k, double t, const Field& u, const Point& axis,
                         int degrees) {
  const JFunctional functional(model, k, t, u);
  double worst = 0.0;
  for (int d = 1; d <= degrees; ++d)
    worst = std::max(worst, std::abs(functional.derivative(model.harmonic(axis, d, 1.0))));
  return worst;
}

}  // namespace

TEST(SolveAtT, ConstantKHasConstantSolution) {
  const ManifoldModel model = sphere(24);
  const KField one = make_kfield(model, model.constant(1.0));
  for (double t : {0.2, 0.5, 0.9}) {
    const Solution sol = solve_at_t(model, one, t, model.constant(0.0));
    EXPECT_EQ(sol.newton_steps, 0);
    EXPECT_LT(sol.coeffs.tail(sol.coeffs.size() - 1).cwiseAbs().maxCoeff(), 1e-14);
    // P u + t Q = t kappa K e^{4 u} holds pointwise for u = shift.
    const double residual = t * model.q_value() - t * model.kappa() * std::exp(model.n() * sol.shift);
    EXPECT_LT(std::abs(residual), 1e-10);
    EXPECT_LT(max_weak_residual(model, one, t, sol.field(model), north_pole(4), 6), 1e-10);
  }
}

TEST(SolveAtT, ConstantKReturnsToZeroFromPerturbedStart) {
  const ManifoldModel model = sphere(24);
  const KField one = make_kfield(model, model.constant(1.0));
  const Point pole = north_pole(4);
  const Field init = model.harmonic(pole, 1, 0.2) + model.harmonic(pole, 3, -0.05);
  const Solution sol = solve_at_t(model, one, 0.6, init);
  EXPECT_LT(sol.coeffs.tail(sol.coeffs.size() - 1).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(sol.gradient_norm, 1e-10 * (1.0 + sol.u_norm));
}

TEST(SolveAtT, MatchesGoldenFixture) {
  std::ifstream in(std::string(QCURV_TEST_DATA_DIR) + "/zonal_t05.json");
  ASSERT_TRUE(in.good());
  const auto golden = nlohmann::json::parse(in);
  const ManifoldModel model = sphere(golden["k_max"].get<int>());
  const KField k = tilted_k(model, north_pole(4));
  const Solution sol = solve_at_t(model, k, golden["t"].get<double>(), model.constant(0.0));
  EXPECT_LE(sol.newton_steps, 15);
  EXPECT_NEAR(sol.J, golden["J"].get<double>(), 1e-11);
  const auto coeffs = golden["coefficients"].get<std::vector<double>>();
  ASSERT_EQ(std::size_t(sol.coeffs.size()), coeffs.size());
  for (std::size_t i = 0; i < coeffs.size(); ++i) EXPECT_NEAR(sol.coeffs(Eigen::Index(i)), coeffs[i], 1e-12) << i;
}

TEST(SolveAtT, AcceptedGradientIsBelowTolerance) {
  const ManifoldModel model = sphere(48);
  const KField k = tilted_k(model, north_pole(4));
  for (double t : {0.5, 0.9, 0.99}) {
    const Solution sol = solve_at_t(model, k, t, model.constant(0.0));
    EXPECT_LT(sol.gradient_norm, 1e-10 * (1.0 + sol.u_norm));
    EXPECT_NEAR(galerkin_gradient_norm(model, k, t, sol.field(model)), sol.gradient_norm, 1e-12);
    EXPECT_LT(max_weak_residual(model, k, t, sol.field(model), north_pole(4), 10), 1e-9);
  }
}

TEST(SolveAtT, SolutionIsZonalAboutTheAxisOfK) {
  const ManifoldModel model = sphere(32);
  const Point axis = polar_point(0.8, 0.4);
  const Solution tilted = solve_at_t(model, tilted_k(model, axis), 0.7, model.constant(0.0));
  const Solution upright = solve_at_t(model, tilted_k(model, north_pole(4)), 0.7, model.constant(0.0));
  EXPECT_LT(geodesic_distance(tilted.axis, axis), 1e-14);
  EXPECT_LT((tilted.coeffs - upright.coeffs).cwiseAbs().maxCoeff(), 1e-13);
  // Points on one latitude circle about the axis share the value.
  const Field u = tilted.field(model);
  const Mat frame = tangent_frame(axis);
  const double reference = evaluate(model, u, exp_map(axis, 0.6 * frame.col(0)));
  for (int c = 1; c < 4; ++c) EXPECT_NEAR(evaluate(model, u, exp_map(axis, 0.6 * frame.col(c))), reference, 1e-13);
}

TEST(SolveAtT, RejectsParameterOutsideUnitInterval) {
  const ManifoldModel model = sphere(16);
  const KField k = tilted_k(model, north_pole(4));
  EXPECT_THROW(solve_at_t(model, k, 1.0, model.constant(0.0)), ValidationError);
  EXPECT_THROW(solve_at_t(model, k, 0.0, model.constant(0.0)), ValidationError);
}

TEST(Schedule, GeometricInOneMinusT) {
  Schedule schedule;
  schedule.t0 = 0.5;
  schedule.t1 = 1.0 - 1e-6;
  schedule.steps = 7;
  const auto values = schedule.values();
  ASSERT_EQ(values.size(), 7u);
  EXPECT_DOUBLE_EQ(values.front(), 0.5);
  EXPECT_DOUBLE_EQ(values.back(), 1.0 - 1e-6);
  for (std::size_t i = 1; i + 1 < values.size(); ++i)
    EXPECT_NEAR((1.0 - values[i + 1]) / (1.0 - values[i]), (1.0 - values[1]) / (1.0 - values[0]), 1e-12);
  schedule.t1 = 1.0;
  EXPECT_THROW(schedule.values(), ValidationError);
}

TEST(ContinueBranch, ConstantKStaysBounded) {
  const ManifoldModel model = sphere(48);
  const GreenFunction greens(model, default_rho(model));
  const KField one = make_kfield(model, model.constant(1.0));
  BranchOptions options;
  options.schedule.steps = 12;
  const BranchRecord branch = continue_branch(model, greens, one, options);
  EXPECT_EQ(branch.stop_reason, "schedule end");
  ASSERT_EQ(branch.rows.size(), 12u);
  const double constant_max = -std::log(model.omega()) / model.n();
  for (const auto& row : branch.rows) {
    EXPECT_NEAR(row.max_u, constant_max, 1e-12);
    EXPECT_FALSE(row.fitted);
  }
  EXPECT_THROW(fit_bubbling_rate(branch, CritConfig{}), ValidationError);
}

class BlowUpBranch : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    model_ = new ManifoldModel(sphere(640));
    greens_ = new GreenFunction(*model_, default_rho(*model_));
    k_ = new KField(tilted_k(*model_, north_pole(4)));
    BranchOptions options;
    options.schedule.steps = 100;
    branch_ = new BranchRecord(continue_branch(*model_, *greens_, *k_, options));
  }
  static void TearDownTestSuite() {
    delete branch_;
    delete k_;
    delete greens_;
    delete model_;
  }
  static ManifoldModel* model_;
  static GreenFunction* greens_;
  static KField* k_;
  static BranchRecord* branch_;
};
ManifoldModel* BlowUpBranch::model_ = nullptr;
GreenFunction* BlowUpBranch::greens_ = nullptr;
KField* BlowUpBranch::k_ = nullptr;
BranchRecord* BlowUpBranch::branch_ = nullptr;

TEST_F(BlowUpBranch, ConcentratesAtTheMaximumOfK) {
  EXPECT_EQ(branch_->stop_reason.rfind("resolution limit", 0), 0u) << branch_->stop_reason;
  const BranchRow& last = branch_->rows.back();
  ASSERT_TRUE(last.fitted);
  EXPECT_GT(last.lambda, 640.0 / 16.0);
  EXPECT_LT(last.a_theta, 1e-8);
  for (std::size_t i = 1; i < branch_->rows.size(); ++i) EXPECT_GT(branch_->rows[i].max_u, branch_->rows[i - 1].max_u);
  for (const auto& row : branch_->rows) EXPECT_LT(row.grad_norm, 1e-10 * (1.0 + branch_->snapshots[row.snapshot].u_norm));
}

TEST_F(BlowUpBranch, MaxUTracksLogTwoLambda) {
  const double offset = bubble_profile_offset(*model_, *k_);
  for (const auto& row : branch_->rows) {
    if (!row.fitted || row.boundary_hit || row.lambda < 20.0) continue;
    EXPECT_NEAR(std::log(2.0 * row.lambda) - row.max_u, offset, 0.01) << "t = " << row.t;
  }
}

TEST_F(BlowUpBranch, RateStabilizesWithNegativeIndex) {
  const CritSearchResult crit = find_critical_points(*greens_, *k_, 1);
  const CritConfig* pole = nullptr;
  for (const auto& c : crit.configs)
    if (geodesic_distance(c.points[0], north_pole(4)) < 1e-6) pole = &c;
  ASSERT_NE(pole, nullptr);
  const RateFit rate = fit_bubbling_rate(*branch_, *pole);
  EXPECT_TRUE(rate.sign_ok);
  EXPECT_LT(rate.l_k, 0.0);
  EXPECT_GT(rate.cbar_hat, 0.0);
  EXPECT_GE(rate.rows_used, 10);
  EXPECT_TRUE(rate.stabilized) << rate.to_json().dump();
  EXPECT_TRUE(rate.ratio_ok) << rate.to_json().dump();
  EXPECT_LT(rate.center_distance, 1e-6);
  EXPECT_LT(std::abs(rate.trend_exponent), 0.05);
}

TEST_F(BlowUpBranch, DeepRowsRespectTauBound) {
  const NeighborhoodSpec spec;
  int deep = 0;
  for (const auto& row : branch_->rows) {
    if (!row.in_v_deep) continue;
    ++deep;
    EXPECT_LE(std::abs(row.tau), spec.c0 / (row.lambda * row.lambda));
  }
  EXPECT_GT(deep, 5);
}

TEST_F(BlowUpBranch, CsvHasFixedHeader) {
  const std::string text = branch_->csv().str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,max_u,lambda,a_theta,tau,J,grad_norm,y_lambda_form,y_maxu_form");
}
