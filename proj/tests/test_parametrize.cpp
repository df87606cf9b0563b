#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qcurv/errors.hpp"
#include "qcurv/parametrize.hpp"

using namespace qcurv;

namespace {

Point polar_point(double theta, double phi = 0.0) {
  Point p = Point::Zero(5);
  p(0) = std::cos(theta);
  p(1) = std::sin(theta) * std::cos(phi);
  p(2) = std::sin(theta) * std::sin(phi);
  return p;
}

ManifoldModel sphere(int k_max) {
  ModelSpec spec;
  spec.k_max = k_max;
  return ManifoldModel(spec);
}

ManifoldModel synthetic_pair_model() {
  ModelSpec spec;
  spec.backend = Backend::Synthetic;
  spec.k_max = 320;
  spec.spectrum_overrides = {{2, -100.0}};
  spec.resonance_m = 2;
  return ManifoldModel(spec);
}

}  // namespace

TEST(FitBubbles, RecoversExactBubble) {
  const ManifoldModel model = sphere(320);
  const GreenFunction greens(model, default_rho(model));
  const Point a = polar_point(0.7, 0.9);
  const double lambda = 40.0;
  const Field u = project_bubble(model, a, lambda, greens.rho(), 1).phi(model) + model.constant(3.0);
  const FitResult fit = fit_bubbles(model, greens, u, NeighborhoodSpec{});
  ASSERT_EQ(fit.config.size(), 1);
  EXPECT_LT(std::abs(fit.config.alpha[0] - 1.0), 1e-8);
  EXPECT_LT(geodesic_distance(fit.config.centers[0], a), 1e-6);
  EXPECT_LT(std::abs(fit.config.lambda[0] / lambda - 1.0), 1e-6);
  EXPECT_LT(fit.w_norm, 1e-8);
  EXPECT_FALSE(fit.boundary_hit);
}

TEST(FitBubbles, RecoversFromDisplacedStart) {
  const ManifoldModel model = sphere(320);
  const GreenFunction greens(model, default_rho(model));
  const Point a = polar_point(1.1, 0.3);
  const double lambda = 40.0;
  const Field u = project_bubble(model, a, lambda, greens.rho(), 1).phi(model);
  FitOptions options;
  options.initial_centers = {exp_map(a, tangent_frame(a).col(2) * (0.5 / lambda))};
  const FitResult fit = fit_bubbles(model, greens, u, NeighborhoodSpec{}, options);
  EXPECT_LT(geodesic_distance(fit.config.centers[0], a), 1e-6);
  EXPECT_LT(std::abs(fit.config.lambda[0] / lambda - 1.0), 1e-6);
  EXPECT_LT(fit.w_norm, 1e-8);
}

TEST(FitBubbles, GreenTailPerturbationStaysWithinItsSize) {
  const ManifoldModel model = sphere(320);
  const GreenFunction greens(model, default_rho(model));
  const Point a = polar_point(0.4);
  const double lambda = 40.0;
  const Field bubble = project_bubble(model, a, lambda, greens.rho(), 1).phi(model);
  const Field tail = remove_q_average(model, greens.green_field(polar_point(2.0, 1.5)));
  const double tail_norm = pn_norm(model, tail);
  for (double amplitude : {0.1 / lambda, 0.5 / lambda, 2.0 / lambda}) {
    const FitResult fit = fit_bubbles(model, greens, bubble + amplitude * tail, NeighborhoodSpec{});
    const double delta = amplitude * tail_norm;
    EXPECT_LE(fit.w_norm, 1.1 * delta);
    EXPECT_GT(fit.w_norm, 0.9 * delta);  // the tail is nearly orthogonal to the bubble directions
    EXPECT_LT(fit.orthogonality, 1e-6);
    EXPECT_NEAR(fit.w_ratio, fit.w_norm * fit.config.lambda[0], 1e-9);
  }
}

TEST(FitBubbles, PairIndependentOfPeakOrder) {
  const ManifoldModel model = synthetic_pair_model();
  const GreenFunction greens(model, default_rho(model));
  const Point a1 = polar_point(0.3);
  Point a2 = Point::Zero(5);
  a2(0) = std::cos(2.0);
  a2(2) = 0.6 * std::sin(2.0);
  a2(3) = 0.8 * std::sin(2.0);
  BubbleConfig truth;
  truth.alpha = {1.0, 1.0};
  truth.centers = {a1, a2};
  truth.lambda = {30.0, 40.0};
  truth.beta = {0.02};
  truth.mode_axis = north_pole(4);
  const Field u = build_bubble_set(model, greens.rho(), truth).sum + model.constant(1.5);
  NeighborhoodSpec spec;
  spec.m = 2;
  const FitResult reference = fit_bubbles(model, greens, u, spec);
  ASSERT_EQ(reference.config.size(), 2);
  EXPECT_NEAR(reference.config.beta[0], 0.02, 1e-8);
  EXPECT_LT(reference.w_norm, 1e-8);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss;
  const std::vector<Configuration> orders = {{a1, a2}, {a2, a1}, {a2, a1}, {a1, a2}};
  for (std::size_t trial = 0; trial < orders.size(); ++trial) {
    FitOptions options;
    options.initial_centers = orders[trial];
    if (trial >= 2) {
      for (auto& p : options.initial_centers) {
        Vec v(5);
        for (int c = 0; c < 5; ++c) v(c) = gauss(rng);
        p = exp_map(p, project_tangent(p, v) * 0.003);
      }
    }
    const FitResult fit = fit_bubbles(model, greens, u, spec, options);
    for (int i = 0; i < 2; ++i) {
      EXPECT_LT(geodesic_distance(fit.config.centers[i], reference.config.centers[i]), 1e-6);
      EXPECT_NEAR(fit.config.lambda[i] / reference.config.lambda[i], 1.0, 1e-6);
      EXPECT_NEAR(fit.config.alpha[i], reference.config.alpha[i], 1e-6);
    }
    EXPECT_NEAR(fit.config.beta[0], reference.config.beta[0], 1e-6);
  }
}

TEST(FitBubbles, WrongPeakCountIsRejected) {
  const ManifoldModel model = sphere(160);
  const GreenFunction greens(model, default_rho(model));
  const Field u = project_bubble(model, polar_point(0.5), 20.0, greens.rho(), 1).phi(model);
  NeighborhoodSpec spec;
  spec.m = 2;
  EXPECT_THROW(fit_bubbles(model, greens, u, spec), ValidationError);
}

TEST(Neighborhood, RejectsIllegalEta) {
  NeighborhoodSpec spec;
  spec.eta = 0.2;
  EXPECT_THROW(spec.validate(0.314), ValidationError);
  spec.eta = 0.05;
  EXPECT_NO_THROW(spec.validate(0.314));
}

class MembershipAt100 : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    model_ = new ManifoldModel(sphere(800));
    greens_ = new GreenFunction(*model_, default_rho(*model_));
    k_ = new KField(make_kfield(*model_, model_->constant(1.0) + model_->harmonic(north_pole(4), 1, 0.3)));
  }
  static void TearDownTestSuite() {
    delete k_;
    delete greens_;
    delete model_;
  }
  static Field bubble_at(const Point& a) { return project_bubble(*model_, a, 100.0, greens_->rho(), 1).phi(*model_); }
  // Polar angle where |grad log K| = 0.1.
  static double noncritical_angle() {
    double lo = 0.0, hi = 1.5;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      (k_->log_gradient(*model_, polar_point(mid)).norm() < 0.1 ? lo : hi) = mid;
    }
    return lo;
  }
  static ManifoldModel* model_;
  static GreenFunction* greens_;
  static KField* k_;
};
ManifoldModel* MembershipAt100::model_ = nullptr;
GreenFunction* MembershipAt100::greens_ = nullptr;
KField* MembershipAt100::k_ = nullptr;

TEST_F(MembershipAt100, CriticalPointBubbleIsDeep) {
  const Point pole = north_pole(4);
  const Membership mem = membership(*model_, *greens_, *k_, 1.0, bubble_at(pole), NeighborhoodSpec{},
                                    Configuration{pole});
  EXPECT_TRUE(mem.in_v);
  EXPECT_TRUE(mem.in_v_deep);
  ASSERT_TRUE(mem.in_v_deep_at_a0.has_value());
  EXPECT_TRUE(*mem.in_v_deep_at_a0);
  EXPECT_NEAR(mem.margins["V_deep"]["gradient_term"].get<double>(), 0.0, 1e-12);
  const auto diag = mem.diagnostics();
  for (const char* key : {"alpha", "a", "lambda", "beta", "w_norm", "tau", "margins"}) EXPECT_TRUE(diag.contains(key));
}

TEST_F(MembershipAt100, NoncriticalGradientDominates) {
  const Point a = polar_point(noncritical_angle());
  NeighborhoodSpec spec;
  const Membership loose = membership(*model_, *greens_, *k_, 1.0, bubble_at(a), spec, Configuration{north_pole(4)});
  EXPECT_TRUE(loose.in_v);
  const double grad_term = loose.margins["V_deep"]["gradient_term"];
  const double lambda_term = loose.margins["V_deep"]["lambda_term"];
  EXPECT_GT(grad_term, 50.0 * lambda_term);
  EXPECT_FALSE(*loose.in_v_deep_at_a0);
  // |grad F| / lambda is about 1e-2 here, below C_0 / lambda^2 = 0.1 for
  // C_0 = 1e3; a tighter constant separates the two cases at lambda = 100.
  spec.c0 = 50.0;
  const Membership tight = membership(*model_, *greens_, *k_, 1.0, bubble_at(a), spec);
  EXPECT_TRUE(tight.in_v);
  EXPECT_FALSE(tight.in_v_deep);
  const Membership tight_critical = membership(*model_, *greens_, *k_, 1.0, bubble_at(north_pole(4)), spec);
  EXPECT_TRUE(tight_critical.in_v_deep);
}
