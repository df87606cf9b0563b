#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qcurv/bubbles.hpp"
#include "qcurv/errors.hpp"

using namespace qcurv;

namespace {

ManifoldModel sphere_model(int k_max) {
  ModelSpec spec;
  spec.k_max = k_max;
  return ManifoldModel(spec);
}

}  // namespace

TEST(StandardBubble, Examples) {
  const Vec zero = Vec::Zero(4);
  EXPECT_DOUBLE_EQ(standard_bubble(zero, 1.0, zero), std::log(2.0));
  Vec b(4);
  b << 0.1, -0.2, 0.3, 0.05;
  const double lambda = 7.0;
  EXPECT_DOUBLE_EQ(standard_bubble(b, lambda, b), std::log(2 * lambda));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 1);
  for (int i = 0; i < 20; ++i) {
    Vec y(4);
    for (int j = 0; j < 4; ++j) y(j) = b(j) + 0.3 * g(rng);
    EXPECT_LT(standard_bubble(b, lambda, y), std::log(2 * lambda));
  }
}

TEST(StandardBubble, RadialEquationResidual) {
  // Hand derivation with s = r^2, g = 1/(1+lambda^2 s) and the radial
  // Laplacian 4 s d_ss + 2n d_s: for n = 4, Delta delta = -4 lambda^2 (g + g^2),
  // Delta g = -8 lambda^2 g^3, Delta g^2 = lambda^2 (8 g^3 - 24 g^4), hence
  // Delta^2 delta = 96 lambda^4 g^4 = 3! (2 lambda g)^4.
  for (double lambda : {0.5, 1.0, 10.0, 100.0}) {
    for (double lr = -3; lr <= 3.0001; lr += 0.25) {
      const double r = std::pow(10.0, lr);
      const double g = 1.0 / (1.0 + lambda * lambda * r * r);
      const double oracle = 96.0 * std::pow(lambda, 4) * std::pow(g, 4);
      EXPECT_NEAR(bubble_polyharmonic(4, lambda, r) / oracle, 1.0, 1e-12);
      EXPECT_LT(bubble_equation_residual(4, lambda, r), 1e-8);
    }
  }
  // higher even dimensions satisfy the same equation
  for (int n : {6, 8})
    for (double r : {1e-3, 0.1, 1.0, 10.0, 1e3}) EXPECT_LT(bubble_equation_residual(n, 3.0, r), 1e-8);
}

TEST(ConformalFactor, ChartConventions) {
  const auto model = sphere_model(10);
  std::mt19937_64 rng(5);
  const Point a = random_point(4, rng);
  const double rho = default_rho(model);
  const ConformalFactor cf = conformal_factor(model, a, rho);
  EXPECT_NEAR(cf.value(a), 0.0, 1e-15);
  // |y(exp_a(theta))| = 2 tan(theta/2)
  const Vec v = tangent_frame(a).col(2);
  EXPECT_NEAR(cf.distance(exp_map(a, 0.5 * kPi * v)), 2.0, 1e-13);
  EXPECT_NEAR(cf.distance(exp_map(a, 0.3 * v)), 2.0 * std::tan(0.15), 1e-14);
  // det of e^{2u_a} g in chart coordinates, with the chart Jacobian taken by
  // central differences
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 10; ++trial) {
    Vec y(4);
    for (int j = 0; j < 4; ++j) y(j) = g(rng);
    y *= (1.5 * rho) * std::abs(g(rng)) / (1.0 + y.norm());
    const double h = 1e-6;
    Mat jac(5, 4);
    for (int j = 0; j < 4; ++j) {
      Vec e = Vec::Zero(4);
      e(j) = h;
      jac.col(j) = (cf.chart().point(y + e) - cf.chart().point(y - e)) / (2 * h);
    }
    const Point x = cf.chart().point(y);
    const Mat metric = std::exp(2 * cf.value(x)) * (jac.transpose() * jac);
    EXPECT_NEAR(metric.determinant(), 1.0, 1e-8);
    EXPECT_NEAR(cf.metric(y).determinant(), 1.0, 1e-12);
  }
  ModelSpec synth;
  synth.backend = Backend::Synthetic;
  synth.k_max = 10;
  EXPECT_THROW(conformal_factor(ManifoldModel(synth), a, rho), ValidationError);
}

TEST(TruncatedBubble, Examples) {
  const auto model = sphere_model(20);
  const double rho = default_rho(model);
  const CutoffProfile cutoff(rho);
  std::mt19937_64 rng(9);
  const Point a = random_point(4, rng);
  const double lambda = 15.0;
  EXPECT_NEAR(truncated_bubble_value(cutoff, a, lambda, a), std::log(2 * lambda), 1e-15);
  const ConformalChart chart(a);
  const Vec v = tangent_frame(a).col(0);
  const double plateau = std::log(2 * lambda / (1 + 4 * lambda * lambda * rho * rho));
  for (double theta : {1.0, 2.0, 3.1}) EXPECT_NEAR(truncated_bubble_value(cutoff, a, lambda, exp_map(a, theta * v)), plateau, 1e-13);
  for (double theta : {0.01, 0.1, 0.2}) {
    const Point x = exp_map(a, theta * v);
    ASSERT_LE(chart.distance(x), rho);
    EXPECT_NEAR(truncated_bubble_value(cutoff, a, lambda, x), standard_bubble(Vec::Zero(4), lambda, chart.coords(x)), 1e-13);
  }
  EXPECT_THROW(truncated_bubble(model, a, lambda, 0.9 * kPi), ValidationError);
}

TEST(ProjectedBubble, SideConditionsAndResidual) {
  const auto model = sphere_model(200);
  const Point a = north_pole(4);
  const auto pb = project_bubble(model, a, 20.0, default_rho(model), 1);
  const Field phi = pb.phi(model);
  EXPECT_LT(std::abs(l2_inner(model, model.q_field(), phi)), 1e-8);
  EXPECT_LT(pb.galerkin_residual(model), 1e-8);
  EXPECT_NEAR(pb.rhs_mass, 6.0 * model.omega(), 1e-10 * model.omega());
}

TEST(ProjectedBubble, LambdaDerivativeMatchesFiniteDifference) {
  const auto model = sphere_model(240);
  const Point a = north_pole(4);
  const double rho = default_rho(model);
  const double lambda = 20.0, h = 1e-3;
  const auto pb = project_bubble(model, a, lambda, rho, 1);
  const auto up = project_bubble(model, a, lambda + h, rho, 1);
  const auto dn = project_bubble(model, a, lambda - h, rho, 1);
  const Vec fd = (up.coeffs - dn.coeffs) / (2 * h);
  EXPECT_LT((fd - pb.dlambda).norm() / pb.dlambda.norm(), 1e-5);
}

TEST(ProjectedBubble, CentreDerivativeMatchesFiniteDifference) {
  const auto model = sphere_model(200);
  std::mt19937_64 rng(13);
  const Point a = random_point(4, rng);
  const double rho = default_rho(model);
  const auto pb = project_bubble(model, a, 12.0, rho, 1);
  const Vec v = tangent_frame(a).col(1);
  const double h = 1e-5;
  const Field up = project_bubble(model, exp_map(a, h * v), 12.0, rho, 1).phi(model);
  const Field dn = project_bubble(model, exp_map(a, -h * v), 12.0, rho, 1).phi(model);
  const Field da = pb.dphi_da(model, v);
  for (int i = 0; i < 5; ++i) {
    const Point x = random_point(4, rng);
    const double fd = (evaluate(model, up, x) - evaluate(model, dn, x)) / (2 * h);
    EXPECT_NEAR(evaluate(model, da, x), fd, 1e-5 * (1 + std::abs(fd)));
  }
}

TEST(ProjectedBubble, AliasingDetector) {
  const auto model = sphere_model(60);
  EXPECT_THROW(project_bubble(model, north_pole(4), 40.0, default_rho(model), 1), NumericalError);
}

TEST(ProjectedBubble, RotationEquivariance) {
  const auto model = sphere_model(160);
  std::mt19937_64 rng(21);
  const Point a = random_point(4, rng);
  const double rho = default_rho(model);
  const Field phi = project_bubble(model, a, 15.0, rho, 1).phi(model);
  for (int r = 0; r < 3; ++r) {
    const Mat R = random_rotation(5, rng);
    const Field rotated = project_bubble(model, R * a, 15.0, rho, 1).phi(model);
    const Point x = random_point(4, rng);
    EXPECT_NEAR(evaluate(model, rotated, R * x), evaluate(model, phi, x), 1e-8);
  }
}

TEST(ProjectedBubble, FarFieldApproachesGreenFunction) {
  // phi(x) - phi(x') - (G(a,x) - G(a,x')) for d(a,x), d(a,x') > 2 rho
  const Point a = north_pole(4);
  const Vec v = tangent_frame(a).col(0);
  const Point x = exp_map(a, 1.2 * v), xp = exp_map(a, 2.5 * v);
  std::vector<double> logl, loge;
  for (double lambda : {20.0, 40.0, 80.0, 160.0}) {
    const auto model = sphere_model(int(10 * lambda));
    const double rho = default_rho(model);
    const GreenFunction gf(model, rho);
    const Field phi = project_bubble(model, a, lambda, rho, 1).phi(model);
    const double diff = evaluate(model, phi, x) - evaluate(model, phi, xp) - (gf.green(a, x) - gf.green(a, xp));
    logl.push_back(std::log(lambda));
    loge.push_back(std::log(std::abs(diff)));
  }
  const double slope = (loge.back() - loge.front()) / (logl.back() - logl.front());
  EXPECT_LE(slope, -2.0) << "decay exponent " << slope;
  RecordProperty("decay_exponent", std::to_string(slope));
}
