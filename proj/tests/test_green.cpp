#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qcurv/errors.hpp"
#include "qcurv/field.hpp"
#include "qcurv/green.hpp"

using namespace qcurv;

namespace {

ManifoldModel sphere_model(int k_max = 60) {
  ModelSpec spec;
  spec.k_max = k_max;
  return ManifoldModel(spec);
}

}  // namespace

TEST(Cutoff, PlateauAndIdentity) {
  const double rho = 0.3;
  CutoffProfile chi(rho);
  EXPECT_DOUBLE_EQ(cutoff_eval(chi, 0.5 * rho), 0.5 * rho);
  EXPECT_DOUBLE_EQ(cutoff_eval(chi, 3.0 * rho), 2.0 * rho);
  const double mid = cutoff_eval(chi, 1.5 * rho);
  EXPECT_GE(mid, rho);
  EXPECT_LE(mid, 2 * rho);
  EXPECT_THROW(cutoff_eval(chi, -1e-3), ValidationError);
}

TEST(Cutoff, MonotoneAndTwiceDifferentiable) {
  const double rho = 0.25;
  CutoffProfile chi(rho);
  double prev = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const double t = 3.0 * rho * i / 4000;
    const double v = chi.value(t);
    EXPECT_GE(v, prev - 1e-15);
    prev = v;
    const auto j = chi.jet(t);
    if (t > 1e-3 && std::abs(t - rho) > 1e-3 && std::abs(t - 2 * rho) > 1e-3) {
      const double h = 1e-6;
      EXPECT_NEAR(j.d1, (chi.value(t + h) - chi.value(t - h)) / (2 * h), 1e-6);
      EXPECT_NEAR(j.d2, (chi.jet(t + h).d1 - chi.jet(t - h).d1) / (2 * h), 1e-4 * (1 + std::abs(j.d2)));
    }
  }
  // C^2 joins: derivatives approach the outer values
  const auto in = chi.jet(rho * (1 + 1e-4));
  EXPECT_NEAR(in.d1, 1.0, 1e-8);
  EXPECT_NEAR(in.d2, 0.0, 1e-6);
  const auto out = chi.jet(2 * rho * (1 - 1e-4));
  EXPECT_NEAR(out.d1, 0.0, 1e-8);
  EXPECT_NEAR(out.d2, 0.0, 1e-6);
}

TEST(Cutoff, LegalWindow) {
  const auto model = sphere_model(20);
  EXPECT_TRUE(rho_is_legal(model, default_rho(model)));
  EXPECT_FALSE(rho_is_legal(model, 0.3 * kPi));
  EXPECT_FALSE(rho_is_legal(model, 0.0));
  EXPECT_THROW(GreenFunction(model, 0.3 * kPi), ValidationError);
}

TEST(GreenPair, RepresentationFormulaOnRandomFunctions) {
  const auto model = sphere_model(60);
  std::mt19937_64 rng(17);
  const double mass = 6.0 * model.omega();
  for (int trial = 0; trial < 20; ++trial) {
    const Point a = random_point(4, rng);
    const GreenPair pair = green_pair(model, a, default_rho(model));
    const Field psi = model.random_field(rng, 60, 2);
    const double lhs = l2_inner(model, pair.g, apply_gjms(model, psi)) / mass;
    const double rhs = evaluate(model, psi, a) - q_average(model, psi);
    EXPECT_NEAR(lhs, rhs, 1e-6);
  }
}

TEST(GreenPair, AntipodalEquivariance) {
  const auto model = sphere_model(60);
  std::mt19937_64 rng(2);
  const Point a = random_point(4, rng);
  const GreenPair p = green_pair(model, a, default_rho(model));
  const GreenPair q = green_pair(p.function, -a);
  for (int i = 0; i < 10; ++i) {
    const Point x = random_point(4, rng);
    EXPECT_NEAR(evaluate(model, p.g, x), evaluate(model, q.g, -x), 1e-10);
    EXPECT_NEAR(p.G(x), q.G(-x), 1e-10);
  }
}

TEST(GreenPair, RegularDiagonalConstantAndMatchesOracle) {
  // On S^4, G(a,x) = -log(1 - a.x) + c with c fixed by zero mean:
  // c = (|S^3|/|S^4|) int_{-1}^{1} log(1-t)(1-t^2) dt = log 2 - 5/6, and
  // H(a,a) = lim (G + 2 log d_{g_a}) = c + log 2.
  const auto model = sphere_model(60);
  const double oracle = 2.0 * std::log(2.0) - 5.0 / 6.0;
  std::mt19937_64 rng(4);
  auto gf = std::make_shared<GreenFunction>(model, default_rho(model));
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < 5; ++i) {
    const GreenPair pair = green_pair(gf, random_point(4, rng));
    const double haa = pair.H(pair.a);
    EXPECT_DOUBLE_EQ(haa, pair.h_aa);
    lo = std::min(lo, haa);
    hi = std::max(hi, haa);
  }
  EXPECT_LT(hi - lo, 1e-6);
  EXPECT_NEAR(lo, oracle, 1e-10);
}

TEST(GreenPair, SymmetryAndQNormalization) {
  const auto model = sphere_model(60);
  std::mt19937_64 rng(8);
  auto gf = std::make_shared<GreenFunction>(model, default_rho(model));
  for (int i = 0; i < 10; ++i) {
    const Point a = random_point(4, rng);
    Point b = random_point(4, rng);
    while (geodesic_distance(a, b) <= gf->rho()) b = random_point(4, rng);
    const GreenPair pa = green_pair(gf, a);
    const GreenPair pb = green_pair(gf, b);
    EXPECT_LT(std::abs(evaluate(model, pa.g, b) - evaluate(model, pb.g, a)), 1e-8);
    EXPECT_LT(std::abs(pa.G(b) - pb.G(a)), 1e-8);
    const double qg = l2_inner(model, model.q_field(), pa.g);
    const double norms = std::sqrt(l2_inner(model, model.q_field(), model.q_field()) * l2_inner(model, pa.g, pa.g));
    EXPECT_LT(std::abs(qg), 1e-8 * norms);
  }
}

TEST(GreenPair, SplittingHoldsPointwise) {
  const auto model = sphere_model(60);
  std::mt19937_64 rng(12);
  const GreenPair pair = green_pair(model, random_point(4, rng), default_rho(model));
  for (double theta : {1e-3, 0.05, 0.2, 0.4, 0.7, 1.5, 3.0}) {
    const Point x = exp_map(pair.a, theta * tangent_frame(pair.a).col(1));
    EXPECT_NEAR(pair.G(x), pair.function->log_term(pair.a, x) + pair.H(x), 1e-12 * (1 + std::abs(pair.G(x))));
  }
}

TEST(GreenPair, LogCoefficientIsTwo) {
  const auto model = sphere_model(60);
  const Point a = north_pole(4);
  const GreenPair pair = green_pair(model, a, default_rho(model));
  const Vec dir = tangent_frame(a).col(0);
  std::vector<double> xs, ys;
  for (double d = 1e-4; d <= 1.01e-2; d *= 2) {
    xs.push_back(std::log(d));
    ys.push_back(pair.G(exp_map(a, d * dir)));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i] / xs.size(), my += ys[i] / ys.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) sxy += (xs[i] - mx) * (ys[i] - my), sxx += (xs[i] - mx) * (xs[i] - mx);
  EXPECT_NEAR(sxy / sxx, -2.0, 0.02);
}

TEST(GreenPair, RotationEquivariance) {
  const auto model = sphere_model(40);
  std::mt19937_64 rng(31);
  auto gf = std::make_shared<GreenFunction>(model, default_rho(model));
  const Point a = random_point(4, rng);
  const GreenPair pa = green_pair(gf, a);
  for (int r = 0; r < 5; ++r) {
    const Mat R = random_rotation(5, rng);
    const GreenPair pr = green_pair(gf, R * a);
    const Point x = random_point(4, rng);
    EXPECT_NEAR(evaluate(model, pa.g, x), evaluate(model, pr.g, R * x), 1e-9);
  }
}

TEST(Probe, ExactLogSubtraction) {
  const auto model = sphere_model(60);
  const GreenPair pair = green_pair(model, north_pole(4), default_rho(model));
  const double rho = pair.function->rho();
  const auto test_green = [&](const Point& x) { return pair.function->log_term(pair.a, x) + 1.0; };
  const auto rows = regular_part_probe(pair, {rho / 2, rho / 4, rho / 8}, test_green);
  for (const auto& row : rows) {
    EXPECT_NEAR(row.sup_abs_h, 1.0, 1e-12);
    EXPECT_LT(row.max_gradient, 1e-6);
  }
}

TEST(Probe, BoundedRegularPartOnS4) {
  const auto model = sphere_model(60);
  const GreenPair pair = green_pair(model, north_pole(4), default_rho(model));
  const double rho = pair.function->rho();
  const auto rows = regular_part_probe(pair, {rho / 2, rho / 4, rho / 8});
  double lo = 1e300, hi = -1e300;
  for (const auto& row : rows) {
    lo = std::min(lo, row.sup_abs_h);
    hi = std::max(hi, row.sup_abs_h);
    EXPECT_LT(row.max_gradient, 10.0);
  }
  EXPECT_LT(hi - lo, 5e-2);
}

TEST(Probe, UnderResolvedModel) {
  const auto model = sphere_model(8);
  EXPECT_THROW(green_pair(model, north_pole(4), default_rho(model)), NumericalError);
  GreenOptions loose;
  loose.check_resolution = false;
  const GreenPair pair = green_pair(model, north_pole(4), default_rho(model), loose);
  EXPECT_THROW(regular_part_probe(pair, {default_rho(model) / 2}), NumericalError);
}

TEST(GreenPair, SyntheticIsFlaggedNonGeometric) {
  ModelSpec spec;
  spec.backend = Backend::Synthetic;
  spec.k_max = 30;
  spec.spectrum_overrides = {{2, -5.0}};
  const ManifoldModel model(spec);
  GreenFunction gf(model, default_rho(model));
  EXPECT_FALSE(gf.geometric());
  EXPECT_GT(std::abs(gf.regular_coefficients()(2)), 1.0);
}
