#include "suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "qcurv/bubbles.hpp"
#include "qcurv/continuation.hpp"
#include "qcurv/degree.hpp"
#include "qcurv/errors.hpp"
#include "qcurv/field.hpp"
#include "qcurv/functional.hpp"
#include "qcurv/green.hpp"
#include "qcurv/parametrize.hpp"
#include "qcurv/reduced.hpp"

namespace qcurv::tools {

namespace {

using Clock = std::chrono::steady_clock;

Check below(std::string name, double value, double threshold, std::string detail = {}) {
  return {std::move(name), value < threshold, value, threshold, "<", std::move(detail)};
}

Check at_most(std::string name, double value, double threshold, std::string detail = {}) {
  return {std::move(name), value <= threshold, value, threshold, "<=", std::move(detail)};
}

Check above(std::string name, double value, double threshold, std::string detail = {}) {
  return {std::move(name), value > threshold, value, threshold, ">", std::move(detail)};
}

Check holds(std::string name, bool ok, std::string detail = {}) {
  return {std::move(name), ok, ok ? 1.0 : 0.0, 1.0, "==", std::move(detail)};
}

// Runs body, catching module errors as a failed check so one broken
// invariant does not hide the rest of the suite.
template <class Body>
SuiteReport run_suite(const std::string& name, Body body) {
  SuiteReport report;
  report.name = name;
  const auto start = Clock::now();
  try {
    body(report.checks);
  } catch (const std::exception& e) {
    report.checks.push_back(holds("completed", false, e.what()));
  }
  report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

ManifoldModel sphere(int k_max) {
  ModelSpec spec;
  spec.k_max = k_max;
  return ManifoldModel(spec);
}

ManifoldModel synthetic(int k_max, int m, double mu2) {
  ModelSpec spec;
  spec.backend = Backend::Synthetic;
  spec.k_max = k_max;
  spec.resonance_m = m;
  spec.spectrum_overrides = {{2, mu2}};
  return ManifoldModel(spec);
}

Point polar_point(double theta, double phi = 0.0) {
  Point p = Point::Zero(5);
  p(0) = std::cos(theta);
  p(1) = std::sin(theta) * std::cos(phi);
  p(2) = std::sin(theta) * std::sin(phi);
  return p;
}

KField tilted_k(const ManifoldModel& model, double amplitude = 0.3) {
  return make_kfield(model, model.constant(1.0) + model.harmonic(north_pole(model.n()), 1, amplitude));
}

KField random_k(const ManifoldModel& model, std::mt19937_64& rng) {
  return make_kfield(model, model.constant(2.0) + 0.5 * model.random_field(rng, 4, 6, true));
}

double l2_norm(const ManifoldModel& model, const Field& u) { return std::sqrt(std::max(0.0, l2_inner(model, u, u))); }

double least_squares_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / double(xs.size());
    my += ys[i] / double(ys.size());
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

Configuration random_configuration(const ManifoldModel& model, int m, std::mt19937_64& rng) {
  for (;;) {
    Configuration a;
    for (int i = 0; i < m; ++i) a.push_back(random_point(model.n(), rng));
    if (min_separation(a) > 0.5) return a;
  }
}

}  // namespace

bool SuiteReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

nlohmann::json SuiteReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : checks)
    list.push_back({{"name", c.name},
                    {"passed", c.passed},
                    {"value", format_double(c.value)},
                    {"relation", c.relation},
                    {"threshold", format_double(c.threshold)},
                    {"detail", c.detail}});
  return {{"suite", name}, {"passed", passed()}, {"checks", list}};
}

CsvTable suites_table(const std::vector<SuiteReport>& suites) {
  CsvTable table({"suite", "check", "value", "relation", "threshold", "passed"});
  for (const auto& s : suites)
    for (const auto& c : s.checks)
      table.add_row({s.name, c.name, format_double(c.value), c.relation, format_double(c.threshold),
                     c.passed ? "1" : "0"});
  return table;
}

SuiteReport operator_suite(Level level) {
  return run_suite("operators", [level](std::vector<Check>& checks) {
    const ManifoldModel model = sphere(60);
    std::mt19937_64 rng(21);
    const int trials = level == Level::Full ? 10 : 4;
    double adjoint = 0.0, inverse = 0.0;
    for (int i = 0; i < trials; ++i) {
      const Field u = model.random_field(rng, 60, 2);
      const Field v = model.random_field(rng, 60, 2);
      const double lhs = l2_inner(model, apply_gjms(model, u), v);
      const double rhs = l2_inner(model, u, apply_gjms(model, v));
      adjoint = std::max(adjoint, std::abs(lhs - rhs) / (l2_norm(model, u) * l2_norm(model, v)));
      const Field w = remove_q_average(model, u);
      inverse = std::max(inverse, l2_norm(model, invert_gjms(model, apply_gjms(model, w)) - w) / l2_norm(model, w));
    }
    checks.push_back(below("self_adjoint_relative", adjoint, 1e-10));
    checks.push_back(below("invert_apply_relative", inverse, 1e-10));
    int kernel_extra = 0;
    const double scale = model.gjms_eigenvalues().cwiseAbs().maxCoeff();
    for (int k = 1; k <= model.k_max(); ++k)
      if (std::abs(model.gjms_eigenvalue(k)) <= 1e-14 * scale) ++kernel_extra;
    checks.push_back(holds("kernel_is_constants",
                           kernel_extra == 0 && l2_norm(model, apply_gjms(model, model.constant(1.0))) == 0.0));
    const int n = model.n();
    const double expected = 0.5 * factorial(n - 1) * model.omega() * model.euler_characteristic();
    checks.push_back(below("total_q_relative", std::abs(integral(model, model.q_field()) / expected - 1.0), 1e-8));
  });
}

SuiteReport green_suite(Level level) {
  return run_suite("green", [level](std::vector<Check>& checks) {
    const ManifoldModel model = sphere(60);
    auto function = std::make_shared<GreenFunction>(model, default_rho(model));
    std::mt19937_64 rng(17);
    const int representation_trials = level == Level::Full ? 20 : 5;
    const double mass = factorial(model.n() - 1) * model.omega();
    double representation = 0.0;
    for (int i = 0; i < representation_trials; ++i) {
      const GreenPair pair = green_pair(function, random_point(4, rng));
      const Field psi = model.random_field(rng, 60, 2);
      const double lhs = l2_inner(model, pair.g, apply_gjms(model, psi)) / mass;
      representation = std::max(representation, std::abs(lhs - (evaluate(model, psi, pair.a) - q_average(model, psi))));
    }
    checks.push_back(below("representation_formula", representation, 1e-6));

    double symmetry = 0.0, normalization = 0.0;
    for (int i = 0; i < (level == Level::Full ? 10 : 3); ++i) {
      const Point a = random_point(4, rng);
      Point b = random_point(4, rng);
      while (geodesic_distance(a, b) <= function->rho()) b = random_point(4, rng);
      const GreenPair pa = green_pair(function, a);
      const GreenPair pb = green_pair(function, b);
      symmetry = std::max(symmetry, std::abs(pa.G(b) - pb.G(a)));
      const double qg = l2_inner(model, model.q_field(), pa.g);
      normalization = std::max(normalization, std::abs(qg) / (l2_norm(model, model.q_field()) * l2_norm(model, pa.g)));
    }
    checks.push_back(below("symmetry", symmetry, 1e-8));
    checks.push_back(below("q_normalization_relative", normalization, 1e-8));

    const GreenPair pole = green_pair(function, north_pole(4));
    const Vec direction = tangent_frame(pole.a).col(0);
    std::vector<double> xs, ys;
    for (double d = 1e-4; d <= 1.01e-2; d *= 2) {
      xs.push_back(std::log(d));
      ys.push_back(pole.G(exp_map(pole.a, d * direction)));
    }
    const double slope = least_squares_slope(xs, ys);
    checks.push_back(below("log_coefficient_slope", std::abs(slope / -2.0 - 1.0), 0.01, "slope " + format_double(slope)));

    const double rho = function->rho();
    const auto rows = regular_part_probe(pole, {rho / 2, rho / 4, rho / 8});
    double lo = 1e300, hi = -1e300;
    for (const auto& row : rows) {
      lo = std::min(lo, row.sup_abs_h);
      hi = std::max(hi, row.sup_abs_h);
    }
    checks.push_back(below("regular_part_probe_spread", hi - lo, 5e-2));
  });
}

SuiteReport bubble_pde_suite(Level) {
  return run_suite("bubble_pde", [](std::vector<Check>& checks) {
    double residual = 0.0, oracle = 0.0;
    for (double lambda : {0.5, 1.0, 10.0, 100.0}) {
      for (int i = 0; i <= 120; ++i) {
        const double r = std::pow(10.0, -3.0 + 0.05 * i);
        residual = std::max(residual, bubble_equation_residual(4, lambda, r));
        // Delta^2 of log(2 lambda / (1 + lambda^2 r^2)) equals 96 lambda^4 g^4, g = 1/(1 + lambda^2 r^2).
        const double g = 1.0 / (1.0 + lambda * lambda * r * r);
        oracle = std::max(oracle, std::abs(bubble_polyharmonic(4, lambda, r) / (96.0 * std::pow(lambda * g, 4)) - 1.0));
      }
    }
    checks.push_back(below("radial_residual", residual, 1e-8));
    checks.push_back(below("symbolic_oracle_relative", oracle, 1e-10));
  });
}

SuiteReport reduced_suite(Level level) {
  return run_suite("reduced", [level](std::vector<Check>& checks) {
    const ManifoldModel model = sphere(60);
    const GreenFunction greens(model, default_rho(model));
    std::mt19937_64 rng(8);
    const KField k = random_k(model, rng);
    double worst = 0.0;
    const int configurations = level == Level::Full ? 20 : 5;
    for (int trial = 0; trial < configurations; ++trial) {
      const Configuration a = random_configuration(model, 1 + trial % 3, rng);
      worst = std::max(worst, gradient_discrepancy(grad_identity(greens, k, a), grad_finite_difference(greens, k, a)));
    }
    checks.push_back(below("gradient_identity_vs_fd", worst, 1e-4));

    ReducedOptions options;
    options.random_seeds = level == Level::Full ? 16 : 6;
    const KField tilted = tilted_k(model);
    const auto tilted_result = find_critical_points(greens, tilted, 1, options);
    checks.push_back(holds("tilted_k_has_two_critical_points", tilted_result.configs.size() == 2,
                           std::to_string(tilted_result.configs.size()) + " found"));
    const double ratio = 2.0 * model.n() / (model.n() - 2.0);
    double identity = 0.0;
    int found = 0;
    auto record_identity = [&](const CritSearchResult& result) {
      for (const auto& c : result.configs) {
        identity = std::max(identity, std::abs(c.l - ratio * c.L) / std::max(std::abs(c.l), 1e-12));
        ++found;
      }
    };
    record_identity(tilted_result);
    const std::vector<int> tuple_sizes = level == Level::Full ? std::vector<int>{1, 2} : std::vector<int>{1};
    for (int m : tuple_sizes) record_identity(find_critical_points(greens, k, m, options));
    checks.push_back(at_most("index_identity_relative", identity, 1e-3, std::to_string(found) + " critical points"));

    const auto base = find_critical_points(greens, k, 1, options);
    double distance = 0.0;
    bool same = true;
    for (double c : {0.25, 3.7, 1000.0}) {
      const auto other = find_critical_points(greens, make_kfield(model, c * k.k), 1, options);
      if (other.configs.size() != base.configs.size()) {
        same = false;
        continue;
      }
      for (std::size_t i = 0; i < base.configs.size(); ++i) {
        distance = std::max(distance, configuration_distance(base.configs[i].points, other.configs[i].points));
        same = same && base.configs[i].morse == other.configs[i].morse &&
               base.configs[i].in_f_infinity == other.configs[i].in_f_infinity;
      }
    }
    checks.push_back(holds("scaling_preserves_critical_set", same));
    checks.push_back(below("scaling_critical_point_shift", distance, 1e-10));
  });
}

SuiteReport expansion_suite(Level level) {
  return run_suite("gradient_expansions", [level](std::vector<Check>& checks) {
    const double lambda = level == Level::Full ? 80.0 : 40.0;
    const ManifoldModel model = sphere(int(8 * lambda));
    const GreenFunction greens(model, default_rho(model));
    const KField k = tilted_k(model);

    // Centre pairing: ratio of pairings at two centres against |grad log K|.
    const Point a = polar_point(0.6), b = polar_point(2.0, 1.0);
    const auto ra = verify_expansion(greens, k, 1.0, single_bubble(model, a, lambda), Expansion::Center);
    const auto rb = verify_expansion(greens, k, 1.0, single_bubble(model, b, lambda), Expansion::Center);
    const double ratio = (ra.lhs / rb.lhs) / (k.log_gradient(model, a).norm() / k.log_gradient(model, b).norm());
    checks.push_back(below("center_pairing_ratio", std::abs(ratio - 1.0), 0.05, "lambda " + format_double(lambda)));

    const std::vector<double> slope_lambdas =
        level == Level::Full ? std::vector<double>{20.0, 40.0, 80.0} : std::vector<double>{20.0, 30.0, 40.0};
    const AlphaSlope slope =
        fit_alpha_slope(greens, k, 1.0, polar_point(1.0, 0.5), slope_lambdas, {-1e-3, -5e-4, 5e-4, 1e-3});
    checks.push_back(below("alpha_slope_relative", slope.relative_error, level == Level::Full ? 0.05 : 0.1,
                           "slope " + format_double(slope.slope) + " vs " + format_double(slope.predicted)));

    // Negative-mode pairing approaches 2 mu with an O(lambda^-2) remainder.
    const double mu2 = -100.0;
    double previous = std::numeric_limits<double>::infinity();
    bool monotone = true;
    double last_relative = 1.0;
    const std::vector<double> beta_lambdas =
        level == Level::Full ? std::vector<double>{20.0, 40.0, 80.0, 160.0} : std::vector<double>{20.0, 40.0};
    for (double l : beta_lambdas) {
      const ManifoldModel synth = synthetic(int(8 * l), 1, mu2);
      const GreenFunction synth_greens(synth, default_rho(synth));
      BubbleConfig config = single_bubble(synth, polar_point(1.0), l);
      config.beta = {0.1};
      const auto report = verify_expansion(synth_greens, tilted_k(synth), 1.0, config, Expansion::Beta);
      const double deviation = std::abs(report.lhs / 0.1 - 2.0 * mu2);
      monotone = monotone && deviation * l * l <= previous * 1.05;
      previous = deviation * l * l;
      last_relative = deviation / std::abs(2.0 * mu2);
    }
    checks.push_back(holds("beta_remainder_scaled_nonincreasing", monotone));
    checks.push_back(below("beta_pairing_relative", last_relative, level == Level::Full ? 1e-3 : 1e-2));

    // Fitted centre constant across configurations.
    std::vector<ExpansionReport> reports;
    const KField k2 = tilted_k(model, 0.5);
    const KField k3 = make_kfield(model, model.constant(2.0) + model.harmonic(polar_point(0.9, 2.0), 2, 0.4));
    reports.push_back(verify_expansion(greens, k, 1.0, single_bubble(model, polar_point(1.0), lambda), Expansion::Center));
    reports.push_back(
        verify_expansion(greens, k, 1.0, single_bubble(model, polar_point(2.3, 0.4), lambda), Expansion::Center));
    reports.push_back(
        verify_expansion(greens, k2, 1.0, single_bubble(model, polar_point(0.7, 1.0), lambda), Expansion::Center));
    reports.push_back(
        verify_expansion(greens, k3, 1.0, single_bubble(model, polar_point(1.4, 0.3), lambda), Expansion::Center));
    reports.push_back(
        verify_expansion(greens, k3, 1.0, single_bubble(model, polar_point(2.6, 2.5), lambda), Expansion::Center));
    const double reference = fit_constants({reports.front()}).values(0);
    double spread = 0.0;
    for (std::size_t i = 1; i < reports.size(); ++i)
      spread = std::max(spread, std::abs(fit_constants({reports[i]}).values(0) / reference - 1.0));
    checks.push_back(above("center_constant_positive", reference, 0.0));
    checks.push_back(below("center_constant_spread", spread, 0.05, std::to_string(reports.size()) + " configurations"));
  });
}

SuiteReport quadratic_suite(Level level) {
  return run_suite("quadratic_form", [level](std::vector<Check>& checks) {
    const std::vector<double> lambdas =
        level == Level::Full ? std::vector<double>{20.0, 40.0, 80.0} : std::vector<double>{20.0};
    double minimum = std::numeric_limits<double>::infinity();
    for (double lambda : lambdas) {
      const ManifoldModel model = sphere(int(8 * lambda));
      const GreenFunction greens(model, default_rho(model));
      const BubbleConfig config = single_bubble(model, north_pole(4), lambda);
      const BubbleSet set = build_bubble_set(model, greens.rho(), config);
      minimum = std::min(minimum, min_rayleigh_quotient(model, tilted_k(model), 1.0, config, set, 1).minimum);
    }
    checks.push_back(above("min_rayleigh_quotient", minimum, 0.0));

    const double lambda = level == Level::Full ? 80.0 : 40.0;
    const ManifoldModel model = sphere(int(8 * lambda));
    const GreenFunction greens(model, default_rho(model));
    const Point a = polar_point(1.0);
    const BubbleConfig config = single_bubble(model, a, lambda);
    const BubbleSet set = build_bubble_set(model, greens.rho(), config);
    Field w = project_to_complement(model, config, set, project_bubble(model, a, lambda / 2, greens.rho(), 1).phi(model));
    w *= 1.0 / std::sqrt(gjms_inner(model, w, w));
    const auto rows = taylor_check(model, tilted_k(model), 1.0, config, set, w, {1e-2, 1e-3, 1e-4});
    const double slope = std::log10(std::abs(rows[0].residual / rows[2].residual)) / 2.0;
    checks.push_back(below("taylor_cubic_slope", std::abs(slope - 3.0), 0.1, "slope " + format_double(slope)));
  });
}

SuiteReport fitting_suite(Level level) {
  return run_suite("bubble_fitting", [level](std::vector<Check>& checks) {
    const ManifoldModel model = sphere(320);
    const GreenFunction greens(model, default_rho(model));
    const double lambda = 40.0;
    double worst = 0.0;
    const std::vector<Point> centers = {polar_point(0.7, 0.9), polar_point(1.1, 0.3)};
    for (std::size_t i = 0; i < centers.size(); ++i) {
      const Point& a = centers[i];
      const Field u = project_bubble(model, a, lambda, greens.rho(), 1).phi(model) + model.constant(3.0);
      FitOptions options;
      if (i == 1) options.initial_centers = {exp_map(a, tangent_frame(a).col(2) * (0.5 / lambda))};
      const FitResult fit = fit_bubbles(model, greens, u, NeighborhoodSpec{}, options);
      worst = std::max({worst, std::abs(fit.config.alpha[0] - 1.0), geodesic_distance(fit.config.centers[0], a),
                        std::abs(fit.config.lambda[0] / lambda - 1.0)});
    }
    checks.push_back(below("exact_ansatz_recovery", worst, 1e-6));

    const ManifoldModel synth = synthetic(320, 2, -100.0);
    const GreenFunction synth_greens(synth, default_rho(synth));
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
    const Field u = build_bubble_set(synth, synth_greens.rho(), truth).sum + synth.constant(1.5);
    NeighborhoodSpec spec;
    spec.m = 2;
    const FitResult reference = fit_bubbles(synth, synth_greens, u, spec);
    double recovery = std::abs(reference.config.beta[0] - 0.02);
    for (int i = 0; i < 2; ++i) {
      const int j = geodesic_distance(reference.config.centers[i], a1) < 1e-3 ? 0 : 1;
      recovery = std::max({recovery, geodesic_distance(reference.config.centers[i], truth.centers[j]),
                           std::abs(reference.config.lambda[i] / truth.lambda[j] - 1.0),
                           std::abs(reference.config.alpha[i] - 1.0)});
    }
    checks.push_back(below("pair_recovery", recovery, 1e-6));
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss;
    double permutation = 0.0;
    const int trials = level == Level::Full ? 4 : 2;
    for (int trial = 0; trial < trials; ++trial) {
      FitOptions options;
      options.initial_centers = trial % 2 == 0 ? Configuration{a2, a1} : Configuration{a1, a2};
      if (trial >= 2) {
        for (auto& p : options.initial_centers) {
          Vec v(5);
          for (int c = 0; c < 5; ++c) v(c) = gauss(rng);
          p = exp_map(p, project_tangent(p, v) * 0.003);
        }
      }
      const FitResult fit = fit_bubbles(synth, synth_greens, u, spec, options);
      for (int i = 0; i < 2; ++i)
        permutation = std::max({permutation, geodesic_distance(fit.config.centers[i], reference.config.centers[i]),
                                std::abs(fit.config.lambda[i] / reference.config.lambda[i] - 1.0),
                                std::abs(fit.config.alpha[i] - reference.config.alpha[i])});
      permutation = std::max(permutation, std::abs(fit.config.beta[0] - reference.config.beta[0]));
    }
    checks.push_back(below("permutation_invariance", permutation, 1e-6));
  });
}

SuiteReport solver_suite(Level) {
  return run_suite("subcritical_solver", [](std::vector<Check>& checks) {
    const ManifoldModel model = sphere(24);
    const KField one = make_kfield(model, model.constant(1.0));
    double residual = 0.0;
    for (double t : {0.2, 0.5, 0.9}) {
      const Solution sol = solve_at_t(model, one, t, model.constant(0.0));
      residual = std::max(residual, std::abs(t * model.q_value() - t * model.kappa() * std::exp(model.n() * sol.shift)));
      residual = std::max(residual, sol.gradient_norm);
    }
    checks.push_back(below("constant_k_constant_solution", residual, 1e-10));
    const KField k = tilted_k(model);
    const Solution sol = solve_at_t(model, k, 0.5, model.constant(0.0));
    checks.push_back(at_most("newton_steps_from_zero", sol.newton_steps, 15));
    checks.push_back(below("accepted_gradient", sol.gradient_norm / (1.0 + sol.u_norm), 1e-10));
    const Point axis = polar_point(0.8, 0.4);
    const Solution tilted =
        solve_at_t(model, make_kfield(model, model.constant(1.0) + model.harmonic(axis, 1, 0.3)), 0.5, model.constant(0.0));
    checks.push_back(below("rotation_equivariance", (tilted.coeffs - sol.coeffs).cwiseAbs().maxCoeff(), 1e-13));
  });
}

SuiteReport bubbling_rate_suite(int base_k_max, int schedule_steps) {
  return run_suite("bubbling_rate", [=](std::vector<Check>& checks) {
    RateFit fits[2];
    for (int pass = 0; pass < 2; ++pass) {
      const int k_max = pass == 0 ? base_k_max : base_k_max / 2;
      const ManifoldModel model = sphere(k_max);
      const GreenFunction greens(model, default_rho(model));
      const KField k = tilted_k(model);
      BranchOptions options;
      options.schedule.steps = schedule_steps;
      const BranchRecord branch = continue_branch(model, greens, k, options);
      if (pass == 0) {
        const bool blew_up = branch.stop_reason.rfind("resolution limit", 0) == 0 ||
                             branch.stop_reason == "lambda_stop reached";
        checks.push_back(holds("branch_blows_up", blew_up, branch.stop_reason));
      }
      ReducedOptions crit_options;
      crit_options.random_seeds = 8;
      const auto crit = find_critical_points(greens, k, 1, crit_options);
      require(!crit.configs.empty(), "no critical point of the reduced functional found");
      // The branch is zonal about branch.axis and concentrates on it; the
      // limiting critical point is the one nearest to that axis.
      const BranchRow* last = nullptr;
      for (const auto& row : branch.rows)
        if (row.fitted) last = &row;
      require(last != nullptr, "branch never entered the bubble regime");
      const CritConfig* nearest = &crit.configs.front();
      for (const auto& c : crit.configs)
        if (geodesic_distance(c.points[0], branch.axis) < geodesic_distance(nearest->points[0], branch.axis))
          nearest = &c;
      fits[pass] = fit_bubbling_rate(branch, *nearest);
      if (pass == 0) {
        const RateFit& f = fits[0];
        checks.push_back(at_most("center_to_critical_point", f.center_distance, NeighborhoodSpec{}.c0_tilde / last->lambda,
                               "lambda " + format_double(last->lambda)));
        checks.push_back(holds("sign_l_negative", f.sign_ok, "l_K " + format_double(f.l_k)));
        checks.push_back(below("y_last_decade_spread", f.spread, 0.1,
                               std::to_string(f.rows_used) + " rows, trend exponent " + format_double(f.trend_exponent)));
        checks.push_back(below("form_ratio_spread", f.ratio_spread, 0.1));
        checks.push_back(above("cbar_hat", f.cbar_hat, 0.0));
      }
    }
    checks.push_back(below("grid_doubling_change", std::abs(fits[0].cbar_hat / fits[1].cbar_hat - 1.0), 0.02,
                           "cbar_hat " + format_double(fits[1].cbar_hat) + " -> " + format_double(fits[0].cbar_hat)));
  });
}

SuiteReport degree_suite(Level) {
  return run_suite("degree", [](std::vector<Check>& checks) {
    auto input_of = [](int m, int mbar, int chi, std::vector<int> indices,
                       CountingConvention convention = CountingConvention::Unordered) {
      DegreeInput in;
      in.m = m;
      in.mbar = mbar;
      in.chi_m = chi;
      in.i_inf = std::move(indices);
      in.convention = convention;
      return in;
    };
    const bool examples = chi_barycenter(1, 0, 2) == 1 && chi_barycenter(2, 0, 2) == -1 &&
                          chi_barycenter(3, 1, 0) == -1 && chi_barycenter(1, 1, 2) == -1 &&
                          chi_barycenter(4, 0, -2) == 10 && leray_schauder_degree(input_of(1, 0, 2, {})).d_m == 1 &&
                          leray_schauder_degree(input_of(1, 0, 2, {4})).d_m == 0 &&
                          leray_schauder_degree(input_of(1, 0, 2, {3})).d_m == 2 &&
                          leray_schauder_degree(input_of(2, 0, 2, {})).d_m == -1;
    checks.push_back(holds("worked_examples", examples));

    std::mt19937_64 rng(20261018);
    int disagreements = 0, guard_trips = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const int m = std::uniform_int_distribution<int>(1, 8)(rng);
      const int mbar = std::uniform_int_distribution<int>(0, 5)(rng);
      const int chi = std::uniform_int_distribution<int>(-10, 10)(rng);
      const int count = std::uniform_int_distribution<int>(0, 6)(rng);
      std::uniform_int_distribution<int> index(m - 1, 5 * m - 1);
      std::vector<int> indices;
      for (int i = 0; i < count; ++i) indices.push_back(index(rng));
      try {
        const DegreeReport r = leray_schauder_degree(input_of(m, mbar, chi, indices));
        if (r.d_m != r.chi_sublevel_form) ++disagreements;
        // Symmetrized ordered list must reproduce the unordered degree.
        std::vector<int> ordered;
        const long long copies = std::llround(factorial(m));
        if (copies <= 5040) {
          for (int idx : indices) ordered.insert(ordered.end(), std::size_t(copies), idx);
          if (leray_schauder_degree(input_of(m, mbar, chi, ordered, CountingConvention::Ordered)).d_m != r.d_m)
            ++disagreements;
        }
      } catch (const ValidationError&) {
        ++guard_trips;
      }
    }
    checks.push_back(at_most("form_disagreements", disagreements, 0, "1000 random inputs"));
    checks.push_back(at_most("integrality_guard_trips", guard_trips, 0));
    bool parity = true;
    for (int m = 1; m <= 6; ++m)
      for (int chi = -4; chi <= 4; ++chi)
        parity = parity && leray_schauder_degree(input_of(m, 2, chi, {})).d_m ==
                               -leray_schauder_degree(input_of(m, 3, chi, {})).d_m;
    checks.push_back(holds("parity_flip_negates", parity));
  });
}

}  // namespace qcurv::tools
