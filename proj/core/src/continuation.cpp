#include "qcurv/continuation.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "qcurv/errors.hpp"
#include "qcurv/logging.hpp"

namespace qcurv {

namespace {

// The Galerkin system on fields zonal about one axis, sampled on the
// model's zonal Gauss rule.
class ZonalProblem {
 public:
  ZonalProblem(const ManifoldModel& model, const KField& k, double t, const Point& axis)
      : model_(model), t_(t), count_(model.coefficient_count()) {
    const Rule1D& rule = model.zonal_rule();
    const int nq = int(rule.nodes.size());
    basis_.resize(nq, count_);
    std::vector<double> y(count_);
    for (int q = 0; q < nq; ++q) {
      model.basis().values(rule.nodes[q], count_, y.data());
      for (int c = 0; c < count_; ++c) basis_(q, c) = y[c];
    }
    weights_ = Eigen::Map<const Vec>(rule.weights.data(), nq);
    const Vec kv = basis_ * k.k.zonal_coefficients(axis);
    if (kv.minCoeff() <= 0.0) throw ValidationError("K is not positive on the zonal nodes");
    log_k_ = kv.array().log().matrix();
  }

  struct State {
    Vec values;    // u at the nodes
    Vec prob;      // K e^{n u} w / sum
    Vec mean_y;    // E[y_k]
    double log_integral = 0.0;
    double J = 0.0;
    Vec grad;      // dJ(y_k)
  };

  State evaluate(const Vec& c) const {
    const int n = model_.n();
    State s;
    s.values = basis_ * c;
    const Vec expo = n * s.values + log_k_;
    const double shift = expo.maxCoeff();
    s.prob = weights_.cwiseProduct((expo.array() - shift).exp().matrix());
    const double z = s.prob.sum();
    s.prob /= z;
    s.log_integral = shift + std::log(z);
    s.mean_y = basis_.transpose() * s.prob;
    const Vec& mu = model_.gjms_eigenvalues();
    const double y0_integral = model_.basis().y0() * model_.omega();
    s.J = c.cwiseProduct(mu).dot(c) + 2.0 * t_ * model_.q_value() * c(0) * y0_integral -
          t_ * (2.0 * model_.kappa() / n) * s.log_integral;
    s.grad = 2.0 * mu.cwiseProduct(c) - 2.0 * t_ * model_.kappa() * s.mean_y;
    s.grad(0) += 2.0 * t_ * model_.q_value() * y0_integral;
    return s;
  }

  // Hessian block over degrees 1..k_max.
  Mat hessian(const State& s) const {
    const int dim = count_ - 1;
    const Mat weighted = s.prob.cwiseSqrt().asDiagonal() * basis_.rightCols(dim);
    Mat h = Mat::Zero(dim, dim);
    h.selfadjointView<Eigen::Lower>().rankUpdate(weighted.transpose());
    const Vec ey = s.mean_y.tail(dim);
    h.selfadjointView<Eigen::Lower>().rankUpdate(ey, -1.0);
    h = h.selfadjointView<Eigen::Lower>();
    h *= -2.0 * t_ * model_.kappa() * model_.n();
    h.diagonal() += 2.0 * model_.gjms_eigenvalues().tail(dim);
    return h;
  }

  double dual_norm(const Vec& g) const {
    const Vec& mu = model_.gjms_eigenvalues();
    double s = 0.0;
    for (int k = 1; k < count_; ++k) s += g(k) * g(k) / std::abs(mu(k));
    return std::sqrt(s);
  }
  double primal_norm(const Vec& c) const {
    return std::sqrt(c.tail(count_ - 1).cwiseProduct(model_.gjms_eigenvalues().tail(count_ - 1).cwiseAbs()).dot(
        c.tail(count_ - 1)));
  }

 private:
  const ManifoldModel& model_;
  double t_;
  int count_;
  Mat basis_;
  Vec weights_;
  Vec log_k_;
};

Point common_axis(const ManifoldModel& model, const KField& k, const Field& init) {
  if (const Point* a = k.k.principal_axis()) return *a;
  if (const Point* a = init.principal_axis()) return *a;
  return north_pole(model.n());
}

double zonal_max(const ManifoldModel& model, const Vec& c, const Vec& node_values) {
  const int count = int(c.size());
  double best = node_values.maxCoeff();
  best = std::max(best, model.basis().sum(c.data(), count, 1.0));
  best = std::max(best, model.basis().sum(c.data(), count, -1.0));
  return best;
}

}  // namespace

Field Solution::field(const ManifoldModel& model) const { return model.zonal(axis, coeffs); }

Solution solve_at_t(const ManifoldModel& model, const KField& k, double t, const Field& init,
                    const SolverOptions& options) {
  require(t > 0.0 && t < 1.0, "solve_at_t needs 0 < t < 1");
  check_field(model, init);
  const Point axis = common_axis(model, k, init);
  const ZonalProblem problem(model, k, t, axis);
  Vec c = init.zonal_coefficients(axis);
  c(0) = 0.0;  // J is invariant under constants

  Solution out;
  out.axis = axis;
  out.t = t;
  auto state = problem.evaluate(c);
  int failures = 0;
  for (int step = 0;; ++step) {
    const double gnorm = problem.dual_norm(state.grad);
    const double unorm = problem.primal_norm(c);
    if (gnorm < options.tolerance * (1.0 + unorm)) break;
    if (step >= options.max_steps)
      throw NumericalError("Newton did not converge at t = " + std::to_string(t) + " (gradient " +
                           std::to_string(gnorm) + ")");
    const int dim = int(c.size()) - 1;
    Mat h = problem.hessian(state);
    const Vec g = state.grad.tail(dim);
    Vec delta;
    double damping = 0.0;
    for (;;) {
      Mat damped = h;
      if (damping > 0.0) damped.diagonal() += damping * model.gjms_eigenvalues().tail(dim).cwiseAbs();
      Eigen::LLT<Mat> llt(damped);
      if (llt.info() == Eigen::Success) {
        delta = -llt.solve(g);
        break;
      }
      damping = damping == 0.0 ? 1e-6 : 10.0 * damping;
      ++out.damped_steps;
      if (damping > 1e6) throw NumericalError("Hessian damping failed at t = " + std::to_string(t));
    }
    const double slope = g.dot(delta);
    // At the rounding floor J cannot resolve the decrease; take the full step.
    const bool tiny = std::abs(slope) < 1e-13 * (1.0 + std::abs(state.J));
    bool accepted = false;
    for (double s = 1.0; s > 1e-10; s *= 0.5) {
      Vec trial = c;
      trial.tail(dim) += s * delta;
      auto next = problem.evaluate(trial);
      if (tiny || next.J <= state.J + 1e-4 * s * slope) {
        c = std::move(trial);
        state = std::move(next);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      ++failures;
      ++out.damped_steps;
      if (failures > options.max_damped_failures)
        throw NumericalError("Newton line search failed repeatedly at t = " + std::to_string(t));
    }
    out.newton_steps = step + 1;
  }
  out.coeffs = c;
  out.gradient_norm = problem.dual_norm(state.grad);
  out.u_norm = problem.primal_norm(c);
  out.J = state.J;
  out.shift = -state.log_integral / model.n();
  out.max_u = zonal_max(model, c, state.values) + out.shift;
  out.alias_fraction = top_mode_fraction(state.mean_y);
  if (options.check_alias && out.alias_fraction > options.alias_threshold)
    throw NumericalError("solution is under-resolved (aliasing) at t = " + std::to_string(t) + ": raise k_max");
  log_debug("solve_at_t t=" + std::to_string(t) + " steps=" + std::to_string(out.newton_steps) +
            " max_u=" + std::to_string(out.max_u));
  return out;
}

double galerkin_gradient_norm(const ManifoldModel& model, const KField& k, double t, const Field& u) {
  const Point axis = common_axis(model, k, u);
  const ZonalProblem problem(model, k, t, axis);
  return problem.dual_norm(problem.evaluate(u.zonal_coefficients(axis)).grad);
}

std::vector<double> Schedule::values() const {
  require(t0 > 0.0 && t0 < t1 && t1 < 1.0, "schedule needs 0 < t0 < t1 < 1");
  require(steps >= 2, "schedule needs at least two steps");
  std::vector<double> out(steps);
  for (int i = 0; i < steps; ++i) {
    const double s = double(i) / (steps - 1);
    out[i] = refine_near_1 ? 1.0 - (1.0 - t0) * std::pow((1.0 - t1) / (1.0 - t0), s) : t0 + (t1 - t0) * s;
  }
  out.back() = t1;
  return out;
}

CsvTable BranchRecord::csv() const {
  CsvTable table({"t", "max_u", "lambda", "a_theta", "tau", "J", "grad_norm", "y_lambda_form", "y_maxu_form"});
  for (const auto& r : rows)
    table.add_row({format_double(r.t), format_double(r.max_u), format_double(r.lambda), format_double(r.a_theta),
                   format_double(r.tau), format_double(r.J), format_double(r.grad_norm),
                   format_double(r.y_lambda_form), format_double(r.y_maxu_form)});
  return table;
}

BranchRecord continue_branch(const ManifoldModel& model, const GreenFunction& greens, const KField& k,
                             const BranchOptions& options) {
  const int n = model.n();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  BranchRecord record;
  Field guess = model.constant(0.0);
  Solution previous, before_previous;
  int solved = 0;
  std::optional<Point> last_center;
  const double offset = bubble_profile_offset(model, k);
  const double lambda_resolved = double(model.k_max()) / options.resolution_ratio;
  for (double t : options.schedule.values()) {
    Field init = guess;
    if (solved >= 2) {
      // Secant predictor in log(1 - t).
      const double x0 = std::log(1.0 - before_previous.t), x1 = std::log(1.0 - previous.t), x = std::log(1.0 - t);
      const double w = (x - x1) / (x1 - x0);
      init = model.zonal(previous.axis, previous.coeffs + w * (previous.coeffs - before_previous.coeffs));
    }
    Solution sol;
    try {
      sol = solve_at_t(model, k, t, init, options.solver);
    } catch (const NumericalError& e) {
      if (solved >= 2) {
        try {
          sol = solve_at_t(model, k, t, guess, options.solver);
        } catch (const NumericalError& e2) {
          record.stop_reason = std::string("solver failure: ") + e2.what();
          break;
        }
      } else {
        record.stop_reason = std::string("solver failure: ") + e.what();
        break;
      }
    }
    record.axis = sol.axis;
    BranchRow row;
    row.t = t;
    row.max_u = sol.max_u;
    row.J = sol.J;
    row.grad_norm = sol.gradient_norm;
    row.newton_steps = sol.newton_steps;
    row.lambda = row.a_theta = row.tau = row.y_lambda_form = row.y_maxu_form = nan;
    const Field u = sol.field(model);
    if (sol.max_u + offset > options.bubble_threshold) {
      try {
        FitOptions fo;
        if (last_center) fo.initial_centers = {*last_center};
        const FitResult fit = fit_bubbles(model, greens, u, options.neighborhood, fo);
        const BubbleConfig& config = fit.config;
        const Point& a = config.centers[0];
        last_center = a;
        row.fitted = true;
        row.boundary_hit = fit.boundary_hit;
        row.lambda = config.lambda[0];
        row.a_theta = geodesic_distance(a, sol.axis);
        const double f = f_partial(greens, k, config.centers, 0, a);
        const double fpow = std::pow(f, double(n - 2) / n);
        row.y_lambda_form = (1.0 - t) * row.lambda * row.lambda * fpow;
        row.y_maxu_form = (1.0 - t) * std::exp(2.0 * sol.max_u) * fpow;
        if (options.track_membership) {
          const Membership mem = membership(model, greens, k, t, u, options.neighborhood, fit);
          row.tau = mem.tau[0];
          row.in_v = mem.in_v;
          row.in_v_deep = mem.in_v_deep;
          row.diagnostics = mem.diagnostics();
          if (!mem.in_v) log_warn("branch left V at t = " + format_double(t));
        } else {
          row.tau = tau_gamma(greens, k, t, config).tau[0];
        }
      } catch (const std::exception& e) {
        log_warn(std::string("bubble fit failed at t = ") + format_double(t) + ": " + e.what());
        row.diagnostics = {{"fit_error", e.what()}};
      }
    }
    row.snapshot = record.snapshots.size();
    record.snapshots.push_back(sol);
    record.rows.push_back(row);
    before_previous = previous;
    previous = sol;
    guess = u;
    ++solved;
    if (row.fitted && row.lambda > options.lambda_stop) {
      record.stop_reason = "lambda_stop reached";
      break;
    }
    if (row.fitted && row.lambda > lambda_resolved) {
      record.stop_reason = "resolution limit (lambda > k_max / " + format_double(options.resolution_ratio) + ")";
      break;
    }
  }
  if (record.stop_reason.empty()) record.stop_reason = "schedule end";
  return record;
}

double bubble_profile_offset(const ManifoldModel& model, const KField& k) {
  const int n = model.n();
  return std::log(model.kappa() * grid_maximum(model, k.k) / factorial(n - 1)) / n;
}

nlohmann::json RateFit::to_json() const {
  return {{"cbar_hat", cbar_hat},       {"cmax_hat", cmax_hat},     {"l_K", l_k},
          {"spread", spread},           {"maxu_spread", maxu_spread}, {"ratio_spread", ratio_spread},
          {"trend_exponent", trend_exponent}, {"center_distance", center_distance}, {"rows_used", rows_used},
          {"stabilized", stabilized},   {"sign_ok", sign_ok},       {"ratio_ok", ratio_ok}};
}

namespace {
double relative_spread(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  return (*hi - *lo) / std::abs(mean);
}
}  // namespace

RateFit fit_bubbling_rate(const BranchRecord& branch, const CritConfig& crit, double tolerance) {
  std::vector<const BranchRow*> fitted;
  for (const auto& r : branch.rows)
    if (r.fitted && !r.boundary_hit && r.lambda > 20.0) fitted.push_back(&r);
  if (fitted.size() < 10)
    throw ValidationError("bubbling-rate fit needs at least 10 rows with lambda > 20, got " +
                          std::to_string(fitted.size()));
  RateFit out;
  out.l_k = crit.l;
  out.sign_ok = crit.l < 0.0;
  if (!out.sign_ok) log_warn("sign violation: blow-up for t < 1 needs l_K(A) < 0");
  const double top = fitted.back()->lambda;
  std::vector<double> y, ym, ratio, loglam, logy;
  for (const auto* r : fitted) {
    if (r->lambda < 0.1 * top) continue;
    y.push_back(r->y_lambda_form);
    ym.push_back(r->y_maxu_form);
    ratio.push_back(r->y_lambda_form / r->y_maxu_form);
    loglam.push_back(std::log(r->lambda));
    logy.push_back(std::log(r->y_lambda_form));
  }
  out.rows_used = int(y.size());
  out.spread = relative_spread(y);
  out.maxu_spread = relative_spread(ym);
  out.ratio_spread = relative_spread(ratio);
  if (y.size() >= 2) {
    const int count = int(y.size());
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < count; ++i) {
      mx += loglam[i];
      my += logy[i];
    }
    mx /= count;
    my /= count;
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < count; ++i) {
      sxy += (loglam[i] - mx) * (logy[i] - my);
      sxx += (loglam[i] - mx) * (loglam[i] - mx);
    }
    out.trend_exponent = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  out.stabilized = out.spread < tolerance;
  out.ratio_ok = out.ratio_spread < tolerance;
  out.cbar_hat = fitted.back()->y_lambda_form / (-crit.l);
  out.cmax_hat = fitted.back()->y_maxu_form / (-crit.l);
  if (!crit.points.empty()) {
    const auto& d = fitted.back()->diagnostics;
    if (d.contains("a") && !d["a"].empty()) {
      const auto coords = d["a"][0].get<std::vector<double>>();
      out.center_distance = geodesic_distance(Eigen::Map<const Vec>(coords.data(), Eigen::Index(coords.size())),
                                              crit.points[0]);
    } else {
      out.center_distance = std::abs(fitted.back()->a_theta - geodesic_distance(branch.axis, crit.points[0]));
    }
  }
  if (!out.stabilized)
    log_warn("bubbling rate did not stabilize: spread " + format_double(out.spread) + ", trend exponent " +
             format_double(out.trend_exponent));
  return out;
}

}  // namespace qcurv
