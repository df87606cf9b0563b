#include "qcurv/reduced.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "qcurv/errors.hpp"
#include "qcurv/grid.hpp"
#include "qcurv/logging.hpp"
#include "qcurv/parallel.hpp"

namespace qcurv {

double KField::value(const ManifoldModel& model, const Point& x) const { return evaluate(model, k, x); }

double KField::log_value(const ManifoldModel& model, const Point& x) const {
  const double v = value(model, x);
  if (!(v > 0.0)) throw ValidationError("K is not positive at the evaluation point");
  return std::log(v);
}

Vec KField::log_gradient(const ManifoldModel& model, const Point& x) const {
  return gradient(model, k, x) / value(model, x);
}

double KField::log_laplacian(const ManifoldModel& model, const Point& x) const {
  const double v = value(model, x);
  const Vec g = gradient(model, k, x);
  return laplacian_at(model, k, x) / v - g.squaredNorm() / (v * v);
}

namespace {
Vec grid_values(const ManifoldModel& model, const Field& k) {
  const Point axis = k.principal_axis() ? *k.principal_axis() : north_pole(model.n());
  const AxisGrid grid(model, axis, direction_degree(k, axis) + 2);
  return grid.evaluate(k);
}
}  // namespace

double grid_minimum(const ManifoldModel& model, const Field& k) { return grid_values(model, k).minCoeff(); }

double grid_maximum(const ManifoldModel& model, const Field& k) { return grid_values(model, k).maxCoeff(); }

KField make_kfield(const ManifoldModel& model, const Field& k) {
  check_field(model, k);
  KField out{k, grid_minimum(model, k)};
  if (!(out.min_value > 0.0))
    throw ValidationError("K must be positive on the quadrature grid (minimum " + std::to_string(out.min_value) + ")");
  return out;
}

double min_separation(const Configuration& a) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) best = std::min(best, geodesic_distance(a[i], a[j]));
  return best;
}

void check_configuration(const ManifoldModel& model, const Configuration& a, const ReducedOptions& options) {
  require(!a.empty(), "empty configuration");
  for (const auto& p : a) model.check_point(p);
  if (min_separation(a) < options.min_separation)
    throw ValidationError("configuration lies on the fat diagonal (separation " + std::to_string(min_separation(a)) +
                          " < " + std::to_string(options.min_separation) + ")");
}

namespace {

double resolution_radius(const ManifoldModel& model) { return kPi / (2.0 * model.k_max() + 2.0); }

// sum over j != i of G(a_j, x), after checking x stays away from those poles
double green_sum(const GreenFunction& greens, const Configuration& a, int i, const Point& x) {
  double s = 0.0;
  for (int j = 0; j < int(a.size()); ++j) {
    if (j == i) continue;
    if (geodesic_distance(a[j], x) < resolution_radius(greens.model()))
      throw NumericalError("F^A_i evaluated within grid resolution of another bubble centre");
    s += greens.green(a[j], x);
  }
  return s;
}

Configuration displaced(const Configuration& a, const std::vector<Mat>& frames, const Vec& coords) {
  const int n = int(frames[0].cols());
  Configuration out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = exp_map(a[i], frames[i] * coords.segment(i * n, n));
  return out;
}

std::vector<Mat> frames_of(const Configuration& a) {
  std::vector<Mat> frames;
  for (const auto& p : a) frames.push_back(tangent_frame(p));
  return frames;
}

Vec stack_in_frames(const std::vector<Vec>& grads, const std::vector<Mat>& frames) {
  const int n = int(frames[0].cols());
  Vec out(n * grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i) out.segment(i * n, n) = frames[i].transpose() * grads[i];
  return out;
}

// F_K without the fat-diagonal check (callers validate once).
double f_reduced_raw(const GreenFunction& greens, const KField& k, const Configuration& a) {
  const ManifoldModel& model = greens.model();
  const double n = model.n();
  double s = 0.0;
  for (int i = 0; i < int(a.size()); ++i) {
    double term = greens.regular(a[i], a[i]);
    for (int j = 0; j < int(a.size()); ++j)
      if (j != i) term += greens.green(a[i], a[j]);
    s += term + (2.0 / n) * k.log_value(model, a[i]);
  }
  return s;
}

}  // namespace

double log_f_partial(const GreenFunction& greens, const KField& k, const Configuration& a, int i, const Point& x) {
  require(i >= 0 && i < int(a.size()), "bubble index out of range");
  const double n = greens.model().n();
  return n * (greens.regular(a[i], x) + green_sum(greens, a, i, x)) + k.log_value(greens.model(), x);
}

PartialJet partial_jet(const GreenFunction& greens, const KField& k, const Configuration& a, int i) {
  const ManifoldModel& model = greens.model();
  const double n = model.n();
  const Point& x = a[i];
  double value = greens.regular(x, x);
  Vec grad = greens.regular_gradient(x, x);
  double lap = greens.regular_laplacian(x, x);
  for (int j = 0; j < int(a.size()); ++j) {
    if (j == i) continue;
    value += greens.green(a[j], x);
    grad += greens.green_gradient(a[j], x);
    lap += greens.green_laplacian(a[j], x);
  }
  return {n * value + k.log_value(model, x), project_tangent(x, n * grad + k.log_gradient(model, x)),
          n * lap + k.log_laplacian(model, x)};
}

double f_partial(const GreenFunction& greens, const KField& k, const Configuration& a, int i, const Point& x) {
  return std::exp(log_f_partial(greens, k, a, i, x));
}

double f_reduced(const GreenFunction& greens, const KField& k, const Configuration& a,
                 const ReducedOptions& options) {
  check_configuration(greens.model(), a, options);
  return f_reduced_raw(greens, k, a);
}

std::vector<Vec> grad_identity(const GreenFunction& greens, const KField& k, const Configuration& a) {
  const double n = greens.model().n();
  std::vector<Vec> out;
  for (int i = 0; i < int(a.size()); ++i) out.push_back((2.0 / n) * partial_jet(greens, k, a, i).log_gradient);
  return out;
}

std::vector<Vec> grad_finite_difference(const GreenFunction& greens, const KField& k, const Configuration& a,
                                        const ReducedOptions& options) {
  check_configuration(greens.model(), a, options);
  const auto frames = frames_of(a);
  const int n = greens.model().n();
  const double h = 1e-3;
  std::vector<Vec> out;
  for (int i = 0; i < int(a.size()); ++i) {
    Vec g = Vec::Zero(a[i].size());
    for (int c = 0; c < n; ++c) {
      auto central = [&](double step) {
        Vec coords = Vec::Zero(n * a.size());
        coords(i * n + c) = step;
        const double up = f_reduced_raw(greens, k, displaced(a, frames, coords));
        coords(i * n + c) = -step;
        const double dn = f_reduced_raw(greens, k, displaced(a, frames, coords));
        return (up - dn) / (2 * step);
      };
      const double d1 = central(h), d2 = central(h / 2);
      g += ((4 * d2 - d1) / 3) * frames[i].col(c);
    }
    out.push_back(g);
  }
  return out;
}

double gradient_discrepancy(const std::vector<Vec>& identity, const std::vector<Vec>& fd) {
  double worst = 0.0;
  for (std::size_t i = 0; i < identity.size(); ++i)
    worst = std::max(worst, (identity[i] - fd[i]).norm() / std::max(identity[i].norm(), 1e-3));
  return worst;
}

std::vector<Vec> grad_f_reduced(const GreenFunction& greens, const KField& k, const Configuration& a,
                                const ReducedOptions& options) {
  const auto fd = grad_finite_difference(greens, k, a, options);
  auto id = grad_identity(greens, k, a);
  const double err = gradient_discrepancy(id, fd);
  if (err > options.gradient_check_tol)
    throw NumericalError("gradient identity disagrees with finite differences (relative " + std::to_string(err) +
                         "); H-gradient under-resolved");
  return id;
}

Mat hessian_f_reduced(const GreenFunction& greens, const KField& k, const Configuration& a,
                      const ReducedOptions& options) {
  check_configuration(greens.model(), a, options);
  const auto frames = frames_of(a);
  const int dim = int(frames[0].cols() * a.size());
  auto f = [&](const Vec& c) { return f_reduced_raw(greens, k, displaced(a, frames, c)); };
  const double f0 = f(Vec::Zero(dim));
  auto second_differences = [&](double h) {
    Mat hess(dim, dim);
    for (int r = 0; r < dim; ++r) {
      Vec e = Vec::Zero(dim);
      e(r) = h;
      hess(r, r) = (f(e) - 2 * f0 + f(-e)) / (h * h);
      for (int c = r + 1; c < dim; ++c) {
        Vec p = Vec::Zero(dim), q = Vec::Zero(dim);
        p(r) = h;
        p(c) = h;
        q(r) = h;
        q(c) = -h;
        hess(r, c) = hess(c, r) = (f(p) - f(q) - f(-q) + f(-p)) / (4 * h * h);
      }
    }
    return hess;
  };
  // Richardson step removes the h^2 term, so flat directions of symmetric
  // critical sets come out near round-off rather than near h^2.
  const Mat hess = (4 * second_differences(options.hessian_step / 2) - second_differences(options.hessian_step)) / 3;
  return hess;
}

double index_L(const GreenFunction& greens, const KField& k, const Configuration& a, const ReducedOptions& options) {
  const ManifoldModel& model = greens.model();
  check_configuration(model, a, options);
  const double n = model.n();
  const double p = (n - 2) / (2 * n);
  const double curvature_term = (n - 2) / (4 * (n - 1)) * model.scalar_curvature();
  double s = 0.0;
  for (int i = 0; i < int(a.size()); ++i) {
    const PartialJet jet = partial_jet(greens, k, a, i);
    // L_g(F^p) / F^p with F^p = e^{p log F}
    const double ratio = curvature_term - (p * jet.log_laplacian + p * p * jet.log_gradient.squaredNorm());
    s -= std::exp((2.0 / n) * jet.log_value) * ratio;
  }
  return s;
}

double index_l(const GreenFunction& greens, const KField& k, const Configuration& a, const ReducedOptions& options) {
  const ManifoldModel& model = greens.model();
  check_configuration(model, a, options);
  const int n = model.n();
  const double h = options.chart_laplacian_step;
  double s = 0.0;
  for (int i = 0; i < int(a.size()); ++i) {
    const ConformalChart chart(a[i]);
    auto f = [&](const Vec& y) { return f_partial(greens, k, a, i, chart.point(y)); };
    const double f0 = f(Vec::Zero(n));
    auto chart_laplacian = [&](double step) {
      double lap = 0.0;
      for (int c = 0; c < n; ++c) {
        Vec y = Vec::Zero(n);
        y(c) = step;
        lap += (f(y) - 2 * f0 + f(-y)) / (step * step);
      }
      return lap;
    };
    const double lap = (4 * chart_laplacian(h / 2) - chart_laplacian(h)) / 3;
    s += lap / std::pow(f0, (n - 2.0) / n) - n / (2.0 * (n - 1)) * model.scalar_curvature() * std::pow(f0, 2.0 / n);
  }
  return s;
}

double configuration_distance(const Configuration& a, const Configuration& b) {
  require(a.size() == b.size(), "configurations of different size");
  std::vector<int> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, geodesic_distance(a[i], b[perm[i]]));
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

namespace {
bool lexicographic_less(const Vec& x, const Vec& y) {
  for (int i = 0; i < x.size(); ++i)
    if (x(i) != y(i)) return x(i) < y(i);
  return false;
}
}  // namespace

Configuration canonical(const Configuration& a) {
  Configuration out = a;
  std::sort(out.begin(), out.end(), lexicographic_less);
  return out;
}

std::vector<Configuration> default_seeds(const ManifoldModel& model, const KField& k, int m,
                                         const ReducedOptions& options) {
  std::vector<Point> candidates;
  auto add_candidate = [&](const Point& p) {
    for (const auto& c : candidates)
      if (geodesic_distance(c, p) < 1e-12) return;
    candidates.push_back(p);
  };
  for (const auto& atom : k.k.atoms()) {
    if (atom.coeffs.size() > 1 && atom.coeffs.tail(atom.coeffs.size() - 1).cwiseAbs().maxCoeff() > 0.0) {
      add_candidate(atom.axis);
      add_candidate(-atom.axis);
    }
  }
  if (candidates.empty()) {
    add_candidate(north_pole(model.n()));
    add_candidate(-north_pole(model.n()));
  }
  std::vector<Configuration> seeds;
  // unordered m-subsets of the candidates
  std::vector<int> idx;
  std::function<void(int)> choose = [&](int start) {
    if (int(idx.size()) == m) {
      Configuration c;
      for (int i : idx) c.push_back(candidates[i]);
      if (min_separation(c) >= options.min_separation) seeds.push_back(c);
      return;
    }
    for (int i = start; i < int(candidates.size()); ++i) {
      idx.push_back(i);
      choose(i + 1);
      idx.pop_back();
    }
  };
  choose(0);
  std::mt19937_64 rng(options.seed);
  for (int s = 0; s < options.random_seeds; ++s) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Configuration c;
      for (int i = 0; i < m; ++i) c.push_back(random_point(model.n(), rng));
      if (min_separation(c) >= options.min_separation) {
        seeds.push_back(c);
        break;
      }
    }
  }
  return seeds;
}

namespace {

struct NewtonOutcome {
  std::optional<Configuration> point;
  std::string reason;
};

NewtonOutcome newton_solve(const GreenFunction& greens, const KField& k, Configuration a,
                           const ReducedOptions& options) {
  auto gradient_norm = [&](const Configuration& c) {
    double s = 0.0;
    for (const auto& g : grad_identity(greens, k, c)) s += g.squaredNorm();
    return std::sqrt(s);
  };
  double norm = gradient_norm(a);
  int polish = 0;
  for (int step = 0; step < options.max_newton_steps; ++step) {
    // a few extra steps below tolerance drive the gradient to round-off
    if (norm < options.critical_tol && ++polish > 3) return {a, {}};
    const auto frames = frames_of(a);
    const Vec g = stack_in_frames(grad_identity(greens, k, a), frames);
    const Mat hess = hessian_f_reduced(greens, k, a, options);
    Vec dir = -hess.completeOrthogonalDecomposition().solve(g);
    if (dir.norm() > options.newton_step_cap) dir *= options.newton_step_cap / dir.norm();
    bool improved = false;
    for (int halving = 0; halving < 30; ++halving) {
      const Configuration trial = displaced(a, frames, dir);
      if (min_separation(trial) >= options.min_separation) {
        const double trial_norm = gradient_norm(trial);
        if (trial_norm < norm) {
          a = trial;
          norm = trial_norm;
          improved = true;
          break;
        }
      }
      dir *= 0.5;
    }
    if (!improved) {
      if (norm < options.critical_tol) return {a, {}};
      return {std::nullopt, "Newton stalled at gradient norm " + std::to_string(norm)};
    }
  }
  if (norm < options.critical_tol) return {a, {}};
  return {std::nullopt, "Newton did not converge (gradient norm " + std::to_string(norm) + ")"};
}

CritConfig classify(const GreenFunction& greens, const KField& k, const Configuration& a,
                    const ReducedOptions& options) {
  const int n = greens.model().n();
  const int m = int(a.size());
  CritConfig out;
  out.points = canonical(a);
  out.value = f_reduced(greens, k, out.points, options);
  double s = 0.0;
  for (const auto& g : grad_identity(greens, k, out.points)) s += g.squaredNorm();
  out.gradient_norm = std::sqrt(s);
  const Mat hess = hessian_f_reduced(greens, k, out.points, options);
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (hess + hess.transpose()), Eigen::EigenvaluesOnly);
  out.hessian_eigenvalues = eig.eigenvalues();
  const double radius = out.hessian_eigenvalues.cwiseAbs().maxCoeff();
  const double threshold = options.degeneracy_ratio * radius;
  for (int r = 0; r < out.hessian_eigenvalues.size(); ++r) {
    const double ev = out.hessian_eigenvalues(r);
    if (std::abs(ev) <= threshold) out.hessian_degenerate = true;
    if (ev < 0 && std::abs(ev) > threshold) ++out.morse;
  }
  out.L = index_L(greens, k, out.points, options);
  out.l = index_l(greens, k, out.points, options);
  out.i_infinity = (n + 1) * m - 1 - out.morse;
  out.in_f_infinity = out.L < 0;
  return out;
}

bool config_less(const CritConfig& x, const CritConfig& y) {
  if (x.value != y.value) return x.value < y.value;
  for (std::size_t i = 0; i < x.points.size(); ++i) {
    if (lexicographic_less(x.points[i], y.points[i])) return true;
    if (lexicographic_less(y.points[i], x.points[i])) return false;
  }
  return false;
}

}  // namespace

CritSearchResult find_critical_points(const GreenFunction& greens, const KField& k, int m,
                                      const ReducedOptions& options, const std::vector<Configuration>& seeds) {
  require(m >= 1, "m must be positive");
  const std::vector<Configuration> all_seeds = seeds.empty() ? default_seeds(greens.model(), k, m, options) : seeds;
  for (const auto& s : all_seeds) {
    require(int(s.size()) == m, "seed size does not match m");
    check_configuration(greens.model(), s, options);
  }
  std::vector<NewtonOutcome> outcomes(all_seeds.size());
  parallel_for(all_seeds.size(), [&](std::size_t s) {
    try {
      outcomes[s] = newton_solve(greens, k, canonical(all_seeds[s]), options);
    } catch (const std::exception& e) {
      outcomes[s] = {std::nullopt, e.what()};
    }
  });
  CritSearchResult result;
  result.seeds_tried = all_seeds.size();
  std::vector<Configuration> found;
  for (std::size_t s = 0; s < outcomes.size(); ++s) {
    if (!outcomes[s].point) {
      result.failures.push_back({s, outcomes[s].reason});
      log_debug("seed " + std::to_string(s) + ": " + outcomes[s].reason);
      continue;
    }
    const Configuration c = canonical(*outcomes[s].point);
    bool duplicate = false;
    for (const auto& f : found)
      if (configuration_distance(f, c) < options.dedup_distance) duplicate = true;
    if (!duplicate) found.push_back(c);
  }
  result.configs.resize(found.size());
  parallel_for(found.size(), [&](std::size_t i) { result.configs[i] = classify(greens, k, found[i], options); });
  std::sort(result.configs.begin(), result.configs.end(), config_less);
  return result;
}

NdPredicates nd_predicates(const std::vector<CritConfig>& configs, double threshold) {
  NdPredicates out;
  if (configs.empty()) {
    log_warn("nd_predicates called with an empty critical-point list; all predicates hold vacuously");
    return out;
  }
  bool hessians_ok = true;
  for (const auto& c : configs) {
    if (std::abs(c.L) <= threshold) out.nd0 = false;
    if (!(c.L < 0)) out.nd_minus = false;
    if (!(c.L > 0)) out.nd_plus = false;
    if (c.hessian_degenerate) hessians_ok = false;
  }
  out.nd = out.nd0 && hessians_ok;
  return out;
}

CsvTable crit_table(const std::vector<CritConfig>& configs) {
  CsvTable table({"a_coords", "F", "gradnorm", "morse", "L_K", "l_K", "i_inf", "in_Finf"});
  for (const auto& c : configs) {
    std::string coords;
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      if (i) coords += ';';
      for (int j = 0; j < c.points[i].size(); ++j) {
        if (j) coords += ' ';
        coords += format_double(c.points[i](j));
      }
    }
    table.add_row({coords, format_double(c.value), format_double(c.gradient_norm), std::to_string(c.morse),
                   format_double(c.L), format_double(c.l), std::to_string(c.i_infinity),
                   c.in_f_infinity ? "1" : "0"});
  }
  return table;
}

}  // namespace qcurv
