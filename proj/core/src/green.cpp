#include "qcurv/green.hpp"

#include <gsl/gsl_integration.h>

#include <cmath>

#include "qcurv/errors.hpp"
#include "qcurv/quadrature.hpp"

namespace qcurv {

CutoffProfile::CutoffProfile(double rho) : rho_(rho) {
  require(rho > 0.0 && std::isfinite(rho), "cutoff radius must be positive");
}

ZonalBasis::Jet CutoffProfile::jet(double t) const {
  require(t >= 0.0, "cutoff evaluated at a negative distance");
  ZonalBasis::Jet j;
  if (t <= rho_) {
    j.value = t;
    j.d1 = 1.0;
    return j;
  }
  if (t >= 2.0 * rho_) {
    j.value = 2.0 * rho_;
    return j;
  }
  const double u = (t - rho_) / rho_;
  const double v = 1.0 - u;
  const double z = 1.0 / u - 1.0 / v;
  const double s = z > 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
  const double g = 1.0 / (u * u) + 1.0 / (v * v);
  const double dg = -2.0 / (u * u * u) + 2.0 / (v * v * v);
  const double ds = s * (1.0 - s) * g;
  const double d2s = ds * (1.0 - 2.0 * s) * g + s * (1.0 - s) * dg;
  j.value = (1.0 - s) * t + 2.0 * rho_ * s;
  j.d1 = 1.0 - s + (2.0 * rho_ - t) * ds / rho_;
  j.d2 = -2.0 * ds / rho_ + (2.0 * rho_ - t) * d2s / (rho_ * rho_);
  return j;
}

double CutoffProfile::value(double t) const { return jet(t).value; }

double cutoff_eval(const CutoffProfile& profile, double t) { return profile.value(t); }

bool rho_is_legal(const ManifoldModel& model, double rho) {
  return rho > 0.0 && rho < 0.25 * model.injectivity_radius();
}

double default_rho(const ManifoldModel& model) { return 0.4 * 0.25 * model.injectivity_radius(); }

namespace {

// Coefficients of -log(1 - a.x) against y_k(a.x): graded Gauss-Legendre in
// the polar angle, accurate through the logarithmic endpoint.
Vec log_singularity_coefficients(const ManifoldModel& model) {
  const int count = model.coefficient_count();
  const int n = model.n();
  const ZonalBasis& basis = model.basis();
  const double width = std::min(0.05, 6.0 / (model.k_max() + 1.0));
  std::vector<std::pair<double, double>> panels;
  double hi = width;
  for (int j = 0; j < 60; ++j) {
    panels.emplace_back(0.5 * hi, hi);
    hi *= 0.5;
  }
  panels.emplace_back(0.0, hi);
  const int uniform = int(std::ceil((kPi - width) / width));
  for (int i = 0; i < uniform; ++i)
    panels.emplace_back(width + (kPi - width) * i / uniform, width + (kPi - width) * (i + 1) / uniform);

  gsl_integration_glfixed_table* table = gsl_integration_glfixed_table_alloc(24);
  if (!table) throw NumericalError("GSL failed to allocate a Gauss-Legendre table");
  const double shell = sphere_area(n - 1);
  Vec out = Vec::Zero(count);
  std::vector<double> y(count);
  for (const auto& [lo, up] : panels) {
    for (int i = 0; i < 24; ++i) {
      double theta, w;
      gsl_integration_glfixed_point(lo, up, std::size_t(i), &theta, &w, table);
      const double half = std::sin(0.5 * theta);
      const double f = -(std::log(2.0) + 2.0 * std::log(half));
      const double jac = std::pow(std::sin(theta), n - 1);
      basis.values(std::cos(theta), count, y.data());
      const double c = shell * w * f * jac;
      for (int k = 0; k < count; ++k) out(k) += c * y[k];
    }
  }
  gsl_integration_glfixed_table_free(table);
  return out;
}

// Chart distance and its t-derivatives.
struct DistanceJet {
  double d, d1, d2;
};
DistanceJet distance_jet(double t) {
  DistanceJet j;
  j.d = 2.0 * std::sqrt((1.0 - t) / (1.0 + t));
  j.d1 = -4.0 / (j.d * (1.0 + t) * (1.0 + t));
  j.d2 = 4.0 * j.d1 / (j.d * j.d * (1.0 + t) * (1.0 + t)) + 8.0 / (j.d * std::pow(1.0 + t, 3));
  return j;
}

}  // namespace

GreenFunction::GreenFunction(const ManifoldModel& model, double rho, const GreenOptions& options)
    : model_(&model), cutoff_(rho) {
  require(rho_is_legal(model, rho), "cutoff radius outside the legal window 0 < rho < inj/4");
  const int count = model.coefficient_count();
  const Vec& mu = model.gjms_eigenvalues();
  const double scale = mu.cwiseAbs().maxCoeff();
  const double mass = factorial(model.n() - 1) * model.omega();
  green_ = Vec::Zero(count);
  for (int k = 1; k < count; ++k) {
    if (std::abs(mu(k)) <= 1e-14 * scale) throw NumericalError("degenerate spectrum: zero eigenvalue at a positive degree");
    green_(k) = mass * model.basis().at_one(k) / mu(k);
  }
  // Q constant: the degree-0 coefficient vanishes under zero Q-average
  singular_ = log_singularity_coefficients(model);
  regular_ = green_ - singular_;

  const int first = int(std::floor(0.9 * model.k_max())) + 1;
  std::vector<double> y(count);
  model.basis().values(std::cos(0.5 * rho), count, y.data());
  double tail = 0.0;
  for (int k = first; k < count; ++k) tail += green_(k) * y[k];
  tail_ = std::abs(tail);
  if (options.check_resolution && tail_ > options.tail_threshold)
    throw NumericalError("k_max too small for the Green function: tail estimate " + std::to_string(tail_) +
                         " exceeds threshold");
}

ZonalBasis::Jet GreenFunction::log_term_jet(double t) const {
  const double rho = cutoff_.rho();
  ZonalBasis::Jet j;
  if (t <= (1.0 - rho * rho) / (1.0 + rho * rho)) {
    j.value = -2.0 * std::log(2.0 * rho);
    return j;
  }
  if (t >= (4.0 - rho * rho) / (4.0 + rho * rho)) {
    j.value = -std::log(4.0) - std::log1p(-t) + std::log1p(t);
    j.d1 = 1.0 / (1.0 - t) + 1.0 / (1.0 + t);
    j.d2 = 1.0 / ((1.0 - t) * (1.0 - t)) - 1.0 / ((1.0 + t) * (1.0 + t));
    return j;
  }
  const DistanceJet d = distance_jet(t);
  const auto c = cutoff_.jet(d.d);
  const double g1 = c.d1 * d.d1 / c.value;
  const double g2 = (c.d2 * d.d1 * d.d1 + c.d1 * d.d2) / c.value - g1 * g1;
  j.value = -2.0 * std::log(c.value);
  j.d1 = -2.0 * g1;
  j.d2 = -2.0 * g2;
  return j;
}

namespace {

// -log(1-t) - log(1/chi^2), smooth through t = 1
ZonalBasis::Jet offset_jet(const GreenFunction& gf, double t) {
  const double rho = gf.rho();
  ZonalBasis::Jet j;
  if (t >= (4.0 - rho * rho) / (4.0 + rho * rho)) {
    j.value = std::log(4.0) - std::log1p(t);
    j.d1 = -1.0 / (1.0 + t);
    j.d2 = 1.0 / ((1.0 + t) * (1.0 + t));
    return j;
  }
  const auto l = gf.log_term_jet(t);
  j.value = -std::log1p(-t) - l.value;
  j.d1 = 1.0 / (1.0 - t) - l.d1;
  j.d2 = 1.0 / ((1.0 - t) * (1.0 - t)) - l.d2;
  return j;
}

}  // namespace

ZonalBasis::Jet GreenFunction::regular_jet(double t) const {
  t = clamp_cosine(t);
  auto j = model_->basis().sum_jet(regular_.data(), int(regular_.size()), t);
  const auto off = offset_jet(*this, t);
  j.value += off.value;
  j.d1 += off.d1;
  j.d2 += off.d2;
  return j;
}

ZonalBasis::Jet GreenFunction::green_jet(double t) const {
  t = clamp_cosine(t);
  require(t < 1.0, "Green function is singular at its base point");
  auto j = model_->basis().sum_jet(regular_.data(), int(regular_.size()), t);
  j.value += -std::log1p(-t);
  j.d1 += 1.0 / (1.0 - t);
  j.d2 += 1.0 / ((1.0 - t) * (1.0 - t));
  return j;
}

double GreenFunction::green(const Point& a, const Point& x) const {
  const double s = 0.5 * (x - a).squaredNorm();
  require(s > 0.0, "Green function is singular at its base point");
  const double t = 1.0 - s;
  return model_->basis().sum(regular_.data(), int(regular_.size()), clamp_cosine(t)) - std::log(s);
}

double GreenFunction::regular(const Point& a, const Point& x) const { return regular_jet(a.dot(x)).value; }

double GreenFunction::log_term(const Point& a, const Point& x) const {
  const double s = 0.5 * (x - a).squaredNorm();
  const double t = 1.0 - s;
  const double rho = cutoff_.rho();
  if (t >= (4.0 - rho * rho) / (4.0 + rho * rho)) {
    require(s > 0.0, "log term is singular at the base point");
    return -std::log(4.0) - std::log(s) + std::log(2.0 - s);
  }
  return log_term_jet(t).value;
}

Vec zonal_gradient(const Point& a, const Point& x, double d1) { return d1 * (a - a.dot(x) * x); }

double zonal_laplacian(int n, double t, double d1, double d2) { return (1.0 - t * t) * d2 - n * t * d1; }

Vec GreenFunction::green_gradient(const Point& a, const Point& x) const {
  return zonal_gradient(a, x, green_jet(a.dot(x)).d1);
}

Vec GreenFunction::regular_gradient(const Point& a, const Point& x) const {
  return zonal_gradient(a, x, regular_jet(a.dot(x)).d1);
}

double GreenFunction::green_laplacian(const Point& a, const Point& x) const {
  const double t = clamp_cosine(a.dot(x));
  const auto j = green_jet(t);
  return zonal_laplacian(model_->n(), t, j.d1, j.d2);
}

double GreenFunction::regular_laplacian(const Point& a, const Point& x) const {
  const double t = clamp_cosine(a.dot(x));
  const auto j = regular_jet(t);
  return zonal_laplacian(model_->n(), t, j.d1, j.d2);
}

double GreenFunction::regular_diagonal() const { return regular_jet(1.0).value; }

double GreenFunction::regular_laplacian_diagonal() const { return -model_->n() * regular_jet(1.0).d1; }

Field GreenFunction::green_field(const Point& a) const { return model_->zonal(a, green_); }

GreenPair green_pair(std::shared_ptr<const GreenFunction> function, const Point& a) {
  function->model().check_point(a);
  GreenPair pair;
  pair.a = a;
  pair.function = function;
  pair.g = function->green_field(a);
  const Rule1D& rule = function->model().zonal_rule();
  pair.h_grid.resize(rule.nodes.size());
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) pair.h_grid[q] = function->regular_jet(rule.nodes[q]).value;
  pair.h_aa = function->regular_diagonal();
  return pair;
}

GreenPair green_pair(const ManifoldModel& model, const Point& a, double rho, const GreenOptions& options) {
  return green_pair(std::make_shared<GreenFunction>(model, rho, options), a);
}

std::vector<ProbeRow> regular_part_probe(const GreenPair& pair, const std::vector<double>& radii,
                                         const std::function<double(const Point&)>& green) {
  const GreenFunction& gf = *pair.function;
  const ManifoldModel& model = gf.model();
  const double resolution = kPi / (2.0 * model.k_max() + 2.0);
  const auto g = green ? green : [&](const Point& x) { return gf.green(pair.a, x); };
  const auto h = [&](const Point& x) { return g(x) - gf.log_term(pair.a, x); };
  const Mat frame = tangent_frame(pair.a);
  const DirectionRule dirs = sphere_rule(model.n() - 1, 3);
  std::vector<ProbeRow> rows;
  for (double r : radii) {
    require(r > 0.0 && r <= gf.rho(), "probe radii must lie in (0, rho]");
    if (r < resolution) throw NumericalError("probe radius below grid resolution");
    ProbeRow row;
    row.radius = r;
    const double step = 1e-3 * r;
    for (int d = 0; d < dirs.directions.cols(); ++d) {
      const Point x = exp_map(pair.a, r * (frame * dirs.directions.col(d)));
      row.sup_abs_h = std::max(row.sup_abs_h, std::abs(h(x)));
      const Mat fx = tangent_frame(x);
      double g2 = 0.0;
      for (int i = 0; i < fx.cols(); ++i) {
        const double di = (h(exp_map(x, step * fx.col(i))) - h(exp_map(x, -step * fx.col(i)))) / (2.0 * step);
        g2 += di * di;
      }
      row.max_gradient = std::max(row.max_gradient, std::sqrt(g2));
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<GreenProfileRow> green_profile(const GreenPair& pair, int samples) {
  require(samples >= 1, "profile needs at least one sample");
  const GreenFunction& gf = *pair.function;
  const Vec dir = tangent_frame(pair.a).col(0);
  std::vector<GreenProfileRow> rows;
  for (int i = 0; i < samples; ++i) {
    const double theta = kPi * (i + 0.5) / samples;
    const Point x = exp_map(pair.a, theta * dir);
    GreenProfileRow row;
    row.dist = theta;
    row.green = gf.green(pair.a, x);
    row.logpart = gf.log_term(pair.a, x);
    row.regular = gf.regular(pair.a, x);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace qcurv
