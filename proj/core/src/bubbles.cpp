#include "qcurv/bubbles.hpp"

#include <cmath>

#include "qcurv/errors.hpp"
#include "qcurv/grid.hpp"

namespace qcurv {

double standard_bubble(const Vec& b, double lambda, const Vec& y) {
  require(lambda > 0.0, "bubble concentration must be positive");
  require(b.size() == y.size(), "bubble centre and point dimensions differ");
  return std::log(2.0 * lambda / (1.0 + lambda * lambda * (y - b).squaredNorm()));
}

namespace {

// Radial Laplacian on R^n acting on sum_j c_j g^j (index 0 unused) plus an
// optional multiple of -log(1 + lambda^2 r^2).
std::vector<double> radial_laplacian(int n, double lambda, const std::vector<double>& c, double log_coeff) {
  std::vector<double> out(c.size() + 2, 0.0);
  const double l2 = lambda * lambda;
  for (std::size_t j = 1; j < c.size(); ++j) {
    const double jj = double(j);
    out[j + 1] += l2 * c[j] * (4.0 * jj * (jj + 1.0) - 2.0 * n * jj);
    out[j + 2] -= l2 * c[j] * 4.0 * jj * (jj + 1.0);
  }
  out[1] += log_coeff * l2 * (4.0 - 2.0 * n);
  out[2] -= log_coeff * l2 * 4.0;
  return out;
}

}  // namespace

std::vector<double> bubble_polyharmonic_coefficients(int n, double lambda) {
  require(n >= 2 && n % 2 == 0, "polyharmonic order needs an even dimension");
  std::vector<double> c = radial_laplacian(n, lambda, {0.0}, 1.0);
  for (int i = 1; i < n / 2; ++i) c = radial_laplacian(n, lambda, c, 0.0);
  if ((n / 2) % 2 == 1)
    for (double& v : c) v = -v;
  return c;
}

double bubble_polyharmonic(int n, double lambda, double r) {
  const auto c = bubble_polyharmonic_coefficients(n, lambda);
  const double g = 1.0 / (1.0 + lambda * lambda * r * r);
  double s = 0.0;
  for (std::size_t j = c.size(); j-- > 1;) s = (s + c[j]) * g;
  return s;
}

double bubble_equation_residual(int n, double lambda, double r) {
  const double g = 1.0 / (1.0 + lambda * lambda * r * r);
  const double target = factorial(n - 1) * std::pow(2.0 * lambda * g, n);
  return std::abs(bubble_polyharmonic(n, lambda, r) - target) / target;
}

double conformal_log_factor(const CutoffProfile& outer, double t) {
  t = clamp_cosine(t);
  const double r = outer.rho();
  if (t <= (1.0 - r * r) / (1.0 + r * r)) return std::log1p(r * r);
  const double chi = outer.value(chart_distance_from_cosine(t));
  return std::log1p(0.25 * chi * chi);
}

ConformalFactor::ConformalFactor(const ManifoldModel& model, const Point& a, double rho)
    : chart_(a), outer_(2.0 * rho) {
  require(model.is_sphere(), "conformal factor is only available on the round-sphere backend");
  require(rho_is_legal(model, rho), "cutoff radius outside the legal window 0 < rho < inj/4");
  model.check_point(a);
}

double ConformalFactor::value(const Point& x) const {
  const double r = outer_.rho();
  const double t = chart_.center().dot(x);
  if (t <= (1.0 - r * r) / (1.0 + r * r)) return std::log1p(r * r);
  const double chi = outer_.value(chart_.distance(x));
  return std::log1p(0.25 * chi * chi);
}

Mat ConformalFactor::metric(const Vec& y) const {
  const double w = ConformalChart::conformal_weight(y);
  const double chi = outer_.value(y.norm());
  const double e2u = std::pow(1.0 + 0.25 * chi * chi, 2);
  return e2u * w * w * Mat::Identity(y.size(), y.size());
}

ConformalFactor conformal_factor(const ManifoldModel& model, const Point& a, double rho) {
  return ConformalFactor(model, a, rho);
}

double truncated_bubble_profile(const CutoffProfile& cutoff, double lambda, double t) {
  t = clamp_cosine(t);
  const double rho = cutoff.rho();
  double chi;
  if (t <= (1.0 - rho * rho) / (1.0 + rho * rho)) {
    chi = 2.0 * rho;
  } else {
    chi = cutoff.value(chart_distance_from_cosine(t));
  }
  return std::log(2.0 * lambda / (1.0 + lambda * lambda * chi * chi));
}

double truncated_bubble_value(const CutoffProfile& cutoff, const Point& a, double lambda, const Point& x) {
  const double rho = cutoff.rho();
  const double t = a.dot(x);
  if (t <= (1.0 - rho * rho) / (1.0 + rho * rho)) return truncated_bubble_profile(cutoff, lambda, t);
  const double chi = cutoff.value(ConformalChart(a).distance(x));
  return std::log(2.0 * lambda / (1.0 + lambda * lambda * chi * chi));
}

Field truncated_bubble(const ManifoldModel& model, const Point& a, double lambda, double rho) {
  require(rho_is_legal(model, rho), "cutoff radius outside the legal window 0 < rho < inj/4");
  require(lambda > 0.0, "bubble concentration must be positive");
  const CutoffProfile cutoff(rho);
  const auto values = zonal_sample(model, [&](double t) { return truncated_bubble_profile(cutoff, lambda, t); });
  return model.zonal(a, zonal_analysis(model, values));
}

double top_mode_fraction(const Vec& coeffs) {
  const int count = int(coeffs.size());
  const int first = int(std::floor(0.9 * (count - 1))) + 1;
  const double total = coeffs.squaredNorm();
  if (total == 0.0) return 0.0;
  return coeffs.tail(count - first).squaredNorm() / total;
}

ProjectedBubble project_bubble(const ManifoldModel& model, const Point& a, double lambda, double rho, int m,
                               const BubbleOptions& options) {
  require(rho_is_legal(model, rho), "cutoff radius outside the legal window 0 < rho < inj/4");
  require(lambda > 0.0, "bubble concentration must be positive");
  require(m == model.resonance(), "resonance integer differs from the model's");
  model.check_point(a);
  const int n = model.n();
  const CutoffProfile cutoff(rho);
  const CutoffProfile outer(2.0 * rho);
  const Rule1D& rule = model.zonal_rule();
  const std::size_t nq = rule.nodes.size();
  const double shift = std::log(2.0 * lambda);
  std::vector<double> density(nq), ddensity(nq);
  double z = 0.0, dz = 0.0;
  for (std::size_t q = 0; q < nq; ++q) {
    const double t = rule.nodes[q];
    const double rho2 = rho * rho;
    double chi;
    if (t <= (1.0 - rho2) / (1.0 + rho2)) {
      chi = 2.0 * rho;
    } else {
      chi = cutoff.value(chart_distance_from_cosine(t));
    }
    const double l2c2 = lambda * lambda * chi * chi;
    const double hat = std::log(2.0 * lambda / (1.0 + l2c2));
    const double dhat = 1.0 / lambda - 2.0 * lambda * chi * chi / (1.0 + l2c2);
    const double v = std::exp(n * (hat - shift + conformal_log_factor(outer, t)));
    density[q] = v;
    ddensity[q] = n * v * dhat;
    z += rule.weights[q] * v;
    dz += rule.weights[q] * ddensity[q];
  }
  const double mass = factorial(n - 1) * model.omega();
  const Vec fv = zonal_analysis(model, density);
  const Vec fdv = zonal_analysis(model, ddensity);
  ProjectedBubble out;
  out.a = a;
  out.lambda = lambda;
  out.rho = rho;
  out.rhs = (mass / z) * fv;
  out.drhs = (mass / z) * (fdv - (dz / z) * fv);
  out.rhs_mass = out.rhs(0) * model.basis().y0() * model.omega();
  out.solvability_margin = std::abs(out.rhs_mass - model.q_value() / m * model.volume());
  out.alias_fraction = top_mode_fraction(out.rhs);
  if (options.check_alias && out.alias_fraction > options.alias_threshold)
    throw NumericalError("bubble right-hand side is under-resolved (aliasing): raise k_max for lambda = " +
                         std::to_string(lambda));
  const Vec& mu = model.gjms_eigenvalues();
  out.coeffs = Vec::Zero(model.coefficient_count());
  out.dlambda = Vec::Zero(model.coefficient_count());
  for (int k = 1; k < model.coefficient_count(); ++k) {
    if (mu(k) == 0.0) throw NumericalError("degenerate spectrum: zero eigenvalue at a positive degree");
    out.coeffs(k) = out.rhs(k) / mu(k);
    out.dlambda(k) = out.drhs(k) / mu(k);
  }
  return out;
}

Field ProjectedBubble::phi(const ManifoldModel& model) const { return model.zonal(a, coeffs); }

Field ProjectedBubble::dphi_dlambda(const ManifoldModel& model) const { return model.zonal(a, dlambda); }

Field ProjectedBubble::dphi_da(const ManifoldModel& model, const Vec& v) const {
  Atom atom;
  atom.axis = a;
  atom.direction = project_tangent(a, v);
  atom.order = 1;
  atom.coeffs = coeffs;
  Field f(model.n(), model.k_max());
  f.add(atom);
  return f;
}

double ProjectedBubble::galerkin_residual(const ManifoldModel& model) const {
  // P phi + Q/m - rhs, degree by degree (degree 0 carries the solvability balance)
  Vec r = model.gjms_eigenvalues().cwiseProduct(coeffs) - rhs;
  r(0) += model.q_value() / model.resonance() * std::sqrt(model.omega());
  return r.norm() / rhs.norm();
}

}  // namespace qcurv
