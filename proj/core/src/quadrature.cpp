#include "qcurv/quadrature.hpp"

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "qcurv/errors.hpp"
#include "qcurv/geometry.hpp"

namespace qcurv {

namespace {

// Orthonormal recurrence for weight (1-t^2)^gamma (Gegenbauer alpha = gamma + 1/2).
struct Orthonormal {
  double p0;
  std::vector<double> b;
  Orthonormal(int count, double gamma) {
    const double alpha = gamma + 0.5;
    const double mass = std::exp(0.5 * std::log(kPi) + std::lgamma(gamma + 1.0) - std::lgamma(gamma + 1.5));
    p0 = 1.0 / std::sqrt(mass);
    b.assign(count + 1, 0.0);
    for (int k = 1; k <= count; ++k) {
      const double kk = k;
      double num = kk * (kk + 2 * alpha - 1);
      double den = 4 * (kk + alpha) * (kk + alpha - 1);
      // alpha = 1/2, k = 1 limit (Legendre-type weight with gamma = 0 is fine;
      // gamma = -1/2 hits 0/0)
      if (den == 0.0) {
        b[k] = std::sqrt(0.5);
      } else {
        b[k] = std::sqrt(num / den);
      }
    }
  }
  // returns p_N(t), p_N'(t) and sum_{k<N} p_k(t)^2
  void eval(int N, double t, double& pn, double& dpn, double& sumsq) const {
    double p_prev = 0.0, p = p0, d_prev = 0.0, d = 0.0;
    sumsq = 0.0;
    for (int k = 0; k < N; ++k) {
      sumsq += p * p;
      const double bk = k == 0 ? 0.0 : b[k];
      const double p_next = (t * p - bk * p_prev) / b[k + 1];
      const double d_next = (p + t * d - bk * d_prev) / b[k + 1];
      p_prev = p; p = p_next;
      d_prev = d; d = d_next;
    }
    pn = p;
    dpn = d;
  }
};

std::shared_ptr<const Rule1D> build_rule(int count, double gamma) {
  require(count >= 1, "quadrature needs at least one node");
  require(gamma > -1.0, "Jacobi exponent must exceed -1");
  auto rule = std::make_shared<Rule1D>();
  gsl_integration_fixed_workspace* ws =
      gsl_integration_fixed_alloc(gsl_integration_fixed_jacobi, count, -1.0, 1.0, gamma, gamma);
  if (!ws) throw NumericalError("GSL failed to allocate a Gauss-Jacobi rule");
  const double* x = gsl_integration_fixed_nodes(ws);
  std::vector<double> nodes(x, x + count);
  gsl_integration_fixed_free(ws);
  std::sort(nodes.begin(), nodes.end());
  // enforce exact symmetry, then polish
  for (int i = 0; i < count / 2; ++i) {
    const double s = 0.5 * (nodes[count - 1 - i] - nodes[i]);
    nodes[i] = -s;
    nodes[count - 1 - i] = s;
  }
  if (count % 2 == 1) nodes[count / 2] = 0.0;

  Orthonormal on(count, gamma);
  rule->nodes.resize(count);
  rule->weights.resize(count);
  for (int i = 0; i < count; ++i) {
    double t = nodes[i];
    double pn, dpn, sumsq;
    for (int it = 0; it < 8; ++it) {
      on.eval(count, t, pn, dpn, sumsq);
      const double step = pn / dpn;
      t -= step;
      if (std::abs(step) < 1e-17) break;
    }
    on.eval(count, t, pn, dpn, sumsq);
    rule->nodes[i] = t;
    rule->weights[i] = 1.0 / sumsq;
  }
  for (int i = 0; i < count / 2; ++i) {
    const int j = count - 1 - i;
    const double s = 0.5 * (rule->nodes[j] - rule->nodes[i]);
    const double w = 0.5 * (rule->weights[i] + rule->weights[j]);
    rule->nodes[i] = -s;
    rule->nodes[j] = s;
    rule->weights[i] = rule->weights[j] = w;
  }
  if (count % 2 == 1) rule->nodes[count / 2] = 0.0;
  return rule;
}

}  // namespace

std::shared_ptr<const Rule1D> gauss_jacobi(int count, double gamma) {
  static std::mutex mutex;
  static std::map<std::pair<int, double>, std::shared_ptr<const Rule1D>> cache;
  const auto key = std::make_pair(count, gamma);
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto rule = build_rule(count, gamma);
  std::lock_guard<std::mutex> lock(mutex);
  return cache.emplace(key, rule).first->second;
}

DirectionRule sphere_rule(int sphere_dim, int degree) {
  require(sphere_dim >= 1, "direction rule needs sphere dimension >= 1");
  require(degree >= 0, "negative direction degree");
  DirectionRule out;
  out.sphere_dim = sphere_dim;
  out.degree = degree;
  if (sphere_dim == 1) {
    const int count = degree + 1;
    out.directions.resize(2, count);
    out.weights.assign(count, 2.0 * kPi / count);
    for (int j = 0; j < count; ++j) {
      const double phi = 2.0 * kPi * j / count;
      out.directions(0, j) = std::cos(phi);
      out.directions(1, j) = std::sin(phi);
    }
    return out;
  }
  const DirectionRule inner = sphere_rule(sphere_dim - 1, degree);
  const auto polar = gauss_jacobi(degree / 2 + 1, 0.5 * (sphere_dim - 2));
  const int np = int(polar->nodes.size());
  const int ni = int(inner.weights.size());
  out.directions.resize(sphere_dim + 1, np * ni);
  out.weights.resize(np * ni);
  for (int p = 0; p < np; ++p) {
    const double s = polar->nodes[p];
    const double r = std::sqrt(std::max(0.0, 1.0 - s * s));
    for (int i = 0; i < ni; ++i) {
      const int col = p * ni + i;
      out.directions(0, col) = s;
      out.directions.block(1, col, sphere_dim, 1) = r * inner.directions.col(i);
      out.weights[col] = polar->weights[p] * inner.weights[i];
    }
  }
  return out;
}

}  // namespace qcurv
