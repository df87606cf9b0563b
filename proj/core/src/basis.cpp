#include "qcurv/basis.hpp"

#include <cmath>

#include "qcurv/errors.hpp"
#include "qcurv/geometry.hpp"

namespace qcurv {

ZonalBasis::ZonalBasis(int n, int max_degree) : n_(n), kmax_(max_degree) {
  require(n >= 2, "sphere dimension must be at least 2");
  require(max_degree >= 0, "negative truncation degree");
  const double alpha = 0.5 * (n - 1);
  const double gamma = 0.5 * (n - 2);
  // mass of (1-t^2)^gamma on [-1,1]
  const double mass = std::exp(0.5 * std::log(kPi) + std::lgamma(gamma + 1.0) - std::lgamma(gamma + 1.5));
  y0_ = 1.0 / std::sqrt(mass * sphere_area(n - 1));
  // one spare coefficient so derivative recurrences can reach kmax+1
  const int len = kmax_ + 2;
  b_.assign(len + 1, 0.0);
  inv_b_.assign(len + 1, 0.0);
  for (int k = 1; k <= len; ++k) {
    const double kk = k;
    b_[k] = std::sqrt(kk * (kk + 2 * alpha - 1) / (4 * (kk + alpha) * (kk + alpha - 1)));
    inv_b_[k] = 1.0 / b_[k];
  }
  at_one_.resize(kmax_ + 1);
  values(1.0, kmax_ + 1, at_one_.data());
}

void ZonalBasis::values(double t, int count, double* y) const {
  if (count <= 0) return;
  y[0] = y0_;
  if (count == 1) return;
  y[1] = t * y0_ * inv_b_[1];
  for (int k = 1; k + 1 < count; ++k) y[k + 1] = (t * y[k] - b_[k] * y[k - 1]) * inv_b_[k + 1];
}

void ZonalBasis::values_and_derivatives(double t, int count, double* y, double* dy, double* d2y) const {
  if (count <= 0) return;
  y[0] = y0_;
  dy[0] = 0.0;
  if (d2y) d2y[0] = 0.0;
  if (count == 1) return;
  y[1] = t * y0_ * inv_b_[1];
  dy[1] = y0_ * inv_b_[1];
  if (d2y) d2y[1] = 0.0;
  for (int k = 1; k + 1 < count; ++k) {
    const double ib = inv_b_[k + 1];
    y[k + 1] = (t * y[k] - b_[k] * y[k - 1]) * ib;
    dy[k + 1] = (y[k] + t * dy[k] - b_[k] * dy[k - 1]) * ib;
    if (d2y) d2y[k + 1] = (2.0 * dy[k] + t * d2y[k] - b_[k] * d2y[k - 1]) * ib;
  }
}

double ZonalBasis::legendre(int k, double t) const {
  std::vector<double> y(k + 1);
  values(t, k + 1, y.data());
  return y[k] / at_one_[k];
}

double ZonalBasis::multiplicity(int k) const {
  // (2k+n-1)(k+n-2)! / (k!(n-1)!)
  if (k == 0) return 1.0;
  double m = double(2 * k + n_ - 1) / double(n_ - 1);
  for (int j = 1; j <= n_ - 2; ++j) m *= double(k + j) / double(j);
  return m;
}

double ZonalBasis::sum(const double* c, int count, double t) const {
  if (count <= 0) return 0.0;
  double prev = y0_;
  double acc = c[0] * prev;
  if (count == 1) return acc;
  double cur = t * y0_ * inv_b_[1];
  acc += c[1] * cur;
  for (int k = 1; k + 1 < count; ++k) {
    const double next = (t * cur - b_[k] * prev) * inv_b_[k + 1];
    prev = cur;
    cur = next;
    acc += c[k + 1] * cur;
  }
  return acc;
}

ZonalBasis::Jet ZonalBasis::sum_jet(const double* c, int count, double t) const {
  Jet out;
  if (count <= 0) return out;
  double p0 = y0_, d0 = 0.0, s0 = 0.0;
  out.value = c[0] * p0;
  if (count == 1) return out;
  double p1 = t * y0_ * inv_b_[1], d1 = y0_ * inv_b_[1], s1 = 0.0;
  out.value += c[1] * p1;
  out.d1 += c[1] * d1;
  for (int k = 1; k + 1 < count; ++k) {
    const double ib = inv_b_[k + 1];
    const double p2 = (t * p1 - b_[k] * p0) * ib;
    const double d2 = (p1 + t * d1 - b_[k] * d0) * ib;
    const double s2 = (2.0 * d1 + t * s1 - b_[k] * s0) * ib;
    out.value += c[k + 1] * p2;
    out.d1 += c[k + 1] * d2;
    out.d2 += c[k + 1] * s2;
    p0 = p1; p1 = p2;
    d0 = d1; d1 = d2;
    s0 = s1; s1 = s2;
  }
  return out;
}

}  // namespace qcurv
