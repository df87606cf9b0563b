#include "qcurv/geometry.hpp"

#include <cmath>

#include "qcurv/errors.hpp"

namespace qcurv {

double sphere_area(int d) {
  return 2.0 * std::exp(0.5 * (d + 1) * std::log(kPi) - std::lgamma(0.5 * (d + 1)));
}

double factorial(int k) {
  double f = 1.0;
  for (int j = 2; j <= k; ++j) f *= j;
  return f;
}

Point north_pole(int n) {
  Point e = Point::Zero(n + 1);
  e(0) = 1.0;
  return e;
}

Point normalized(const Vec& v) {
  const double r = v.norm();
  require(r > 0.0 && std::isfinite(r), "cannot normalize a zero or non-finite vector");
  return v / r;
}

double clamp_cosine(double t) { return t > 1.0 ? 1.0 : (t < -1.0 ? -1.0 : t); }

double geodesic_distance(const Point& a, const Point& b) {
  // atan2 form stays accurate for nearby and nearly antipodal points
  return std::atan2((a - b).norm() * (a + b).norm(), 2.0 * a.dot(b)) ;
}

Mat tangent_frame(const Point& a) {
  const int dim = int(a.size());
  // Householder reflector mapping a to +-e_j, j the largest component
  int j = 0;
  a.cwiseAbs().maxCoeff(&j);
  Vec v = a;
  const double s = a(j) >= 0 ? 1.0 : -1.0;
  v(j) += s;
  const double vv = v.squaredNorm();
  Mat frame(dim, dim - 1);
  int col = 0;
  for (int i = 0; i < dim; ++i) {
    if (i == j) continue;
    Vec e = Vec::Zero(dim);
    e(i) = 1.0;
    frame.col(col++) = e - (2.0 * v(i) / vv) * v;
  }
  return frame;
}

Vec project_tangent(const Point& a, const Vec& v) { return v - a.dot(v) * a; }

Point exp_map(const Point& a, const Vec& tangent) {
  const double r = tangent.norm();
  if (r == 0.0) return a;
  return normalized(std::cos(r) * a + (std::sin(r) / r) * tangent);
}

Vec log_map(const Point& a, const Point& x) {
  const Vec w = project_tangent(a, x);
  const double s = w.norm();
  if (s == 0.0) return Vec::Zero(a.size());
  return (geodesic_distance(a, x) / s) * w;
}

Point random_point(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(n + 1);
  for (int i = 0; i <= n; ++i) v(i) = g(rng);
  return normalized(v);
}

Mat random_rotation(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat m(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i) m(i, j) = g(rng);
  Eigen::HouseholderQR<Mat> qr(m);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR();
  for (int j = 0; j < dim; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  if (q.determinant() < 0) q.col(0) *= -1.0;
  return q;
}

ConformalChart::ConformalChart(const Point& center) : ConformalChart(center, tangent_frame(center)) {}

ConformalChart::ConformalChart(const Point& center, const Mat& frame) : center_(center), frame_(frame) {
  require(frame.rows() == center.size() && frame.cols() == center.size() - 1, "chart frame has wrong shape");
}

Vec ConformalChart::coords(const Point& x) const {
  const double t = center_.dot(x);
  require(t > -1.0, "chart is singular at the antipode of its centre");
  return (2.0 / (1.0 + t)) * (frame_.transpose() * x);
}

Point ConformalChart::point(const Vec& y) const {
  const double r2 = y.squaredNorm();
  const double t = (4.0 - r2) / (4.0 + r2);
  return normalized(t * center_ + frame_ * ((4.0 / (4.0 + r2)) * y));
}

double ConformalChart::log_factor(const Point& x) const {
  return chart_log_factor_from_cosine(center_.dot(x));
}

double ConformalChart::distance(const Point& x) const { return coords(x).norm(); }

double ConformalChart::conformal_weight(const Vec& y) { return 4.0 / (4.0 + y.squaredNorm()); }

double chart_distance_from_cosine(double t) {
  t = clamp_cosine(t);
  require(t > -1.0, "chart distance is infinite at the antipode");
  return 2.0 * std::sqrt((1.0 - t) / (1.0 + t));
}

double chart_log_factor_from_cosine(double t) {
  t = clamp_cosine(t);
  require(t > -1.0, "conformal factor is infinite at the antipode");
  return std::log(2.0 / (1.0 + t));
}

}  // namespace qcurv
