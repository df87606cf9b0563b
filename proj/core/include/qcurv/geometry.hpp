#pragma once

#include <Eigen/Dense>
#include <random>

namespace qcurv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Point = Eigen::VectorXd;  // unit vector in R^{n+1}

inline constexpr double kPi = 3.14159265358979323846;

// |S^d|
double sphere_area(int d);
double factorial(int k);

Point north_pole(int n);
Point normalized(const Vec& v);
double clamp_cosine(double t);
double geodesic_distance(const Point& a, const Point& b);

// Orthonormal basis of the tangent space at a, as columns of an (n+1) x n
// matrix. Deterministic in a.
Mat tangent_frame(const Point& a);
Vec project_tangent(const Point& a, const Vec& v);

Point exp_map(const Point& a, const Vec& tangent);
Vec log_map(const Point& a, const Point& x);

Point random_point(int n, std::mt19937_64& rng);
Mat random_rotation(int dim, std::mt19937_64& rng);

// Conformal chart centred at a: y = 2 E^T x / (1 + a.x). The round metric is
// (4/(4+|y|^2))^2 |dy|^2 there, so g_a = e^{2u_a} g with
// u_a = log(2/(1+a.x)) is flat in y, u_a(a) = 0 and grad u_a(a) = 0.
class ConformalChart {
 public:
  explicit ConformalChart(const Point& center);
  ConformalChart(const Point& center, const Mat& frame);

  const Point& center() const { return center_; }
  const Mat& frame() const { return frame_; }
  int dimension() const { return int(frame_.cols()); }

  Vec coords(const Point& x) const;
  Point point(const Vec& y) const;
  // u_a(x)
  double log_factor(const Point& x) const;
  // d_{g_a}(a,x) = |y(x)|
  double distance(const Point& x) const;
  // chart metric g in y coordinates is conformal_weight(y)^2 |dy|^2
  static double conformal_weight(const Vec& y);

 private:
  Point center_;
  Mat frame_;
};

// Chart distance as a function of t = a.x: 2 sqrt((1-t)/(1+t)).
double chart_distance_from_cosine(double t);
// u_a as a function of t.
double chart_log_factor_from_cosine(double t);

}  // namespace qcurv
