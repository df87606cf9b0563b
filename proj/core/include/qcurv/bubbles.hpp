#pragma once

#include <vector>

#include "qcurv/field.hpp"
#include "qcurv/green.hpp"
#include "qcurv/model.hpp"

namespace qcurv {

// log(2 lambda / (1 + lambda^2 |y - b|^2)) on R^n
double standard_bubble(const Vec& b, double lambda, const Vec& y);

// Powers-of-g representation of radial functions on R^n, g = 1/(1 + lambda^2 r^2).
// Index j holds the coefficient of g^j.
std::vector<double> bubble_polyharmonic_coefficients(int n, double lambda);
// (-Delta)^{n/2} of the standard bubble centred at 0, at radius r.
double bubble_polyharmonic(int n, double lambda, double r);
// |(-Delta)^{n/2} delta - (n-1)! e^{n delta}| / ((n-1)! e^{n delta}) at radius r.
double bubble_equation_residual(int n, double lambda, double r);

// Conformal factor about a (round sphere only). In the chart y of
// ConformalChart, u_a = log(1 + |y|^2/4) makes g_a = e^{2u_a} g exactly flat;
// beyond chart distance 2 rho the factor is frozen smoothly through the
// cutoff profile of radius 2 rho, so u_a stays bounded (the exact flat factor
// blows up at -a). The bubble profile is constant there, and all uses of the
// flat metric happen inside d_{g_a} <= 2 rho.
double conformal_log_factor(const CutoffProfile& outer, double t);

class ConformalFactor {
 public:
  ConformalFactor(const ManifoldModel& model, const Point& a, double rho);
  const ConformalChart& chart() const { return chart_; }
  double rho() const { return outer_.rho() / 2.0; }
  double value(const Point& x) const;
  // d_{g_a}(a, x) = |y(x)|
  double distance(const Point& x) const { return chart_.distance(x); }
  // Metric e^{2u_a} g in chart coordinates; the identity where |y| <= 2 rho.
  Mat metric(const Vec& y) const;

 private:
  ConformalChart chart_;
  CutoffProfile outer_;
};

ConformalFactor conformal_factor(const ManifoldModel& model, const Point& a, double rho);

// Truncated bubble profile in t = a.x: log(2 lambda / (1 + lambda^2 chi^2(d_{g_a}))).
double truncated_bubble_profile(const CutoffProfile& cutoff, double lambda, double t);
double truncated_bubble_value(const CutoffProfile& cutoff, const Point& a, double lambda, const Point& x);
// Spectral projection of the truncated bubble as a zonal Field.
Field truncated_bubble(const ManifoldModel& model, const Point& a, double lambda, double rho);

struct BubbleOptions {
  double alias_threshold = 0.01;  // energy share of the top 10% modes
  bool check_alias = true;
};

// Projected bubble: P phi + Q/m = (n-1)!|S^n| e^{n(hat delta + u_a)} / int e^{n(hat delta + u_a)}
// with zero Q-average, solved degree by degree. phi is zonal about a.
struct ProjectedBubble {
  Point a;
  double lambda = 0.0;
  double rho = 0.0;
  Vec coeffs;       // phi_k
  Vec dlambda;      // d phi_k / d lambda
  Vec rhs;          // right-hand side coefficients f_k
  Vec drhs;         // d f_k / d lambda
  double rhs_mass = 0.0;        // integral of the right-hand side
  double solvability_margin = 0.0;
  double alias_fraction = 0.0;

  Field phi(const ManifoldModel& model) const;
  Field dphi_dlambda(const ManifoldModel& model) const;
  // Derivative with respect to the centre along the tangent vector v at a.
  Field dphi_da(const ManifoldModel& model, const Vec& v) const;
  double galerkin_residual(const ManifoldModel& model) const;
};

ProjectedBubble project_bubble(const ManifoldModel& model, const Point& a, double lambda, double rho, int m,
                               const BubbleOptions& options = {});

// Energy share of the top 10% degrees in a coefficient vector.
double top_mode_fraction(const Vec& coeffs);

}  // namespace qcurv
