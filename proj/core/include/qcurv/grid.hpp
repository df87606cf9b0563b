#pragma once

#include <functional>

#include "qcurv/field.hpp"
#include "qcurv/quadrature.hpp"

namespace qcurv {

// Product quadrature about an axis: the model's Gauss-Jacobi rule in
// t = axis.x times a direction rule on the orthogonal S^{n-1}, exact in the
// directions up to `direction_degree`. With degree 0 it integrates only
// functions that are zonal about the axis. Node index = q * directions + d.
class AxisGrid {
 public:
  AxisGrid(const ManifoldModel& model, const Point& axis, int direction_degree);

  const Point& axis() const { return axis_; }
  const Mat& frame() const { return frame_; }
  int t_count() const { return int(rule_->nodes.size()); }
  int direction_count() const { return int(dirs_.weights.size()); }
  int size() const { return t_count() * direction_count(); }
  int direction_degree() const { return dirs_.degree; }

  double t(int q) const { return rule_->nodes[q]; }
  double weight(int q, int d) const { return rule_->weights[q] * dirs_.weights[d] * dir_scale_; }
  Point point(int q, int d) const;
  // unit direction (ambient) of node column d
  Vec direction(int d) const { return frame_ * dirs_.directions.col(d); }

  // Field values at every node.
  Vec evaluate(const Field& u) const;
  // Quadrature of grid values.
  double integrate(const Vec& values) const;

  const ManifoldModel& model() const { return *model_; }

 private:
  const ManifoldModel* model_;
  Point axis_;
  Mat frame_;
  const Rule1D* rule_;
  DirectionRule dirs_;
  double dir_scale_ = 1.0;
};

// Direction degree needed to integrate products of the given fields exactly
// on a grid about `axis` (linear content only; callers add margins for
// nonlinear functions of misaligned fields).
int direction_degree(const Field& u, const Point& axis);

// Zonal analysis: degree-k coefficients about the rule's axis of a function
// given on the 1-D zonal nodes. Fixed summation order.
Vec zonal_analysis(const ManifoldModel& model, const std::vector<double>& values);
// Zonal synthesis: sum_k c_k y_k(t_q) on all zonal nodes.
std::vector<double> zonal_synthesis(const ManifoldModel& model, const Vec& coeffs);
// Pointwise zonal profile sampled on the zonal nodes.
std::vector<double> zonal_sample(const ManifoldModel& model, const std::function<double(double)>& profile);

}  // namespace qcurv
