#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

namespace qcurv {

struct Rule1D {
  std::vector<double> nodes;    // ascending
  std::vector<double> weights;
};

// Gauss rule on [-1,1] for the weight (1-t^2)^gamma. Nodes from GSL, then
// Newton-polished against the orthonormal recurrence; Christoffel weights.
// Rules are cached and shared.
std::shared_ptr<const Rule1D> gauss_jacobi(int count, double gamma);

// Product rule on the unit sphere S^d in R^{d+1}, exact for polynomials of
// total degree <= degree. Columns of `directions` are the nodes.
struct DirectionRule {
  int sphere_dim = 0;
  int degree = 0;
  Eigen::MatrixXd directions;
  std::vector<double> weights;
};
DirectionRule sphere_rule(int sphere_dim, int degree);

}  // namespace qcurv
