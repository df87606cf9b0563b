#pragma once

#include <vector>

namespace qcurv {

// Orthonormal zonal harmonics on S^n: y_k(a.x) has unit L2 norm on the sphere.
// Values come from the three-term recurrence of the orthonormal Gegenbauer
// family with weight (1-t^2)^{(n-2)/2}, scaled by 1/sqrt(|S^{n-1}|).
class ZonalBasis {
 public:
  ZonalBasis(int n, int max_degree);

  int dimension() const { return n_; }
  int max_degree() const { return kmax_; }

  // y_k(t) for k = 0..count-1 (count <= max_degree+1 unless extended).
  void values(double t, int count, double* y) const;
  void values_and_derivatives(double t, int count, double* y, double* dy, double* d2y) const;

  double at_one(int k) const { return at_one_[k]; }
  // y_k / y_k(1), the Legendre-normalized zonal polynomial.
  double legendre(int k, double t) const;
  double laplace_eigenvalue(int k) const { return double(k) * double(k + n_ - 1); }
  double multiplicity(int k) const;

  struct Jet {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
  };
  // sum_k c_k y_k(t) over k < count.
  double sum(const double* c, int count, double t) const;
  Jet sum_jet(const double* c, int count, double t) const;

  // Recurrence data, exposed for the inlined transform kernels.
  double y0() const { return y0_; }
  const std::vector<double>& b() const { return b_; }
  const std::vector<double>& inv_b() const { return inv_b_; }

 private:
  int n_;
  int kmax_;
  double y0_;
  std::vector<double> b_;
  std::vector<double> inv_b_;
  std::vector<double> at_one_;
};

}  // namespace qcurv
