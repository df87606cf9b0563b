#pragma once

#include <memory>
#include <nlohmann/json_fwd.hpp>
#include <random>
#include <utility>
#include <vector>

#include "qcurv/basis.hpp"
#include "qcurv/geometry.hpp"
#include "qcurv/quadrature.hpp"

namespace qcurv {

class Field;

enum class Backend { Sphere, Synthetic };

struct ModelSpec {
  Backend backend = Backend::Sphere;
  int n = 4;
  int k_max = 60;
  std::vector<std::pair<int, double>> spectrum_overrides;
  int resonance_m = 1;
  int euler_characteristic = 2;
};

ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json model_spec_to_json(const ModelSpec& spec);

// A negative GJMS eigenvalue together with the harmonic degree carrying it.
struct NegativeMode {
  int degree = 0;
  double mu = 0.0;
  double multiplicity = 0.0;
};

// GJMS eigenvalue on the round S^n at harmonic degree k, from the product of
// shifted Laplace eigenvalues.
double sphere_gjms_eigenvalue(int n, int k);

class ManifoldModel {
 public:
  explicit ManifoldModel(const ModelSpec& spec);
  static ManifoldModel from_json(const nlohmann::json& j);

  const ModelSpec& spec() const { return spec_; }
  Backend backend() const { return spec_.backend; }
  bool is_sphere() const { return spec_.backend == Backend::Sphere; }
  int n() const { return spec_.n; }
  int k_max() const { return spec_.k_max; }
  int coefficient_count() const { return spec_.k_max + 1; }
  int resonance() const { return spec_.resonance_m; }
  int euler_characteristic() const { return spec_.euler_characteristic; }

  const ZonalBasis& basis() const { return *basis_; }
  // mu_k, indexed by degree
  const Vec& gjms_eigenvalues() const { return mu_; }
  double gjms_eigenvalue(int k) const { return mu_(k); }
  double laplace_eigenvalue(int k) const { return basis_->laplace_eigenvalue(k); }
  double conformal_laplacian_eigenvalue(int k) const;
  double multiplicity(int k) const { return basis_->multiplicity(k); }

  double omega() const { return omega_; }            // |S^n|
  double volume() const { return omega_; }
  double scalar_curvature() const { return double(n()) * (n() - 1); }
  double q_value() const { return q_value_; }        // constant Q-curvature
  double kappa() const { return q_value_ * omega_; } // total Q-curvature
  double injectivity_radius() const { return kPi; }

  // Negative eigen-degrees sorted by eigenvalue ascending; mbar counts
  // multiplicities.
  const std::vector<NegativeMode>& negative_modes() const { return negative_; }
  int mbar() const;

  // Gauss-Jacobi rule in t = a.x with weights scaled by |S^{n-1}|, exact for
  // zonal polynomials of degree 4 k_max + 3.
  const Rule1D& zonal_rule() const { return *zonal_rule_; }

  Field constant(double c) const;
  Field zonal(const Point& axis, const Vec& coeffs) const;
  // amplitude * (unit-normalized zonal harmonic of degree k about axis)
  Field harmonic(const Point& axis, int k, double amplitude = 1.0) const;
  Field q_field() const;
  // Zonal representative of the r-th negative eigen-degree about axis.
  Field negative_mode_field(int r, const Point& axis) const;
  // Sum of `atoms` random zonal atoms with Gaussian coefficients up to max_degree.
  Field random_field(std::mt19937_64& rng, int max_degree, int atoms = 3, bool drop_constant = false) const;

  void check_point(const Point& x) const;

 private:
  ModelSpec spec_;
  std::shared_ptr<ZonalBasis> basis_;
  std::shared_ptr<Rule1D> zonal_rule_;
  Vec mu_;
  double omega_ = 0.0;
  double q_value_ = 0.0;
  std::vector<NegativeMode> negative_;
};

}  // namespace qcurv
