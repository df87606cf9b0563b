#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qcurv/field.hpp"
#include "qcurv/green.hpp"
#include "qcurv/io.hpp"
#include "qcurv/model.hpp"

namespace qcurv {

using Configuration = std::vector<Point>;

// Prescribed positive function; positivity is checked on the zonal nodes
// about every atom axis and on a product rule covering all atoms.
struct KField {
  Field k;
  double min_value = 0.0;

  double value(const ManifoldModel& model, const Point& x) const;
  double log_value(const ManifoldModel& model, const Point& x) const;
  // grad log K and Delta log K at x
  Vec log_gradient(const ManifoldModel& model, const Point& x) const;
  double log_laplacian(const ManifoldModel& model, const Point& x) const;
};

KField make_kfield(const ManifoldModel& model, const Field& k);
// Positivity minimum of a field sampled on an AxisGrid resolving all atoms.
double grid_minimum(const ManifoldModel& model, const Field& k);
double grid_maximum(const ManifoldModel& model, const Field& k);

struct ReducedOptions {
  double min_separation = 0.2;       // fat-diagonal radius 4 C eta
  double gradient_check_tol = 1e-4;  // identity versus finite differences
  double hessian_step = 1e-3 * 3.14159265358979323846;
  double chart_laplacian_step = 0.02;
  double degeneracy_ratio = 1e-6;
  double critical_tol = 1e-9;
  int max_newton_steps = 100;
  double newton_step_cap = 0.25;
  int random_seeds = 64;
  std::uint64_t seed = 1;
  double dedup_distance = 1e-4;
};

// Minimum pairwise geodesic distance; +inf for a single point.
double min_separation(const Configuration& a);
void check_configuration(const ManifoldModel& model, const Configuration& a, const ReducedOptions& options);

// log F^A_i(x) = n (H(a_i,x) + sum_{j != i} G(a_j,x)) + log K(x)
double log_f_partial(const GreenFunction& greens, const KField& k, const Configuration& a, int i, const Point& x);
double f_partial(const GreenFunction& greens, const KField& k, const Configuration& a, int i, const Point& x);

// log F^A_i with its gradient and Laplacian at x = a_i, from the analytic
// derivatives of G, H and K.
struct PartialJet {
  double log_value = 0.0;
  Vec log_gradient;
  double log_laplacian = 0.0;
};
PartialJet partial_jet(const GreenFunction& greens, const KField& k, const Configuration& a, int i);

// F_K(A) = sum_i (H(a_i,a_i) + sum_{j != i} G(a_i,a_j) + (2/n) log K(a_i))
double f_reduced(const GreenFunction& greens, const KField& k, const Configuration& a,
                 const ReducedOptions& options = {});

// Gradient from (2/n) grad F^A_i(a_i) / F^A_i(a_i), one ambient tangent
// vector per point.
std::vector<Vec> grad_identity(const GreenFunction& greens, const KField& k, const Configuration& a);
// Richardson-extrapolated central differences of f_reduced in exp-map
// coordinates, expressed as ambient tangent vectors.
std::vector<Vec> grad_finite_difference(const GreenFunction& greens, const KField& k, const Configuration& a,
                                        const ReducedOptions& options = {});
// max_i |identity - fd| / max(|identity|, 1e-3)
double gradient_discrepancy(const std::vector<Vec>& identity, const std::vector<Vec>& fd);
// Identity form; throws NumericalError when the finite-difference check
// disagrees beyond options.gradient_check_tol.
std::vector<Vec> grad_f_reduced(const GreenFunction& greens, const KField& k, const Configuration& a,
                                const ReducedOptions& options = {});

// Hessian of F_K in product exp-map coordinates (tangent_frame of each point).
Mat hessian_f_reduced(const GreenFunction& greens, const KField& k, const Configuration& a,
                      const ReducedOptions& options = {});

// L_K from the analytic Laplacian of F^A_i; l_K from a Richardson chart
// Laplacian in the flat chart about each a_i.
double index_L(const GreenFunction& greens, const KField& k, const Configuration& a,
               const ReducedOptions& options = {});
double index_l(const GreenFunction& greens, const KField& k, const Configuration& a,
               const ReducedOptions& options = {});

struct CritConfig {
  Configuration points;
  double value = 0.0;
  double gradient_norm = 0.0;
  Vec hessian_eigenvalues;
  int morse = 0;
  bool hessian_degenerate = false;
  double L = 0.0;
  double l = 0.0;
  int i_infinity = 0;
  bool in_f_infinity = false;
};

struct SeedFailure {
  std::size_t seed_index = 0;
  std::string reason;
};

struct CritSearchResult {
  std::vector<CritConfig> configs;
  std::vector<SeedFailure> failures;
  std::size_t seeds_tried = 0;
};

// Newton from the given seeds, plus (when seeds is empty) antipodal pairs
// about every atom axis of K in all separated m-tuples and
// options.random_seeds random m-tuples.
CritSearchResult find_critical_points(const GreenFunction& greens, const KField& k, int m,
                                      const ReducedOptions& options = {},
                                      const std::vector<Configuration>& seeds = {});
std::vector<Configuration> default_seeds(const ManifoldModel& model, const KField& k, int m,
                                         const ReducedOptions& options);
// Distance between unordered tuples: min over matchings of the max pointwise distance.
double configuration_distance(const Configuration& a, const Configuration& b);
// Points sorted lexicographically.
Configuration canonical(const Configuration& a);

struct NdPredicates {
  bool nd0 = true;
  bool nd_minus = true;
  bool nd_plus = true;
  bool nd = true;
};
NdPredicates nd_predicates(const std::vector<CritConfig>& configs, double threshold = 1e-6);

CsvTable crit_table(const std::vector<CritConfig>& configs);

}  // namespace qcurv
