#pragma once

#include <vector>

#include "qcurv/geometry.hpp"
#include "qcurv/model.hpp"

namespace qcurv {

// A zonal expansion about `axis` (order 0), or its derivative with respect to
// the axis along the tangent vector `direction` (order 1):
//   order 0: x -> sum_k c_k y_k(axis.x)
//   order 1: x -> sum_k c_k y_k'(axis.x) (direction.x)
struct Atom {
  Point axis;
  Vec direction;
  int order = 0;
  Vec coeffs;
};

// Scalar field on the sphere stored as a list of atoms. Every band-limited
// function is a finite sum of zonal atoms; bubble derivatives with respect to
// their centre are order-1 atoms.
class Field {
 public:
  Field() = default;
  Field(int n, int k_max) : n_(n), k_max_(k_max) {}

  int n() const { return n_; }
  int k_max() const { return k_max_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  bool empty() const { return atoms_.empty(); }

  // Adds an atom, merging with an existing atom of identical geometry.
  void add(const Atom& atom);
  void add(const Field& other, double scale = 1.0);
  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(double s);

  // True when all atoms are order 0 about a single axis.
  bool axisymmetric() const;
  // Axis of the first atom carrying non-constant content, if any.
  const Point* principal_axis() const;
  // Zonal coefficients about `axis`; throws unless the field is zonal there
  // (constant atoms about other axes are allowed).
  Vec zonal_coefficients(const Point& axis) const;

 private:
  int n_ = 0;
  int k_max_ = 0;
  std::vector<Atom> atoms_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);

enum class InnerWeight { L2, Gjms, GjmsPositive };

// Diagonal operators: scale the degree-k coefficients by weights(k).
Field apply_diagonal(const Field& u, const Vec& weights);

void check_field(const ManifoldModel& model, const Field& u);

Field apply_gjms(const ManifoldModel& model, const Field& u);
enum class Normalization { MeanZero, QMeanZero };
Field invert_gjms(const ManifoldModel& model, const Field& f, Normalization norm = Normalization::QMeanZero,
                  double solvability_tol = 1e-8);
Field pn_plus_apply(const ManifoldModel& model, const Field& u);
Field conformal_laplacian_apply(const ManifoldModel& model, const Field& u);
Field laplacian_apply(const ManifoldModel& model, const Field& u);

double inner(const ManifoldModel& model, const Field& u, const Field& v, InnerWeight w = InnerWeight::L2);
double l2_inner(const ManifoldModel& model, const Field& u, const Field& v);
// <P u, v>
double gjms_inner(const ManifoldModel& model, const Field& u, const Field& v);
// <P^{n,+} u, v>; both arguments must have zero Q-average.
double pn_inner(const ManifoldModel& model, const Field& u, const Field& v, double tol = 1e-8);
double pn_norm(const ManifoldModel& model, const Field& u);

double integral(const ManifoldModel& model, const Field& u);
double mean(const ManifoldModel& model, const Field& u);
double q_average(const ManifoldModel& model, const Field& u);
// Removes the Q-average.
Field remove_q_average(const ManifoldModel& model, const Field& u);

// Pointwise evaluation.
double evaluate(const ManifoldModel& model, const Field& u, const Point& x);
// Riemannian gradient as an ambient tangent vector at x.
Vec gradient(const ManifoldModel& model, const Field& u, const Point& x);
double laplacian_at(const ManifoldModel& model, const Field& u, const Point& x);

// Per-degree energy sum over atoms (exact Gram diagonal blocks).
Vec degree_energy(const ManifoldModel& model, const Field& u);

// Atom-level contribution of a single atom pair to the weighted inner product.
double atom_inner(const ManifoldModel& model, const Atom& a, const Atom& b, const Vec& weights);
// Per-degree terms of the L2 pairing of two atoms.
Vec atom_pair_terms(const ManifoldModel& model, const Atom& a, const Atom& b);

}  // namespace qcurv
