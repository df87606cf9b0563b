#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "qcurv/basis.hpp"
#include "qcurv/field.hpp"
#include "qcurv/model.hpp"

namespace qcurv {

// Smooth monotone cutoff: identity on [0, rho], constant 2 rho beyond 2 rho,
// joined on [rho, 2 rho] by (1-S) t + 2 rho S with S the C-infinity step
// e^{-1/u} / (e^{-1/u} + e^{-1/(1-u)}), u = (t - rho)/rho.
class CutoffProfile {
 public:
  explicit CutoffProfile(double rho);
  double rho() const { return rho_; }
  double value(double t) const;
  ZonalBasis::Jet jet(double t) const;

 private:
  double rho_;
};

double cutoff_eval(const CutoffProfile& profile, double t);

// Legal cutoff radii: 0 < rho < inj/4.
bool rho_is_legal(const ManifoldModel& model, double rho);
// 0.4 of the largest legal radius.
double default_rho(const ManifoldModel& model);

struct GreenOptions {
  // Tail sum |sum_{k > 0.9 k_max} G_k y_k| at distance rho/2 above this raises.
  double tail_threshold = 5e-2;
  bool check_resolution = true;
};

// Zonal Green profile shared by every base point. The truncated expansion
// G_k = (n-1)! |S^n| y_k(1) / mu_k is split as G = Ls + sum_k h_k y_k with the
// exact singular profile Ls(t) = -log(1 - t), whose coefficients are computed
// by graded quadrature; pointwise values of G and of the regular part
// H = G - log(1/chi^2(d_{g_a})) use this resummed form.
class GreenFunction {
 public:
  GreenFunction(const ManifoldModel& model, double rho, const GreenOptions& options = {});

  const ManifoldModel& model() const { return *model_; }
  const CutoffProfile& cutoff() const { return cutoff_; }
  double rho() const { return cutoff_.rho(); }
  // False on the synthetic backend: H there is only G minus the round-sphere
  // log term.
  bool geometric() const { return model_->is_sphere(); }

  const Vec& coefficients() const { return green_; }
  const Vec& singular_coefficients() const { return singular_; }
  const Vec& regular_coefficients() const { return regular_; }
  double tail_estimate() const { return tail_; }

  // Profiles in t = a.x.
  ZonalBasis::Jet log_term_jet(double t) const;  // log(1/chi^2(d_{g_a}))
  ZonalBasis::Jet green_jet(double t) const;
  ZonalBasis::Jet regular_jet(double t) const;

  double green(const Point& a, const Point& x) const;
  double regular(const Point& a, const Point& x) const;
  double log_term(const Point& a, const Point& x) const;
  // Gradients and Laplacians in the second argument.
  Vec green_gradient(const Point& a, const Point& x) const;
  Vec regular_gradient(const Point& a, const Point& x) const;
  double green_laplacian(const Point& a, const Point& x) const;
  double regular_laplacian(const Point& a, const Point& x) const;

  double regular_diagonal() const;            // H(a,a)
  double regular_laplacian_diagonal() const;  // Delta_x H(a,x) at x = a

  // Spectrally truncated G(a, .)
  Field green_field(const Point& a) const;

 private:
  const ManifoldModel* model_;
  CutoffProfile cutoff_;
  Vec green_;
  Vec singular_;
  Vec regular_;
  double tail_ = 0.0;
};

// Gradient and Laplacian of a zonal profile f(a.x) at x.
Vec zonal_gradient(const Point& a, const Point& x, double d1);
double zonal_laplacian(int n, double t, double d1, double d2);

struct GreenPair {
  Point a;
  Field g;                      // truncated G(a, .)
  std::vector<double> h_grid;   // H(a, .) on the zonal nodes about a
  double h_aa = 0.0;
  std::shared_ptr<const GreenFunction> function;

  double G(const Point& x) const { return function->green(a, x); }
  double H(const Point& x) const { return function->regular(a, x); }
};

GreenPair green_pair(const ManifoldModel& model, const Point& a, double rho, const GreenOptions& options = {});
GreenPair green_pair(std::shared_ptr<const GreenFunction> function, const Point& a);

struct ProbeRow {
  double radius = 0.0;
  double sup_abs_h = 0.0;
  double max_gradient = 0.0;
};

// Samples H = G - log(1/chi^2(d_{g_a})) on geodesic spheres about a. `green`
// defaults to the pair's resummed pointwise G.
std::vector<ProbeRow> regular_part_probe(const GreenPair& pair, const std::vector<double>& radii,
                                         const std::function<double(const Point&)>& green = {});

// Rows (dist, G, logpart, H) along a geodesic from a.
struct GreenProfileRow {
  double dist, green, logpart, regular;
};
std::vector<GreenProfileRow> green_profile(const GreenPair& pair, int samples);

}  // namespace qcurv
