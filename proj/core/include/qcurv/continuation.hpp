#pragma once

#include <cstddef>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "qcurv/io.hpp"
#include "qcurv/parametrize.hpp"

namespace qcurv {

struct SolverOptions {
  double tolerance = 1e-10;  // gradient dual norm < tolerance (1 + ||u||)
  int max_steps = 50;
  int max_damped_failures = 50;
  double alias_threshold = 0.01;
  bool check_alias = true;
};

// Galerkin solution of dJ_t = 0 among fields zonal about `axis`, with zero
// Q-average. `shift` is the constant that turns it into the solution of
// P u + t Q = t kappa K e^{n u}, i.e. int K e^{n (u + shift)} = 1.
struct Solution {
  Point axis;
  Vec coeffs;
  double t = 0.0;
  double shift = 0.0;
  double max_u = 0.0;  // of u + shift
  double J = 0.0;
  double gradient_norm = 0.0;
  double u_norm = 0.0;
  int newton_steps = 0;
  int damped_steps = 0;
  double alias_fraction = 0.0;

  Field field(const ManifoldModel& model) const;
};

// Newton iterations with a backtracking line search on J_t and Levenberg
// damping where the Hessian is indefinite. K and init must be zonal about a
// common axis (constants are axis-free).
Solution solve_at_t(const ManifoldModel& model, const KField& k, double t, const Field& init,
                    const SolverOptions& options = {});

// Dual P+ norm of the discrete Euler-Lagrange residual of a zonal field.
double galerkin_gradient_norm(const ManifoldModel& model, const KField& k, double t, const Field& u);

struct Schedule {
  double t0 = 0.5;
  double t1 = 1.0 - 1e-6;
  int steps = 60;
  bool refine_near_1 = true;  // geometric spacing in 1 - t

  std::vector<double> values() const;
};

struct BranchOptions {
  Schedule schedule;
  double lambda_stop = 1e3;
  // Bubble fitting starts once max u, shifted by the profile offset
  // (1/n) log(kappa max K / (n-1)!), exceeds this value: log(2 * 20).
  double bubble_threshold = 3.6888794541139363;
  // The zonal basis resolves a bubble only up to lambda of about k_max / 12;
  // beyond that the discrete branch saturates. Stop at k_max / resolution_ratio.
  double resolution_ratio = 16.0;
  NeighborhoodSpec neighborhood;
  SolverOptions solver;
  bool track_membership = true;
};

struct BranchRow {
  double t = 0.0;
  double max_u = 0.0;
  double lambda = 0.0;  // NaN before the bubble regime
  double a_theta = 0.0;
  double tau = 0.0;
  double J = 0.0;
  double grad_norm = 0.0;
  double y_lambda_form = 0.0;  // (1 - t) lambda^2 F^{(n-2)/n}
  double y_maxu_form = 0.0;    // (1 - t) e^{2 max u} F^{(n-2)/n}
  int newton_steps = 0;
  bool fitted = false;
  bool boundary_hit = false;  // fit clamped at the neighborhood boundary; excluded from rate fits
  bool in_v = false;
  bool in_v_deep = false;
  std::size_t snapshot = 0;
  nlohmann::json diagnostics;
};

struct BranchRecord {
  Point axis;
  std::vector<BranchRow> rows;
  std::vector<Solution> snapshots;
  std::string stop_reason;

  // t,max_u,lambda,a_theta,tau,J,grad_norm,y_lambda_form,y_maxu_form
  CsvTable csv() const;
};

BranchRecord continue_branch(const ManifoldModel& model, const GreenFunction& greens, const KField& k,
                             const BranchOptions& options = {});

struct RateFit {
  double cbar_hat = 0.0;   // y_lambda / (-l_K) at the last row
  double cmax_hat = 0.0;   // y_maxu / (-l_K) at the last row
  double l_k = 0.0;
  double spread = 0.0;        // (max - min) / mean of y_lambda over the last decade of lambda
  double maxu_spread = 0.0;   // same for y_maxu
  double ratio_spread = 0.0;  // same for y_lambda / y_maxu
  double trend_exponent = 0.0;  // slope of log y_lambda against log lambda there
  double center_distance = 0.0;  // fitted centre to the critical point, last row
  int rows_used = 0;
  bool stabilized = false;
  bool sign_ok = false;
  bool ratio_ok = false;

  nlohmann::json to_json() const;
};

// Profile offset between max u and log(2 lambda) for a bubble at the maximum of K.
double bubble_profile_offset(const ManifoldModel& model, const KField& k);

// Uses fitted rows without boundary hits. Needs at least 10 of them with
// lambda > 20; throws ValidationError otherwise.
RateFit fit_bubbling_rate(const BranchRecord& branch, const CritConfig& crit, double tolerance = 0.1);

}  // namespace qcurv
