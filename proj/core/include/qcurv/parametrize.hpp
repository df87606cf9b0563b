#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "qcurv/functional.hpp"

namespace qcurv {

// Neighbourhood of potential critical points at infinity and its deep parts.
struct NeighborhoodSpec {
  int m = 1;
  double epsilon = 0.1;     // lambda_i >= 1/epsilon, |alpha_i - 1| <= epsilon
  double eta = 0.05;        // 0 < 2 eta < rho
  double ratio_bound = 4.0;  // Lambda
  double cbar = 1.0;        // separation d(a_i, a_j) >= 4 cbar eta
  double c0 = 1e3;          // deep-neighbourhood constant
  double c0_tilde = 10.0;   // centre pinning d(a_i, a_i^0) <= c0_tilde / lambda_i
  double v_constant = 100.0;  // explicit constant in the O(sum 1/lambda_i) bound of V
  double beta_bound = 1.0;  // |beta_r| <= R

  double min_separation() const { return 4.0 * cbar * eta; }
  void validate(double rho) const;
};

NeighborhoodSpec neighborhood_from_json(const nlohmann::json& j);
nlohmann::json neighborhood_to_json(const NeighborhoodSpec& spec);

struct FitOptions {
  // Initial centres; located from the local maxima of u when empty.
  Configuration initial_centers;
  // Axis of the zonal negative directions; north pole when empty.
  Point mode_axis;
  int max_iterations = 60;
  double step_tol = 1e-13;
  double orthogonality_tol = 1e-6;
  BubbleOptions bubble;
};

struct FitResult {
  BubbleConfig config;  // with w set to the residual
  double w_norm = 0.0;
  double inverse_lambda_sum = 0.0;  // sum 1/lambda_i
  double w_ratio = 0.0;             // w_norm / inverse_lambda_sum
  double orthogonality = 0.0;
  int iterations = 0;
  bool boundary_hit = false;
  std::vector<std::string> boundary_notes;
};

// Local maxima of u that stand out as bubble peaks: gradient ascent from
// every atom axis and a fixed cloud of directions, merged when closer than
// merge_distance.
struct Peak {
  Point x;
  double value = 0.0;
  double lambda_estimate = 0.0;  // from -Delta u(x) = 2 n lambda^2
};
std::vector<Peak> find_peaks(const ManifoldModel& model, const Field& u, double merge_distance);

// Projected Gauss-Newton for min ||u - mean_Q u - sum alpha_i phi_i - sum beta_r (v_r - mean_Q v_r)||
// in the P+ norm over the box B_{epsilon, eta}. Bubbles come back sorted
// lexicographically by centre.
FitResult fit_bubbles(const ManifoldModel& model, const GreenFunction& greens, const Field& u,
                      const NeighborhoodSpec& spec, const FitOptions& options = {});

// Dual norm of dJ_t(u) against P+, over functions zonal about each centre
// and over the span of the bubble directions; the largest is reported.
double gradient_norm(const ManifoldModel& model, const KField& k, double t, const Field& u, const BubbleConfig& config,
                     const BubbleSet& set);

struct Membership {
  bool in_v = false;
  bool in_v_deep = false;
  std::optional<bool> in_v_deep_at_a0;
  FitResult fit;
  std::vector<double> tau;
  nlohmann::json margins;
  nlohmann::json diagnostics() const;
};

Membership membership(const ManifoldModel& model, const GreenFunction& greens, const KField& k, double t,
                      const Field& u, const NeighborhoodSpec& spec,
                      const std::optional<Configuration>& a0 = std::nullopt, const FitOptions& options = {});
// Same, from an existing fit.
Membership membership(const ManifoldModel& model, const GreenFunction& greens, const KField& k, double t,
                      const Field& u, const NeighborhoodSpec& spec, const FitResult& fit,
                      const std::optional<Configuration>& a0 = std::nullopt);

}  // namespace qcurv
