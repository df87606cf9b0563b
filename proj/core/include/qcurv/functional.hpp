#pragma once

#include <map>
#include <optional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "qcurv/bubbles.hpp"
#include "qcurv/grid.hpp"
#include "qcurv/reduced.hpp"

namespace qcurv {

// sum_i alpha_i phi_{a_i,lambda_i} + sum_r beta_r (v_r - mean_Q v_r) (+ w).
// The negative directions v_r are the zonal representatives, about
// mode_axis (the first centre when left empty), of the negative degrees.
struct BubbleConfig {
  std::vector<double> alpha;
  Configuration centers;
  std::vector<double> lambda;
  std::vector<double> beta;
  Point mode_axis;
  std::optional<Field> w;

  int size() const { return int(centers.size()); }
};

BubbleConfig single_bubble(const ManifoldModel& model, const Point& a, double lambda, double alpha = 1.0);

struct WindowSpec {
  double min_separation = 0.2;  // 4 C eta
  double ratio_bound = 4.0;     // Lambda
  double epsilon = 0.1;         // lambda_i >= 1/epsilon
};
void check_window(const ManifoldModel& model, const BubbleConfig& config, const WindowSpec& window = {});

struct BubbleSet {
  std::vector<ProjectedBubble> bubbles;
  std::vector<Field> modes;  // v_r - mean_Q v_r
  Field sum;                 // without w
};
BubbleSet build_bubble_set(const ManifoldModel& model, double rho, const BubbleConfig& config,
                           const BubbleOptions& options = {});

// Probability measure K e^{n u} dV / int K e^{n u} on product grids about the
// given centres, blended by a smooth partition of unity when there are
// several. Exponentials are taken after subtracting the maximum exponent.
class ExpMeasure {
 public:
  ExpMeasure(const ManifoldModel& model, const KField& k, const Field& u, const std::vector<Point>& centers,
             int extra_degree = 4);

  int size() const { return int(weights_.size()); }
  Vec values(const Field& h) const;
  double log_integral() const { return log_integral_; }
  double shift() const { return shift_; }
  bool flagged() const { return shift_ > 700.0; }
  const Vec& probabilities() const { return prob_; }
  double expectation(const Vec& values) const;
  double expectation(const Field& h) const { return expectation(values(h)); }
  // log E[e^{v}] = log1p(E[expm1(v)])
  double log_expectation_exp(const Vec& v) const;
  // log E[e^v] - E[v] - E[v^2]/2 without cancellation for small v
  double log_mgf_remainder(const Vec& v) const;
  const std::vector<AxisGrid>& grids() const { return grids_; }

 private:
  const ManifoldModel* model_;
  std::vector<AxisGrid> grids_;
  Vec weights_;
  Vec prob_;
  double shift_ = 0.0;
  double log_integral_ = 0.0;
};

// Centres used when none are given: the principal axis of u, then of K.
std::vector<Point> default_centers(const ManifoldModel& model, const KField& k, const Field& u);

// J_t(u) = <P u, u> + 2t int Q u - t (2 kappa / n) log int K e^{n u}
class JFunctional {
 public:
  JFunctional(const ManifoldModel& model, const KField& k, double t, const Field& u,
              const std::vector<Point>& centers = {}, int extra_degree = 4);

  double value() const;
  // 2 <P u, h> + 2t int Q h - 2t kappa E_mu[h]
  double derivative(const Field& h) const;
  const ExpMeasure& measure() const { return measure_; }
  const Field& point() const { return u_; }
  double t() const { return t_; }

 private:
  const ManifoldModel* model_;
  double t_;
  Field u_;
  ExpMeasure measure_;
};

double eval_J(const ManifoldModel& model, const KField& k, double t, const Field& u);
double dJ(const ManifoldModel& model, const KField& k, double t, const Field& u, const Field& h);

// int_{R^n} (1 + |y|^2)^{-n alpha} dy = (|S^{n-1}|/2) B(n/2, n alpha - n/2)
double bubble_mass_constant(int n, double alpha);

struct TauGamma {
  double log_d = 0.0;  // log D
  std::vector<double> tau, gamma, c, g, f;
};
TauGamma tau_gamma(const GreenFunction& greens, const KField& k, double t, const BubbleConfig& config,
                   const BubbleSet& set);
TauGamma tau_gamma(const GreenFunction& greens, const KField& k, double t, const BubbleConfig& config);

enum class Expansion { Lambda, Alpha, Center, Beta, LambdaSum };
Expansion expansion_from_string(const std::string& s);
std::string to_string(Expansion e);

// lhs = pairing; lhs ~ known + basis . constants with a remainder of order
// lambda^-order in the reference concentration.
struct ExpansionReport {
  Expansion which = Expansion::Lambda;
  int index = 0;
  double lambda = 0.0;
  double lhs = 0.0;
  double known = 0.0;
  std::vector<std::string> constant_names;
  Vec basis;
  Vec constants;
  double residual = 0.0;
  int order = 0;
  double scaled_residual = 0.0;

  void apply_constants(const Vec& values);
  nlohmann::json to_json() const;
};

struct ExpansionOptions {
  int index = 0;            // bubble j or negative mode s
  Vec direction;            // tangent direction for the centre pairing (default grad log F^A_j)
  std::map<std::string, double> constants;
};

ExpansionReport verify_expansion(const GreenFunction& greens, const KField& k, double t, const BubbleConfig& config,
                                 Expansion which, const ExpansionOptions& options = {});

struct ConstantFit {
  std::vector<std::string> names;
  Vec values;
  double condition = 0.0;
  double rms_residual = 0.0;
};
// Least squares for constants shared by all reports; NumericalError when
// the design is too ill-conditioned to separate them.
ConstantFit fit_constants(const std::vector<ExpansionReport>& reports, double max_condition = 1e8);

// Slope of the mass pairing in (alpha - 1) log lambda over several lambda
// and alpha offsets, after removing the known lambda-pairing terms; the
// remainder's (alpha - 1) part is fitted alongside.
struct AlphaSlope {
  double slope = 0.0;
  double c2 = 0.0;
  double linear = 0.0;
  double predicted = 0.0;  // 4 (n-1)! |S^n|
  double relative_error = 0.0;
};
AlphaSlope fit_alpha_slope(const GreenFunction& greens, const KField& k, double t, const Point& a,
                           const std::vector<double>& lambdas, const std::vector<double>& offsets);

struct QuadraticSplit {
  double linear = 0.0;     // f_l(w)
  double quadratic = 0.0;  // Q_l(w)
};
// Largest normalized pairing of w with the constraint directions: the
// Q-integral, and P+ pairings with phi_i, d phi_i / d lambda_i, d phi_i / d a_i
// and the negative modes.
double orthogonality_defect(const ManifoldModel& model, const BubbleConfig& config, const BubbleSet& set,
                            const Field& w);
// Projection of w onto the constraint complement in the P+ inner product.
Field project_to_complement(const ManifoldModel& model, const BubbleConfig& config, const BubbleSet& set,
                            const Field& w);
QuadraticSplit quadratic_split(const ManifoldModel& model, const KField& k, double t, const BubbleConfig& config,
                               const BubbleSet& set, const Field& w, double tol = 1e-6);

struct TaylorRow {
  double scale = 0.0;
  double residual = 0.0;  // J(z + s w) - J(z) + f_l(s w) - Q_l(s w)
  double mean_square_term = 0.0;  // t kappa n (E_mu[s w])^2
  double cubic_ratio = 0.0;
};
std::vector<TaylorRow> taylor_check(const ManifoldModel& model, const KField& k, double t, const BubbleConfig& config,
                                    const BubbleSet& set, const Field& w, const std::vector<double>& scales);

// Minimum of Q_l(w) / ||w||_P^2 over the constrained zonal (l = 0) and
// dipole (l = 1) sectors about a single bubble, for K zonal about its centre.
struct RayleighResult {
  double minimum = 0.0;
  double zonal_minimum = 0.0;
  double dipole_minimum = 0.0;
  int max_degree = 0;
};
RayleighResult min_rayleigh_quotient(const ManifoldModel& model, const KField& k, double t, const BubbleConfig& config,
                                     const BubbleSet& set, int max_degree = 0);

}  // namespace qcurv
