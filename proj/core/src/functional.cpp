#include "qcurv/functional.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "qcurv/errors.hpp"
#include "qcurv/logging.hpp"
#include "qcurv/parallel.hpp"

namespace qcurv {

namespace {

constexpr int kPartitionPower = 8;
constexpr int kMisalignedDegreeCap = 16;

bool parallel_axes(const Point& a, const Point& b) { return std::abs(std::abs(a.dot(b)) - 1.0) < 1e-12; }

Point mode_axis_of(const BubbleConfig& config) {
  if (config.mode_axis.size() > 0) return config.mode_axis;
  require(!config.centers.empty(), "bubble configuration needs a centre or a mode axis");
  return config.centers.front();
}

double high_degree_share(const Vec& coeffs) {
  const int count = int(coeffs.size());
  if (count < 8) return 0.0;
  const double total = coeffs.squaredNorm();
  if (total == 0.0) return 0.0;
  return coeffs.tail(count - count / 4).squaredNorm() / total;
}

}  // namespace

BubbleConfig single_bubble(const ManifoldModel& model, const Point& a, double lambda, double alpha) {
  model.check_point(a);
  BubbleConfig config;
  config.alpha = {alpha};
  config.centers = {a};
  config.lambda = {lambda};
  return config;
}

void check_window(const ManifoldModel& model, const BubbleConfig& config, const WindowSpec& window) {
  const int m = config.size();
  require(m >= 1, "bubble configuration is empty");
  require(int(config.alpha.size()) == m && int(config.lambda.size()) == m,
          "alpha, centres and lambda must have equal lengths");
  require(int(config.beta.size()) <= int(model.negative_modes().size()),
          "more negative parameters than negative eigen-degrees");
  for (const auto& a : config.centers) model.check_point(a);
  if (m > 1) require(min_separation(config.centers) >= window.min_separation, "bubble centres too close");
  const auto [lo, hi] = std::minmax_element(config.lambda.begin(), config.lambda.end());
  require(*lo >= 1.0 / window.epsilon, "concentration below 1/epsilon");
  require(*hi / *lo <= window.ratio_bound, "concentration ratio outside the window");
}

BubbleSet build_bubble_set(const ManifoldModel& model, double rho, const BubbleConfig& config,
                           const BubbleOptions& options) {
  const int m = config.size();
  require(m >= 1 && int(config.alpha.size()) == m && int(config.lambda.size()) == m,
          "alpha, centres and lambda must have equal lengths");
  require(int(config.beta.size()) <= int(model.negative_modes().size()),
          "more negative parameters than negative eigen-degrees");
  BubbleSet set;
  set.sum = Field(model.n(), model.k_max());
  for (int i = 0; i < m; ++i) {
    set.bubbles.push_back(project_bubble(model, config.centers[i], config.lambda[i], rho, model.resonance(), options));
    set.sum.add(set.bubbles.back().phi(model), config.alpha[i]);
  }
  if (!config.beta.empty()) {
    const Point axis = mode_axis_of(config);
    for (std::size_t r = 0; r < config.beta.size(); ++r) {
      set.modes.push_back(remove_q_average(model, model.negative_mode_field(int(r), axis)));
      set.sum.add(set.modes.back(), config.beta[r]);
    }
  }
  return set;
}

std::vector<Point> default_centers(const ManifoldModel& model, const KField& k, const Field& u) {
  std::vector<Point> centers;
  auto push = [&](const Point& p) {
    for (const auto& c : centers)
      if (parallel_axes(c, p)) return;
    centers.push_back(p);
  };
  for (const auto& atom : u.atoms())
    if (high_degree_share(atom.coeffs) > 1e-8) push(atom.axis);
  if (centers.empty()) {
    if (const Point* axis = u.principal_axis())
      push(*axis);
    else if (const Point* kaxis = k.k.principal_axis())
      push(*kaxis);
    else
      push(north_pole(model.n()));
  }
  return centers;
}

ExpMeasure::ExpMeasure(const ManifoldModel& model, const KField& k, const Field& u, const std::vector<Point>& centers_in,
                       int extra_degree)
    : model_(&model) {
  std::vector<Point> centers;
  for (const auto& c : centers_in.empty() ? default_centers(model, k, u) : centers_in) {
    bool dup = false;
    for (const auto& d : centers) dup = dup || parallel_axes(c, d);
    if (!dup) centers.push_back(c);
  }
  const int n = model.n();
  for (const auto& c : centers) {
    int degree = direction_degree(k.k, c) + std::min(direction_degree(u, c), kMisalignedDegreeCap) + extra_degree;
    if (centers.size() > 1) degree += kPartitionPower;
    grids_.emplace_back(model, c, degree);
  }
  int total = 0;
  for (const auto& g : grids_) total += g.size();
  Vec log_density(total);
  weights_.resize(total);
  int offset = 0;
  for (std::size_t g = 0; g < grids_.size(); ++g) {
    const AxisGrid& grid = grids_[g];
    const Vec kv = grid.evaluate(k.k);
    const Vec uv = grid.evaluate(u);
    const int nd = grid.direction_count();
    for (int q = 0; q < grid.t_count(); ++q) {
      for (int d = 0; d < nd; ++d) {
        const int i = q * nd + d;
        if (!(kv(i) > 0.0)) throw ValidationError("K is not positive on the integration grid");
        double w = grid.weight(q, d);
        if (centers.size() > 1) {
          const Point x = grid.point(q, d);
          double own = 0.0, all = 0.0;
          for (std::size_t c = 0; c < centers.size(); ++c) {
            const double p = std::pow(0.5 * (1.0 + centers[c].dot(x)), kPartitionPower);
            all += p;
            if (c == g) own = p;
          }
          w *= own / all;
        }
        weights_(offset + i) = w;
        log_density(offset + i) = n * uv(i) + std::log(kv(i));
      }
    }
    offset += grid.size();
  }
  shift_ = log_density.maxCoeff();
  if (flagged()) log_warn("exponential integrand shifted by " + std::to_string(shift_) + " (above 700)");
  prob_.resize(total);
  CompensatedSum z;
  for (int i = 0; i < total; ++i) {
    prob_(i) = weights_(i) * std::exp(log_density(i) - shift_);
    z.add(prob_(i));
  }
  if (!(z.value() > 0.0)) throw NumericalError("exponential integral vanished on the grid");
  prob_ /= z.value();
  log_integral_ = shift_ + std::log(z.value());
}

Vec ExpMeasure::values(const Field& h) const {
  Vec out(size());
  int offset = 0;
  for (const auto& grid : grids_) {
    out.segment(offset, grid.size()) = grid.evaluate(h);
    offset += grid.size();
  }
  return out;
}

double ExpMeasure::expectation(const Vec& values) const {
  CompensatedSum s;
  for (int i = 0; i < size(); ++i) s.add(prob_(i) * values(i));
  return s.value();
}

double ExpMeasure::log_expectation_exp(const Vec& v) const {
  CompensatedSum s;
  for (int i = 0; i < size(); ++i) s.add(prob_(i) * std::expm1(v(i)));
  return std::log1p(s.value());
}

double ExpMeasure::log_mgf_remainder(const Vec& v) const {
  // e^v - 1 - v - v^2/2, by its series when |v| is small
  auto cubic_tail = [](double x) {
    if (std::abs(x) >= 0.1) return std::expm1(x) - x - 0.5 * x * x;
    double term = x * x * x / 6.0, sum = 0.0;
    for (int j = 4; j < 20 && term != 0.0; ++j) {
      sum += term;
      term *= x / j;
    }
    return sum;
  };
  CompensatedSum e1, e2, c3;
  for (int i = 0; i < size(); ++i) {
    e1.add(prob_(i) * v(i));
    e2.add(prob_(i) * v(i) * v(i));
    c3.add(prob_(i) * cubic_tail(v(i)));
  }
  const double a = e1.value() + 0.5 * e2.value() + c3.value();
  if (std::abs(a) >= 0.05) return std::log1p(a) - e1.value() - 0.5 * e2.value();
  // log1p(a) - a = -a^2/2 + a^3/3 - ...
  double power = a * a, series = 0.0;
  for (int j = 2; j < 30; ++j) {
    series += (j % 2 == 0 ? -power : power) / j;
    power *= a;
  }
  return series + c3.value();
}

JFunctional::JFunctional(const ManifoldModel& model, const KField& k, double t, const Field& u,
                         const std::vector<Point>& centers, int extra_degree)
    : model_(&model), t_(t), u_(u), measure_(model, k, u, centers, extra_degree) {}

double JFunctional::value() const {
  const ManifoldModel& model = *model_;
  return gjms_inner(model, u_, u_) + 2.0 * t_ * model.q_value() * integral(model, u_) -
         t_ * (2.0 * model.kappa() / model.n()) * measure_.log_integral();
}

double JFunctional::derivative(const Field& h) const {
  const ManifoldModel& model = *model_;
  return 2.0 * gjms_inner(model, u_, h) + 2.0 * t_ * model.q_value() * integral(model, h) -
         2.0 * t_ * model.kappa() * measure_.expectation(h);
}

double eval_J(const ManifoldModel& model, const KField& k, double t, const Field& u) {
  return JFunctional(model, k, t, u).value();
}

double dJ(const ManifoldModel& model, const KField& k, double t, const Field& u, const Field& h) {
  return JFunctional(model, k, t, u).derivative(h);
}

double bubble_mass_constant(int n, double alpha) {
  const double b = n * alpha - 0.5 * n;
  require(b > 0.0, "mass integral diverges for n alpha <= n/2");
  return 0.5 * sphere_area(n - 1) * std::beta(0.5 * n, b);
}

TauGamma tau_gamma(const GreenFunction& greens, const KField& k, double t, const BubbleConfig& config,
                   const BubbleSet& set) {
  const ManifoldModel& model = greens.model();
  const int n = model.n();
  const int m = config.size();
  Field raw(n, model.k_max());
  for (int i = 0; i < m; ++i) raw.add(set.bubbles[i].phi(model), config.alpha[i]);
  std::vector<Field> raw_modes;
  if (!config.beta.empty()) {
    const Point axis = mode_axis_of(config);
    for (std::size_t r = 0; r < config.beta.size(); ++r) {
      raw_modes.push_back(model.negative_mode_field(int(r), axis));
      raw.add(raw_modes.back(), config.beta[r]);
    }
  }
  const ExpMeasure measure(model, k, raw, config.centers);
  TauGamma out;
  out.log_d = measure.log_integral();
  const double h_diag = greens.regular_diagonal();
  const double dh_diag = greens.regular_laplacian_diagonal();
  const double lap_scale = double(n) / (2.0 * (n - 2));
  for (int i = 0; i < m; ++i) {
    const Point& ai = config.centers[i];
    double log_g = n * (config.alpha[i] - 1.0) * h_diag + lap_scale * config.alpha[i] * dh_diag /
                                                              (config.lambda[i] * config.lambda[i]);
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      const Point& aj = config.centers[j];
      log_g += n * (config.alpha[j] - 1.0) * greens.green(aj, ai);
      log_g += lap_scale * config.alpha[j] / (config.lambda[j] * config.lambda[j]) * greens.green_laplacian(ai, aj);
    }
    for (std::size_t r = 0; r < raw_modes.size(); ++r)
      log_g += n * config.beta[r] * evaluate(model, raw_modes[r], ai);
    const double c = bubble_mass_constant(n, config.alpha[i]);
    const double log_f = log_f_partial(greens, k, config.centers, i, ai);
    const double log_gamma =
        std::log(c) + (2.0 * n * config.alpha[i] - n) * std::log(config.lambda[i]) + log_f + log_g;
    out.c.push_back(c);
    out.g.push_back(std::exp(log_g));
    out.f.push_back(std::exp(log_f));
    out.gamma.push_back(std::exp(log_gamma));
    out.tau.push_back(1.0 - t * m * std::exp(log_gamma - out.log_d));
  }
  return out;
}

TauGamma tau_gamma(const GreenFunction& greens, const KField& k, double t, const BubbleConfig& config) {
  return tau_gamma(greens, k, t, config, build_bubble_set(greens.model(), greens.rho(), config));
}

Expansion expansion_from_string(const std::string& s) {
  if (s == "lambda") return Expansion::Lambda;
  if (s == "alpha") return Expansion::Alpha;
  if (s == "a") return Expansion::Center;
  if (s == "beta") return Expansion::Beta;
  if (s == "lambda_sum") return Expansion::LambdaSum;
  throw ValidationError("unknown expansion '" + s + "' (lambda|alpha|a|beta|lambda_sum)");
}

std::string to_string(Expansion e) {
  switch (e) {
    case Expansion::Lambda: return "lambda";
    case Expansion::Alpha: return "alpha";
    case Expansion::Center: return "a";
    case Expansion::Beta: return "beta";
    case Expansion::LambdaSum: return "lambda_sum";
  }
  return "?";
}

void ExpansionReport::apply_constants(const Vec& values) {
  require(values.size() == basis.size(), "constant count differs from the report's basis");
  constants = values;
  residual = lhs - known - basis.dot(constants);
  scaled_residual = residual * std::pow(lambda, order);
}

nlohmann::json ExpansionReport::to_json() const {
  nlohmann::json j;
  j["which"] = to_string(which);
  j["index"] = index;
  j["lambda"] = lambda;
  j["lhs"] = lhs;
  j["known"] = known;
  j["constants"] = nlohmann::json::object();
  j["basis"] = nlohmann::json::object();
  for (std::size_t i = 0; i < constant_names.size(); ++i) {
    j["basis"][constant_names[i]] = basis(i);
    j["constants"][constant_names[i]] = constants(i);
  }
  j["residual"] = residual;
  j["order"] = order;
  j["scaled_residual"] = scaled_residual;
  return j;
}

namespace {

// Delta F / F - (n / (2(n-1))) R at a_j
double curvature_bracket(const GreenFunction& greens, const KField& k, const Configuration& a, int j) {
  const ManifoldModel& model = greens.model();
  const PartialJet jet = partial_jet(greens, k, a, j);
  const double n = model.n();
  return jet.log_laplacian + jet.log_gradient.squaredNorm() - n / (2.0 * (n - 1.0)) * model.scalar_curvature();
}

double lookup(const std::map<std::string, double>& constants, const std::string& name) {
  const auto it = constants.find(name);
  return it == constants.end() ? 0.0 : it->second;
}

}  // namespace

ExpansionReport verify_expansion(const GreenFunction& greens, const KField& k, double t, const BubbleConfig& config,
                                 Expansion which, const ExpansionOptions& options) {
  const ManifoldModel& model = greens.model();
  const int n = model.n();
  const int m = config.size();
  const double fact = factorial(n - 1);
  const double omega = model.omega();
  const BubbleSet set = build_bubble_set(model, greens.rho(), config);
  const JFunctional functional(model, k, t, set.sum, config.centers);
  const int j = options.index;

  ExpansionReport report;
  report.which = which;
  report.index = j;
  if (which == Expansion::Beta) {
    require(j >= 0 && j < int(config.beta.size()), "negative-mode index out of range");
  } else {
    require(j >= 0 && j < m, "bubble index out of range");
  }

  auto lambda_pairing = [&](int i) {
    return functional.derivative(config.lambda[i] * set.bubbles[i].dphi_dlambda(model));
  };
  std::optional<TauGamma> tg;
  auto taus = [&]() -> const TauGamma& {
    if (!tg) tg = tau_gamma(greens, k, t, config, set);
    return *tg;
  };

  switch (which) {
    case Expansion::Lambda: {
      const double lam = config.lambda[j];
      const double l2 = lam * lam;
      const auto& tau = taus().tau;
      report.lambda = lam;
      report.lhs = lambda_pairing(j);
      double known = 2.0 * fact * omega * config.alpha[j] * tau[j];
      double green_part = tau[j] * greens.regular_laplacian_diagonal();
      for (int i = 0; i < m; ++i)
        if (i != j) green_part += tau[i] * greens.green_laplacian(config.centers[i], config.centers[j]);
      known -= 2.0 * fact * omega / ((n - 2.0) * l2) * green_part;
      report.known = known;
      const double bracket = curvature_bracket(greens, k, config.centers, j);
      report.constant_names = {"c2"};
      report.basis = Vec::Constant(1, -fact * omega / (n * l2) * bracket + (n - 1.0) * omega / (n * l2) * tau[j] * bracket);
      report.order = 3;
      break;
    }
    case Expansion::LambdaSum: {
      Field direction(n, model.k_max());
      double c2_basis = 0.0;
      double lam_min = config.lambda[0];
      for (int i = 0; i < m; ++i) {
        direction.add(set.bubbles[i].dphi_dlambda(model), config.lambda[i] / config.alpha[i]);
        const double l2 = config.lambda[i] * config.lambda[i];
        c2_basis -= fact * omega / (n * l2) * curvature_bracket(greens, k, config.centers, i);
        lam_min = std::min(lam_min, config.lambda[i]);
      }
      report.lambda = lam_min;
      report.lhs = functional.derivative(direction);
      report.known = 0.0;
      report.constant_names = {"c2", "cbar"};
      report.basis = Vec(2);
      report.basis << c2_basis, (1.0 - t) * m;
      report.order = 3;
      break;
    }
    case Expansion::Alpha: {
      const double lam = config.lambda[j];
      std::vector<double> pairings(m);
      for (int i = 0; i < m; ++i) pairings[i] = lambda_pairing(i);
      report.lambda = lam;
      report.lhs = functional.derivative(set.bubbles[j].phi(model));
      double known = (2.0 * std::log(lam) + greens.regular_diagonal()) / config.alpha[j] * pairings[j];
      for (int i = 0; i < m; ++i)
        if (i != j) known += greens.green(config.centers[j], config.centers[i]) * pairings[i];
      known += 4.0 * fact * omega * (config.alpha[j] - 1.0) * std::log(lam);
      report.known = known;
      report.constant_names = {"C2"};
      report.basis = Vec::Constant(1, -pairings[j] / config.alpha[j]);
      report.order = 2;
      break;
    }
    case Expansion::Center: {
      const double lam = config.lambda[j];
      const Point& aj = config.centers[j];
      const PartialJet jet = partial_jet(greens, k, config.centers, j);
      Vec v = options.direction.size() > 0 ? project_tangent(aj, options.direction) : jet.log_gradient;
      if (v.norm() < 1e-14) v = tangent_frame(aj).col(0);
      v.normalize();
      report.lambda = lam;
      report.lhs = functional.derivative((1.0 / lam) * set.bubbles[j].dphi_da(model, v));
      report.known = 0.0;
      report.constant_names = {"c2"};
      report.basis = Vec::Constant(1, -4.0 * fact * omega / (n * lam) * jet.log_gradient.dot(v));
      report.order = 2;
      break;
    }
    case Expansion::Beta: {
      double lam_min = config.lambda[0];
      for (double l : config.lambda) lam_min = std::min(lam_min, l);
      report.lambda = lam_min;
      report.lhs = functional.derivative(set.modes[j]);
      report.known = 2.0 * model.negative_modes()[j].mu * config.beta[j];
      report.basis = Vec(0);
      report.order = 2;
      break;
    }
  }
  Vec values(report.basis.size());
  for (int i = 0; i < values.size(); ++i) values(i) = lookup(options.constants, report.constant_names[i]);
  report.apply_constants(values);
  return report;
}

ConstantFit fit_constants(const std::vector<ExpansionReport>& reports, double max_condition) {
  require(!reports.empty(), "no expansion reports to fit");
  const auto& names = reports.front().constant_names;
  require(!names.empty(), "expansion has no unknown constants");
  for (const auto& r : reports) require(r.constant_names == names, "reports carry different constants");
  const int rows = int(reports.size());
  const int cols = int(names.size());
  Mat design(rows, cols);
  Vec rhs(rows);
  for (int i = 0; i < rows; ++i) {
    design.row(i) = reports[i].basis.transpose();
    rhs(i) = reports[i].lhs - reports[i].known;
  }
  // column scaling so the condition number reflects separability, not units
  Vec scale(cols);
  for (int c = 0; c < cols; ++c) {
    scale(c) = design.col(c).norm();
    if (scale(c) == 0.0) throw NumericalError("constant '" + names[c] + "' does not enter the selected pairings");
    design.col(c) /= scale(c);
  }
  Eigen::JacobiSVD<Mat> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  ConstantFit fit;
  fit.names = names;
  fit.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (rows < cols || !(fit.condition <= max_condition))
    throw NumericalError("constant fit is ill-conditioned (condition " + std::to_string(fit.condition) +
                         "); widen the lambda range");
  fit.values = svd.solve(rhs).cwiseQuotient(scale);
  fit.rms_residual = std::sqrt((design * fit.values.cwiseProduct(scale) - rhs).squaredNorm() / rows);
  return fit;
}

AlphaSlope fit_alpha_slope(const GreenFunction& greens, const KField& k, double t, const Point& a,
                           const std::vector<double>& lambdas, const std::vector<double>& offsets) {
  const ManifoldModel& model = greens.model();
  require(lambdas.size() >= 2, "alpha slope needs at least two concentrations");
  require(!offsets.empty(), "alpha slope needs at least one mass offset");
  for (double d : offsets) require(d != 0.0, "mass offsets must be nonzero");
  struct Sample {
    double lambda, offset, y, p;
  };
  std::vector<Sample> samples(lambdas.size() * offsets.size());
  parallel_for(samples.size(), [&](std::size_t s) {
    const double lam = lambdas[s / offsets.size()];
    const double off = offsets[s % offsets.size()];
    const BubbleConfig config = single_bubble(model, a, lam, 1.0 + off);
    const BubbleSet set = build_bubble_set(model, greens.rho(), config);
    const JFunctional functional(model, k, t, set.sum, config.centers);
    const double alpha = config.alpha[0];
    const double p = functional.derivative(lam * set.bubbles[0].dphi_dlambda(model));
    const double lhs = functional.derivative(set.bubbles[0].phi(model));
    const double y = lhs - (2.0 * std::log(lam) + greens.regular_diagonal()) / alpha * p;
    samples[s] = {lam, off, y, p / alpha};
  });
  // y = -C2 p / alpha + slope (alpha - 1) log lambda + linear (alpha - 1) + r(lambda)
  // The alpha-independent remainder r(lambda) gets one column per lambda.
  const int rows = int(samples.size());
  const int nl = int(lambdas.size());
  Mat design = Mat::Zero(rows, 3 + nl);
  Vec rhs(rows);
  for (int i = 0; i < rows; ++i) {
    const auto& s = samples[i];
    design(i, 0) = -s.p;
    design(i, 1) = s.offset * std::log(s.lambda);
    design(i, 2) = s.offset;
    design(i, 3 + i / int(offsets.size())) = 1.0;
    rhs(i) = s.y;
  }
  const Vec coef = design.completeOrthogonalDecomposition().solve(rhs);
  AlphaSlope out;
  out.c2 = coef(0);
  out.slope = coef(1);
  out.linear = coef(2);
  out.predicted = 4.0 * factorial(model.n() - 1) * model.omega();
  out.relative_error = std::abs(out.slope - out.predicted) / out.predicted;
  return out;
}

namespace {

std::vector<Field> constraint_directions(const ManifoldModel& model, const BubbleConfig& config, const BubbleSet& set) {
  std::vector<Field> dirs;
  for (int i = 0; i < config.size(); ++i) {
    const auto& b = set.bubbles[i];
    dirs.push_back(b.phi(model));
    dirs.push_back(b.dphi_dlambda(model));
    const Mat frame = tangent_frame(b.a);
    for (int c = 0; c < frame.cols(); ++c) dirs.push_back(b.dphi_da(model, frame.col(c)));
  }
  for (const auto& v : set.modes) dirs.push_back(v);
  return dirs;
}

double p_plus(const ManifoldModel& model, const Field& u, const Field& v) {
  return inner(model, u, v, InnerWeight::GjmsPositive);
}

}  // namespace

double orthogonality_defect(const ManifoldModel& model, const BubbleConfig& config, const BubbleSet& set,
                            const Field& w) {
  const double wn = std::sqrt(std::max(0.0, p_plus(model, w, w)));
  const double wl2 = std::sqrt(std::max(0.0, l2_inner(model, w, w)));
  double defect = 0.0;
  if (wl2 > 0.0) defect = std::abs(integral(model, w)) / (std::sqrt(model.volume()) * wl2);
  if (wn == 0.0) return defect;
  for (const auto& d : constraint_directions(model, config, set)) {
    const double dn = std::sqrt(p_plus(model, d, d));
    if (dn > 0.0) defect = std::max(defect, std::abs(p_plus(model, d, w)) / (dn * wn));
  }
  return defect;
}

Field project_to_complement(const ManifoldModel& model, const BubbleConfig& config, const BubbleSet& set,
                            const Field& w) {
  const auto dirs = constraint_directions(model, config, set);
  const int count = int(dirs.size());
  Mat gram(count, count);
  Vec rhs(count);
  for (int i = 0; i < count; ++i) {
    rhs(i) = p_plus(model, dirs[i], w);
    for (int j = 0; j <= i; ++j) gram(i, j) = gram(j, i) = p_plus(model, dirs[i], dirs[j]);
  }
  const Vec coef = gram.completeOrthogonalDecomposition().solve(rhs);
  Field out = w;
  for (int i = 0; i < count; ++i) out.add(dirs[i], -coef(i));
  return remove_q_average(model, out);
}

namespace {

// Measure K e^{n(sum alpha phi + sum beta v)} used by the linear and quadratic parts.
ExpMeasure bubble_measure(const ManifoldModel& model, const KField& k, const BubbleConfig& config,
                          const BubbleSet& set) {
  return ExpMeasure(model, k, set.sum, config.centers);
}

QuadraticSplit split_with(const ManifoldModel& model, const ExpMeasure& measure, double t, const Field& w) {
  const int n = model.n();
  const Vec values = measure.values(w);
  QuadraticSplit out;
  out.linear = 2.0 * factorial(n - 1) * model.omega() * t * measure.expectation(values);
  out.quadratic = gjms_inner(model, w, w) - factorial(n) * model.omega() * t *
                                                 measure.expectation(Vec(values.cwiseProduct(values)));
  return out;
}

}  // namespace

QuadraticSplit quadratic_split(const ManifoldModel& model, const KField& k, double t, const BubbleConfig& config,
                               const BubbleSet& set, const Field& w, double tol) {
  const double defect = orthogonality_defect(model, config, set, w);
  if (defect > tol)
    throw ValidationError("remainder violates the orthogonality conditions (defect " + std::to_string(defect) + ")");
  if (w.empty()) return {};
  return split_with(model, bubble_measure(model, k, config, set), t, w);
}

std::vector<TaylorRow> taylor_check(const ManifoldModel& model, const KField& k, double t, const BubbleConfig& config,
                                    const BubbleSet& set, const Field& w, const std::vector<double>& scales) {
  const double defect = orthogonality_defect(model, config, set, w);
  if (defect > 1e-6)
    throw ValidationError("remainder violates the orthogonality conditions (defect " + std::to_string(defect) + ")");
  const int n = model.n();
  const ExpMeasure measure = bubble_measure(model, k, config, set);
  const Field& z = set.sum;
  const Vec wv = measure.values(w);
  const double pz_w = gjms_inner(model, z, w);
  const double int_w = integral(model, w);
  const double mean_w = measure.expectation(wv);
  const double mean_w2 = measure.expectation(Vec(wv.cwiseProduct(wv)));
  const double kappa = model.kappa();
  const double m = model.resonance();
  std::vector<TaylorRow> rows;
  for (double s : scales) {
    // J(z + s w) - J(z) + f_l(s w) - Q_l(s w), expanded so that the first-
    // and second-order pieces cancel algebraically rather than numerically:
    // log E[e^{n s w}] = n s E[w] + (n s)^2 E[w^2] / 2 + remainder.
    const double remainder = measure.log_mgf_remainder(Vec((n * s) * wv));
    TaylorRow row;
    row.scale = s;
    row.residual = 2.0 * s * pz_w + 2.0 * t * model.q_value() * s * int_w - t * (2.0 * kappa / n) * remainder -
                   (1.0 - 1.0 / m) * (2.0 * t * kappa * s * mean_w + t * kappa * n * s * s * mean_w2);
    row.mean_square_term = t * kappa * n * (s * mean_w) * (s * mean_w);
    row.cubic_ratio = (row.residual - row.mean_square_term) / (s * s * s);
    rows.push_back(row);
  }
  return rows;
}

RayleighResult min_rayleigh_quotient(const ManifoldModel& model, const KField& k, double t, const BubbleConfig& config,
                                     const BubbleSet& set, int max_degree) {
  require(config.size() == 1, "the sector decomposition needs a single bubble");
  require(max_degree >= 0, "sector degree must be non-negative");
  const Point& a = config.centers[0];
  const Vec u_coeffs = set.sum.zonal_coefficients(a);
  const Vec k_coeffs = k.k.zonal_coefficients(a);
  const int n = model.n();
  const ZonalBasis& basis = model.basis();
  const Rule1D& rule = model.zonal_rule();
  const int nq = int(rule.nodes.size());
  const int count = model.coefficient_count();

  // zonal density K e^{n u} on the 1-D nodes
  std::vector<double> logd(nq);
  for (int q = 0; q < nq; ++q) {
    const double t_q = rule.nodes[q];
    const double kv = basis.sum(k_coeffs.data(), int(k_coeffs.size()), t_q);
    if (!(kv > 0.0)) throw ValidationError("K is not positive on the zonal nodes");
    logd[q] = n * basis.sum(u_coeffs.data(), int(u_coeffs.size()), t_q) + std::log(kv);
  }
  const double shift = *std::max_element(logd.begin(), logd.end());
  Vec p(nq);
  for (int q = 0; q < nq; ++q) p(q) = rule.weights[q] * std::exp(logd[q] - shift);
  p /= p.sum();

  Mat values(nq, count), derivs(nq, count);
  {
    std::vector<double> y(count), dy(count), d2y(count);
    for (int q = 0; q < nq; ++q) {
      basis.values_and_derivatives(rule.nodes[q], count, y.data(), dy.data(), d2y.data());
      for (int kk = 0; kk < count; ++kk) {
        values(q, kk) = y[kk];
        derivs(q, kk) = dy[kk];
      }
    }
  }
  const Vec& mu = model.gjms_eigenvalues();
  const double coupling = factorial(n) * model.omega() * t;
  const auto& bubble = set.bubbles[0];

  // Sector solve: minimize (c' diag(norm) c - coupling c' M c) / c' diag(norm) c
  // over degrees 1..k_max subject to constraint rows.
  auto sector = [&](const Vec& norm, const Mat& moments, const Mat& constraints) {
    const int dim = count - 1;
    Vec scale = norm.tail(dim).cwiseSqrt();
    Mat m_scaled = moments.bottomRightCorner(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) m_scaled(i, j) /= scale(i) * scale(j);
    Mat c_scaled = constraints.rightCols(dim);
    for (int j = 0; j < dim; ++j) c_scaled.col(j) /= scale(j);
    // orthonormal null-space basis of the constraints
    Eigen::JacobiSVD<Mat> svd(c_scaled, Eigen::ComputeFullV);
    const int rank = int((svd.singularValues().array() > 1e-12 * svd.singularValues()(0)).count());
    const Mat null_basis = svd.matrixV().rightCols(dim - rank);
    const Mat reduced = Mat::Identity(dim - rank, dim - rank) - coupling * null_basis.transpose() * m_scaled * null_basis;
    Eigen::SelfAdjointEigenSolver<Mat> eig(reduced, Eigen::EigenvaluesOnly);
    return eig.eigenvalues()(0);
  };

  RayleighResult out;
  out.max_degree = std::min(max_degree, 1);
  {
    // l = 0: zonal w = sum c_k y_k, ||w||_P^2 = sum mu_k c_k^2
    Vec norm = mu;
    Mat moments = values.transpose() * p.asDiagonal() * values;
    Mat constraints(2, count);
    constraints.row(0) = mu.cwiseProduct(bubble.coeffs).transpose();
    constraints.row(1) = mu.cwiseProduct(bubble.dlambda).transpose();
    out.zonal_minimum = sector(norm, moments, constraints);
  }
  out.minimum = out.zonal_minimum;
  if (max_degree >= 1) {
    // l = 1: w = sum c_k y_k'(t) (e.x); the direction average of (e.x)^2 is (1 - t^2)/n
    Vec norm(count);
    for (int kk = 0; kk < count; ++kk) norm(kk) = mu(kk) * model.laplace_eigenvalue(kk) / n;
    Vec weight(nq);
    for (int q = 0; q < nq; ++q) weight(q) = p(q) * (1.0 - rule.nodes[q] * rule.nodes[q]) / n;
    Mat moments = derivs.transpose() * weight.asDiagonal() * derivs;
    Mat constraints(1, count);
    constraints.row(0) = norm.cwiseProduct(bubble.coeffs).transpose();
    out.dipole_minimum = sector(norm, moments, constraints);
    out.minimum = std::min(out.minimum, out.dipole_minimum);
  }
  if (max_degree > 1) log_warn("Rayleigh quotient: sectors above l = 1 are not assembled");
  return out;
}

}  // namespace qcurv
