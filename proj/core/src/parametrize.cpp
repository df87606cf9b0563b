#include "qcurv/parametrize.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qcurv/errors.hpp"
#include "qcurv/logging.hpp"

namespace qcurv {

void NeighborhoodSpec::validate(double rho) const {
  require(m >= 1, "neighbourhood needs m >= 1");
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
  require(eta > 0.0 && 2.0 * eta < rho, "eta must satisfy 0 < 2 eta < rho");
  require(ratio_bound >= 2.0, "Lambda must be at least 2");
  require(cbar > 0.0 && c0 > 0.0 && c0_tilde > 0.0 && v_constant > 0.0 && beta_bound > 0.0,
          "neighbourhood constants must be positive");
}

NeighborhoodSpec neighborhood_from_json(const nlohmann::json& j) {
  NeighborhoodSpec s;
  s.m = j.value("m", s.m);
  s.epsilon = j.value("epsilon", s.epsilon);
  s.eta = j.value("eta", s.eta);
  s.ratio_bound = j.value("Lambda", s.ratio_bound);
  s.cbar = j.value("cbar", s.cbar);
  s.c0 = j.value("C0", s.c0);
  s.c0_tilde = j.value("C0_tilde", s.c0_tilde);
  s.v_constant = j.value("v_constant", s.v_constant);
  s.beta_bound = j.value("beta_bound", s.beta_bound);
  return s;
}

nlohmann::json neighborhood_to_json(const NeighborhoodSpec& s) {
  return {{"m", s.m},         {"epsilon", s.epsilon}, {"eta", s.eta},
          {"Lambda", s.ratio_bound}, {"cbar", s.cbar}, {"C0", s.c0},
          {"C0_tilde", s.c0_tilde},  {"v_constant", s.v_constant}, {"beta_bound", s.beta_bound}};
}

namespace {

double plus_inner(const ManifoldModel& model, const Field& u, const Field& v) {
  return inner(model, u, v, InnerWeight::GjmsPositive);
}

double plus_norm(const ManifoldModel& model, const Field& u) {
  return std::sqrt(std::max(0.0, plus_inner(model, u, u)));
}

Point ascend(const ManifoldModel& model, const Field& u, Point x) {
  double value = evaluate(model, u, x);
  double step = 0.25;
  for (int it = 0; it < 2000 && step > 1e-10; ++it) {
    const Vec g = gradient(model, u, x);
    const double gn = g.norm();
    if (gn < 1e-12) break;
    const Point trial = exp_map(x, (step / gn) * g);
    const double tv = evaluate(model, u, trial);
    if (tv > value) {
      x = trial;
      value = tv;
      step = std::min(0.5, 1.5 * step);
    } else {
      step *= 0.5;
    }
  }
  return x;
}

double lambda_from_curvature(const ManifoldModel& model, const Field& u, const Point& x) {
  const double lap = laplacian_at(model, u, x);
  return std::sqrt(std::max(0.0, -lap) / (2.0 * model.n()));
}

// Index order that sorts the centres lexicographically.
std::vector<int> canonical_order(const Configuration& centers) {
  std::vector<int> idx(centers.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const Point& p = centers[a];
    const Point& q = centers[b];
    for (int c = 0; c < p.size(); ++c)
      if (std::abs(p(c) - q(c)) > 1e-12) return p(c) < q(c);
    return false;
  });
  return idx;
}

struct Parameters {
  std::vector<double> alpha, lambda, beta;
  Configuration centers;
};

Field model_field(const ManifoldModel& model, const std::vector<ProjectedBubble>& bubbles, const Parameters& p,
                  const std::vector<Field>& modes) {
  Field s(model.n(), model.k_max());
  for (std::size_t i = 0; i < bubbles.size(); ++i) s.add(bubbles[i].phi(model), p.alpha[i]);
  for (std::size_t r = 0; r < modes.size(); ++r) s.add(modes[r], p.beta[r]);
  return s;
}

}  // namespace

std::vector<Peak> find_peaks(const ManifoldModel& model, const Field& u, double merge_distance) {
  std::vector<Point> seeds;
  for (const auto& atom : u.atoms()) {
    seeds.push_back(atom.axis);
    seeds.push_back(-atom.axis);
  }
  const DirectionRule cloud = sphere_rule(model.n(), 4);
  for (int c = 0; c < cloud.directions.cols(); ++c) seeds.push_back(cloud.directions.col(c));
  std::vector<Peak> peaks;
  for (const auto& seed : seeds) {
    const Point x = ascend(model, u, seed);
    const double v = evaluate(model, u, x);
    bool merged = false;
    for (auto& p : peaks) {
      if (geodesic_distance(p.x, x) < merge_distance) {
        if (v > p.value) {
          p.x = x;
          p.value = v;
        }
        merged = true;
        break;
      }
    }
    if (!merged) peaks.push_back({x, v, 0.0});
  }
  for (auto& p : peaks) p.lambda_estimate = lambda_from_curvature(model, u, p.x);
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.value > b.value; });
  return peaks;
}

FitResult fit_bubbles(const ManifoldModel& model, const GreenFunction& greens, const Field& u,
                      const NeighborhoodSpec& spec, const FitOptions& options) {
  spec.validate(greens.rho());
  check_field(model, u);
  const int m = spec.m;
  const int n = model.n();
  const double rho = greens.rho();
  const Field target = remove_q_average(model, u);

  Parameters p;
  if (!options.initial_centers.empty()) {
    require(int(options.initial_centers.size()) == m, "initial centres must number m");
    p.centers = options.initial_centers;
    for (const auto& c : p.centers) {
      model.check_point(c);
      p.lambda.push_back(std::max(1.0 / spec.epsilon, lambda_from_curvature(model, target, c)));
    }
  } else {
    const auto peaks = find_peaks(model, target, 0.5 * spec.min_separation());
    require(!peaks.empty(), "no local maximum found");
    const double floor_value = peaks.front().value - 2.0 * std::log(spec.ratio_bound) - 1.0;
    for (const auto& pk : peaks) {
      if (pk.value < floor_value || pk.lambda_estimate < 0.5 / spec.epsilon) continue;
      p.centers.push_back(pk.x);
      p.lambda.push_back(std::max(1.0 / spec.epsilon, pk.lambda_estimate));
    }
    if (int(p.centers.size()) != m)
      throw ValidationError("initializer found " + std::to_string(p.centers.size()) + " separated peaks, expected " +
                            std::to_string(m));
  }
  if (m > 1) require(min_separation(p.centers) >= spec.min_separation(), "initial centres are too close");
  p.alpha.assign(m, 1.0);

  const Point mode_axis = options.mode_axis.size() > 0 ? options.mode_axis : north_pole(n);
  std::vector<Field> modes;
  for (std::size_t r = 0; r < model.negative_modes().size(); ++r)
    modes.push_back(remove_q_average(model, model.negative_mode_field(int(r), mode_axis)));
  p.beta.assign(modes.size(), 0.0);
  const int nbeta = int(modes.size());
  const int per = n + 2;
  const int count = m * per + nbeta;

  auto bubbles_for = [&](const Parameters& q) {
    std::vector<ProjectedBubble> b;
    for (int i = 0; i < m; ++i)
      b.push_back(project_bubble(model, q.centers[i], q.lambda[i], rho, model.resonance(), options.bubble));
    return b;
  };
  auto residual_of = [&](const Parameters& q, const std::vector<ProjectedBubble>& b) {
    return target - model_field(model, b, q, modes);
  };

  std::vector<ProjectedBubble> bubbles = bubbles_for(p);
  Field residual = residual_of(p, bubbles);
  double objective = plus_inner(model, residual, residual);
  std::vector<bool> alpha_clamped(m, false), lambda_clamped(m, false), beta_clamped(nbeta, false);
  bool separation_blocked = false;

  FitResult out;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    // Columns of the model Jacobian in (alpha, log lambda, tangent offsets, beta).
    std::vector<Field> cols;
    std::vector<Mat> frames;
    for (int i = 0; i < m; ++i) {
      cols.push_back(bubbles[i].phi(model));
      cols.push_back(p.alpha[i] * p.lambda[i] * bubbles[i].dphi_dlambda(model));
      frames.push_back(tangent_frame(p.centers[i]));
      for (int c = 0; c < n; ++c) cols.push_back(p.alpha[i] * bubbles[i].dphi_da(model, frames[i].col(c)));
    }
    for (const auto& v : modes) cols.push_back(v);
    Mat gram(count, count);
    Vec rhs(count);
    for (int a = 0; a < count; ++a) {
      rhs(a) = plus_inner(model, cols[a], residual);
      for (int b = 0; b <= a; ++b) gram(a, b) = gram(b, a) = plus_inner(model, cols[a], cols[b]);
    }
    Vec scale = gram.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    const Mat scaled = scale.asDiagonal() * gram * scale.asDiagonal();
    const Vec delta = scale.cwiseProduct(scaled.ldlt().solve(scale.cwiseProduct(rhs)));

    double size = 0.0;
    for (int i = 0; i < m; ++i) {
      size = std::max(size, std::abs(delta(i * per)));
      size = std::max(size, std::abs(delta(i * per + 1)));
      size = std::max(size, p.lambda[i] * delta.segment(i * per + 2, n).norm());
    }
    for (int r = 0; r < nbeta; ++r) size = std::max(size, std::abs(delta(m * per + r)));

    bool accepted = false;
    for (double s = 1.0; s > 1e-6; s *= 0.5) {
      Parameters q = p;
      std::vector<bool> ac(m, false), lc(m, false), bc(nbeta, false);
      for (int i = 0; i < m; ++i) {
        double alpha = p.alpha[i] + s * delta(i * per);
        if (std::abs(alpha - 1.0) > spec.epsilon) {
          alpha = 1.0 + std::copysign(spec.epsilon, alpha - 1.0);
          ac[i] = true;
        }
        q.alpha[i] = alpha;
        double lambda = p.lambda[i] * std::exp(s * delta(i * per + 1));
        if (lambda < 1.0 / spec.epsilon) {
          lambda = 1.0 / spec.epsilon;
          lc[i] = true;
        }
        q.lambda[i] = lambda;
        const Vec move = frames[i] * (s * delta.segment(i * per + 2, n));
        if (move.norm() > 0.0) q.centers[i] = exp_map(p.centers[i], move);
      }
      bool blocked = false;
      if (m > 1 && min_separation(q.centers) < spec.min_separation()) {
        q.centers = p.centers;
        blocked = true;
      }
      for (int r = 0; r < nbeta; ++r) {
        double beta = p.beta[r] + s * delta(m * per + r);
        if (std::abs(beta) > spec.beta_bound) {
          beta = std::copysign(spec.beta_bound, beta);
          bc[r] = true;
        }
        q.beta[r] = beta;
      }
      auto trial_bubbles = bubbles_for(q);
      Field trial = residual_of(q, trial_bubbles);
      const double trial_objective = plus_inner(model, trial, trial);
      // Near convergence the objective sits at its rounding floor.
      const bool tiny = size < 1e-7;
      if (trial_objective < objective || tiny) {
        p = std::move(q);
        bubbles = std::move(trial_bubbles);
        residual = std::move(trial);
        objective = trial_objective;
        alpha_clamped = ac;
        lambda_clamped = lc;
        beta_clamped = bc;
        separation_blocked = blocked;
        accepted = true;
        break;
      }
    }
    if (!accepted || size < options.step_tol) break;
  }
  out.iterations = it + 1;

  // Canonical bubble order so the result is independent of the peak order.
  const auto order = canonical_order(p.centers);
  BubbleConfig& config = out.config;
  for (int idx : order) {
    config.alpha.push_back(p.alpha[idx]);
    config.centers.push_back(p.centers[idx]);
    config.lambda.push_back(p.lambda[idx]);
  }
  config.beta = p.beta;
  config.mode_axis = mode_axis;
  config.w = residual;

  for (int i = 0; i < m; ++i) {
    if (alpha_clamped[i]) out.boundary_notes.push_back("alpha at |alpha - 1| = epsilon");
    if (lambda_clamped[i]) out.boundary_notes.push_back("lambda at 1/epsilon");
  }
  for (int r = 0; r < nbeta; ++r)
    if (beta_clamped[r]) out.boundary_notes.push_back("beta at the bound R");
  if (separation_blocked) out.boundary_notes.push_back("centres at the separation bound");
  const auto [lo, hi] = std::minmax_element(config.lambda.begin(), config.lambda.end());
  if (*hi / *lo > spec.ratio_bound) out.boundary_notes.push_back("concentration ratio beyond Lambda");
  out.boundary_hit = !out.boundary_notes.empty();
  for (const auto& note : out.boundary_notes) log_warn("fit_bubbles: " + note);

  out.w_norm = plus_norm(model, residual);
  for (double l : config.lambda) out.inverse_lambda_sum += 1.0 / l;
  out.w_ratio = out.w_norm / out.inverse_lambda_sum;

  // First-order optimality; pairings of nearly cancelling atoms carry
  // rounding of order 1e-16 ||u||, hence the floor on ||w||.
  const BubbleSet set = build_bubble_set(model, rho, config, options.bubble);
  const double floor_norm = std::max(out.w_norm, 1e-8 * plus_norm(model, target));
  double defect = 0.0;
  if (out.w_norm > 0.0) {
    std::vector<Field> dirs;
    for (int i = 0; i < m; ++i) {
      const auto& b = set.bubbles[i];
      dirs.push_back(b.phi(model));
      dirs.push_back(b.dphi_dlambda(model));
      const Mat frame = tangent_frame(b.a);
      for (int c = 0; c < n; ++c) dirs.push_back(b.dphi_da(model, frame.col(c)));
    }
    for (const auto& v : set.modes) dirs.push_back(v);
    for (const auto& d : dirs) {
      const double dn = plus_norm(model, d);
      if (dn > 0.0) defect = std::max(defect, std::abs(plus_inner(model, d, residual)) / (dn * floor_norm));
    }
    const double l2 = std::sqrt(std::max(0.0, l2_inner(model, residual, residual)));
    if (l2 > 0.0) defect = std::max(defect, std::abs(integral(model, residual)) / (std::sqrt(model.volume()) * l2));
  }
  out.orthogonality = defect;
  if (defect > options.orthogonality_tol && !out.boundary_hit)
    throw NumericalError("bubble fit missed the orthogonality conditions (defect " + std::to_string(defect) + ")");
  return out;
}

namespace {

// <u, y_k(a.)>_{L2} for all degrees, by the addition theorem per atom.
Vec zonal_projection(const ManifoldModel& model, const Field& u, const Point& a) {
  const int count = model.coefficient_count();
  const ZonalBasis& basis = model.basis();
  Vec out = Vec::Zero(count);
  std::vector<double> y(count), dy(count), d2y(count);
  for (const auto& atom : u.atoms()) {
    const double t = clamp_cosine(atom.axis.dot(a));
    basis.values_and_derivatives(t, count, y.data(), dy.data(), d2y.data());
    const double slope = atom.order == 1 ? atom.direction.dot(a) : 0.0;
    for (int k = 0; k < count; ++k) {
      const double kernel = atom.order == 0 ? y[k] : dy[k] * slope;
      out(k) += atom.coeffs(k) * kernel / basis.at_one(k);
    }
  }
  return out;
}

}  // namespace

double gradient_norm(const ManifoldModel& model, const KField& k, double t, const Field& u, const BubbleConfig& config,
                     const BubbleSet& set) {
  const JFunctional functional(model, k, t, u, config.centers);
  const ExpMeasure& measure = functional.measure();
  const int count = model.coefficient_count();
  const ZonalBasis& basis = model.basis();
  const Vec& mu = model.gjms_eigenvalues();
  const Vec& prob = measure.probabilities();
  double best = 0.0;
  std::vector<double> y(count);
  for (const auto& a : config.centers) {
    Vec ey = Vec::Zero(count);
    int offset = 0;
    for (const auto& grid : measure.grids()) {
      for (int q = 0; q < grid.t_count(); ++q) {
        for (int d = 0; d < grid.direction_count(); ++d) {
          const int i = offset + q * grid.direction_count() + d;
          basis.values(clamp_cosine(a.dot(grid.point(q, d))), count, y.data());
          for (int kk = 0; kk < count; ++kk) ey(kk) += prob(i) * y[kk];
        }
      }
      offset += grid.size();
    }
    const Vec proj = zonal_projection(model, u, a);
    double sq = 0.0;
    for (int kk = 1; kk < count; ++kk) {
      const double dj = 2.0 * mu(kk) * proj(kk) - 2.0 * t * model.kappa() * ey(kk);
      sq += dj * dj / std::abs(mu(kk));
    }
    best = std::max(best, std::sqrt(sq));
  }
  std::vector<Field> dirs;
  for (std::size_t i = 0; i < set.bubbles.size(); ++i) {
    const auto& b = set.bubbles[i];
    dirs.push_back(b.phi(model));
    dirs.push_back(b.dphi_dlambda(model));
    const Mat frame = tangent_frame(b.a);
    for (int c = 0; c < frame.cols(); ++c) dirs.push_back(b.dphi_da(model, frame.col(c)));
  }
  for (const auto& v : set.modes) dirs.push_back(v);
  const int nd = int(dirs.size());
  Mat gram(nd, nd);
  Vec pair(nd);
  for (int a = 0; a < nd; ++a) {
    pair(a) = functional.derivative(dirs[a]);
    for (int b = 0; b <= a; ++b) gram(a, b) = gram(b, a) = plus_inner(model, dirs[a], dirs[b]);
  }
  const Vec sol = gram.completeOrthogonalDecomposition().solve(pair);
  best = std::max(best, std::sqrt(std::max(0.0, pair.dot(sol))));
  return best;
}

nlohmann::json Membership::diagnostics() const {
  nlohmann::json centers = nlohmann::json::array();
  for (const auto& a : fit.config.centers) centers.push_back(std::vector<double>(a.data(), a.data() + a.size()));
  return {{"alpha", fit.config.alpha}, {"a", centers},     {"lambda", fit.config.lambda},
          {"beta", fit.config.beta},   {"w_norm", fit.w_norm}, {"tau", tau},
          {"margins", margins},        {"in_V", in_v},     {"in_V_deep", in_v_deep},
          {"in_V_deep_at_A0", in_v_deep_at_a0 ? nlohmann::json(*in_v_deep_at_a0) : nlohmann::json(nullptr)}};
}

Membership membership(const ManifoldModel& model, const GreenFunction& greens, const KField& k, double t,
                      const Field& u, const NeighborhoodSpec& spec, const std::optional<Configuration>& a0,
                      const FitOptions& options) {
  return membership(model, greens, k, t, u, spec, fit_bubbles(model, greens, u, spec, options), a0);
}

Membership membership(const ManifoldModel& model, const GreenFunction& greens, const KField& k, double t,
                      const Field& u, const NeighborhoodSpec& spec, const FitResult& fit,
                      const std::optional<Configuration>& a0) {
  Membership out;
  out.fit = fit;
  const BubbleConfig& config = fit.config;
  const int m = config.size();
  auto margin = [](double lhs, double rhs) {
    return nlohmann::json{{"lhs", lhs}, {"rhs", rhs}, {"ok", lhs <= rhs}};
  };

  const BubbleSet set = build_bubble_set(model, greens.rho(), config);
  double inv = 0.0, inv2 = 0.0;
  for (double l : config.lambda) {
    inv += 1.0 / l;
    inv2 += 1.0 / (l * l);
  }

  // V: unit-mass bubbles, gradient, concentration window, separation.
  Field plain = remove_q_average(model, u);
  for (const auto& b : set.bubbles) plain.add(b.phi(model), -1.0);
  const double distance = plus_norm(model, plain);
  const double grad = gradient_norm(model, k, t, u, config, set);
  nlohmann::json margins;
  margins["V_distance"] = margin(distance + grad, spec.v_constant * inv);
  margins["V_distance"]["distance"] = distance;
  margins["V_distance"]["gradient"] = grad;
  const auto [lo, hi] = std::minmax_element(config.lambda.begin(), config.lambda.end());
  margins["V_lambda_floor"] = margin(1.0 / spec.epsilon, *lo);
  margins["V_lambda_ratio"] = margin(*hi / *lo, 0.5 * spec.ratio_bound);
  const double sep = m > 1 ? min_separation(config.centers) : std::numeric_limits<double>::infinity();
  margins["V_separation"] = margin(spec.min_separation(), m > 1 ? sep : 1e300);
  out.in_v = margins["V_distance"]["ok"] && margins["V_lambda_floor"]["ok"] && margins["V_lambda_ratio"]["ok"] &&
             margins["V_separation"]["ok"];

  // Deep part.
  const TauGamma tg = tau_gamma(greens, k, t, config, set);
  out.tau = tg.tau;
  double grad_term = 0.0, alpha_term = 0.0, tau_term = 0.0;
  for (int i = 0; i < m; ++i) {
    const PartialJet jet = partial_jet(greens, k, config.centers, i);
    grad_term += std::exp(jet.log_value) * jet.log_gradient.norm() / config.lambda[i];
    alpha_term += std::abs(config.alpha[i] - 1.0);
    tau_term += std::abs(tg.tau[i]);
  }
  margins["V_deep"] = margin(grad_term + alpha_term + tau_term + inv2, spec.c0 * inv2);
  margins["V_deep"]["gradient_term"] = grad_term;
  margins["V_deep"]["alpha_term"] = alpha_term;
  margins["V_deep"]["tau_term"] = tau_term;
  margins["V_deep"]["lambda_term"] = inv2;
  out.in_v_deep = out.in_v && margins["V_deep"]["ok"].get<bool>();

  if (a0) {
    require(int(a0->size()) == m, "reference configuration must have m points");
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double worst = 0.0;
      for (int i = 0; i < m; ++i)
        worst = std::max(worst, geodesic_distance(config.centers[i], (*a0)[perm[i]]) * config.lambda[i]);
      best = std::min(best, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));
    margins["V_deep_at_A0"] = margin(best, spec.c0_tilde);
    out.in_v_deep_at_a0 = out.in_v_deep && best <= spec.c0_tilde;
  }
  out.margins = margins;
  return out;
}

}  // namespace qcurv
