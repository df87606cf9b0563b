#include "experiment.hpp"

#include <cmath>

#include "qcurv/errors.hpp"
#include "qcurv/grid.hpp"

namespace qcurv::tools {

namespace {

using json = nlohmann::json;

Point parse_point(const json& j, int n) {
  if (!j.is_array() || int(j.size()) != n + 1)
    throw ConfigError("points must be arrays of " + std::to_string(n + 1) + " numbers");
  Vec v(n + 1);
  for (int i = 0; i <= n; ++i) v(i) = j[i].get<double>();
  if (!(v.norm() > 0.0)) throw ConfigError("zero vector given as a point");
  return v / v.norm();
}

KSpec parse_k(const json& j, int n) {
  KSpec spec;
  spec.polynomial_axis = north_pole(n);
  spec.constant = j.value("constant", 1.0);
  for (const auto& term : j.value("harmonics", json::array())) {
    KSpec::Term t;
    t.axis = term.contains("axis") ? parse_point(term.at("axis"), n) : north_pole(n);
    t.degree = term.at("degree").get<int>();
    t.coefficient = term.at("coefficient").get<double>();
    if (t.degree < 0) throw ConfigError("harmonic degree must be non-negative");
    spec.harmonics.push_back(t);
  }
  if (j.contains("zonal_polynomial")) {
    const json& p = j.at("zonal_polynomial");
    spec.polynomial = p.at("coefficients").get<std::vector<double>>();
    if (p.contains("axis")) spec.polynomial_axis = parse_point(p.at("axis"), n);
  }
  return spec;
}

Schedule parse_schedule(const json& j) {
  Schedule s;
  s.t0 = j.value("t0", s.t0);
  s.t1 = j.value("t1", s.t1);
  s.steps = j.value("steps", s.steps);
  s.refine_near_1 = j.value("refine_near_1", s.refine_near_1);
  return s;
}

}  // namespace

ExperimentConfig parse_config(const json& document) {
  if (!document.is_object()) throw ConfigError("config must be a JSON object");
  // Sections left out of the document keep their default values.
  json j = default_config_json();
  j.merge_patch(document);
  // K is replaced as a whole so that a given polynomial does not inherit the default harmonic.
  if (document.contains("K")) j["K"] = document.at("K");
  ExperimentConfig c;
  try {
    c.model = model_spec_from_json(j.value("model", json::object()));
    const int n = c.model.n;
    if (n < 4 || n % 2 != 0) throw ValidationError("dimension must be even and at least 4");
    c.k = parse_k(j.value("K", json::object()), n);
    if (j.contains("rho") && !j.at("rho").is_null()) c.rho = j.at("rho").get<double>();
    c.neighborhood = neighborhood_from_json(j.value("neighborhood", json::object()));
    c.seed = j.value("seed", std::uint64_t{1});

    const json cont = j.value("continuation", json::object());
    c.branch.schedule = parse_schedule(cont.value("schedule", json::object()));
    c.branch.lambda_stop = cont.value("lambda_stop", c.branch.lambda_stop);
    const json thresholds = cont.value("thresholds", json::object());
    c.branch.bubble_threshold = thresholds.value("bubble", c.branch.bubble_threshold);
    c.branch.resolution_ratio = thresholds.value("resolution_ratio", c.branch.resolution_ratio);
    c.branch.track_membership = cont.value("track_membership", true);
    const json solver = cont.value("solver", json::object());
    c.branch.solver.tolerance = solver.value("tolerance", c.branch.solver.tolerance);
    c.branch.solver.max_steps = solver.value("max_steps", c.branch.solver.max_steps);
    c.branch.neighborhood = c.neighborhood;

    const json crit = j.value("critpts", json::object());
    c.crit_m = crit.value("m", c.model.resonance_m);
    c.crit_random_seeds = crit.value("random_seeds", c.crit_random_seeds);

    const json green = j.value("green", json::object());
    for (const auto& p : green.value("points", json::array())) c.green_points.push_back(parse_point(p, n));
    if (c.green_points.empty()) c.green_points.push_back(north_pole(n));
    c.green_samples = green.value("samples", c.green_samples);

    if (j.contains("degree")) c.degree = degree_input_from_json(j.at("degree"));

    const json grad = j.value("verify_gradients", json::object());
    c.gradients.center = grad.contains("center") ? parse_point(grad.at("center"), n) : north_pole(n);
    c.gradients.lambdas = grad.value("lambdas", c.gradients.lambdas);
    c.gradients.t = grad.value("t", c.gradients.t);
    c.gradients.beta = grad.value("beta", c.gradients.beta);
    if (grad.contains("expansions")) {
      c.gradients.expansions.clear();
      for (const auto& e : grad.at("expansions")) c.gradients.expansions.push_back(expansion_from_string(e.get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  require(c.model.k_max >= 1, "k_max must be positive");
  require(c.crit_m >= 1, "critpts.m must be at least 1");
  require(c.green_samples >= 2, "green.samples must be at least 2");
  for (double lambda : c.gradients.lambdas) require(lambda > 0.0, "verify_gradients.lambdas must be positive");
  c.branch.schedule.values();  // validates the schedule
  return c;
}

json default_config_json() {
  return json::parse(R"({
  "model": {"backend": "sphere", "n": 4, "k_max": 60, "resonance_m": 1, "euler_characteristic": 2,
            "spectrum_overrides": []},
  "K": {"constant": 1.0, "harmonics": [{"axis": [1, 0, 0, 0, 0], "degree": 1, "coefficient": 0.3}]},
  "rho": null,
  "seed": 1,
  "neighborhood": {"m": 1, "epsilon": 0.1, "eta": 0.05, "Lambda": 4, "cbar": 1, "C0": 1000, "C0_tilde": 10,
                   "v_constant": 100, "beta_bound": 1},
  "critpts": {"m": 1, "random_seeds": 16},
  "green": {"points": [[1, 0, 0, 0, 0]], "samples": 200},
  "continuation": {"schedule": {"t0": 0.5, "t1": 0.999999, "steps": 60, "refine_near_1": true},
                   "lambda_stop": 1000, "thresholds": {"bubble": 3.6888794541139363, "resolution_ratio": 16},
                   "solver": {"tolerance": 1e-10, "max_steps": 50}, "track_membership": true},
  "verify_gradients": {"center": [0.5403023058681398, 0.8414709848078965, 0, 0, 0], "lambdas": [20, 40, 80],
                       "t": 1.0, "expansions": ["lambda", "alpha", "a"]}
})");
}

Field build_k_field(const ManifoldModel& model, const KSpec& spec) {
  Field k = model.constant(spec.constant);
  for (const auto& term : spec.harmonics) {
    require(term.degree <= model.k_max(), "harmonic degree in K exceeds k_max");
    k.add(model.harmonic(term.axis, term.degree, term.coefficient), 1.0);
  }
  if (!spec.polynomial.empty()) {
    require(int(spec.polynomial.size()) - 1 <= model.k_max(), "K polynomial degree exceeds k_max");
    const auto& p = spec.polynomial;
    const auto values = zonal_sample(model, [&p](double t) {
      double v = 0.0;
      for (auto it = p.rbegin(); it != p.rend(); ++it) v = v * t + *it;
      return v;
    });
    k.add(model.zonal(spec.polynomial_axis, zonal_analysis(model, values)), 1.0);
  }
  return k;
}

Lab::Lab(const ExperimentConfig& config)
    : model(config.model),
      greens(model, config.rho ? *config.rho : default_rho(model)),
      k(make_kfield(model, build_k_field(model, config.k))) {
  config.neighborhood.validate(greens.rho());
}

}  // namespace qcurv::tools
