#include "qcurv/model.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "qcurv/errors.hpp"
#include "qcurv/field.hpp"

namespace qcurv {

double sphere_gjms_eigenvalue(int n, int k) {
  const double lambda = double(k) * double(k + n - 1);
  double mu = 1.0;
  for (int j = 0; j < n / 2; ++j) mu *= lambda + double(n / 2 + j) * double(n / 2 - j - 1);
  return mu;
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  try {
    const std::string backend = j.value("backend", std::string("sphere"));
    if (backend == "sphere") {
      spec.backend = Backend::Sphere;
    } else if (backend == "synthetic") {
      spec.backend = Backend::Synthetic;
    } else {
      throw ConfigError("unknown backend '" + backend + "'");
    }
    spec.n = j.value("n", 4);
    spec.k_max = j.value("k_max", 60);
    spec.resonance_m = j.value("resonance_m", 1);
    spec.euler_characteristic = j.value("euler_characteristic", 2);
    if (j.contains("spectrum_overrides")) {
      for (const auto& entry : j.at("spectrum_overrides")) {
        if (!entry.is_array() || entry.size() != 2) throw ConfigError("spectrum_overrides entries must be [k, mu]");
        spec.spectrum_overrides.emplace_back(entry[0].get<int>(), entry[1].get<double>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model description: ") + e.what());
  }
  return spec;
}

nlohmann::json model_spec_to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["backend"] = spec.backend == Backend::Sphere ? "sphere" : "synthetic";
  j["n"] = spec.n;
  j["k_max"] = spec.k_max;
  j["resonance_m"] = spec.resonance_m;
  j["euler_characteristic"] = spec.euler_characteristic;
  nlohmann::json overrides = nlohmann::json::array();
  for (const auto& [k, mu] : spec.spectrum_overrides) overrides.push_back({k, mu});
  j["spectrum_overrides"] = overrides;
  return j;
}

ManifoldModel::ManifoldModel(const ModelSpec& spec) : spec_(spec) {
  require(spec.n >= 4 && spec.n % 2 == 0, "dimension must be an even integer >= 4");
  require(spec.k_max >= 1, "k_max must be at least 1");
  require(spec.resonance_m >= 1, "resonance integer must be positive");
  if (spec.backend == Backend::Sphere) {
    require(spec.resonance_m == 1, "the round sphere is resonant with m = 1 only");
    require(spec.spectrum_overrides.empty(), "spectrum overrides need the synthetic backend");
    require(spec.euler_characteristic == 2, "even spheres have Euler characteristic 2");
  }
  const int n = spec.n;
  basis_ = std::make_shared<ZonalBasis>(n, spec.k_max);
  omega_ = sphere_area(n);
  q_value_ = factorial(n - 1) * spec.resonance_m;

  mu_.resize(spec.k_max + 1);
  for (int k = 0; k <= spec.k_max; ++k) mu_(k) = sphere_gjms_eigenvalue(n, k);
  for (const auto& [k, mu] : spec.spectrum_overrides) {
    require(k >= 1 && k <= spec.k_max, "spectrum override degree out of range (degree 0 is the kernel)");
    mu_(k) = mu;
  }
  for (int k = 1; k <= spec.k_max; ++k)
    if (mu_(k) < 0) negative_.push_back({k, mu_(k), basis_->multiplicity(k)});
  std::stable_sort(negative_.begin(), negative_.end(),
                   [](const NegativeMode& a, const NegativeMode& b) { return a.mu < b.mu; });

  const auto rule = gauss_jacobi(2 * spec.k_max + 2, 0.5 * (n - 2));
  zonal_rule_ = std::make_shared<Rule1D>(*rule);
  const double shell = sphere_area(n - 1);
  for (double& w : zonal_rule_->weights) w *= shell;
}

ManifoldModel ManifoldModel::from_json(const nlohmann::json& j) { return ManifoldModel(model_spec_from_json(j)); }

double ManifoldModel::conformal_laplacian_eigenvalue(int k) const {
  return laplace_eigenvalue(k) + 0.25 * (n() - 2) / (n() - 1) * scalar_curvature();
}

int ManifoldModel::mbar() const {
  double total = 0.0;
  for (const auto& mode : negative_) total += mode.multiplicity;
  return int(std::lround(total));
}

void ManifoldModel::check_point(const Point& x) const {
  require(x.size() == n() + 1, "point dimension does not match the model");
  require(std::abs(x.norm() - 1.0) < 1e-10, "point is not on the unit sphere");
}

Field ManifoldModel::constant(double c) const {
  Vec coeffs = Vec::Zero(coefficient_count());
  coeffs(0) = c / basis_->y0();
  return zonal(north_pole(n()), coeffs);
}

Field ManifoldModel::zonal(const Point& axis, const Vec& coeffs) const {
  check_point(axis);
  require(coeffs.size() <= coefficient_count(), "coefficient vector longer than k_max + 1");
  Atom atom;
  atom.axis = axis;
  atom.order = 0;
  atom.coeffs = Vec::Zero(coefficient_count());
  atom.coeffs.head(coeffs.size()) = coeffs;
  Field f(n(), k_max());
  f.add(atom);
  return f;
}

Field ManifoldModel::harmonic(const Point& axis, int k, double amplitude) const {
  require(k >= 0 && k <= k_max(), "harmonic degree out of range");
  Vec coeffs = Vec::Zero(coefficient_count());
  coeffs(k) = amplitude;
  return zonal(axis, coeffs);
}

Field ManifoldModel::q_field() const { return constant(q_value_); }

Field ManifoldModel::negative_mode_field(int r, const Point& axis) const {
  require(r >= 0 && r < int(negative_.size()), "negative mode index out of range");
  return harmonic(axis, negative_[r].degree, 1.0);
}

Field ManifoldModel::random_field(std::mt19937_64& rng, int max_degree, int atoms, bool drop_constant) const {
  require(max_degree <= k_max(), "random field degree exceeds k_max");
  std::normal_distribution<double> g(0.0, 1.0);
  Field f(n(), k_max());
  for (int i = 0; i < atoms; ++i) {
    const Point axis = random_point(n(), rng);
    Vec coeffs = Vec::Zero(coefficient_count());
    for (int k = drop_constant ? 1 : 0; k <= max_degree; ++k) coeffs(k) = g(rng) / (1.0 + k);
    f += zonal(axis, coeffs);
  }
  return f;
}

}  // namespace qcurv
