#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "qcurv/continuation.hpp"
#include "qcurv/degree.hpp"
#include "qcurv/functional.hpp"
#include "qcurv/model.hpp"
#include "qcurv/parametrize.hpp"
#include "qcurv/reduced.hpp"

namespace qcurv::tools {

// K = constant + sum of harmonic terms, or a polynomial in cos(theta) about an axis.
struct KSpec {
  struct Term {
    Point axis;
    int degree = 0;
    double coefficient = 0.0;
  };
  double constant = 1.0;
  std::vector<Term> harmonics;
  Point polynomial_axis;
  std::vector<double> polynomial;  // coefficients of 1, cos, cos^2, ...
};

struct GradientSweep {
  std::vector<double> lambdas = {20.0, 40.0, 80.0};
  double t = 1.0;
  Point center;
  std::vector<Expansion> expansions = {Expansion::Lambda, Expansion::Alpha, Expansion::Center};
  std::vector<double> beta;
};

struct ExperimentConfig {
  ModelSpec model;
  KSpec k;
  std::optional<double> rho;
  NeighborhoodSpec neighborhood;
  std::uint64_t seed = 1;
  BranchOptions branch;
  int crit_m = 1;
  int crit_random_seeds = 16;
  std::vector<Point> green_points;
  int green_samples = 200;
  std::optional<DegreeInput> degree;
  GradientSweep gradients;
};

// Missing keys take the defaults of default_config_json(). Throws ConfigError for malformed documents and ValidationError for values
// that violate module preconditions.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json default_config_json();

Field build_k_field(const ManifoldModel& model, const KSpec& spec);

// Model, Green function and K built from one config, validated together.
struct Lab {
  ManifoldModel model;
  GreenFunction greens;
  KField k;

  explicit Lab(const ExperimentConfig& config);
};

}  // namespace qcurv::tools
