#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include "experiment.hpp"
#include "qcurv/errors.hpp"
#include "qcurv/io.hpp"
#include "qcurv/logging.hpp"
#include "qcurv/parallel.hpp"
#include "suites.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qcurv;
using namespace qcurv::tools;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitUsage = 64;
constexpr int kExitConfig = 65;

struct Invocation {
  std::string config_path;
  std::string out_dir;
  int threads = 1;
  std::optional<std::uint64_t> seed;
};

json load_document(const Invocation& inv) {
  return inv.config_path.empty() ? default_config_json() : read_json_file(inv.config_path);
}

ExperimentConfig load_config(const Invocation& inv) {
  ExperimentConfig config = parse_config(load_document(inv));
  if (inv.seed) config.seed = *inv.seed;
  return config;
}

// Writes the artifact to --out when given; the primary artifact also goes to stdout.
void emit(const Invocation& inv, const std::string& file, const std::string& text, bool primary) {
  if (!inv.out_dir.empty()) {
    fs::create_directories(inv.out_dir);
    write_text_file(fs::path(inv.out_dir) / file, text);
  }
  if (primary) std::cout << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json point_json(const Point& p) { return std::vector<double>(p.data(), p.data() + p.size()); }

void run_green(const Invocation& inv) {
  const ExperimentConfig config = load_config(inv);
  const ManifoldModel model(config.model);
  auto function = std::make_shared<GreenFunction>(model, config.rho ? *config.rho : default_rho(model));
  for (std::size_t i = 0; i < config.green_points.size(); ++i) {
    const GreenPair pair = green_pair(function, config.green_points[i]);
    CsvTable table({"dist", "G", "logpart", "H"});
    for (const auto& row : green_profile(pair, config.green_samples))
      table.add_row({format_double(row.dist), format_double(row.green), format_double(row.logpart),
                     format_double(row.regular)});
    emit(inv, "green_" + std::to_string(i) + ".csv", table.str(), i == 0);
  }
}

CritSearchResult crit_search(const ExperimentConfig& config, const Lab& lab) {
  ReducedOptions options;
  options.random_seeds = config.crit_random_seeds;
  options.seed = config.seed;
  options.min_separation = config.neighborhood.min_separation();
  return find_critical_points(lab.greens, lab.k, config.crit_m, options);
}

void run_critpts(const Invocation& inv) {
  const ExperimentConfig config = load_config(inv);
  const Lab lab(config);
  const CritSearchResult result = crit_search(config, lab);
  json failures = json::array();
  for (const auto& f : result.failures) failures.push_back({{"seed_index", f.seed_index}, {"reason", f.reason}});
  const NdPredicates nd = nd_predicates(result.configs);
  emit(inv, "critpts.json",
       dump({{"m", config.crit_m},
             {"seeds_tried", result.seeds_tried},
             {"critical_points", result.configs.size()},
             {"nd", {{"nd0", nd.nd0}, {"nd_minus", nd.nd_minus}, {"nd_plus", nd.nd_plus}, {"nd", nd.nd}}},
             {"failures", failures}}),
       false);
  emit(inv, "critpts.csv", crit_table(result.configs).str(), true);
}

void run_degree(const Invocation& inv) {
  const json doc = load_document(inv);
  // A bare degree document or a full config carrying a "degree" block.
  const json& block = doc.is_object() && doc.contains("degree") ? doc.at("degree") : doc;
  const DegreeInput input = degree_input_from_json(block);
  const DegreeReport report = leray_schauder_degree(input);
  json out = report.to_json();
  out["input"] = degree_input_to_json(input);
  emit(inv, "degree.json", dump(out), true);
}

json branch_json(const BranchRecord& branch, const BranchOptions& options) {
  json rows = json::array();
  for (const auto& row : branch.rows)
    rows.push_back({{"t", row.t},
                    {"fitted", row.fitted},
                    {"boundary_hit", row.boundary_hit},
                    {"in_v", row.in_v},
                    {"in_v_deep", row.in_v_deep},
                    {"newton_steps", row.newton_steps},
                    {"diagnostics", row.diagnostics}});
  return {{"axis", point_json(branch.axis)},
          {"stop_reason", branch.stop_reason},
          {"lambda_stop", options.lambda_stop},
          {"bubble_threshold", options.bubble_threshold},
          {"rows", rows}};
}

void run_continue(const Invocation& inv) {
  const ExperimentConfig config = load_config(inv);
  const Lab lab(config);
  const BranchRecord branch = continue_branch(lab.model, lab.greens, lab.k, config.branch);
  emit(inv, "branch.json", dump(branch_json(branch, config.branch)), false);
  emit(inv, "branch.csv", branch.csv().str(), true);
}

void run_fit_rate(const Invocation& inv) {
  const ExperimentConfig config = load_config(inv);
  const Lab lab(config);
  const BranchRecord branch = continue_branch(lab.model, lab.greens, lab.k, config.branch);
  emit(inv, "branch.csv", branch.csv().str(), false);
  ExperimentConfig single = config;
  single.crit_m = 1;
  const CritSearchResult crit = crit_search(single, lab);
  if (crit.configs.empty()) throw NumericalError("no critical point of the reduced functional found");
  const CritConfig* nearest = &crit.configs.front();
  for (const auto& c : crit.configs)
    if (geodesic_distance(c.points[0], branch.axis) < geodesic_distance(nearest->points[0], branch.axis)) nearest = &c;
  const RateFit fit = fit_bubbling_rate(branch, *nearest);
  json out = fit.to_json();
  out["stop_reason"] = branch.stop_reason;
  out["critical_point"] = point_json(nearest->points[0]);
  out["k_max"] = lab.model.k_max();
  emit(inv, "rate.json", dump(out), true);
}

void run_verify_gradients(const Invocation& inv) {
  const ExperimentConfig config = load_config(inv);
  const GradientSweep& sweep = config.gradients;
  std::map<Expansion, std::vector<ExpansionReport>> reports;
  std::vector<int> k_max_used;
  for (double lambda : sweep.lambdas) {
    // The bubble needs about 8 lambda degrees to stay unaliased.
    ExperimentConfig scaled = config;
    scaled.model.k_max = std::max(config.model.k_max, int(std::ceil(8.0 * lambda)));
    const Lab lab(scaled);
    k_max_used.push_back(scaled.model.k_max);
    BubbleConfig bubble = single_bubble(lab.model, sweep.center, lambda);
    if (!sweep.beta.empty()) {
      bubble.beta = sweep.beta;
      bubble.mode_axis = sweep.center;
    }
    for (Expansion which : sweep.expansions)
      reports[which].push_back(verify_expansion(lab.greens, lab.k, sweep.t, bubble, which));
  }
  CsvTable table({"expansion", "lambda", "lhs", "prediction", "residual"});
  json out = json::array();
  for (Expansion which : sweep.expansions) {
    auto& list = reports[which];
    json block = {{"expansion", to_string(which)}};
    if (!list.front().constant_names.empty()) {
      try {
        const ConstantFit fit = fit_constants(list);
        for (auto& r : list) r.apply_constants(fit.values);
        block["fit"] = {{"condition", fit.condition}, {"rms_residual", fit.rms_residual}};
      } catch (const NumericalError& e) {
        block["fit"] = {{"error", e.what()}};
      }
    }
    json items = json::array();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& r = list[i];
      json item = r.to_json();
      item["k_max"] = k_max_used[i];
      items.push_back(item);
      table.add_row({to_string(which), format_double(r.lambda), format_double(r.lhs),
                     format_double(r.lhs - r.residual), format_double(r.residual)});
    }
    block["reports"] = items;
    out.push_back(block);
  }
  emit(inv, "expansions.json", dump(out), false);
  emit(inv, "expansions.csv", table.str(), true);
}

int run_selftest(const Invocation& inv) {
  // Fixed internal settings on S^4; the config only contributes validation.
  if (!inv.config_path.empty()) parse_config(load_document(inv));
  std::vector<SuiteReport> suites = {operator_suite(Level::Quick), green_suite(Level::Quick),
                                     bubble_pde_suite(Level::Quick), reduced_suite(Level::Quick),
                                     solver_suite(Level::Quick),     fitting_suite(Level::Quick),
                                     degree_suite(Level::Quick)};
  json list = json::array();
  bool all = true;
  for (const auto& s : suites) {
    list.push_back(s.to_json());
    all = all && s.passed();
    log_info(s.name + (s.passed() ? " passed" : " FAILED") + " in " + format_double(s.seconds) + " s");
  }
  emit(inv, "selftest.csv", suites_table(suites).str(), false);
  emit(inv, "selftest.json", dump({{"passed", all}, {"suites", list}}), true);
  return all ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging_from_env();
  CLI::App app{"Numerical lab for the resonant prescribed Q-curvature equation"};
  app.require_subcommand(1);
  app.fallthrough();
  Invocation inv;
  app.add_option("--config", inv.config_path, "JSON config file (built-in defaults when omitted)");
  app.add_option("--out", inv.out_dir, "directory receiving all artifacts");
  app.add_option("--threads", inv.threads, "worker threads; 1 is bit-reproducible")->check(CLI::PositiveNumber);
  app.add_option("--seed", inv.seed, "overrides the config seed");

  std::function<int()> action;
  auto add = [&](const char* name, const char* help, std::function<int()> body) {
    app.add_subcommand(name, help)->callback([&action, body] { action = body; });
  };
  auto simple = [&inv](void (*body)(const Invocation&)) {
    return [&inv, body] {
      body(inv);
      return 0;
    };
  };
  add("green", "Green function profiles dist,G,logpart,H", simple(run_green));
  add("critpts", "critical points of the reduced functional", simple(run_critpts));
  add("degree", "Leray-Schauder degree report", simple(run_degree));
  add("continue", "continuation branch in t", simple(run_continue));
  add("verify-gradients", "gradient expansion sweep over lambda", simple(run_verify_gradients));
  add("fit-rate", "bubbling-rate fit along the branch", simple(run_fit_rate));
  add("selftest", "invariant suites", [&inv] { return run_selftest(inv); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    set_thread_count(inv.threads);
    return action();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitConfig;
  }
}
