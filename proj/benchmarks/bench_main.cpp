#include <benchmark/benchmark.h>

#include <random>

#include "qcurv/bubbles.hpp"
#include "qcurv/continuation.hpp"
#include "qcurv/field.hpp"
#include "qcurv/green.hpp"
#include "qcurv/reduced.hpp"

using namespace qcurv;

namespace {

ManifoldModel sphere(int k_max) {
  ModelSpec spec;
  spec.k_max = k_max;
  return ManifoldModel(spec);
}

KField tilted_k(const ManifoldModel& model) {
  return make_kfield(model, model.constant(1.0) + model.harmonic(north_pole(4), 1, 0.3));
}

void BM_ApplyInvertGjms(benchmark::State& state) {
  const ManifoldModel model = sphere(int(state.range(0)));
  std::mt19937_64 rng(3);
  const Field u = remove_q_average(model, model.random_field(rng, model.k_max(), 4));
  for (auto _ : state) benchmark::DoNotOptimize(invert_gjms(model, apply_gjms(model, u)));
}
BENCHMARK(BM_ApplyInvertGjms)->Arg(60)->Arg(640);

void BM_GreenFunctionSetup(benchmark::State& state) {
  const ManifoldModel model = sphere(int(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(GreenFunction(model, default_rho(model)));
}
BENCHMARK(BM_GreenFunctionSetup)->Arg(60)->Arg(320)->Unit(benchmark::kMillisecond);

void BM_GreenPointValue(benchmark::State& state) {
  const ManifoldModel model = sphere(60);
  auto function = std::make_shared<GreenFunction>(model, default_rho(model));
  const GreenPair pair = green_pair(function, north_pole(4));
  std::mt19937_64 rng(5);
  const Point x = random_point(4, rng);
  for (auto _ : state) benchmark::DoNotOptimize(pair.G(x));
}
BENCHMARK(BM_GreenPointValue);

void BM_ProjectBubble(benchmark::State& state) {
  const double lambda = double(state.range(0));
  const ManifoldModel model = sphere(int(8 * lambda));
  const double rho = default_rho(model);
  for (auto _ : state) benchmark::DoNotOptimize(project_bubble(model, north_pole(4), lambda, rho, 1));
}
BENCHMARK(BM_ProjectBubble)->Arg(20)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_CriticalPointSearch(benchmark::State& state) {
  const ManifoldModel model = sphere(60);
  const GreenFunction greens(model, default_rho(model));
  const KField k = tilted_k(model);
  ReducedOptions options;
  options.random_seeds = 8;
  for (auto _ : state) benchmark::DoNotOptimize(find_critical_points(greens, k, int(state.range(0)), options));
}
BENCHMARK(BM_CriticalPointSearch)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_SolveAtT(benchmark::State& state) {
  const ManifoldModel model = sphere(int(state.range(0)));
  const KField k = tilted_k(model);
  for (auto _ : state) benchmark::DoNotOptimize(solve_at_t(model, k, 0.9, model.constant(0.0)));
}
BENCHMARK(BM_SolveAtT)->Arg(48)->Arg(160)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
