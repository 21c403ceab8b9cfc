#include <random>

#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "oedheat/oed.hpp"

namespace {

using namespace oedheat;

// Two rods, 10 x 10 sensors, as in the default configuration.
DomainSpec room(double h) {
  DomainSpec spec;
  spec.mesh_size = h;
  spec.holes = {{Point(0.7, 0.5), 0.2}, {Point(0.7, -0.5), 0.2}};
  spec.sensors = sensor_grid(-0.4, 0.4, 10, -0.9, 0.9, 10);
  return spec;
}

const testing::Problem& problem() {
  static const testing::Problem p = testing::make_problem(room(1.0 / 12.0));
  return p;
}

const LowRankFactor& factor() {
  static const LowRankFactor f = [] {
    std::mt19937_64 rng(1);
    LowRankFactor lr =
        randomized_factorize(make_preconditioned_map(problem().heat, problem().prior, 1e-6), {}, rng);
    lr.prior_trace = problem().prior.trace();
    return lr;
  }();
  return f;
}

void BM_HeatForward(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Vector s = testing::random_vector(problem().heat.num_source_dofs(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(problem().heat.forward(s));
}
BENCHMARK(BM_HeatForward)->Unit(benchmark::kMillisecond);

void BM_HeatAdjoint(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const Vector g = testing::random_vector(problem().heat.num_sensors(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(problem().heat.adjoint(g));
}
BENCHMARK(BM_HeatAdjoint)->Unit(benchmark::kMillisecond);

void BM_Factorize(benchmark::State& state) {
  const auto map = make_preconditioned_map(problem().heat, problem().prior, 1e-6);
  for (auto _ : state) {
    std::mt19937_64 rng(4);
    benchmark::DoNotOptimize(randomized_factorize(map, {}, rng));
  }
}
BENCHMARK(BM_Factorize)->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_ObjectiveAndGradient(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const Vector w = testing::random_vector(factor().num_sensors(), rng, 0.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(objective(w, factor()));
    benchmark::DoNotOptimize(gradient(w, factor()));
  }
}
BENCHMARK(BM_ObjectiveAndGradient)->Unit(benchmark::kMicrosecond);

void BM_ProjectCappedBox(benchmark::State& state) {
  std::mt19937_64 rng(6);
  const Vector z = testing::random_vector(state.range(0), rng, -0.5, 1.5);
  for (auto _ : state) benchmark::DoNotOptimize(project_capped_box(z, 0.3 * static_cast<double>(z.size())));
}
BENCHMARK(BM_ProjectCappedBox)->Arg(100)->Arg(10000);

void BM_RelaxedSolve(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(solve_relaxed(factor(), 10.0, {1e-9, 5000}));
}
BENCHMARK(BM_RelaxedSolve)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
