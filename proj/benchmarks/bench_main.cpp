#include <benchmark/benchmark.h>

#include "sep/correlation.hpp"
#include "sep/density.hpp"
#include "sep/dual.hpp"
#include "sep/exact.hpp"
#include "sep/experiment.hpp"
#include "sep/kinetic.hpp"
#include "sep/rng.hpp"

namespace {

using namespace sep;

ModelSpec bench_model1(int N) {
  ModelSpec spec;
  spec.N = N;
  spec.boundary =
      random_degree_preserving_spec(1, 2, ErgodicityTag::unique_stationary);
  return spec;
}

FlipBoundarySpec bench_flip() {
  std::vector<double> lex(8, 0.5);
  lex[1] += 0.05;
  lex[6] += 0.05;
  FlipBoundarySpec b;
  b.p = 3;
  b.beta = 0.55;
  b.table.assign(8, 0.0);
  for (std::uint32_t w = 0; w < 8; ++w) b.table[reverse_bits(w, 3)] = lex[w];
  return b;
}

void BM_kinetic_events(benchmark::State& state) {
  const auto spec = bench_model1(static_cast<int>(state.range(0)));
  KineticSimulator sim(spec, Configuration(-2, spec.N + 2), 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sim.step());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_kinetic_events)->Arg(64)->Arg(512);

void BM_dual_revealment(benchmark::State& state) {
  const auto spec = bench_flip();
  Rng rng(11);
  RevealmentOptions options;
  options.record_marks = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        run_revealment(spec, static_cast<int>(state.range(0)), rng, options)
            .record.extinction_time);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_dual_revealment)->Arg(32)->Arg(128);

void BM_finite_one_point(benchmark::State& state) {
  const auto spec =
      random_degree_preserving_spec(3, 2, ErgodicityTag::unique_stationary);
  const int N = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_finite_one_point(spec, N).residual);
  }
}
BENCHMARK(BM_finite_one_point)->Arg(200)->Arg(800);

void BM_correlation_solve(benchmark::State& state) {
  const auto spec =
      random_degree_preserving_spec(3, 2, ErgodicityTag::unique_stationary);
  const int N = static_cast<int>(state.range(0));
  const auto rho = solve_finite_one_point(spec, N);
  for (auto _ : state) {
    const auto sys = assemble_system_model1(spec, N, rho);
    benchmark::DoNotOptimize(solve_correlations(sys).residual);
  }
}
BENCHMARK(BM_correlation_solve)->Arg(50)->Arg(100);

void BM_exact_stationary(benchmark::State& state) {
  const auto spec = bench_model1(static_cast<int>(state.range(0)));
  const auto G = build_generator(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(stationary_distribution(G).residual);
  }
}
BENCHMARK(BM_exact_stationary)->Arg(8)->Arg(12);

}  // namespace

BENCHMARK_MAIN();
