#include <random>

#include <benchmark/benchmark.h>

#include "svito/portfolio.hpp"
#include "svito/realized.hpp"
#include "svito/sim.hpp"
#include "svito/svmodel.hpp"

namespace {

using namespace svito;

TickPanel make_panel(int p, int m) {
  SimConfig cfg = default_sim_config();
  cfg.p = p;
  cfg.n = 2;
  cfg.m = m;
  cfg.substeps_per_obs = 2;
  cfg.burnin_days = 2;
  cfg.seed = 7;
  return simulate(cfg).ticks;
}

void bm_prvm(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const int m = static_cast<int>(state.range(1));
  TickPanel panel = make_panel(p, m);
  for (auto _ : state)
    benchmark::DoNotOptimize(prvm(panel, 0).matrix);
}
BENCHMARK(bm_prvm)->Args({50, 390})->Args({100, 390})->Args({100, 780});

void bm_qmle_objective(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  SimConfig cfg = default_sim_config();
  cfg.seed = 11;
  std::vector<Matrix> psis = simulate_psi_series(cfg, n, 64);
  SVParams theta = derive_beta(cfg.alpha0, cfg.alpha, cfg.nu);
  double floor = 0.0;
  for (const auto& m : psis) floor += m.trace();
  floor = 1e-8 * floor / n;
  for (auto _ : state)
    benchmark::DoNotOptimize(qmle_objective(psis, 1, theta, floor));
}
BENCHMARK(bm_qmle_objective)->Arg(125)->Arg(500);

void bm_min_variance(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  Matrix a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = normal(rng);
  Matrix sigma = a * a.transpose() / p + 0.1 * Matrix::Identity(p, p);
  PortfolioProblem prob;
  prob.sigma = sigma;
  prob.c0 = 1.5;
  for (auto _ : state)
    benchmark::DoNotOptimize(min_variance(prob).objective);
}
BENCHMARK(bm_min_variance)->Arg(20)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
