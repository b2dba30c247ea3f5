#include <benchmark/benchmark.h>

#include "alert_surface/alert.hpp"
#include "alert_surface/bootstrap.hpp"
#include "alert_surface/estimator.hpp"
#include "alert_surface/random.hpp"
#include "alert_surface/simulation.hpp"

using namespace alert_surface;

namespace {

Dataset sample(const ScenarioSpec& s, std::uint64_t key) {
  return simulate_dataset(s.design, s.mean, s.sigma, key, s.domain_x1, s.domain_x2, s.reference);
}

}  // namespace

static void BM_FitThetaOnly(benchmark::State& state) {
  const ScenarioSpec s = build_scenario("1 - Full - Simple");
  const Dataset d = sample(s, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_theta_ml(d, s.mean.family_ptr()));
  }
}
BENCHMARK(BM_FitThetaOnly)->Unit(benchmark::kMillisecond);

static void BM_FitJointComplex(benchmark::State& state) {
  const ScenarioSpec s = build_scenario("1 - Full - Small");
  const Dataset d = sample(s, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_gamlss(d, s.mean.family_ptr(), complex_sigma_terms()));
  }
}
BENCHMARK(BM_FitJointComplex)->Unit(benchmark::kMillisecond);

// Arg: grid points per axis.
static void BM_SurfaceFromDraws(benchmark::State& state) {
  const ScenarioSpec s = build_scenario("1 - Full - Simple");
  const Dataset d = sample(s, 11);
  const FitResult fit = fit_gamlss(d, s.mean.family_ptr(), s.fit_sigma_terms);
  BootstrapConfig cfg;
  cfg.b1 = 20;
  cfg.b2 = 5;
  cfg.threads = 1;
  cfg.seed = 5;
  const BootstrapDraws draws = draw_bootstrap(d, fit, cfg);
  const auto n = static_cast<std::size_t>(state.range(0));
  const EvalGrid grid = EvalGrid::uniform(s.domain_x1, n, s.domain_x2, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        surface_from_draws(draws, s.surface_hypothesis(), grid, Side::lower, 1));
  }
}
BENCHMARK(BM_SurfaceFromDraws)->Arg(21)->Arg(101)->Unit(benchmark::kMillisecond);

static void BM_DrawBootstrap(benchmark::State& state) {
  const ScenarioSpec s = build_scenario("1 - Full - Simple");
  const Dataset d = sample(s, 11);
  const FitResult fit = fit_gamlss(d, s.mean.family_ptr(), s.fit_sigma_terms);
  BootstrapConfig cfg;
  cfg.b1 = 20;
  cfg.b2 = 5;
  cfg.threads = 1;
  cfg.algorithm = state.range(0) ? Algorithm::fast : Algorithm::normal;
  for (auto _ : state) {
    benchmark::DoNotOptimize(draw_bootstrap(d, fit, cfg));
  }
}
BENCHMARK(BM_DrawBootstrap)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_MedContour(benchmark::State& state) {
  const ScenarioSpec s = build_scenario("2 - Factorial 3x3 - N45");
  const EvalGrid grid = EvalGrid::uniform(s.domain_x1, 201, s.domain_x2, 201);
  for (auto _ : state) {
    benchmark::DoNotOptimize(med_contour(s.mean, grid, 80.0));
  }
}
BENCHMARK(BM_MedContour)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
