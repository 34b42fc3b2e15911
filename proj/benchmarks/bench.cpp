#include <benchmark/benchmark.h>

#include "wdiff/estimators.hpp"
#include "wdiff/forms.hpp"
#include "wdiff/rng.hpp"
#include "wdiff/sde.hpp"
#include "wdiff/weights.hpp"

using namespace wdiff;

namespace {

Vec e1(int d) {
  Vec v = Vec::Zero(d);
  v[0] = 1.0;
  return v;
}

void BM_PhiloxNormal(benchmark::State& state) {
  PhiloxStream rng(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(rng.normal());
}
BENCHMARK(BM_PhiloxNormal);

void BM_EmStep(benchmark::State& state) {
  const SdeCoefficients c(DiffusionField::isotropic_power(3, 1.0));
  const StepPolicy policy = StepPolicy::adaptive();
  PhiloxStream rng(2, 0);
  Vec x = e1(3);
  for (auto _ : state) {
    const EmStep s = em_step(c, x, 1e-3, std::sqrt(1e-3) * rng.normal_vec(3), policy);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_EmStep);

void BM_EmStepAnisotropic(benchmark::State& state) {
  const SdeCoefficients c(DiffusionField::power_radial_anisotropic(3, 1.0, 0.5));
  const StepPolicy policy = StepPolicy::adaptive();
  PhiloxStream rng(3, 0);
  const Vec x = e1(3);
  for (auto _ : state) {
    const EmStep s = em_step(c, x, 1e-3, std::sqrt(1e-3) * rng.normal_vec(3), policy);
    benchmark::DoNotOptimize(s);
  }
}
BENCHMARK(BM_EmStepAnisotropic);

void BM_SimulateBatch(benchmark::State& state) {
  const SdeCoefficients c(DiffusionField::isotropic_power(3, 1.0));
  SimConfig cfg;
  cfg.horizon = 1.0;
  cfg.dt = 1e-2;
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_batch(c, e1(3), n, cfg, 7, 1).digest);
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(n) * 100);
}
BENCHMARK(BM_SimulateBatch)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_A2Ratio(benchmark::State& state) {
  const Weight w = Weight::power(3, 1.0);
  Vec c = e1(3);
  c *= 0.3;
  const Ball b(c, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(a2_ratio(w, b));
}
BENCHMARK(BM_A2Ratio)->Unit(benchmark::kMicrosecond);

void BM_A2RatioProduct(benchmark::State& state) {
  const Weight w = Weight::product(fields::sine_ripple(0.3, e1(3)), 2.0, Weight::power(3, 1.0));
  const Ball b(e1(3), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(a2_ratio(w, b));
}
BENCHMARK(BM_A2RatioProduct)->Unit(benchmark::kMillisecond);

void BM_Kde(benchmark::State& state) {
  PhiloxStream rng(4, 0);
  std::vector<Vec> xs;
  for (int i = 0; i < 20000; ++i) xs.push_back(rng.normal_vec(3));
  const std::vector<Vec> ys{e1(3), Vec::Zero(3)};
  const Weight w = Weight::power(3, 0.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(kde_transition_density(xs, xs.size(), w, ys, Bandwidth::silverman()).value);
}
BENCHMARK(BM_Kde)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
