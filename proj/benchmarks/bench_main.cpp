#include <benchmark/benchmark.h>

#include <cmath>

#include "roughlab/gaussian_sim.hpp"
#include "roughlab/hormander.hpp"
#include "roughlab/rng.hpp"
#include "roughlab/rough_core.hpp"
#include "roughlab/rough_integration.hpp"
#include "roughlab/roughness.hpp"

using namespace roughlab;

static void BM_chen_mul(benchmark::State& state) {
  const auto d = static_cast<Eigen::Index>(state.range(0));
  Engine g = make_engine(1);
  const Level2Increment a(standard_normal(g, d), Eigen::MatrixXd::Random(d, d));
  const Level2Increment b(standard_normal(g, d), Eigen::MatrixXd::Random(d, d));
  for (auto _ : state) benchmark::DoNotOptimize(chen_mul(a, b));
}
BENCHMARK(BM_chen_mul)->Arg(1)->Arg(2)->Arg(8);

static void BM_lift_piecewise_linear(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto spec = gaussian::GaussianSpec::brownian(2, 1.0, n);
  const auto samples = gaussian::sample_path(spec);
  const auto times = spec.times();
  for (auto _ : state) benchmark::DoNotOptimize(lift_piecewise_linear(samples, times));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_lift_piecewise_linear)->Arg(1 << 10)->Arg(1 << 14);

static void BM_gaussian_lift(benchmark::State& state) {
  const auto spec = gaussian::GaussianSpec::fractional(0.3, 2, 1.0, 1024);
  gaussian::GaussianLifter lifter(spec, static_cast<unsigned>(state.range(0)));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(lifter(seed++));
}
BENCHMARK(BM_gaussian_lift)->Arg(0)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_fbm_sampler(benchmark::State& state) {
  auto spec = gaussian::GaussianSpec::fractional(0.3, 1, 1.0, static_cast<std::size_t>(state.range(0)));
  const gaussian::PathSampler sampler(spec, state.range(1) == 0 ? gaussian::SamplingMethod::cholesky
                                                                : gaussian::SamplingMethod::circulant);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sample(seed++));
}
BENCHMARK(BM_fbm_sampler)->Args({1024, 0})->Args({1024, 1})->Args({1 << 14, 1})->Unit(benchmark::kMicrosecond);

static void BM_rough_integral(benchmark::State& state) {
  const auto path = gaussian::lift_gaussian(gaussian::GaussianSpec::brownian(1, 1.0, 4096), 0);
  integration::IntegrandSpec spec;
  spec.f = [](const integration::Vec& x) { return integration::Mat::Constant(1, 1, std::sin(x[0])); };
  spec.df = [](const integration::Vec& x) { return std::vector<integration::Mat>{integration::Mat::Constant(1, 1, std::cos(x[0]))}; };
  for (auto _ : state) benchmark::DoNotOptimize(integration::rough_integral(spec, path, 0, 4096));
}
BENCHMARK(BM_rough_integral);

static void BM_roughness_report(benchmark::State& state) {
  const auto path = gaussian::lift_gaussian(gaussian::GaussianSpec::fractional(0.3, 2, 1.0, 4096), 0,
                                            ControlFn::hoelder(1.0, 3.0));
  roughness::ReportOptions opt;
  opt.rho = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(roughness::roughness_report(path, opt));
}
BENCHMARK(BM_roughness_report)->Unit(benchmark::kMillisecond);

static void BM_gram_hypo(benchmark::State& state) {
  const auto sys = hormander::shipped_system("HYPO");
  gaussian::GaussianLifter lifter(gaussian::GaussianSpec::brownian(1, 1.0, 1024), 2);
  const hormander::DriverFactory driver = [&lifter](std::uint64_t seed) { return lifter(seed); };
  const std::vector<std::uint64_t> seeds{0, 1, 2, 3};
  for (auto _ : state) benchmark::DoNotOptimize(hormander::gram_matrix(sys, driver, seeds));
}
BENCHMARK(BM_gram_hypo)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
