#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "fracspde/fft.h"
#include "fracspde/moment_kernel.h"
#include "fracspde/special_fn.h"
#include "fracspde/spde_solver.h"

using namespace fracspde;

namespace {

const KernelTable& heat() {
  static const KernelTable t = default_kernel_table({2.0, 0.0});
  return t;
}

void BM_KernelTable(benchmark::State& state) {
  const StableParams p{state.range(0) / 10.0, 0.0};
  for (auto _ : state) benchmark::DoNotOptimize(default_kernel_table(p));
}
BENCHMARK(BM_KernelTable)->Arg(20)->Arg(15)->Unit(benchmark::kMillisecond);

void BM_KernelValue(benchmark::State& state) {
  const auto& tb = heat();
  double x = -3.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernel_value(tb, 0.37, x));
    x = x > 3.0 ? -3.0 : x + 0.001;
  }
}
BENCHMARK(BM_KernelValue);

void BM_MittagLeffler(benchmark::State& state) {
  const MittagParams p{0.5, 1.0};
  const double z = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mittag_leffler(p, z));
}
BENCHMARK(BM_MittagLeffler)->Arg(-10)->Arg(1)->Arg(20);

// One full-width spectral convolution of an n-point row.
void BM_Convolution(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  SpectralConvolver conv(n, n - 1);
  std::vector<double> kernel(2 * n - 1), signal(n), out(n);
  for (std::size_t i = 0; i < kernel.size(); ++i) kernel[i] = std::exp(-0.001 * std::abs(double(i) - double(n - 1)));
  for (std::size_t i = 0; i < n; ++i) signal[i] = std::sin(0.1 * double(i));
  const auto spec = conv.kernel_spectrum(kernel);
  auto ws = conv.make_workspace();
  for (auto _ : state) {
    conv.convolve(signal, spec, ws, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Convolution)->RangeMultiplier(2)->Range(129, 2049)->Complexity();

// Whole path of the scheme; time per step is reported as a rate.
void BM_SolverPath(benchmark::State& state) {
  const double dx = 1.0 / static_cast<double>(state.range(0));
  const auto g = make_grid(0.5, 1.0 / 256, 4.0, dx);
  const MildScheme s(heat(), g, InitialMeasure::dirac());
  const auto rho = DiffusionCoefficient::pam(1.0);
  std::uint64_t path = 0;
  for (auto _ : state) {
    state.PauseTiming();
    const auto noise = sample_noise(1, path++, g);
    state.ResumeTiming();
    benchmark::DoNotOptimize(s.simulate(rho, noise));
  }
  state.counters["steps/s"] = benchmark::Counter(static_cast<double>(state.iterations() * g.n_t), benchmark::Counter::kIsRate);
  state.counters["n_x"] = static_cast<double>(g.n_x);
}
BENCHMARK(BM_SolverPath)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_NoisePath(benchmark::State& state) {
  const auto g = make_grid(0.5, 1.0 / 256, 4.0, 1.0 / 32);
  std::uint64_t path = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_noise(1, path++, g));
}
BENCHMARK(BM_NoisePath)->Unit(benchmark::kMillisecond);

void BM_MalliavinMatrix(benchmark::State& state) {
  const auto g = make_grid(1.0, 1.0 / 128, 4.0, 1.0 / 32);
  const MildScheme s(heat(), g, InitialMeasure::dirac());
  const auto rho = DiffusionCoefficient::pam(1.0);
  const auto noise = sample_noise(1, 0, g);
  const auto base = s.simulate(rho, noise);
  const MalliavinWindow win{1.0, 0.5, 1.0, -1.0, 1.0, 1, 1};
  for (auto _ : state) benchmark::DoNotOptimize(malliavin_matrix(s, base, noise, rho, {-0.5, 0.5}, win));
}
BENCHMARK(BM_MalliavinMatrix)->Unit(benchmark::kMillisecond);

void BM_KLambdaSeries(benchmark::State& state) {
  const auto g = make_grid(0.5, 1.0 / 128, 4.0, 1.0 / 32);
  for (auto _ : state) benchmark::DoNotOptimize(k_lambda_series(heat(), 1.0, g, 12));
}
BENCHMARK(BM_KLambdaSeries)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
