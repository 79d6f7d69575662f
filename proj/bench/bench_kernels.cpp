// Serial reference kernels against the OpenMP versions. Run with
// OMP_NUM_THREADS set to compare thread counts.

#include <random>

#include <benchmark/benchmark.h>

#include "nephro/attribution.hpp"
#include "nephro/kernels.hpp"
#include "nephro/models.hpp"

using namespace nephro;

namespace {

Matrix random_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = g(rng);
  }
  return m;
}

double wiggle(Row r) {
  double s = 0;
  for (std::size_t j = 0; j < r.size(); ++j) s += std::sin(r[j] * (1.0 + 0.1 * static_cast<double>(j)));
  return std::tanh(s);
}

BatchModel batch_wiggle() {
  return [](const Matrix& x) { return kernels::serial::score_rows(wiggle, x); };
}

// A trained forest is the realistic per-row cost.
const BatchModel& forest() {
  static const BatchModel f = [] {
    const Matrix x = random_matrix(500, 6, 1);
    std::vector<int> y(500);
    for (Eigen::Index i = 0; i < 500; ++i) y[static_cast<std::size_t>(i)] = x(i, 0) - 0.5 * x(i, 3) > 0;
    ModelSpec spec{Family::kRF, {{"n_estimators", 100}}, 3};
    return model_output(train(spec, x, y, {}), 1);
  }();
  return f;
}

std::vector<std::uint64_t> all_masks(int d) {
  std::vector<std::uint64_t> m(1ULL << d);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = i;
  return m;
}

void BM_ScoreRowsSerial(benchmark::State& st) {
  const Matrix x = random_matrix(st.range(0), 24, 2);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::serial::score_rows(wiggle, x));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_ScoreRowsParallel(benchmark::State& st) {
  const Matrix x = random_matrix(st.range(0), 24, 2);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::score_rows(wiggle, x, kernels::Mode::kParallel));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_CoalitionsSerial(benchmark::State& st) {
  const Matrix bg = random_matrix(100, 6, 3);
  const Matrix row = random_matrix(1, 6, 4);
  const auto masks = all_masks(6);
  forest();
  for (auto _ : st) benchmark::DoNotOptimize(kernels::serial::coalition_values(forest(), row_of(row, 0), bg, masks));
}

void BM_CoalitionsParallel(benchmark::State& st) {
  const Matrix bg = random_matrix(100, 6, 3);
  const Matrix row = random_matrix(1, 6, 4);
  const auto masks = all_masks(6);
  forest();
  for (auto _ : st) {
    benchmark::DoNotOptimize(kernels::coalition_values(forest(), row_of(row, 0), bg, masks, kernels::Mode::kParallel));
  }
}

void BM_PdpSerial(benchmark::State& st) {
  const Matrix x = random_matrix(400, 6, 5);
  std::vector<double> grid(20);
  for (int k = 0; k < 20; ++k) grid[static_cast<std::size_t>(k)] = -2.0 + 0.2 * k;
  const auto f = batch_wiggle();
  for (auto _ : st) benchmark::DoNotOptimize(kernels::serial::pdp_curve(f, x, 0, grid));
}

void BM_PdpParallel(benchmark::State& st) {
  const Matrix x = random_matrix(400, 6, 5);
  std::vector<double> grid(20);
  for (int k = 0; k < 20; ++k) grid[static_cast<std::size_t>(k)] = -2.0 + 0.2 * k;
  const auto f = batch_wiggle();
  for (auto _ : st) benchmark::DoNotOptimize(kernels::pdp_curve(f, x, 0, grid, kernels::Mode::kParallel));
}

void BM_ExactShapley(benchmark::State& st) {
  const Matrix bg = random_matrix(100, 6, 6);
  const Matrix row = random_matrix(1, 6, 7);
  forest();
  const auto mode = st.range(0) ? kernels::Mode::kParallel : kernels::Mode::kSerial;
  for (auto _ : st) benchmark::DoNotOptimize(shapley_exact(forest(), row_of(row, 0), bg, mode));
  st.SetLabel(st.range(0) ? "parallel" : "serial");
}

}  // namespace

BENCHMARK(BM_ScoreRowsSerial)->Arg(1000)->Arg(100000);
BENCHMARK(BM_ScoreRowsParallel)->Arg(1000)->Arg(100000);
BENCHMARK(BM_CoalitionsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CoalitionsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PdpSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PdpParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExactShapley)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
