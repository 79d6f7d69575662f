#include <atomic>

#include <gtest/gtest.h>

#include "nephro/attribution.hpp"
#include "nephro/kernels.hpp"
#include "support.hpp"

using namespace nephro;
using namespace nephro::testing;

namespace {

double bumpy(Row r) { return std::sin(r[0]) * r[1] + std::exp(-r[2] * r[2]) - 0.3 * r[0] * r[2]; }

}  // namespace

TEST(Kernels, ForEachIndexVisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  kernels::for_each_index(hits.size(), [&](std::size_t i) { hits[i]++; }, kernels::Mode::kParallel);
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Kernels, ScoreRowsMatchesSerial) {
  const Matrix x = gaussian_matrix(777, 3, 1);
  const Vector a = kernels::score_rows(bumpy, x, kernels::Mode::kParallel);
  const Vector b = kernels::serial::score_rows(bumpy, x);
  EXPECT_EQ(a, b);
}

TEST(Kernels, CoalitionValuesMatchSerial) {
  const Matrix bg = gaussian_matrix(50, 3, 2);
  const Matrix rows = gaussian_matrix(1, 3, 3);
  const auto f = rowwise(bumpy);
  std::vector<std::uint64_t> masks{0, 1, 2, 3, 4, 5, 6, 7};
  const auto a = kernels::coalition_values(f, row_of(rows, 0), bg, masks, kernels::Mode::kParallel);
  const auto b = kernels::serial::coalition_values(f, row_of(rows, 0), bg, masks);
  EXPECT_EQ(a, b);
  // Empty coalition is the background mean; the full one is f(row).
  EXPECT_NEAR(a[0], f(bg).mean(), 1e-12);
  EXPECT_NEAR(a[7], bumpy(row_of(rows, 0)), 1e-12);
}

TEST(Kernels, PdpCurveMatchesSerial) {
  const Matrix x = gaussian_matrix(300, 3, 4);
  const std::vector<double> grid{-1, -0.5, 0, 0.5, 1};
  const auto f = rowwise(bumpy);
  EXPECT_EQ(kernels::pdp_curve(f, x, 1, grid, kernels::Mode::kParallel), kernels::serial::pdp_curve(f, x, 1, grid));
}

TEST(Kernels, ExactShapleyIdenticalInBothModes) {
  const Matrix bg = gaussian_matrix(40, 3, 5);
  const Matrix rows = gaussian_matrix(1, 3, 6);
  const auto f = rowwise(bumpy);
  const auto a = shapley_exact(f, row_of(rows, 0), bg, kernels::Mode::kParallel);
  const auto b = shapley_exact(f, row_of(rows, 0), bg, kernels::Mode::kSerial);
  EXPECT_EQ(a.phi, b.phi);
}

TEST(Kernels, DefaultModeRoundTrip) {
  const auto before = kernels::default_mode();
  kernels::set_default_mode(kernels::Mode::kSerial);
  EXPECT_EQ(kernels::default_mode(), kernels::Mode::kSerial);
  kernels::set_default_mode(before);
  EXPECT_GE(kernels::max_threads(), 1);
}
