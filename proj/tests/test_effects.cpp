#include <gtest/gtest.h>

#include "nephro/attribution.hpp"
#include "support.hpp"

using namespace nephro;
using namespace nephro::testing;

namespace {

double spread(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

}  // namespace

TEST(Pdp, FlatForIgnoredFeature) {
  const Matrix x = gaussian_matrix(200, 3, 1);
  const auto f = rowwise([](Row r) { return 2 * r[0] + r[0] * r[2] + std::sin(r[2]); });
  const auto info = FeatureInfo::numeric(3);
  EXPECT_LT(spread(pdp(f, x, info, 1).values), 1e-9);
  EXPECT_LT(spread(ale(f, x, info, 1).values), 1e-9);
}

TEST(Pdp, LinearSlopeEqualsCoefficient) {
  const Matrix x = gaussian_matrix(100, 2, 2);
  const auto g = pdp(linear_model({-1.5, 4.0}), x, FeatureInfo::numeric(2), 0, std::vector<double>{-1, 0, 2});
  EXPECT_NEAR(g.values[1] - g.values[0], -1.5, 1e-12);
  EXPECT_NEAR(g.values[2] - g.values[1], -3.0, 1e-12);
}

TEST(Pdp, TwoWaySurfaceOfAdditiveModelIsSumOfCurves) {
  const Matrix x = gaussian_matrix(80, 2, 3);
  const auto f = rowwise([](Row r) { return r[0] * r[0] + 3 * r[1]; });
  const auto info = FeatureInfo::numeric(2);
  const auto s = pdp2(f, x, info, 0, 1, 5);
  const auto a = pdp(f, x, info, 0, s.grid);
  const auto b = pdp(f, x, info, 1, s.grid2);
  const double mean = f(x).mean();
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    for (std::size_t j = 0; j < s.grid2.size(); ++j) {
      EXPECT_NEAR(s.values[i * s.grid2.size() + j], a.values[i] + b.values[j] - mean, 1e-9);
    }
  }
}

TEST(Ale, SlopeThreeOnLinearFunction) {
  const Matrix x = gaussian_matrix(500, 1, 4, 2.0);
  const auto g = ale(linear_model({3.0}), x, FeatureInfo::numeric(1), 0, 10);
  ASSERT_EQ(g.values.size(), g.grid.size());
  for (std::size_t k = 0; k + 1 < g.grid.size(); ++k) {
    EXPECT_NEAR((g.values[k + 1] - g.values[k]) / (g.grid[k + 1] - g.grid[k]), 3.0, 1e-6);
  }
  EXPECT_NEAR(g.weighted_mean(), 0.0, 1e-9);
}

TEST(Ale, UnaffectedByCorrelatedPartner) {
  // f depends on x1 only; with x0 and x1 correlated the PDP of x0 stays flat
  // and ALE of x0 must too.
  Rng rng(5);
  const Matrix x = correlated_gaussian(400, 2, rng);
  const auto f = linear_model({0.0, 2.0});
  EXPECT_LT(spread(ale(f, x, FeatureInfo::numeric(2), 0).values), 1e-9);
}

TEST(Effects, NominalFeatureRejected) {
  const Matrix x = gaussian_matrix(20, 2, 6);
  FeatureInfo info{{"a", "b"}, {false, true}};
  EXPECT_THROW(pdp(linear_model({1, 1}), x, info, 1), ConfigError);
  EXPECT_THROW(ale(linear_model({1, 1}), x, info, 1), ConfigError);
  EXPECT_THROW(pdp(linear_model({1, 1}), x, info, 5), ConfigError);
}

TEST(Effects, PercentileGridIsSortedWithinRange) {
  const Matrix x = gaussian_matrix(300, 1, 7);
  const auto g = percentile_grid(x, 0, 20);
  EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
  EXPECT_GE(g.front(), x.col(0).minCoeff());
  EXPECT_LE(g.back(), x.col(0).maxCoeff());
}
