#include <gtest/gtest.h>

#include "nephro/attribution.hpp"
#include "support.hpp"

using namespace nephro;
using namespace nephro::testing;

namespace {

double smooth(Row r) {
  return 1.0 / (1.0 + std::exp(-(r[0] * r[1] - 0.5 * r[2] + 0.3 * r[3] * r[3] - r[4] + 0.2 * r[5] * r[0])));
}

}  // namespace

TEST(Shapley, EfficiencyOnHundredRows) {
  const Matrix bg = gaussian_matrix(30, 6, 1);
  const Matrix rows = gaussian_matrix(100, 6, 2);
  const auto f = rowwise(smooth);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const auto a = shapley_exact(f, row_of(rows, i), bg);
    double sum = a.base_value;
    for (double p : a.phi) sum += p;
    EXPECT_NEAR(sum, smooth(row_of(rows, i)), 1e-6);
    EXPECT_LT(std::abs(a.efficiency_gap()), 1e-6);
  }
}

TEST(Shapley, SymmetryForDuplicatedFeatures) {
  Matrix bg = gaussian_matrix(25, 3, 3);
  bg.col(1) = bg.col(0);
  const auto f = rowwise([](Row r) { return r[0] * r[1] + std::sin(r[0] + r[1]) + r[2] * (r[0] + r[1]); });
  for (double v : {-1.3, 0.2, 2.0}) {
    const std::vector<double> row{v, v, 0.7};
    const auto a = shapley_exact(f, row, bg);
    EXPECT_NEAR(a.phi[0], a.phi[1], 1e-9);
  }
}

TEST(Shapley, AdditiveModelClosedForm) {
  const std::vector<double> coef{1.5, -2.0, 0.0, 0.25};
  const Matrix bg = gaussian_matrix(60, 4, 4);
  const Matrix rows = gaussian_matrix(10, 4, 5);
  const auto f = linear_model(coef, 3.0);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const auto a = shapley_exact(f, row_of(rows, i), bg);
    for (std::size_t j = 0; j < coef.size(); ++j) {
      const double expect = coef[j] * (rows(i, static_cast<Eigen::Index>(j)) - bg.col(static_cast<Eigen::Index>(j)).mean());
      EXPECT_NEAR(a.phi[j], expect, 1e-9);
    }
  }
}

TEST(Shapley, InteractionOracle) {
  Matrix bg(4, 3);
  bg << 0, 1, 2, 1, -1, 0.5, 2, 0, -1, -1, 3, 1;
  const auto f = rowwise([](Row r) { return r[0] * r[1] + 2 * r[2] - r[0] * r[0]; });
  const std::vector<double> row{1.5, 2, -0.5};
  const auto a = shapley_exact(f, row, bg);
  EXPECT_NEAR(a.phi[0], 1.3125, 1e-12);
  EXPECT_NEAR(a.phi[1], 1.9375, 1e-12);
  EXPECT_NEAR(a.phi[2], -2.25, 1e-12);
}

TEST(Shapley, SampledCloseToExactAt2048) {
  const Matrix bg = gaussian_matrix(30, 6, 6);
  const Matrix rows = gaussian_matrix(5, 6, 7);
  const auto f = rowwise(smooth);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const auto exact = shapley_exact(f, row_of(rows, i), bg);
    const auto sampled = shapley_sampled(f, row_of(rows, i), bg, 2048, 100 + static_cast<std::uint64_t>(i));
    EXPECT_FALSE(sampled.exact);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(sampled.phi[j], exact.phi[j], 0.02);
    // Each permutation telescopes, so efficiency holds for the sampled estimate too.
    EXPECT_LT(std::abs(sampled.efficiency_gap()), 1e-9);
  }
}

TEST(Shapley, SampledErrorShrinksWithPermutations) {
  const Matrix bg = gaussian_matrix(30, 6, 8);
  const Matrix rows = gaussian_matrix(1, 6, 9);
  const auto f = rowwise(smooth);
  const auto exact = shapley_exact(f, row_of(rows, 0), bg);
  auto error = [&](int perms) {
    double e = 0;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto a = shapley_sampled(f, row_of(rows, 0), bg, perms, s);
      for (std::size_t j = 0; j < 6; ++j) e += std::abs(a.phi[j] - exact.phi[j]);
    }
    return e;
  };
  EXPECT_LT(error(4096), error(64));
}

TEST(Shapley, ExactRefusesWideInputs) {
  const Matrix bg = gaussian_matrix(5, 16, 1);
  const std::vector<double> row(16, 0.0);
  EXPECT_THROW(shapley_exact(linear_model(std::vector<double>(16, 1.0)), row, bg), ConfigError);
  const auto a = shapley_auto(linear_model(std::vector<double>(16, 1.0)), row, bg, 64, 1);
  EXPECT_FALSE(a.exact);
}

TEST(Shapley, GlobalRankingIgnoresUnusedFeature) {
  const Matrix x = gaussian_matrix(40, 3, 10);
  const auto f = linear_model({2.0, 0.0, -0.5});
  const auto g = global_shapley(f, x.topRows(10), x, FeatureInfo::numeric(3), 64, 1);
  EXPECT_EQ(g.ranking.front(), 0u);
  EXPECT_EQ(g.ranking.back(), 1u);
  EXPECT_NEAR(g.mean_abs_phi[1], 0.0, 1e-12);
  EXPECT_EQ(g.phi.rows(), 10);
  const auto dep = dependence_data(g, x.topRows(10), 0, 2);
  ASSERT_EQ(dep.size(), 10u);
  EXPECT_DOUBLE_EQ(dep[3].value, x(3, 0));
  EXPECT_DOUBLE_EQ(dep[3].phi, g.phi(3, 0));
}

TEST(Shapley, JsonShape) {
  Matrix bg(2, 2);
  bg << 0, 0, 1, 1;
  const std::vector<double> row{2, 3};
  const auto j = shapley_exact(linear_model({1, 1}), row, bg).to_json({"a", "b"});
  EXPECT_EQ(j["contributions"].size(), 2u);
  EXPECT_EQ(j["contributions"][1]["feature"], "b");
  EXPECT_NEAR(j["base_value"].get<double>(), 1.0, 1e-12);
}
