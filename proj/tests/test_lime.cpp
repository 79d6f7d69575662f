#include <gtest/gtest.h>

#include "nephro/attribution.hpp"
#include "support.hpp"

using namespace nephro;
using namespace nephro::testing;

TEST(Lime, RecoversCoefficientSignsAcrossSeeds) {
  const std::vector<double> coef{2.0, -3.0, 1.5, -0.75};
  const Matrix bg = gaussian_matrix(300, 4, 1);
  const auto f = linear_model(coef, 0.5);
  LimeOptions o;
  o.discretize = false;
  const std::vector<double> row{0.3, -0.2, 1.0, 0.5};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto e = lime_explain(f, row, bg, FeatureInfo::numeric(4), o, seed);
    ASSERT_EQ(e.terms.size(), 4u);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(e.terms[j].weight > 0, coef[j] > 0) << "seed " << seed << " feature " << j;
    }
    EXPECT_GT(e.fidelity_r2, 0.99);
  }
}

TEST(Lime, DiscretizedSignsForTopQuartileRow) {
  const std::vector<double> coef{2.0, -3.0};
  const Matrix bg = gaussian_matrix(400, 2, 2);
  const std::vector<double> row{2.0, 2.0};
  const auto e = lime_explain(linear_model(coef), row, bg, FeatureInfo::numeric(2), LimeOptions{}, 3);
  EXPECT_GT(e.terms[0].weight, 0);
  EXPECT_LT(e.terms[1].weight, 0);
  EXPECT_FALSE(e.terms[0].condition.empty());
}

TEST(Lime, DeterministicGivenSeed) {
  const Matrix bg = gaussian_matrix(100, 3, 4);
  const auto f = rowwise([](Row r) { return std::tanh(r[0] - r[1] * r[2]); });
  const std::vector<double> row{0.1, 0.2, 0.3};
  const auto a = lime_explain(f, row, bg, FeatureInfo::numeric(3), {}, 9).to_json();
  const auto b = lime_explain(f, row, bg, FeatureInfo::numeric(3), {}, 9).to_json();
  EXPECT_EQ(a, b);
}

TEST(Lime, IgnoredFeatureGetsNegligibleWeight) {
  const Matrix bg = gaussian_matrix(300, 3, 5);
  LimeOptions o;
  o.discretize = false;
  const std::vector<double> row{0.5, -0.5, 0.0};
  const auto e = lime_explain(linear_model({1.0, 0.0, -1.0}), row, bg, FeatureInfo::numeric(3), o, 1);
  EXPECT_LT(std::abs(e.terms[1].weight), 1e-3 * std::abs(e.terms[0].weight) + 1e-6);
}
