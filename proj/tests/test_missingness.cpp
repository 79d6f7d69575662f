#include <sstream>

#include <gtest/gtest.h>

#include "nephro/missingness.hpp"
#include "nephro/table.hpp"
#include "support.hpp"

using namespace nephro;
using namespace nephro::testing;

namespace {

// Same formulas as mcar_fixture() in tests/oracles/freeze_values.py.
Matrix oracle_fixture() {
  Matrix x(40, 3);
  for (int r = 0; r < 40; ++r) {
    const double i = r;
    const double a = std::sin(0.9 * i) * 3 + 10;
    x(r, 0) = a;
    x(r, 1) = 0.5 * a + std::cos(1.7 * i);
    x(r, 2) = std::sin(0.31 * i + 1) * 2 - 0.2 * a;
    if (r % 5 == 1) x(r, 1) = kMissing;
    if (r % 7 == 3) x(r, 2) = kMissing;
    if (r % 11 == 4 && r % 5 != 1) x(r, 0) = kMissing;
  }
  return x;
}

McarOptions tight() {
  McarOptions o;
  o.max_iter = 5000;
  o.tolerance = 1e-12;
  o.ridge_scale = 0;
  return o;
}

}  // namespace

TEST(Profile, CountsAndExactFractions) {
  const Schema schema({{"a", ColumnKind::kNumeric, {}, "", std::nullopt},
                       {"b", ColumnKind::kNumeric, {}, "", std::nullopt},
                       {"class", ColumnKind::kNominal, {"ckd", "notckd"}, "", std::nullopt}},
                      "class");
  std::istringstream in("a,b,class\n1,?,ckd\n?,?,ckd\n3,4,notckd\n");
  const auto p = profile_missingness(parse_dataset(in, schema));
  ASSERT_EQ(p.entries.size(), 2u);
  EXPECT_EQ(p.at("a").count, 1u);
  EXPECT_EQ(p.at("b").count, 2u);
  EXPECT_DOUBLE_EQ(p.at("b").fraction, 2.0 / 3.0);
}

TEST(ChiSquare, MatchesScipy) {
  // scipy.stats.chi2.sf, tests/oracles/freeze_values.py
  EXPECT_NEAR(chi_square_sf(3.84, 1), 0.05004352124870519, 1e-14);
  EXPECT_NEAR(chi_square_sf(10.0, 4), 0.04042768199451279, 1e-14);
  EXPECT_NEAR(chi_square_sf(955.824126322018, 765) / 2.8127411547898923e-06, 1.0, 1e-9);
  EXPECT_NEAR(chi_square_sf(30.0, 40), 0.8752187849674751, 1e-13);
  EXPECT_DOUBLE_EQ(chi_square_sf(0.0, 3), 1.0);
}

TEST(Patterns, GroupsRowsByObservedMask) {
  const auto x = oracle_fixture();
  const auto pats = missing_patterns(x);
  EXPECT_EQ(pats.size(), 5u);
  std::size_t rows = 0;
  for (const auto& p : pats) rows += p.rows.size();
  EXPECT_EQ(rows, 40u);
}

TEST(Em, CompleteDataGivesSampleMoments) {
  const Matrix x = gaussian_matrix(50, 3, 11);
  const auto est = em_mean_covariance(x, missing_patterns(x), tight());
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / 50.0;
  EXPECT_LT((est.mean - mean.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((est.covariance - cov).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Little, MatchesIndependentImplementation) {
  // numpy EM + Little statistic, tests/oracles/freeze_values.py
  const auto r = little_mcar_test(oracle_fixture(), tight());
  EXPECT_NEAR(r.statistic, 8.274645348527429, 1e-6);
  EXPECT_EQ(r.degrees_of_freedom, 7);
  EXPECT_NEAR(r.p_value, 0.30900015634867223, 1e-7);
  EXPECT_EQ(r.n_patterns, 5u);
}

TEST(Little, InvariantToColumnRescaling) {
  Matrix x = oracle_fixture();
  const auto a = little_mcar_test(x, tight());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if (!std::isnan(x(r, 1))) x(r, 1) = 1000 * x(r, 1) - 7;
  }
  const auto b = little_mcar_test(x, tight());
  EXPECT_NEAR(a.statistic, b.statistic, 1e-8);
}

TEST(Little, DropsConstantColumnsAndEmptyRows) {
  Matrix x = oracle_fixture();
  Matrix wide(41, 4);
  wide.setConstant(5.0);
  wide.topLeftCorner(40, 3) = x;
  wide.row(40).setConstant(kMissing);
  const auto r = little_mcar_test(wide, tight());
  EXPECT_EQ(r.dropped_rows, 1u);
  EXPECT_EQ(r.dropped_columns.size(), 1u);
  EXPECT_NEAR(r.statistic, 8.274645348527429, 1e-6);
}

TEST(Little, NeedsTwoPatterns) {
  const Matrix x = gaussian_matrix(20, 2, 3);
  EXPECT_THROW(little_mcar_test(x), ComputeError);
}

TEST(Little, CalibratedUnderMcar) {
  int rejections = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto r = little_mcar_test(mcar_synthetic(500, 4, 0.1, derive_seed(2024, trial)));
    rejections += r.p_value <= 0.05;
  }
  EXPECT_LE(rejections, 20) << "false rejections out of 200";
}

TEST(Little, PowerUnderMar) {
  int rejections = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto r = little_mcar_test(mar_synthetic(500, 4, derive_seed(77, trial)));
    rejections += r.p_value < 0.005;
  }
  EXPECT_GE(rejections, 160) << "rejections out of 200";
}

TEST(Little, CkdSampleHasTableShape) {
  const auto schema = Schema::load(source_path("data/ckd_schema.json"));
  const auto t = parse_dataset_file(source_path("data/ckd.csv"), schema);
  const auto a = little_mcar_test(t, 0.8, 42);
  EXPECT_EQ(a.sample_size, 320u);
  EXPECT_GT(a.n_patterns, 10u);
  EXPECT_LT(a.p_value, 1e-6);
  const auto b = little_mcar_test(t, 0.8, 42);
  EXPECT_EQ(a.statistic, b.statistic);
  const auto j = a.to_json();
  for (const char* key : {"statistic", "p_value", "n_patterns", "degrees_of_freedom"}) EXPECT_TRUE(j.contains(key));
}
