#include <sstream>

#include <gtest/gtest.h>

#include "nephro/table.hpp"
#include "support.hpp"

using namespace nephro;
using nephro::testing::source_path;

namespace {

Schema tiny_schema() {
  return Schema({{"x", ColumnKind::kNumeric, {}, "mg/dL", std::pair{0.0, 10.0}},
                 {"rbc", ColumnKind::kNominal, {"abnormal", "normal"}, "", std::nullopt},
                 {"class", ColumnKind::kNominal, {"ckd", "notckd"}, "", std::nullopt}},
                "class");
}

DataTable parse(const std::string& text) {
  std::istringstream in(text);
  return parse_dataset(in, tiny_schema());
}

}  // namespace

TEST(Parse, QuestionMarkWithWhitespaceIsMissing) {
  const auto t = parse("x,rbc,class\n1.5,\t?,ckd\n2,normal,notckd\n");
  ASSERT_EQ(t.rows(), 2u);
  EXPECT_TRUE(t.missing(0, 1));
  EXPECT_FALSE(t.missing(1, 1));
  EXPECT_DOUBLE_EQ(t.at(1, 1), 1.0);
  EXPECT_EQ(t.missing_count(), 1u);
}

TEST(Parse, EmptyCellIsMissing) {
  const auto t = parse("x,rbc,class\n,normal,ckd\n");
  EXPECT_TRUE(t.missing(0, 0));
}

TEST(Parse, HeaderOrderIsFree) {
  const auto t = parse("class,x,rbc\nnotckd,3,abnormal\n");
  EXPECT_DOUBLE_EQ(t.at(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(t.at(0, 2), 1.0);
}

TEST(Parse, RejectsRaggedRow) { EXPECT_THROW(parse("x,rbc,class\n1,normal\n"), DataError); }

TEST(Parse, RejectsNonNumericToken) { EXPECT_THROW(parse("x,rbc,class\nabc,normal,ckd\n"), DataError); }

TEST(Parse, RejectsMissingHeaderColumn) { EXPECT_THROW(parse("x,class\n1,ckd\n"), DataError); }

TEST(Parse, RejectsUnknownHeaderColumn) { EXPECT_THROW(parse("x,rbc,class,zz\n1,normal,ckd,2\n"), DataError); }

TEST(Parse, RoundTripThroughWriter) {
  const auto t = parse("x,rbc,class\n1.25,?,ckd\n7,normal,notckd\n");
  std::ostringstream out;
  write_dataset(out, t);
  std::istringstream in(out.str());
  const auto back = parse_dataset(in, t.schema());
  ASSERT_EQ(back.rows(), t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      EXPECT_EQ(back.missing(r, c), t.missing(r, c));
      if (!t.missing(r, c)) {
        EXPECT_DOUBLE_EQ(back.at(r, c), t.at(r, c));
      }
    }
  }
}

TEST(Standardize, HandExample) {
  const auto t = parse("x,rbc,class\n1,normal,ckd\n3,normal,notckd\n");
  const auto s = standardize_fit(t);
  EXPECT_NEAR(s.table.at(0, 0), -1.0, 1e-15);
  EXPECT_NEAR(s.table.at(1, 0), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(s.params.stddev[0], 1.0);
}

TEST(Schema, FingerprintTracksCategoryCoding) {
  const auto a = tiny_schema();
  EXPECT_EQ(a.fingerprint(), tiny_schema().fingerprint());
  Schema b({{"x", ColumnKind::kNumeric, {}, "mg/dL", std::pair{0.0, 10.0}},
            {"rbc", ColumnKind::kNominal, {"normal", "abnormal"}, "", std::nullopt},
            {"class", ColumnKind::kNominal, {"ckd", "notckd"}, "", std::nullopt}},
           "class");
  EXPECT_NE(a.fingerprint(), b.fingerprint());
}

TEST(CkdFile, ClassCountsAndShape) {
  const auto schema = Schema::load(source_path("data/ckd_schema.json"));
  const auto t = parse_dataset_file(source_path("data/ckd.csv"), schema);
  EXPECT_EQ(t.rows(), 400u);
  EXPECT_EQ(t.cols(), 25u);
  const auto counts = t.class_counts();
  EXPECT_EQ(counts[0], 250u);
  EXPECT_EQ(counts[1], 150u);
}

TEST(CkdFile, HemoglobinMissingCountFromFile) {
  const auto schema = Schema::load(source_path("data/ckd_schema.json"));
  const auto t = parse_dataset_file(source_path("data/ckd.csv"), schema);
  const auto hemo = schema.index_of("hemo");
  std::size_t missing = 0;
  for (std::size_t r = 0; r < t.rows(); ++r) missing += t.missing(r, hemo);
  EXPECT_EQ(missing, 52u);
  // The published 12.93% corresponds to a 402-row denominator.
  EXPECT_NEAR(100.0 * 52 / 402, 12.93, 0.01);
}

TEST(Encode, FeatureMatrixAndLabels) {
  const auto t = parse("x,rbc,class\n1,normal,ckd\n3,abnormal,notckd\n");
  const auto e = encode_for_model(t);
  EXPECT_EQ(e.rows(), 2u);
  EXPECT_EQ(e.cols(), 2u);
  EXPECT_EQ(e.y, (std::vector<int>{0, 1}));
  EXPECT_TRUE(e.nominal(1));
  const auto sub = e.select({"rbc"});
  EXPECT_EQ(sub.cols(), 1u);
  EXPECT_DOUBLE_EQ(sub.x(1, 0), 0.0);
}

TEST(Encode, RejectsMissingCells) {
  const auto t = parse("x,rbc,class\n,normal,ckd\n");
  EXPECT_THROW(encode_for_model(t), DataError);
}
