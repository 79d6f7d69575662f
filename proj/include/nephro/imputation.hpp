#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "nephro/common.hpp"
#include "nephro/table.hpp"

namespace nephro {

enum class CellOrigin : std::uint8_t { kObserved = 0, kImputed = 1, kFallback = 2 };

// One fitted model for a (target feature, predictor set) pattern.
struct ImputationModel {
  enum class Kind { kLinear, kLogistic, kMean, kMode };

  std::vector<std::string> predictors;  // schema order; the pattern key
  Kind kind = Kind::kLinear;
  // kLinear: one coefficient per predictor.
  Vector coef;
  double intercept = 0;
  // kLogistic: one-vs-rest rows, one per class in `classes`.
  Matrix class_coef;
  Vector class_intercept;
  std::vector<int> classes;
  // kMean / kMode: the constant prediction.
  double constant = 0;
  std::size_t training_rows = 0;
  std::string note;

  bool fallback() const { return kind == Kind::kMean || kind == Kind::kMode; }
  double predict(Row row, const std::vector<std::size_t>& predictor_columns) const;
};

struct ColumnStats {
  std::string feature;
  ColumnKind kind = ColumnKind::kNumeric;
  double min = 0;
  double max = 0;
  double center = 0;  // mean (numeric) or mode code (nominal)
};

struct ImputationTarget {
  std::string feature;
  double missing_fraction = 0;
  std::vector<ImputationModel> models;

  const ImputationModel* find(const std::vector<std::string>& predictors) const;
};

struct ImputationPlan {
  std::string schema_fingerprint;
  std::size_t complete_rows = 0;
  std::vector<ImputationTarget> targets;  // imputation order
  std::vector<ColumnStats> stats;         // every feature column, schema order

  bool empty() const { return targets.empty(); }
  const ImputationTarget* target(std::string_view feature) const;
  const ColumnStats& stat(std::string_view feature) const;
  nlohmann::json to_json() const;
};

struct ImputedTable {
  DataTable table;
  std::vector<CellOrigin> provenance;  // row-major, same shape as the table

  CellOrigin origin(std::size_t r, std::size_t c) const { return provenance[r * table.cols() + c]; }
  std::size_t imputed_count() const;
  std::size_t fallback_count() const;
  // Sidecar CSV with the same header; cells are observed/imputed/fallback.
  void write_mask(std::ostream& out) const;
};

// Fits one model per (feature, observed-predictor pattern) on the rows with no
// missing cell. Features are imputed in ascending missing fraction; features
// earlier in that order count as available predictors for later ones.
ImputationPlan fit_imputation_plan(const DataTable& table, std::size_t min_complete_rows = 20);

ImputedTable apply_imputation(const DataTable& table, const ImputationPlan& plan);

}  // namespace nephro
