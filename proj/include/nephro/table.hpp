#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nephro/common.hpp"

namespace nephro {

enum class ColumnKind { kNumeric, kNominal };

std::string to_string(ColumnKind kind);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  // Nominal only. The position of a label is its category code.
  std::vector<std::string> categories;
  std::string unit;
  // Plausible value range used for request validation, never for clamping.
  std::optional<std::pair<double, double>> range;
};

class Schema {
 public:
  Schema() = default;
  Schema(std::vector<ColumnSpec> columns, std::string target);

  static Schema from_json(const nlohmann::json& doc);
  static Schema load(const std::string& path);
  nlohmann::json to_json() const;

  const std::vector<ColumnSpec>& columns() const { return columns_; }
  const ColumnSpec& column(std::size_t i) const { return columns_.at(i); }
  std::size_t size() const { return columns_.size(); }
  const std::string& target() const { return target_; }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws DataError for unknown names.
  std::size_t index_of(std::string_view name) const;
  std::size_t target_index() const { return index_of(target_); }
  // Every column except the target, in schema order.
  std::vector<std::size_t> feature_indices() const;

  // Stable hash over names, kinds, categories and the target.
  std::string fingerprint() const;

  // Returns the code of `label`, appending it when the column has not seen it.
  std::size_t intern_category(std::size_t column, const std::string& label);

 private:
  std::vector<ColumnSpec> columns_;
  std::string target_;
};

// Immutable rows x columns grid. Numeric cells hold their value, nominal cells
// hold the category code; a missing cell is NaN (kMissing).
class DataTable {
 public:
  DataTable() = default;
  DataTable(Schema schema, std::size_t n_rows, std::vector<double> cells);

  const Schema& schema() const { return schema_; }
  std::size_t rows() const { return n_rows_; }
  std::size_t cols() const { return schema_.size(); }

  double at(std::size_t r, std::size_t c) const { return cells_[r * cols() + c]; }
  bool missing(std::size_t r, std::size_t c) const;
  Row row(std::size_t r) const { return {cells_.data() + r * cols(), cols()}; }
  const std::vector<double>& cells() const { return cells_; }
  std::vector<double> column(std::size_t c) const;

  std::size_t missing_count() const;
  // Target codes (CKD = 0, NotCKD = 1 for the shipped schema).
  std::vector<int> labels() const;
  std::vector<std::size_t> class_counts() const;

  DataTable with_cells(std::vector<double> cells) const;
  DataTable subset_rows(std::span<const std::size_t> rows) const;

 private:
  Schema schema_;
  std::size_t n_rows_ = 0;
  std::vector<double> cells_;
};

bool is_missing_marker(std::string_view token);
std::string_view trim_cell(std::string_view token);

// Comma-delimited, header required. `?`, empty and whitespace-only cells are
// missing; tabs and spaces around every cell are stripped.
DataTable parse_dataset(std::istream& in, const Schema& schema);
DataTable parse_dataset_file(const std::string& path, const Schema& schema);

// Canonical CSV: shortest round-trip numbers, category labels, `?` for missing.
void write_dataset(std::ostream& out, const DataTable& table);
std::string format_number(double value);

struct StandardizationParams {
  std::vector<std::string> columns;
  std::vector<double> mean;
  std::vector<double> stddev;

  nlohmann::json to_json() const;
};

struct Standardized {
  DataTable table;
  StandardizationParams params;
};

// x' = (x - mean) / std over observed cells of every numeric non-target column
// (population std). Throws DataError naming a zero-variance column.
Standardized standardize_fit(const DataTable& table);
DataTable standardize_apply(const DataTable& table, const StandardizationParams& params);

struct FeatureEncoding {
  std::string name;
  ColumnKind kind = ColumnKind::kNumeric;
  std::vector<std::string> categories;
};

// Model-ready matrix: one column per non-target column, target codes in `y`.
struct EncodedData {
  Matrix x;
  std::vector<int> y;
  std::vector<FeatureEncoding> features;

  std::size_t rows() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(x.cols()); }
  std::vector<std::string> names() const;
  std::size_t index_of(std::string_view name) const;
  bool nominal(std::size_t j) const { return features[j].kind == ColumnKind::kNominal; }

  EncodedData select(const std::vector<std::string>& names) const;
  EncodedData subset_rows(std::span<const std::size_t> rows) const;
  nlohmann::json encoding_map() const;
};

// Requires a table with no missing cells.
EncodedData encode_for_model(const DataTable& table);

}  // namespace nephro
