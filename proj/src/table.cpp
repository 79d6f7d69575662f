#include "nephro/table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace nephro {

void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

std::string to_string(ColumnKind kind) {
  return kind == ColumnKind::kNumeric ? "numeric" : "nominal";
}

Schema::Schema(std::vector<ColumnSpec> columns, std::string target)
    : columns_(std::move(columns)), target_(std::move(target)) {
  std::set<std::string> seen;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw DataError("schema: empty column name");
    if (!seen.insert(c.name).second) throw DataError("schema: duplicate column '" + c.name + "'");
    if (c.kind == ColumnKind::kNumeric && !c.categories.empty()) {
      throw DataError("schema: numeric column '" + c.name + "' lists categories");
    }
  }
  if (!target_.empty() && !seen.count(target_)) {
    throw DataError("schema: target '" + target_ + "' is not a column");
  }
}

Schema Schema::from_json(const nlohmann::json& doc) {
  std::vector<ColumnSpec> columns;
  for (const auto& c : doc.at("columns")) {
    ColumnSpec spec;
    spec.name = c.at("name").get<std::string>();
    const auto kind = c.at("kind").get<std::string>();
    if (kind == "numeric") {
      spec.kind = ColumnKind::kNumeric;
    } else if (kind == "nominal") {
      spec.kind = ColumnKind::kNominal;
    } else {
      throw DataError("schema: column '" + spec.name + "' has unknown kind '" + kind + "'");
    }
    if (c.contains("categories")) spec.categories = c.at("categories").get<std::vector<std::string>>();
    if (c.contains("unit")) spec.unit = c.at("unit").get<std::string>();
    if (c.contains("range")) {
      const auto r = c.at("range").get<std::vector<double>>();
      if (r.size() != 2 || !(r[0] <= r[1])) throw DataError("schema: bad range for '" + spec.name + "'");
      spec.range = std::make_pair(r[0], r[1]);
    }
    columns.push_back(std::move(spec));
  }
  return Schema(std::move(columns), doc.value("target", std::string{}));
}

Schema Schema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("schema file '" + path + "': " + e.what());
  }
  return from_json(doc);
}

nlohmann::json Schema::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns_) {
    nlohmann::json j{{"name", c.name}, {"kind", to_string(c.kind)}};
    if (c.kind == ColumnKind::kNominal) j["categories"] = c.categories;
    if (!c.unit.empty()) j["unit"] = c.unit;
    if (c.range) j["range"] = {c.range->first, c.range->second};
    cols.push_back(std::move(j));
  }
  return {{"target", target_}, {"columns", std::move(cols)}};
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw DataError("unknown column '" + std::string(name) + "'");
}

std::vector<std::size_t> Schema::feature_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name != target_) out.push_back(i);
  }
  return out;
}

std::string Schema::fingerprint() const {
  std::string canon = target_;
  for (const auto& c : columns_) {
    canon += '|' + c.name + ':' + to_string(c.kind);
    for (const auto& cat : c.categories) canon += ',' + cat;
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

std::size_t Schema::intern_category(std::size_t column, const std::string& label) {
  auto& cats = columns_.at(column).categories;
  for (std::size_t k = 0; k < cats.size(); ++k) {
    if (cats[k] == label) return k;
  }
  cats.push_back(label);
  return cats.size() - 1;
}

DataTable::DataTable(Schema schema, std::size_t n_rows, std::vector<double> cells)
    : schema_(std::move(schema)), n_rows_(n_rows), cells_(std::move(cells)) {
  const std::size_t n_cols = schema_.size();
  if (cells_.size() != n_rows_ * n_cols) {
    throw DataError("table: cell count does not match rows x columns");
  }
  for (std::size_t c = 0; c < n_cols; ++c) {
    const auto& spec = schema_.column(c);
    for (std::size_t r = 0; r < n_rows_; ++r) {
      const double v = cells_[r * n_cols + c];
      if (std::isnan(v)) continue;
      if (!std::isfinite(v)) throw DataError("table: non-finite value in column '" + spec.name + "'");
      if (spec.kind == ColumnKind::kNominal) {
        if (v < 0 || v != std::floor(v) || v >= static_cast<double>(spec.categories.size())) {
          throw DataError("table: category index out of range in column '" + spec.name + "'");
        }
      }
    }
  }
}

bool DataTable::missing(std::size_t r, std::size_t c) const { return std::isnan(at(r, c)); }

std::vector<double> DataTable::column(std::size_t c) const {
  std::vector<double> out(n_rows_);
  for (std::size_t r = 0; r < n_rows_; ++r) out[r] = at(r, c);
  return out;
}

std::size_t DataTable::missing_count() const {
  std::size_t n = 0;
  for (double v : cells_) n += std::isnan(v) ? 1 : 0;
  return n;
}

std::vector<int> DataTable::labels() const {
  const std::size_t t = schema_.target_index();
  std::vector<int> y(n_rows_);
  for (std::size_t r = 0; r < n_rows_; ++r) {
    if (missing(r, t)) throw DataError("missing target label in row " + std::to_string(r));
    y[r] = static_cast<int>(at(r, t));
  }
  return y;
}

std::vector<std::size_t> DataTable::class_counts() const {
  const auto& cats = schema_.column(schema_.target_index()).categories;
  std::vector<std::size_t> counts(cats.size(), 0);
  for (int y : labels()) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

DataTable DataTable::with_cells(std::vector<double> cells) const {
  return DataTable(schema_, n_rows_, std::move(cells));
}

DataTable DataTable::subset_rows(std::span<const std::size_t> rows) const {
  std::vector<double> cells;
  cells.reserve(rows.size() * cols());
  for (std::size_t r : rows) {
    const auto src = row(r);
    cells.insert(cells.end(), src.begin(), src.end());
  }
  return DataTable(schema_, rows.size(), std::move(cells));
}

std::string_view trim_cell(std::string_view token) {
  constexpr std::string_view kSpace = " \t\r\n\v\f";
  const auto b = token.find_first_not_of(kSpace);
  if (b == std::string_view::npos) return {};
  const auto e = token.find_last_not_of(kSpace);
  return token.substr(b, e - b + 1);
}

bool is_missing_marker(std::string_view token) {
  const auto t = trim_cell(token);
  return t.empty() || t == "?";
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::optional<double> parse_number(std::string_view t) {
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  double v = 0;
  const auto* end = t.data() + t.size();
  const auto res = std::from_chars(t.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

DataTable parse_dataset(std::istream& in, const Schema& schema_in) {
  Schema schema = schema_in;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty input: header row required");
  const auto header = split_csv_line(line);
  std::vector<std::size_t> column_of(header.size());
  std::vector<bool> seen(schema.size(), false);
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = std::string(trim_cell(header[i]));
    const auto idx = schema.find(name);
    if (!idx) throw DataError("unknown column '" + name + "' in header");
    if (seen[*idx]) throw DataError("duplicate column '" + name + "' in header");
    seen[*idx] = true;
    column_of[i] = *idx;
  }
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (!seen[c]) throw DataError("header is missing column '" + schema.column(c).name + "'");
  }

  std::vector<double> cells;
  std::size_t n_rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_cell(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError("ragged row at line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> row(schema.size(), kMissing);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::size_t c = column_of[i];
      const auto token = trim_cell(fields[i]);
      if (is_missing_marker(token)) continue;
      if (schema.column(c).kind == ColumnKind::kNumeric) {
        const auto v = parse_number(token);
        if (!v) {
          throw DataError("non-numeric token '" + std::string(token) + "' in numeric column '" +
                          schema.column(c).name + "' at line " + std::to_string(line_no));
        }
        row[c] = *v;
      } else {
        row[c] = static_cast<double>(schema.intern_category(c, std::string(token)));
      }
    }
    cells.insert(cells.end(), row.begin(), row.end());
    ++n_rows;
  }
  return DataTable(std::move(schema), n_rows, std::move(cells));
}

DataTable parse_dataset_file(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  return parse_dataset(in, schema);
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_dataset(std::ostream& out, const DataTable& table) {
  const auto& schema = table.schema();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (c) out << ',';
    out << schema.column(c).name;
  }
  out << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (c) out << ',';
      const double v = table.at(r, c);
      if (std::isnan(v)) {
        out << '?';
      } else if (schema.column(c).kind == ColumnKind::kNominal) {
        out << schema.column(c).categories[static_cast<std::size_t>(v)];
      } else {
        out << format_number(v);
      }
    }
    out << '\n';
  }
}

nlohmann::json StandardizationParams::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t i = 0; i < columns.size(); ++i) {
    j.push_back({{"column", columns[i]}, {"mean", mean[i]}, {"std", stddev[i]}});
  }
  return j;
}

Standardized standardize_fit(const DataTable& table) {
  const auto& schema = table.schema();
  StandardizationParams params;
  for (std::size_t c : schema.feature_indices()) {
    if (schema.column(c).kind != ColumnKind::kNumeric) continue;
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < table.rows(); ++r) {
      if (!table.missing(r, c)) {
        sum += table.at(r, c);
        ++n;
      }
    }
    if (n == 0) throw DataError("standardize: column '" + schema.column(c).name + "' has no observed cells");
    const double mean = sum / static_cast<double>(n);
    double ss = 0;
    for (std::size_t r = 0; r < table.rows(); ++r) {
      if (!table.missing(r, c)) ss += (table.at(r, c) - mean) * (table.at(r, c) - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0)) throw DataError("standardize: zero variance in column '" + schema.column(c).name + "'");
    params.columns.push_back(schema.column(c).name);
    params.mean.push_back(mean);
    params.stddev.push_back(sd);
  }
  return {standardize_apply(table, params), params};
}

DataTable standardize_apply(const DataTable& table, const StandardizationParams& params) {
  std::vector<double> cells = table.cells();
  const std::size_t n_cols = table.cols();
  for (std::size_t i = 0; i < params.columns.size(); ++i) {
    const std::size_t c = table.schema().index_of(params.columns[i]);
    if (table.schema().column(c).kind != ColumnKind::kNumeric) {
      throw DataError("standardize: column '" + params.columns[i] + "' is not numeric");
    }
    if (!(params.stddev[i] > 0)) throw DataError("standardize: non-positive std for '" + params.columns[i] + "'");
    for (std::size_t r = 0; r < table.rows(); ++r) {
      double& v = cells[r * n_cols + c];
      if (!std::isnan(v)) v = (v - params.mean[i]) / params.stddev[i];
    }
  }
  return table.with_cells(std::move(cells));
}

std::vector<std::string> EncodedData::names() const {
  std::vector<std::string> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(f.name);
  return out;
}

std::size_t EncodedData::index_of(std::string_view name) const {
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (features[j].name == name) return j;
  }
  throw DataError("unknown feature '" + std::string(name) + "'");
}

EncodedData EncodedData::select(const std::vector<std::string>& wanted) const {
  EncodedData out;
  out.y = y;
  out.x.resize(x.rows(), static_cast<Eigen::Index>(wanted.size()));
  for (std::size_t k = 0; k < wanted.size(); ++k) {
    const std::size_t j = index_of(wanted[k]);
    out.x.col(static_cast<Eigen::Index>(k)) = x.col(static_cast<Eigen::Index>(j));
    out.features.push_back(features[j]);
  }
  return out;
}

EncodedData EncodedData::subset_rows(std::span<const std::size_t> rows) const {
  EncodedData out;
  out.features = features;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.y.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    out.y[i] = y[rows[i]];
  }
  return out;
}

nlohmann::json EncodedData::encoding_map() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& f : features) {
    nlohmann::json e{{"feature", f.name}, {"kind", to_string(f.kind)}};
    if (f.kind == ColumnKind::kNominal) {
      nlohmann::json codes = nlohmann::json::object();
      for (std::size_t k = 0; k < f.categories.size(); ++k) codes[f.categories[k]] = k;
      e["codes"] = std::move(codes);
    }
    j.push_back(std::move(e));
  }
  return j;
}

EncodedData encode_for_model(const DataTable& table) {
  const auto& schema = table.schema();
  const auto feats = schema.feature_indices();
  EncodedData out;
  out.x.resize(static_cast<Eigen::Index>(table.rows()), static_cast<Eigen::Index>(feats.size()));
  for (std::size_t k = 0; k < feats.size(); ++k) {
    const auto& spec = schema.column(feats[k]);
    out.features.push_back({spec.name, spec.kind, spec.categories});
    for (std::size_t r = 0; r < table.rows(); ++r) {
      const double v = table.at(r, feats[k]);
      if (std::isnan(v)) {
        throw DataError("encode: missing cell in column '" + spec.name + "' row " + std::to_string(r) +
                        " (impute first)");
      }
      out.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = v;
    }
  }
  if (!schema.target().empty()) out.y = table.labels();
  return out;
}

}  // namespace nephro
