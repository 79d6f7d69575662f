#include "nephro/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "nephro/linear.hpp"

namespace nephro {

namespace {

std::vector<std::size_t> columns_of(const Schema& schema, const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(schema.index_of(n));
  return out;
}

Matrix design_from(const DataTable& table, std::span<const std::size_t> rows,
                   std::span<const std::size_t> columns) {
  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < columns.size(); ++k) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = table.at(rows[i], columns[k]);
    }
  }
  return x;
}

ImputationModel fallback_model(const ColumnStats& stats, std::vector<std::string> predictors,
                               std::string note) {
  ImputationModel m;
  m.predictors = std::move(predictors);
  m.kind = stats.kind == ColumnKind::kNumeric ? ImputationModel::Kind::kMean : ImputationModel::Kind::kMode;
  m.constant = stats.center;
  m.note = std::move(note);
  return m;
}

// Predictors with no spread on the complete rows get a zero coefficient; the
// design is built over the informative ones only.
std::vector<std::size_t> informative(const Matrix& x) {
  std::vector<std::size_t> keep;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (x.col(j).maxCoeff() > x.col(j).minCoeff()) keep.push_back(static_cast<std::size_t>(j));
  }
  return keep;
}

Matrix take_columns(const Matrix& x, const std::vector<std::size_t>& keep) {
  Matrix out(x.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = x.col(static_cast<Eigen::Index>(keep[k]));
  }
  return out;
}

ImputationModel fit_pattern_model(const DataTable& table, const std::vector<std::size_t>& complete,
                                  std::size_t target_col, const std::vector<std::string>& predictors,
                                  const ColumnStats& stats) {
  const auto& schema = table.schema();
  const auto pcols = columns_of(schema, predictors);
  const Matrix x_all = design_from(table, complete, pcols);
  const auto keep = informative(x_all);
  const Matrix x = take_columns(x_all, keep);
  const Eigen::Index p = static_cast<Eigen::Index>(predictors.size());

  ImputationModel m;
  m.predictors = predictors;
  m.training_rows = complete.size();

  if (schema.column(target_col).kind == ColumnKind::kNumeric) {
    Vector y(static_cast<Eigen::Index>(complete.size()));
    for (std::size_t i = 0; i < complete.size(); ++i) y(static_cast<Eigen::Index>(i)) = table.at(complete[i], target_col);
    const auto fit = linear::fit_ols(x, y);
    if (fit.rank_deficient || !fit.coef.allFinite()) {
      return fallback_model(stats, predictors, "degenerate design matrix");
    }
    m.kind = ImputationModel::Kind::kLinear;
    m.coef = Vector::Zero(p);
    for (std::size_t k = 0; k < keep.size(); ++k) m.coef(static_cast<Eigen::Index>(keep[k])) = fit.coef(static_cast<Eigen::Index>(k));
    m.intercept = fit.intercept;
    return m;
  }

  std::vector<int> labels(complete.size());
  std::set<int> classes;
  for (std::size_t i = 0; i < complete.size(); ++i) {
    labels[i] = static_cast<int>(table.at(complete[i], target_col));
    classes.insert(labels[i]);
  }
  m.kind = ImputationModel::Kind::kLogistic;
  m.classes.assign(classes.begin(), classes.end());
  const Eigen::Index k_classes = static_cast<Eigen::Index>(m.classes.size());
  m.class_coef = Matrix::Zero(k_classes, p);
  m.class_intercept = Vector::Zero(k_classes);
  if (m.classes.size() == 1) {
    m.class_intercept(0) = 1.0;
    m.note = "single class on complete rows";
    return m;
  }
  // Binary targets fit one model for the second class; more classes go one-vs-rest.
  const std::size_t first = m.classes.size() == 2 ? 1 : 0;
  for (std::size_t c = first; c < m.classes.size(); ++c) {
    std::vector<int> yc(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) yc[i] = labels[i] == m.classes[c] ? 1 : 0;
    const auto fit = linear::fit_logit_newton(x, yc);
    if (fit.separated) m.note = "separation on complete rows; coefficients capped";
    for (std::size_t k = 0; k < keep.size(); ++k) {
      m.class_coef(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(keep[k])) = fit.coef(static_cast<Eigen::Index>(k));
    }
    m.class_intercept(static_cast<Eigen::Index>(c)) = fit.intercept;
  }
  if (m.classes.size() == 2) {
    // class 0 score is the complement: logit 0 vs the class-1 logit.
    m.class_coef.row(0).setZero();
    m.class_intercept(0) = 0.0;
  }
  return m;
}

std::string mask_key(const std::vector<std::string>& names) {
  std::string key;
  for (const auto& n : names) key += n + ',';
  return key;
}

}  // namespace

double ImputationModel::predict(Row row, const std::vector<std::size_t>& predictor_columns) const {
  switch (kind) {
    case Kind::kMean:
    case Kind::kMode:
      return constant;
    case Kind::kLinear: {
      double v = intercept;
      for (std::size_t k = 0; k < predictor_columns.size(); ++k) v += coef(static_cast<Eigen::Index>(k)) * row[predictor_columns[k]];
      return v;
    }
    case Kind::kLogistic: {
      std::size_t best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < classes.size(); ++c) {
        double s = class_intercept(static_cast<Eigen::Index>(c));
        for (std::size_t k = 0; k < predictor_columns.size(); ++k) {
          s += class_coef(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) * row[predictor_columns[k]];
        }
        if (s > best_score) {
          best_score = s;
          best = c;
        }
      }
      return static_cast<double>(classes[best]);
    }
  }
  return constant;
}

const ImputationModel* ImputationTarget::find(const std::vector<std::string>& predictors) const {
  for (const auto& m : models) {
    if (m.predictors == predictors) return &m;
  }
  return nullptr;
}

const ImputationTarget* ImputationPlan::target(std::string_view feature) const {
  for (const auto& t : targets) {
    if (t.feature == feature) return &t;
  }
  return nullptr;
}

const ColumnStats& ImputationPlan::stat(std::string_view feature) const {
  for (const auto& s : stats) {
    if (s.feature == feature) return s;
  }
  throw DataError("imputation plan has no statistics for '" + std::string(feature) + "'");
}

nlohmann::json ImputationPlan::to_json() const {
  auto kind_name = [](ImputationModel::Kind k) {
    switch (k) {
      case ImputationModel::Kind::kLinear: return "linear";
      case ImputationModel::Kind::kLogistic: return "logistic";
      case ImputationModel::Kind::kMean: return "mean_fallback";
      case ImputationModel::Kind::kMode: return "mode_fallback";
    }
    return "unknown";
  };
  nlohmann::json tj = nlohmann::json::array();
  for (const auto& t : targets) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : t.models) {
      nlohmann::json mj{{"predictors", m.predictors}, {"kind", kind_name(m.kind)},
                        {"training_rows", m.training_rows}};
      if (m.kind == ImputationModel::Kind::kLinear) {
        mj["intercept"] = m.intercept;
        mj["coefficients"] = std::vector<double>(m.coef.data(), m.coef.data() + m.coef.size());
      } else if (m.kind == ImputationModel::Kind::kLogistic) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t c = 0; c < m.classes.size(); ++c) {
          const auto r = m.class_coef.row(static_cast<Eigen::Index>(c));
          rows.push_back({{"class", m.classes[c]},
                          {"intercept", m.class_intercept(static_cast<Eigen::Index>(c))},
                          {"coefficients", std::vector<double>(r.data(), r.data() + r.size())}});
        }
        mj["classes"] = std::move(rows);
      } else {
        mj["constant"] = m.constant;
      }
      if (!m.note.empty()) mj["note"] = m.note;
      models.push_back(std::move(mj));
    }
    tj.push_back({{"feature", t.feature}, {"missing_fraction", t.missing_fraction}, {"models", std::move(models)}});
  }
  nlohmann::json sj = nlohmann::json::array();
  for (const auto& s : stats) {
    sj.push_back({{"feature", s.feature}, {"kind", to_string(s.kind)}, {"min", s.min}, {"max", s.max},
                  {"center", s.center}});
  }
  return {{"schema_fingerprint", schema_fingerprint},
          {"complete_rows", complete_rows},
          {"order", [&] {
             std::vector<std::string> o;
             for (const auto& t : targets) o.push_back(t.feature);
             return o;
           }()},
          {"targets", std::move(tj)},
          {"column_stats", std::move(sj)}};
}

std::size_t ImputedTable::imputed_count() const {
  return static_cast<std::size_t>(std::count_if(provenance.begin(), provenance.end(),
                                                [](CellOrigin o) { return o != CellOrigin::kObserved; }));
}

std::size_t ImputedTable::fallback_count() const {
  return static_cast<std::size_t>(std::count(provenance.begin(), provenance.end(), CellOrigin::kFallback));
}

void ImputedTable::write_mask(std::ostream& out) const {
  const auto& schema = table.schema();
  for (std::size_t c = 0; c < schema.size(); ++c) out << (c ? "," : "") << schema.column(c).name;
  out << '\n';
  static constexpr const char* kNames[] = {"observed", "imputed", "fallback"};
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      out << (c ? "," : "") << kNames[static_cast<int>(origin(r, c))];
    }
    out << '\n';
  }
}

ImputationPlan fit_imputation_plan(const DataTable& table, std::size_t min_complete_rows) {
  const auto& schema = table.schema();
  const auto feats = schema.feature_indices();

  ImputationPlan plan;
  plan.schema_fingerprint = schema.fingerprint();

  // Column statistics over observed cells, used for clamping and fallbacks.
  for (std::size_t c : feats) {
    ColumnStats s;
    s.feature = schema.column(c).name;
    s.kind = schema.column(c).kind;
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    double sum = 0;
    std::size_t n = 0;
    std::map<double, std::size_t> freq;
    for (std::size_t r = 0; r < table.rows(); ++r) {
      const double v = table.at(r, c);
      if (std::isnan(v)) continue;
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
      sum += v;
      ++n;
      ++freq[v];
    }
    if (n == 0) {
      s.min = s.max = s.center = kMissing;
    } else if (s.kind == ColumnKind::kNumeric) {
      s.center = sum / static_cast<double>(n);
    } else {
      // ties -> lowest code (std::map iterates in ascending order)
      std::size_t best = 0;
      for (const auto& [v, k] : freq) {
        if (k > best) {
          best = k;
          s.center = v;
        }
      }
    }
    plan.stats.push_back(s);
  }

  std::vector<std::size_t> complete;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    bool ok = true;
    for (std::size_t c : feats) ok = ok && !table.missing(r, c);
    if (ok) complete.push_back(r);
  }
  plan.complete_rows = complete.size();

  struct Candidate {
    std::size_t column;
    std::size_t count;
  };
  std::vector<Candidate> order;
  for (std::size_t c : feats) {
    std::size_t count = 0;
    for (std::size_t r = 0; r < table.rows(); ++r) count += table.missing(r, c) ? 1 : 0;
    if (count > 0) order.push_back({c, count});
  }
  if (order.empty()) return plan;
  if (complete.size() < min_complete_rows) {
    throw ComputeError("imputation: insufficient complete cases (" + std::to_string(complete.size()) + " < " +
                       std::to_string(min_complete_rows) + ")");
  }
  std::stable_sort(order.begin(), order.end(), [](const Candidate& a, const Candidate& b) { return a.count < b.count; });

  std::vector<bool> filled(schema.size(), false);
  for (const auto& cand : order) {
    const std::size_t target_col = cand.column;
    ImputationTarget target;
    target.feature = schema.column(target_col).name;
    target.missing_fraction = static_cast<double>(cand.count) / static_cast<double>(table.rows());

    std::set<std::string> seen;
    for (std::size_t r = 0; r < table.rows(); ++r) {
      if (!table.missing(r, target_col)) continue;
      std::vector<std::string> predictors;
      for (std::size_t c : feats) {
        if (c == target_col) continue;
        if (filled[c] || !table.missing(r, c)) predictors.push_back(schema.column(c).name);
      }
      if (!seen.insert(mask_key(predictors)).second) continue;
      const auto& stats = plan.stat(target.feature);
      if (predictors.empty()) {
        target.models.push_back(fallback_model(stats, {}, "no observed predictors"));
      } else {
        target.models.push_back(fit_pattern_model(table, complete, target_col, predictors, stats));
      }
    }
    filled[target_col] = true;
    plan.targets.push_back(std::move(target));
  }
  return plan;
}

ImputedTable apply_imputation(const DataTable& table, const ImputationPlan& plan) {
  const auto& schema = table.schema();
  const auto feats = schema.feature_indices();
  const std::size_t n_cols = schema.size();
  std::vector<double> cells = table.cells();
  std::vector<CellOrigin> provenance(cells.size(), CellOrigin::kObserved);

  auto fill = [&](std::size_t r, std::size_t c, double value, CellOrigin origin) {
    const auto& stats = plan.stat(schema.column(c).name);
    if (stats.kind == ColumnKind::kNumeric) {
      value = std::clamp(value, stats.min, stats.max);
    } else {
      value = std::clamp(std::round(value), 0.0, static_cast<double>(schema.column(c).categories.size() - 1));
    }
    cells[r * n_cols + c] = value;
    provenance[r * n_cols + c] = origin;
  };

  std::vector<std::size_t> sequence;
  for (const auto& t : plan.targets) sequence.push_back(schema.index_of(t.feature));
  for (std::size_t c : feats) {
    if (std::find(sequence.begin(), sequence.end(), c) == sequence.end()) sequence.push_back(c);
  }

  for (std::size_t c : sequence) {
    const auto* target = plan.target(schema.column(c).name);
    for (std::size_t r = 0; r < table.rows(); ++r) {
      if (!std::isnan(cells[r * n_cols + c])) continue;
      const auto& stats = plan.stat(schema.column(c).name);
      std::vector<std::string> predictors;
      std::vector<std::size_t> pcols;
      for (std::size_t f : feats) {
        if (f != c && !std::isnan(cells[r * n_cols + f])) {
          predictors.push_back(schema.column(f).name);
          pcols.push_back(f);
        }
      }
      const ImputationModel* model = target ? target->find(predictors) : nullptr;
      if (model && !model->fallback()) {
        fill(r, c, model->predict({cells.data() + r * n_cols, n_cols}, pcols), CellOrigin::kImputed);
      } else if (!std::isnan(stats.center)) {
        fill(r, c, stats.center, CellOrigin::kFallback);
      } else {
        throw ComputeError("imputation: no model and no fallback for '" + schema.column(c).name + "' in row " +
                           std::to_string(r));
      }
    }
  }
  const std::size_t fallbacks = static_cast<std::size_t>(std::count(provenance.begin(), provenance.end(), CellOrigin::kFallback));
  if (fallbacks > 0) {
    warn("imputation: " + std::to_string(fallbacks) + " cell(s) filled by the mean/mode fallback");
  }
  return {table.with_cells(std::move(cells)), std::move(provenance)};
}

}  // namespace nephro
