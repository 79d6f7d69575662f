#include "nephro/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nephro/kernels.hpp"

namespace nephro {

BalancedData smote_balance(const Matrix& x, std::span<const int> y, const std::vector<bool>& nominal,
                           int k_neighbors, std::uint64_t seed) {
  if (static_cast<Eigen::Index>(y.size()) != x.rows()) throw ConfigError("SMOTE: X and y disagree in length");
  if (k_neighbors < 1) throw ConfigError("SMOTE: k_neighbors must be >= 1");
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t i = 0; i < y.size(); ++i) members[static_cast<std::size_t>(y[i] != 0)].push_back(i);

  BalancedData out;
  out.n_original = y.size();
  out.x = x;
  out.y.assign(y.begin(), y.end());
  const int minority = members[0].size() < members[1].size() ? 0 : 1;
  const auto& pool = members[static_cast<std::size_t>(minority)];
  const std::size_t deficit = members[static_cast<std::size_t>(1 - minority)].size() - pool.size();
  if (deficit == 0) return out;
  if (pool.size() <= static_cast<std::size_t>(k_neighbors)) {
    throw DataError("SMOTE: minority class too small (" + std::to_string(pool.size()) +
                    " rows for k_neighbors = " + std::to_string(k_neighbors) + ")");
  }

  // Neighbors by Euclidean distance after standardizing every column.
  Vector scale(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double m = x.col(j).mean();
    const double sd = std::sqrt((x.col(j).array() - m).square().mean());
    scale(j) = sd > 1e-12 ? sd : 1.0;
  }
  const std::size_t k = static_cast<std::size_t>(k_neighbors);
  std::vector<std::vector<std::size_t>> neighbors(pool.size());
  kernels::for_each_index(pool.size(), [&](std::size_t a) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(pool.size() - 1);
    for (std::size_t b = 0; b < pool.size(); ++b) {
      if (a == b) continue;
      const double d = ((x.row(static_cast<Eigen::Index>(pool[a])) - x.row(static_cast<Eigen::Index>(pool[b])))
                            .transpose()
                            .cwiseQuotient(scale))
                           .squaredNorm();
      dist.emplace_back(d, b);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t i = 0; i < k; ++i) neighbors[a].push_back(dist[i].second);
  });

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_seed(0, pool.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_nb(0, k - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  out.x.conservativeResize(x.rows() + static_cast<Eigen::Index>(deficit), Eigen::NoChange);
  for (std::size_t s = 0; s < deficit; ++s) {
    const std::size_t a = pick_seed(rng);
    const std::size_t b = neighbors[a][pick_nb(rng)];
    const double lambda = unit(rng);
    const auto ra = static_cast<Eigen::Index>(pool[a]);
    const auto rb = static_cast<Eigen::Index>(pool[b]);
    const auto dst = x.rows() + static_cast<Eigen::Index>(s);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const bool nom = static_cast<std::size_t>(j) < nominal.size() && nominal[static_cast<std::size_t>(j)];
      out.x(dst, j) = nom ? x(ra, j) : x(ra, j) + lambda * (x(rb, j) - x(ra, j));
    }
    out.y.push_back(minority);
    out.parents.emplace_back(pool[a], pool[b]);
    out.lambdas.push_back(lambda);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::test_rows(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] == f) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::train_rows(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i) {
    if (fold[i] != f) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::sizes() const {
  std::vector<std::size_t> out(static_cast<std::size_t>(k), 0);
  for (int f : fold) ++out[static_cast<std::size_t>(f)];
  return out;
}

FoldAssignment stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("stratified k-fold: k must be >= 2");
  const std::size_t n = labels.size();
  if (static_cast<std::size_t>(k) > n) throw ConfigError("stratified k-fold: k exceeds the row count");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
  const bool leave_one_out = static_cast<std::size_t>(k) == n;
  Rng rng(seed);
  FoldAssignment fa;
  fa.k = k;
  fa.fold.assign(n, 0);
  // Classes are dealt round-robin in one continuous sequence, so fold sizes
  // and per-class counts each differ by at most one.
  std::size_t position = 0;
  for (auto& [cls, rows] : by_class) {
    if (!leave_one_out && rows.size() < static_cast<std::size_t>(k)) {
      throw DataError("stratified k-fold: class " + std::to_string(cls) + " has " + std::to_string(rows.size()) +
                      " members, fewer than k = " + std::to_string(k));
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t r : rows) fa.fold[r] = static_cast<int>(position++ % static_cast<std::size_t>(k));
  }
  return fa;
}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth == 0) {
    (predicted == 0 ? tp : fn) += 1;
  } else {
    (predicted == 0 ? fp : tn) += 1;
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

nlohmann::json ConfusionMatrix::to_json() const {
  return {{"tp", tp}, {"fp", fp}, {"fn", fn}, {"tn", tn}, {"total", total()}, {"positive_class", "CKD"}};
}

nlohmann::json ClassificationMetrics::to_json() const {
  return {{"precision", precision}, {"recall", recall},         {"f1", f1},         {"accuracy", accuracy},
          {"ckd_precision", ckd_precision}, {"ckd_recall", ckd_recall}, {"ckd_f1", ckd_f1}};
}

namespace {

double ratio(double a, double b) { return b > 0 ? a / b : 0.0; }
double harmonic(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace

ClassificationMetrics metrics_from(const ConfusionMatrix& cm) {
  ClassificationMetrics m;
  const double p0 = ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fp));
  const double r0 = ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fn));
  const double p1 = ratio(static_cast<double>(cm.tn), static_cast<double>(cm.tn + cm.fn));
  const double r1 = ratio(static_cast<double>(cm.tn), static_cast<double>(cm.tn + cm.fp));
  m.ckd_precision = p0;
  m.ckd_recall = r0;
  m.ckd_f1 = harmonic(p0, r0);
  m.precision = (p0 + p1) / 2;
  m.recall = (r0 + r1) / 2;
  m.f1 = (harmonic(p0, r0) + harmonic(p1, r1)) / 2;
  m.accuracy = ratio(static_cast<double>(cm.tp + cm.tn), static_cast<double>(cm.total()));
  return m;
}

nlohmann::json EvaluationReport::to_json() const {
  nlohmann::json per_fold = nlohmann::json::array();
  for (const auto& f : folds) {
    per_fold.push_back({{"fold", f.fold},
                        {"n_train", f.n_train},
                        {"n_test", f.n_test},
                        {"confusion", f.confusion.to_json()},
                        {"metrics", f.metrics.to_json()}});
  }
  return {{"model", model},
          {"folds", std::move(per_fold)},
          {"cumulative_confusion", cumulative.to_json()},
          {"cumulative_metrics", cumulative_metrics.to_json()},
          {"mean_fold_metrics", mean_fold_metrics.to_json()},
          {"best_fold", best_fold},
          {"notes", notes}};
}

EvaluationReport evaluate_cv(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                             const FoldAssignment& folds, const std::vector<bool>& nominal) {
  if (folds.fold.size() != y.size()) throw ConfigError("evaluate_cv: fold assignment does not match the rows");
  EvaluationReport report;
  report.model = to_string(spec.family);
  report.folds.resize(static_cast<std::size_t>(folds.k));
  report.oof_proba.assign(y.size(), 0.0);
  kernels::for_each_index(static_cast<std::size_t>(folds.k), [&](std::size_t fi) {
    const int f = static_cast<int>(fi);
    const auto train_idx = folds.train_rows(f);
    const auto test_idx = folds.test_rows(f);
    Matrix xt(static_cast<Eigen::Index>(train_idx.size()), x.cols());
    std::vector<int> yt(train_idx.size());
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
      xt.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(train_idx[i]));
      yt[i] = y[train_idx[i]];
    }
    PredictorPtr model;
    try {
      model = train(spec, xt, yt, nominal);
    } catch (const std::exception& e) {
      throw ComputeError("evaluate_cv: training failed in fold " + std::to_string(f) + ": " + e.what());
    }
    FoldResult res;
    res.fold = f;
    res.n_train = train_idx.size();
    res.n_test = test_idx.size();
    for (std::size_t r : test_idx) {
      const double p = model->proba1(row_of(x, static_cast<Eigen::Index>(r)));
      report.oof_proba[r] = p;
      res.confusion.add(y[r], p > 0.5 ? 1 : 0);
    }
    res.metrics = metrics_from(res.confusion);
    report.folds[fi] = res;
  });
  for (const auto& f : report.folds) {
    report.cumulative += f.confusion;
    report.mean_fold_metrics.precision += f.metrics.precision / folds.k;
    report.mean_fold_metrics.recall += f.metrics.recall / folds.k;
    report.mean_fold_metrics.f1 += f.metrics.f1 / folds.k;
    report.mean_fold_metrics.accuracy += f.metrics.accuracy / folds.k;
    report.mean_fold_metrics.ckd_precision += f.metrics.ckd_precision / folds.k;
    report.mean_fold_metrics.ckd_recall += f.metrics.ckd_recall / folds.k;
    report.mean_fold_metrics.ckd_f1 += f.metrics.ckd_f1 / folds.k;
    if (f.metrics.f1 > report.folds[static_cast<std::size_t>(report.best_fold)].metrics.f1) report.best_fold = f.fold;
  }
  report.cumulative_metrics = metrics_from(report.cumulative);
  return report;
}

std::vector<std::map<std::string, double>> expand_grid(const ParamGrid& grid) {
  std::vector<std::map<std::string, double>> cells{{}};
  for (const auto& [name, values] : grid) {
    if (values.empty()) throw ConfigError("grid axis '" + name + "' has no values");
    std::vector<std::map<std::string, double>> next;
    for (const auto& cell : cells) {
      for (double v : values) {
        auto c = cell;
        c[name] = v;
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

nlohmann::json GridSearchResult::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json j{{"params", c.params}, {"f1", c.f1}, {"failed", c.failed}};
    if (c.failed) j["error"] = c.error;
    arr.push_back(std::move(j));
  }
  return {{"best", best.to_json()}, {"best_f1", best_f1}, {"cells", std::move(arr)}};
}

GridSearchResult grid_search(Family family, const ParamGrid& grid, std::uint64_t seed, const Matrix& x,
                             std::span<const int> y, const FoldAssignment& folds, const std::vector<bool>& nominal) {
  const auto lattice = expand_grid(grid);
  GridSearchResult result;
  bool found = false;
  for (const auto& params : lattice) {
    GridCell cell;
    cell.params = params;
    try {
      ModelSpec spec{family, params, seed};
      cell.f1 = evaluate_cv(spec, x, y, folds, nominal).cumulative_metrics.f1;
      if (!found || cell.f1 > result.best_f1) {
        result.best = spec;
        result.best_f1 = cell.f1;
        found = true;
      }
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
      warn("grid search: cell skipped: " + cell.error);
    }
    result.cells.push_back(std::move(cell));
  }
  if (!found) throw ComputeError("grid search: every cell failed");
  return result;
}

}  // namespace nephro
