#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nephro/common.hpp"
#include "nephro/models.hpp"

namespace nephro {

struct BalancedData {
  Matrix x;
  std::vector<int> y;
  std::size_t n_original = 0;
  // For synthetic row n_original + s: the seed row, its neighbor and lambda.
  std::vector<std::pair<std::size_t, std::size_t>> parents;
  std::vector<double> lambdas;
};

// Oversamples the minority class until both classes have equal counts.
// Original rows come first and are untouched; synthetic rows are appended.
BalancedData smote_balance(const Matrix& x, std::span<const int> y, const std::vector<bool>& nominal,
                           int k_neighbors, std::uint64_t seed);

struct FoldAssignment {
  int k = 0;
  std::vector<int> fold;  // per row, in [0, k)

  std::vector<std::size_t> test_rows(int f) const;
  std::vector<std::size_t> train_rows(int f) const;
  std::vector<std::size_t> sizes() const;
};

// k == n (leave-one-out) is accepted even though classes then have fewer than k members.
FoldAssignment stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed);

// Class 0 (CKD) is the positive class.
struct ConfusionMatrix {
  long tp = 0, fp = 0, fn = 0, tn = 0;

  void add(int truth, int predicted);
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  long total() const { return tp + fp + fn + tn; }
  nlohmann::json to_json() const;
};

struct ClassificationMetrics {
  // Macro averages over both classes.
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;
  // CKD-positive figures.
  double ckd_precision = 0, ckd_recall = 0, ckd_f1 = 0;

  nlohmann::json to_json() const;
};

ClassificationMetrics metrics_from(const ConfusionMatrix& cm);

struct FoldResult {
  int fold = 0;
  std::size_t n_train = 0, n_test = 0;
  ConfusionMatrix confusion;
  ClassificationMetrics metrics;
};

struct EvaluationReport {
  std::string model;
  std::vector<FoldResult> folds;
  ConfusionMatrix cumulative;
  ClassificationMetrics cumulative_metrics;
  ClassificationMetrics mean_fold_metrics;
  int best_fold = 0;
  // Out-of-fold P(class 1) per row.
  std::vector<double> oof_proba;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
};

EvaluationReport evaluate_cv(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                             const FoldAssignment& folds, const std::vector<bool>& nominal = {});

// Hyperparameter lattice: cells enumerate in lexicographic order, first key slowest.
using ParamGrid = std::vector<std::pair<std::string, std::vector<double>>>;

std::vector<std::map<std::string, double>> expand_grid(const ParamGrid& grid);

struct GridCell {
  std::map<std::string, double> params;
  double f1 = 0;
  bool failed = false;
  std::string error;
};

struct GridSearchResult {
  ModelSpec best;
  double best_f1 = 0;
  std::vector<GridCell> cells;

  nlohmann::json to_json() const;
};

// Scores every cell by cumulative macro F1 over the folds; ties keep the earlier cell.
GridSearchResult grid_search(Family family, const ParamGrid& grid, std::uint64_t seed, const Matrix& x,
                             std::span<const int> y, const FoldAssignment& folds,
                             const std::vector<bool>& nominal = {});

}  // namespace nephro
