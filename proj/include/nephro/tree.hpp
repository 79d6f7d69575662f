#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nephro/common.hpp"

namespace nephro {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  double impurity = 0;  // Gini for classification trees
  double sample_fraction = 0;
  std::array<int, 2> class_counts{0, 0};
  std::array<double, 2> class_weight{0, 0};
  // Classification: P(class 1). Newton trees: the leaf score.
  double value = 0;
  // Weighted impurity decrease (classification) or split gain (Newton).
  double gain = 0;
  int left = -1;
  int right = -1;
  int depth = 0;

  bool leaf() const { return feature < 0; }
};

struct TreeParams {
  int max_depth = 16;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  double min_impurity_decrease = 1e-7;
  // Features examined per split; 0 means all.
  int max_features = 0;
};

struct NewtonTreeParams {
  int max_depth = 3;
  double lambda = 1.0;
  double min_child_weight = 1.0;
};

class Tree {
 public:
  Tree() = default;
  explicit Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& root() const { return nodes_.front(); }
  std::size_t leaf_index(Row x) const;
  double value(Row x) const { return nodes_[leaf_index(x)].value; }
  int depth() const;
  // Sum of node gains per feature, unnormalized.
  Vector raw_importances(std::size_t n_features) const;

  nlohmann::json to_json() const;
  static Tree from_json(const nlohmann::json& doc);
  // Nested rendering document with feature names.
  nlohmann::json export_nested(const std::vector<std::string>& feature_names) const;

 private:
  std::vector<TreeNode> nodes_;
};

double gini(double w0, double w1);

// CART on rows with positive weight. Ties between equal-gain splits go to the
// lowest feature index, then the lowest threshold. `rng` is only consulted
// when params.max_features restricts the candidate features.
Tree build_classification_tree(const Matrix& x, std::span<const int> y, std::span<const double> weights,
                               const TreeParams& params, Rng* rng = nullptr);

// Second-order regression tree on gradients/hessians; leaves hold -G/(H+lambda).
Tree build_newton_tree(const Matrix& x, std::span<const double> grad, std::span<const double> hess,
                       const NewtonTreeParams& params);

}  // namespace nephro
