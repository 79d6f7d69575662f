#include "nephro/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace nephro {

namespace {

constexpr double kTieEps = 1e-12;

struct SortedColumn {
  std::vector<std::pair<double, std::size_t>> items;  // (value, row)
};

void sort_rows_by(const Matrix& x, const std::vector<std::size_t>& rows, int feature, SortedColumn& col) {
  col.items.clear();
  col.items.reserve(rows.size());
  for (std::size_t r : rows) col.items.emplace_back(x(static_cast<Eigen::Index>(r), feature), r);
  std::sort(col.items.begin(), col.items.end());
}

double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

std::vector<int> candidate_features(int d, int max_features, Rng* rng) {
  std::vector<int> feats(static_cast<std::size_t>(d));
  std::iota(feats.begin(), feats.end(), 0);
  if (max_features <= 0 || max_features >= d || rng == nullptr) return feats;
  for (int i = 0; i < max_features; ++i) {
    std::uniform_int_distribution<int> pick(i, d - 1);
    std::swap(feats[static_cast<std::size_t>(i)], feats[static_cast<std::size_t>(pick(*rng))]);
  }
  feats.resize(static_cast<std::size_t>(max_features));
  std::sort(feats.begin(), feats.end());
  return feats;
}

struct ClassBuilder {
  const Matrix& x;
  std::span<const int> y;
  std::span<const double> w;
  const TreeParams& params;
  Rng* rng;
  double root_weight = 0;
  std::vector<TreeNode> nodes;
  SortedColumn scratch;

  int grow(const std::vector<std::size_t>& rows, int depth) {
    TreeNode node;
    node.depth = depth;
    for (std::size_t r : rows) {
      const int c = y[r];
      node.class_weight[static_cast<std::size_t>(c)] += w[r];
      node.class_counts[static_cast<std::size_t>(c)] += 1;
    }
    const double total = node.class_weight[0] + node.class_weight[1];
    node.impurity = gini(node.class_weight[0], node.class_weight[1]);
    node.sample_fraction = total / root_weight;
    node.value = total > 0 ? node.class_weight[1] / total : 0.5;
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(node);

    const bool can_split = depth < params.max_depth && static_cast<int>(rows.size()) >= params.min_samples_split &&
                           node.impurity > 0;
    if (!can_split) return id;

    int best_feature = -1;
    double best_threshold = 0, best_gain = -1;
    for (int f : candidate_features(static_cast<int>(x.cols()), params.max_features, rng)) {
      sort_rows_by(x, rows, f, scratch);
      double l0 = 0, l1 = 0;
      int n_left = 0;
      const auto& items = scratch.items;
      for (std::size_t i = 0; i + 1 < items.size(); ++i) {
        const std::size_t r = items[i].second;
        (y[r] == 0 ? l0 : l1) += w[r];
        ++n_left;
        if (!(items[i].first < items[i + 1].first)) continue;
        const int n_right = static_cast<int>(items.size()) - n_left;
        if (n_left < params.min_samples_leaf || n_right < params.min_samples_leaf) continue;
        const double wl = l0 + l1;
        const double wr = total - wl;
        if (wl <= 0 || wr <= 0) continue;
        const double r0 = node.class_weight[0] - l0;
        const double r1 = node.class_weight[1] - l1;
        const double child = (wl * gini(l0, l1) + wr * gini(r0, r1)) / total;
        const double gain = (total / root_weight) * (node.impurity - child);
        if (gain > best_gain + kTieEps) {
          best_gain = gain;
          best_feature = f;
          best_threshold = midpoint(items[i].first, items[i + 1].first);
        }
      }
    }
    if (best_feature < 0 || best_gain < params.min_impurity_decrease) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (x(static_cast<Eigen::Index>(r), best_feature) <= best_threshold ? left : right).push_back(r);
    }
    nodes[static_cast<std::size_t>(id)].feature = best_feature;
    nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
    nodes[static_cast<std::size_t>(id)].gain = best_gain;
    const int l = grow(left, depth + 1);
    const int rr = grow(right, depth + 1);
    nodes[static_cast<std::size_t>(id)].left = l;
    nodes[static_cast<std::size_t>(id)].right = rr;
    return id;
  }
};

struct NewtonBuilder {
  const Matrix& x;
  std::span<const double> g;
  std::span<const double> h;
  const NewtonTreeParams& params;
  double n_total = 0;
  std::vector<TreeNode> nodes;
  SortedColumn scratch;

  double score(double gs, double hs) const { return gs * gs / (hs + params.lambda); }

  int grow(const std::vector<std::size_t>& rows, int depth) {
    double gs = 0, hs = 0;
    for (std::size_t r : rows) {
      gs += g[r];
      hs += h[r];
    }
    TreeNode node;
    node.depth = depth;
    node.value = -gs / (hs + params.lambda);
    node.sample_fraction = static_cast<double>(rows.size()) / n_total;
    node.class_counts = {static_cast<int>(rows.size()), 0};
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(node);
    if (depth >= params.max_depth || rows.size() < 2) return id;

    const double parent = score(gs, hs);
    int best_feature = -1;
    double best_threshold = 0, best_gain = 0;
    for (int f = 0; f < static_cast<int>(x.cols()); ++f) {
      sort_rows_by(x, rows, f, scratch);
      double gl = 0, hl = 0;
      const auto& items = scratch.items;
      for (std::size_t i = 0; i + 1 < items.size(); ++i) {
        gl += g[items[i].second];
        hl += h[items[i].second];
        if (!(items[i].first < items[i + 1].first)) continue;
        const double hr = hs - hl;
        if (hl < params.min_child_weight || hr < params.min_child_weight) continue;
        const double gain = 0.5 * (score(gl, hl) + score(gs - gl, hr) - parent);
        if (gain > best_gain + kTieEps) {
          best_gain = gain;
          best_feature = f;
          best_threshold = midpoint(items[i].first, items[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return id;
    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (x(static_cast<Eigen::Index>(r), best_feature) <= best_threshold ? left : right).push_back(r);
    }
    nodes[static_cast<std::size_t>(id)].feature = best_feature;
    nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
    nodes[static_cast<std::size_t>(id)].gain = best_gain;
    const int l = grow(left, depth + 1);
    const int rr = grow(right, depth + 1);
    nodes[static_cast<std::size_t>(id)].left = l;
    nodes[static_cast<std::size_t>(id)].right = rr;
    return id;
  }
};

nlohmann::json node_json(const TreeNode& n) {
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"impurity", n.impurity},
          {"sample_fraction", n.sample_fraction},
          {"class_counts", n.class_counts},
          {"class_weight", n.class_weight},
          {"value", n.value},
          {"gain", n.gain},
          {"left", n.left},
          {"right", n.right},
          {"depth", n.depth}};
}

}  // namespace

double gini(double w0, double w1) {
  const double t = w0 + w1;
  if (t <= 0) return 0;
  const double p0 = w0 / t, p1 = w1 / t;
  return 1.0 - p0 * p0 - p1 * p1;
}

std::size_t Tree::leaf_index(Row x) const {
  std::size_t i = 0;
  while (!nodes_[i].leaf()) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return i;
}

int Tree::depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

Vector Tree::raw_importances(std::size_t n_features) const {
  Vector imp = Vector::Zero(static_cast<Eigen::Index>(n_features));
  for (const auto& n : nodes_) {
    if (!n.leaf()) imp(n.feature) += n.gain;
  }
  return imp;
}

nlohmann::json Tree::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& n : nodes_) arr.push_back(node_json(n));
  return arr;
}

Tree Tree::from_json(const nlohmann::json& doc) {
  std::vector<TreeNode> nodes;
  for (const auto& j : doc) {
    TreeNode n;
    n.feature = j.at("feature").get<int>();
    n.threshold = j.at("threshold").get<double>();
    n.impurity = j.at("impurity").get<double>();
    n.sample_fraction = j.at("sample_fraction").get<double>();
    n.class_counts = j.at("class_counts").get<std::array<int, 2>>();
    n.class_weight = j.at("class_weight").get<std::array<double, 2>>();
    n.value = j.at("value").get<double>();
    n.gain = j.at("gain").get<double>();
    n.left = j.at("left").get<int>();
    n.right = j.at("right").get<int>();
    n.depth = j.at("depth").get<int>();
    nodes.push_back(n);
  }
  if (nodes.empty()) throw DataError("tree document has no nodes");
  const int n_nodes = static_cast<int>(nodes.size());
  for (const auto& n : nodes) {
    if (!n.leaf() && (n.left <= 0 || n.right <= 0 || n.left >= n_nodes || n.right >= n_nodes)) {
      throw DataError("tree document has a dangling child index");
    }
  }
  return Tree(std::move(nodes));
}

nlohmann::json Tree::export_nested(const std::vector<std::string>& feature_names) const {
  std::function<nlohmann::json(int)> rec = [&](int i) {
    const auto& n = nodes_[static_cast<std::size_t>(i)];
    nlohmann::json j{{"impurity", n.impurity},
                     {"sample_fraction", n.sample_fraction},
                     {"samples", n.class_counts[0] + n.class_counts[1]},
                     {"class_counts", n.class_counts},
                     {"value", n.value}};
    if (n.leaf()) {
      j["leaf"] = true;
    } else {
      j["leaf"] = false;
      j["feature_index"] = n.feature;
      j["feature"] = static_cast<std::size_t>(n.feature) < feature_names.size()
                         ? feature_names[static_cast<std::size_t>(n.feature)]
                         : "x" + std::to_string(n.feature);
      j["threshold"] = n.threshold;
      j["left"] = rec(n.left);
      j["right"] = rec(n.right);
    }
    return j;
  };
  return rec(0);
}

Tree build_classification_tree(const Matrix& x, std::span<const int> y, std::span<const double> weights,
                               const TreeParams& params, Rng* rng) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.size() != weights.size()) {
    throw ConfigError("tree: X, y and weights disagree in length");
  }
  ClassBuilder b{x, y, weights, params, rng, 0.0, {}, {}};
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < y.size(); ++r) {
    if (weights[r] > 0) {
      rows.push_back(r);
      b.root_weight += weights[r];
    }
  }
  if (rows.empty()) throw ComputeError("tree: no rows with positive weight");
  b.grow(rows, 0);
  return Tree(std::move(b.nodes));
}

Tree build_newton_tree(const Matrix& x, std::span<const double> grad, std::span<const double> hess,
                       const NewtonTreeParams& params) {
  NewtonBuilder b{x, grad, hess, params, 0.0, {}, {}};
  std::vector<std::size_t> rows(grad.size());
  std::iota(rows.begin(), rows.end(), 0);
  b.n_total = static_cast<double>(rows.size());
  b.grow(rows, 0);
  return Tree(std::move(b.nodes));
}

}  // namespace nephro
