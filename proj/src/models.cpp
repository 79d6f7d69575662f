#include "nephro/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "nephro/kernels.hpp"
#include "nephro/linear.hpp"

namespace nephro {

namespace {

using linear::sigmoid;

struct Scaler {
  std::vector<double> mean, scale;

  static Scaler fit(const Matrix& x) {
    Scaler s;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double m = x.col(j).mean();
      const double sd = std::sqrt((x.col(j).array() - m).square().mean());
      s.mean.push_back(m);
      s.scale.push_back(sd > 1e-12 ? sd : 1.0);
    }
    return s;
  }
  Matrix apply(const Matrix& x) const {
    Matrix z = x;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      z.col(j) = (z.col(j).array() - mean[static_cast<std::size_t>(j)]) / scale[static_cast<std::size_t>(j)];
    }
    return z;
  }
  double at(Row x, std::size_t j) const { return (x[j] - mean[j]) / scale[j]; }
  nlohmann::json to_json() const { return {{"mean", mean}, {"scale", scale}}; }
  static Scaler from_json(const nlohmann::json& j) {
    return {j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
  }
};

std::vector<double> to_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_labels(std::span<const int> y, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(y.size()) != rows) throw ConfigError("train: X and y disagree in length");
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v != 0 && v != 1) throw DataError("train: labels must be 0 or 1");
    has0 = has0 || v == 0;
    has1 = has1 || v == 1;
  }
  if (!has0 || !has1) throw DataError("train: degenerate labels (a single class)");
}

int as_int(double v) { return static_cast<int>(std::llround(v)); }

// ---------------------------------------------------------------- LR

class LogisticModel final : public Predictor {
 public:
  Scaler scaler;
  Vector coef;  // standardized scale
  double intercept = 0;
  int iterations = 0;

  Family family() const override { return Family::kLR; }
  std::size_t n_features() const override { return static_cast<std::size_t>(coef.size()); }
  double proba1(Row x) const override {
    double z = intercept;
    for (std::size_t j = 0; j < n_features(); ++j) z += coef(static_cast<Eigen::Index>(j)) * scaler.at(x, j);
    return sigmoid(z);
  }
  Vector feature_importances() const override { return normalize_importances(coef.cwiseAbs()); }
  nlohmann::json parameters() const override {
    return {{"scaler", scaler.to_json()}, {"coef", to_vec(coef)}, {"intercept", intercept},
            {"iterations", iterations}};
  }
};

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

PredictorPtr train_lr(const std::map<std::string, double>& p, const Matrix& x, std::span<const int> y) {
  auto m = std::make_shared<LogisticModel>();
  m->scaler = Scaler::fit(x);
  const Matrix z = m->scaler.apply(x);
  const Eigen::Index n = z.rows(), d = z.cols();
  const double l1 = p.at("l1"), l2 = p.at("l2");
  const int max_iter = as_int(p.at("max_iter"));

  Vector w = Vector::Ones(n);
  if (p.at("balanced") != 0) {
    const double n1 = static_cast<double>(std::count(y.begin(), y.end(), 1));
    const double n0 = static_cast<double>(n) - n1;
    for (Eigen::Index i = 0; i < n; ++i) w(i) = static_cast<double>(n) / (2.0 * (y[static_cast<std::size_t>(i)] ? n1 : n0));
  }
  const double wsum = w.sum();
  Vector yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)];

  // Lipschitz bound of the smooth part: 0.25 * lambda_max(Z' W Z) / sum(w).
  Eigen::MatrixXd design(n, d + 1);
  design.col(0).setOnes();
  design.rightCols(d) = z;
  const Eigen::MatrixXd gram = design.transpose() * w.asDiagonal() * design / wsum;
  const double lipschitz = 0.25 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues().maxCoeff() + l2;
  const double step = 1.0 / lipschitz;

  Vector beta = Vector::Zero(d + 1), prev = beta, momentum = beta;
  double t = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const Vector eta = design * momentum;
    Vector resid(n);
    for (Eigen::Index i = 0; i < n; ++i) resid(i) = w(i) * (sigmoid(eta(i)) - yv(i));
    Vector grad = design.transpose() * resid / wsum;
    grad.tail(d) += l2 * momentum.tail(d);
    Vector next = momentum - step * grad;
    for (Eigen::Index j = 1; j <= d; ++j) next(j) = soft_threshold(next(j), step * l1);
    if (!next.allFinite()) throw ComputeError("LR: non-finite loss");
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    momentum = next + ((t - 1.0) / t_next) * (next - beta);
    prev = beta;
    beta = next;
    t = t_next;
    m->iterations = it + 1;
    if ((beta - prev).cwiseAbs().maxCoeff() < 1e-10) break;
  }
  m->intercept = beta(0);
  m->coef = beta.tail(d);
  return m;
}

// ---------------------------------------------------------------- NB

class NaiveBayesModel final : public Predictor {
 public:
  std::vector<bool> nominal;
  std::array<double, 2> log_prior{};
  // Numeric: per class mean/var. Nominal: per class log-probability per code.
  std::array<std::vector<double>, 2> mean, var;
  std::array<std::vector<std::vector<double>>, 2> log_prob;
  Vector importance;

  Family family() const override { return Family::kNB; }
  std::size_t n_features() const override { return nominal.size(); }
  double log_likelihood(Row x, int c) const {
    double ll = log_prior[static_cast<std::size_t>(c)];
    const auto cc = static_cast<std::size_t>(c);
    for (std::size_t j = 0; j < nominal.size(); ++j) {
      if (nominal[j]) {
        const auto& table = log_prob[cc][j];
        const auto code = static_cast<std::size_t>(std::clamp<long>(std::lround(x[j]), 0, static_cast<long>(table.size()) - 1));
        ll += table[code];
      } else {
        const double dv = x[j] - mean[cc][j];
        ll += -0.5 * std::log(2 * M_PI * var[cc][j]) - 0.5 * dv * dv / var[cc][j];
      }
    }
    return ll;
  }
  double proba1(Row x) const override { return sigmoid(log_likelihood(x, 1) - log_likelihood(x, 0)); }
  Vector feature_importances() const override { return importance; }
  nlohmann::json parameters() const override {
    return {{"nominal", nominal}, {"log_prior", log_prior}, {"mean", mean},
            {"var", var},         {"log_prob", log_prob},   {"importance", to_vec(importance)}};
  }
};

PredictorPtr train_nb(const std::map<std::string, double>& p, const Matrix& x, std::span<const int> y,
                      std::vector<bool> nominal) {
  auto m = std::make_shared<NaiveBayesModel>();
  const auto d = static_cast<std::size_t>(x.cols());
  nominal.resize(d, false);
  m->nominal = nominal;
  const double alpha = p.at("alpha");
  std::array<double, 2> count{0, 0};
  for (int v : y) count[static_cast<std::size_t>(v)] += 1;
  const double n = count[0] + count[1];
  for (int c = 0; c < 2; ++c) m->log_prior[static_cast<std::size_t>(c)] = std::log(count[static_cast<std::size_t>(c)] / n);

  double max_var = 0;
  for (std::size_t j = 0; j < d; ++j) {
    const double mu = x.col(static_cast<Eigen::Index>(j)).mean();
    max_var = std::max(max_var, (x.col(static_cast<Eigen::Index>(j)).array() - mu).square().mean());
  }
  const double eps = p.at("var_smoothing") * std::max(max_var, 1e-12);

  m->importance = Vector::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) {
    std::array<double, 2> s{0, 0}, ss{0, 0};
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto c = static_cast<std::size_t>(y[static_cast<std::size_t>(i)]);
      s[c] += x(i, static_cast<Eigen::Index>(j));
    }
    std::array<double, 2> mu{s[0] / count[0], s[1] / count[1]};
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const auto c = static_cast<std::size_t>(y[static_cast<std::size_t>(i)]);
      const double dv = x(i, static_cast<Eigen::Index>(j)) - mu[c];
      ss[c] += dv * dv;
    }
    std::array<double, 2> v{ss[0] / count[0] + eps, ss[1] / count[1] + eps};
    for (std::size_t c = 0; c < 2; ++c) {
      m->mean[c].push_back(mu[c]);
      m->var[c].push_back(v[c]);
    }
    // Mean gap in units of the pooled within-class spread.
    const double pooled = std::sqrt((ss[0] + ss[1]) / n + eps);
    m->importance(static_cast<Eigen::Index>(j)) = std::abs(mu[1] - mu[0]) / pooled;

    std::array<std::vector<double>, 2> table;
    if (nominal[j]) {
      const auto k = static_cast<std::size_t>(std::max(0.0, x.col(static_cast<Eigen::Index>(j)).maxCoeff())) + 1;
      std::array<std::vector<double>, 2> freq{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0)};
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto code = static_cast<std::size_t>(std::max(0L, std::lround(x(i, static_cast<Eigen::Index>(j)))));
        freq[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])][code] += 1;
      }
      for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t code = 0; code < k; ++code) {
          table[c].push_back(std::log((freq[c][code] + alpha) / (count[c] + alpha * static_cast<double>(k))));
        }
      }
    }
    for (std::size_t c = 0; c < 2; ++c) m->log_prob[c].push_back(table[c]);
  }
  m->importance = normalize_importances(m->importance);
  return m;
}

// ---------------------------------------------------------------- LSVM

class LinearSvmModel final : public Predictor {
 public:
  Scaler scaler;
  Vector w;
  double bias = 0;
  double platt_a = 1, platt_b = 0;

  Family family() const override { return Family::kLSVM; }
  std::size_t n_features() const override { return static_cast<std::size_t>(w.size()); }
  double score(Row x) const {
    double s = bias;
    for (std::size_t j = 0; j < n_features(); ++j) s += w(static_cast<Eigen::Index>(j)) * scaler.at(x, j);
    return s;
  }
  double proba1(Row x) const override { return sigmoid(platt_a * score(x) + platt_b); }
  Vector feature_importances() const override { return normalize_importances(w.cwiseAbs()); }
  nlohmann::json parameters() const override {
    return {{"scaler", scaler.to_json()}, {"w", to_vec(w)}, {"bias", bias}, {"platt_a", platt_a},
            {"platt_b", platt_b}};
  }
};

PredictorPtr train_lsvm(const std::map<std::string, double>& p, const Matrix& x, std::span<const int> y,
                        std::uint64_t seed) {
  auto m = std::make_shared<LinearSvmModel>();
  m->scaler = Scaler::fit(x);
  const Matrix z = m->scaler.apply(x);
  const Eigen::Index n = z.rows(), d = z.cols();
  const double lambda = p.at("lambda");
  const int epochs = as_int(p.at("epochs"));

  // The bias rides along as a constant feature so the projection step bounds it too.
  Vector w = Vector::Zero(d + 1), avg = Vector::Zero(d + 1);
  long averaged = 0;
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  long t = 0;
  const long total = static_cast<long>(epochs) * n;
  Vector xi(d + 1);
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      xi.head(d) = z.row(static_cast<Eigen::Index>(i)).transpose();
      xi(d) = 1.0;
      const double yi = y[i] ? 1.0 : -1.0;
      const bool violated = yi * w.dot(xi) < 1.0;
      w *= (1.0 - eta * lambda);
      if (violated) w += eta * yi * xi;
      const double norm = w.norm();
      const double radius = 1.0 / std::sqrt(lambda);
      if (norm > radius) w *= radius / norm;
      if (2 * t > total) {
        avg += w;
        ++averaged;
      }
    }
  }
  if (averaged > 0) w = avg / static_cast<double>(averaged);
  if (!w.allFinite()) throw ComputeError("LSVM: non-finite loss (step size diverged)");
  m->w = w.head(d);
  m->bias = w(d);

  Matrix scores(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) scores(i, 0) = m->score(row_of(x, i));
  const auto platt = linear::fit_logit_newton(scores, y, 1e-6);
  m->platt_a = platt.coef(0);
  m->platt_b = platt.intercept;
  return m;
}

// ---------------------------------------------------------------- DT / RF

TreeParams tree_params(const std::map<std::string, double>& p) {
  TreeParams t;
  t.max_depth = as_int(p.at("max_depth"));
  t.min_samples_split = as_int(p.at("min_samples_split"));
  t.min_samples_leaf = as_int(p.at("min_samples_leaf"));
  t.min_impurity_decrease = p.at("min_impurity_decrease");
  return t;
}

Vector tree_importances(const Tree& tree, std::size_t d) { return normalize_importances(tree.raw_importances(d)); }

class DecisionTreeModel final : public Predictor {
 public:
  Tree tree;
  std::size_t d = 0;

  Family family() const override { return Family::kDT; }
  std::size_t n_features() const override { return d; }
  double proba1(Row x) const override { return tree.value(x); }
  Vector feature_importances() const override { return tree_importances(tree, d); }
  nlohmann::json parameters() const override { return {{"n_features", d}, {"tree", tree.to_json()}}; }
};

class ForestModel final : public Predictor {
 public:
  std::vector<Tree> trees;
  std::size_t d = 0;

  Family family() const override { return Family::kRF; }
  std::size_t n_features() const override { return d; }
  double proba1(Row x) const override {
    double s = 0;
    for (const auto& t : trees) s += t.value(x);
    return s / static_cast<double>(trees.size());
  }
  Vector feature_importances() const override {
    Vector acc = Vector::Zero(static_cast<Eigen::Index>(d));
    for (const auto& t : trees) acc += tree_importances(t, d);
    return normalize_importances(acc);
  }
  nlohmann::json parameters() const override {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : trees) arr.push_back(t.to_json());
    return {{"n_features", d}, {"trees", std::move(arr)}};
  }
};

PredictorPtr train_dt(const std::map<std::string, double>& p, const Matrix& x, std::span<const int> y) {
  auto m = std::make_shared<DecisionTreeModel>();
  m->d = static_cast<std::size_t>(x.cols());
  const std::vector<double> w(y.size(), 1.0);
  m->tree = build_classification_tree(x, y, w, tree_params(p));
  return m;
}

PredictorPtr train_rf(const std::map<std::string, double>& p, const Matrix& x, std::span<const int> y,
                      std::uint64_t seed) {
  auto m = std::make_shared<ForestModel>();
  const auto d = static_cast<int>(x.cols());
  m->d = static_cast<std::size_t>(d);
  TreeParams params = tree_params(p);
  const int mf = as_int(p.at("max_features"));
  params.max_features = mf > 0 ? std::min(mf, d) : std::max(1, static_cast<int>(std::floor(std::sqrt(d))));
  const bool bootstrap = p.at("bootstrap") != 0;
  const auto n_trees = static_cast<std::size_t>(as_int(p.at("n_estimators")));
  const std::size_t n = y.size();
  m->trees.resize(n_trees);
  // Each tree owns a stream derived from (seed, tree index): results do not
  // depend on scheduling.
  kernels::for_each_index(n_trees, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<double> w(n, 1.0);
    if (bootstrap) {
      std::fill(w.begin(), w.end(), 0.0);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t i = 0; i < n; ++i) w[pick(rng)] += 1.0;
    }
    m->trees[t] = build_classification_tree(x, y, w, params, &rng);
  });
  return m;
}

// ---------------------------------------------------------------- ADA

class AdaBoostModel final : public Predictor {
 public:
  std::vector<Tree> stumps;
  std::vector<double> alpha;
  std::vector<double> errors;
  std::size_t d = 0;

  Family family() const override { return Family::kADA; }
  std::size_t n_features() const override { return d; }
  double decision(Row x) const {
    double s = 0, total = 0;
    for (std::size_t m = 0; m < stumps.size(); ++m) {
      s += alpha[m] * (stumps[m].value(x) > 0.5 ? 1.0 : -1.0);
      total += alpha[m];
    }
    return total > 0 ? s / total : 0.0;
  }
  double proba1(Row x) const override { return sigmoid(decision(x)); }
  Vector feature_importances() const override {
    Vector acc = Vector::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t m = 0; m < stumps.size(); ++m) {
      const Vector raw = stumps[m].raw_importances(d);
      if (raw.sum() > 0) acc += alpha[m] * raw / raw.sum();
    }
    return normalize_importances(acc);
  }
  nlohmann::json parameters() const override {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : stumps) arr.push_back(t.to_json());
    return {{"n_features", d}, {"stumps", std::move(arr)}, {"alpha", alpha}, {"errors", errors}};
  }
};

PredictorPtr train_ada(const std::map<std::string, double>& p, const Matrix& x, std::span<const int> y) {
  auto m = std::make_shared<AdaBoostModel>();
  m->d = static_cast<std::size_t>(x.cols());
  const std::size_t n = y.size();
  const double lr = p.at("learning_rate");
  TreeParams stump;
  stump.max_depth = 1;
  stump.min_impurity_decrease = 0;
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  const int rounds = as_int(p.at("n_estimators"));
  for (int r = 0; r < rounds; ++r) {
    Tree t = build_classification_tree(x, y, w, stump);
    double err = 0, total = 0;
    std::vector<bool> wrong(n);
    for (std::size_t i = 0; i < n; ++i) {
      wrong[i] = (t.value(row_of(x, static_cast<Eigen::Index>(i))) > 0.5 ? 1 : 0) != y[i];
      err += wrong[i] ? w[i] : 0.0;
      total += w[i];
    }
    err /= total;
    if (err >= 0.5) {
      // A round no better than chance is rejected and boosting stops.
      if (m->stumps.empty()) throw ComputeError("ADA: first stump has weighted error >= 0.5");
      break;
    }
    m->errors.push_back(err);
    m->stumps.push_back(std::move(t));
    if (err <= 0) {
      m->alpha.push_back(1.0);
      break;
    }
    const double a = lr * std::log((1.0 - err) / err);
    m->alpha.push_back(a);
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (wrong[i]) w[i] *= std::exp(a);
      s += w[i];
    }
    for (double& v : w) v /= s;
  }
  return m;
}

// ---------------------------------------------------------------- GBM

class BoostingModel final : public Predictor {
 public:
  std::vector<Tree> trees;
  double base = 0;
  double learning_rate = 0.1;
  std::vector<double> loss;
  std::size_t d = 0;

  Family family() const override { return Family::kGBM; }
  std::size_t n_features() const override { return d; }
  double margin(Row x) const {
    double f = base;
    for (const auto& t : trees) f += learning_rate * t.value(x);
    return f;
  }
  double proba1(Row x) const override { return sigmoid(margin(x)); }
  Vector feature_importances() const override {
    Vector acc = Vector::Zero(static_cast<Eigen::Index>(d));
    for (const auto& t : trees) acc += t.raw_importances(d);
    return normalize_importances(acc);
  }
  nlohmann::json parameters() const override {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : trees) arr.push_back(t.to_json());
    return {{"n_features", d}, {"base", base}, {"learning_rate", learning_rate}, {"trees", std::move(arr)},
            {"training_loss", loss}};
  }
};

double mean_log_loss(const Vector& margin, std::span<const int> y) {
  double s = 0;
  for (Eigen::Index i = 0; i < margin.size(); ++i) {
    const double z = margin(i);
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    s += softplus - (y[static_cast<std::size_t>(i)] ? z : 0.0);
  }
  return s / static_cast<double>(margin.size());
}

PredictorPtr train_gbm(const std::map<std::string, double>& p, const Matrix& x, std::span<const int> y) {
  auto m = std::make_shared<BoostingModel>();
  m->d = static_cast<std::size_t>(x.cols());
  m->learning_rate = p.at("learning_rate");
  NewtonTreeParams tp;
  tp.max_depth = as_int(p.at("max_depth"));
  tp.lambda = p.at("lambda");
  tp.min_child_weight = p.at("min_child_weight");
  const std::size_t n = y.size();
  const double pbar = static_cast<double>(std::count(y.begin(), y.end(), 1)) / static_cast<double>(n);
  m->base = std::log(pbar / (1 - pbar));
  Vector margin = Vector::Constant(static_cast<Eigen::Index>(n), m->base);
  m->loss.push_back(mean_log_loss(margin, y));
  std::vector<double> g(n), h(n);
  const int rounds = as_int(p.at("n_rounds"));
  for (int r = 0; r < rounds; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const double pi = sigmoid(margin(static_cast<Eigen::Index>(i)));
      g[i] = pi - y[i];
      h[i] = std::max(pi * (1 - pi), 1e-16);
    }
    Tree t = build_newton_tree(x, g, h, tp);
    for (std::size_t i = 0; i < n; ++i) {
      margin(static_cast<Eigen::Index>(i)) += m->learning_rate * t.value(row_of(x, static_cast<Eigen::Index>(i)));
    }
    const double l = mean_log_loss(margin, y);
    if (!std::isfinite(l)) throw ComputeError("GBM: non-finite loss");
    m->loss.push_back(l);
    m->trees.push_back(std::move(t));
  }
  return m;
}

std::vector<Tree> trees_from(const nlohmann::json& arr) {
  std::vector<Tree> out;
  for (const auto& t : arr) out.push_back(Tree::from_json(t));
  return out;
}

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::kLR: return "LR";
    case Family::kNB: return "NB";
    case Family::kLSVM: return "LSVM";
    case Family::kDT: return "DT";
    case Family::kRF: return "RF";
    case Family::kADA: return "ADA";
    case Family::kGBM: return "GBM";
  }
  return "?";
}

Family family_from_string(std::string_view name) {
  for (Family f : {Family::kLR, Family::kNB, Family::kLSVM, Family::kDT, Family::kRF, Family::kADA, Family::kGBM}) {
    if (to_string(f) == name) return f;
  }
  throw ConfigError("unknown model family '" + std::string(name) + "'");
}

std::map<std::string, double> default_hyperparameters(Family family) {
  const std::map<std::string, double> tree{{"max_depth", 16},
                                           {"min_samples_split", 2},
                                           {"min_samples_leaf", 1},
                                           {"min_impurity_decrease", 1e-7}};
  switch (family) {
    case Family::kLR: return {{"l1", 1e-3}, {"l2", 0.0}, {"balanced", 1}, {"max_iter", 5000}};
    case Family::kNB: return {{"var_smoothing", 1e-9}, {"alpha", 1.0}};
    case Family::kLSVM: return {{"lambda", 1e-3}, {"epochs", 50}};
    case Family::kDT: return tree;
    case Family::kRF: {
      auto p = tree;
      p["n_estimators"] = 100;
      p["max_features"] = 0;
      p["bootstrap"] = 1;
      return p;
    }
    case Family::kADA: return {{"n_estimators", 50}, {"learning_rate", 1.0}};
    case Family::kGBM:
      return {{"n_rounds", 200}, {"learning_rate", 0.1}, {"max_depth", 3}, {"lambda", 1.0}, {"min_child_weight", 1.0}};
  }
  return {};
}

double ModelSpec::param(const std::string& name, double fallback) const {
  const auto it = params.find(name);
  return it == params.end() ? fallback : it->second;
}

std::map<std::string, double> ModelSpec::resolved() const {
  auto out = default_hyperparameters(family);
  for (const auto& [k, v] : params) {
    if (!out.count(k)) throw ConfigError("unknown hyperparameter '" + k + "' for " + to_string(family));
    out[k] = v;
  }
  return out;
}

void ModelSpec::validate() const {
  const auto p = resolved();
  for (const char* count : {"n_estimators", "n_rounds", "max_depth", "epochs", "max_iter", "min_samples_leaf"}) {
    if (p.count(count) && p.at(count) < 1) throw ConfigError(std::string(count) + " must be >= 1");
  }
  if (p.count("min_samples_split") && p.at("min_samples_split") < 2) throw ConfigError("min_samples_split must be >= 2");
  if (p.count("learning_rate") && !(p.at("learning_rate") > 0 && p.at("learning_rate") <= 1)) {
    throw ConfigError("learning_rate must lie in (0, 1]");
  }
  if (family == Family::kLSVM && !(p.at("lambda") > 0)) throw ConfigError("lambda must be > 0");
  for (const char* nonneg : {"l1", "l2", "max_features", "lambda", "alpha", "var_smoothing"}) {
    if (p.count(nonneg) && p.at(nonneg) < 0) throw ConfigError(std::string(nonneg) + " must be >= 0");
  }
}

nlohmann::json ModelSpec::to_json() const {
  return {{"family", to_string(family)}, {"hyperparameters", resolved()}, {"seed", seed}};
}

ModelSpec ModelSpec::from_json(const nlohmann::json& doc) {
  ModelSpec s;
  s.family = family_from_string(doc.at("family").get<std::string>());
  if (doc.contains("hyperparameters")) s.params = doc.at("hyperparameters").get<std::map<std::string, double>>();
  if (doc.contains("seed")) s.seed = doc.at("seed").get<std::uint64_t>();
  return s;
}

Vector normalize_importances(Vector raw) {
  raw = raw.cwiseMax(0.0);
  const double s = raw.sum();
  if (!(s > 0)) return Vector::Constant(raw.size(), raw.size() ? 1.0 / static_cast<double>(raw.size()) : 0.0);
  return raw / s;
}

std::array<double, 2> Predictor::predict_proba(Row x) const {
  const double p = std::clamp(proba1(x), 0.0, 1.0);
  return {1.0 - p, p};
}

Vector Predictor::proba1(const Matrix& x) const {
  return kernels::score_rows([this](Row r) { return proba1(r); }, x);
}

std::vector<int> Predictor::predict(const Matrix& x) const {
  const Vector p = proba1(x);
  std::vector<int> out(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) out[static_cast<std::size_t>(i)] = p(i) > 0.5 ? 1 : 0;
  return out;
}

nlohmann::json Predictor::to_json() const {
  return {{"family", to_string(family())}, {"n_features", n_features()}, {"parameters", parameters()}};
}

PredictorPtr train(const ModelSpec& spec, const Matrix& x, std::span<const int> y, const std::vector<bool>& nominal) {
  spec.validate();
  check_labels(y, x.rows());
  if (!x.allFinite()) throw DataError("train: X contains missing or non-finite cells");
  const auto p = spec.resolved();
  switch (spec.family) {
    case Family::kLR: return train_lr(p, x, y);
    case Family::kNB: return train_nb(p, x, y, nominal);
    case Family::kLSVM: return train_lsvm(p, x, y, spec.seed);
    case Family::kDT: return train_dt(p, x, y);
    case Family::kRF: return train_rf(p, x, y, spec.seed);
    case Family::kADA: return train_ada(p, x, y);
    case Family::kGBM: return train_gbm(p, x, y);
  }
  throw ConfigError("unsupported family");
}

PredictorPtr predictor_from_json(const nlohmann::json& doc) {
  const Family family = family_from_string(doc.at("family").get<std::string>());
  const auto& p = doc.at("parameters");
  switch (family) {
    case Family::kLR: {
      auto m = std::make_shared<LogisticModel>();
      m->scaler = Scaler::from_json(p.at("scaler"));
      m->coef = from_vec(p.at("coef").get<std::vector<double>>());
      m->intercept = p.at("intercept").get<double>();
      m->iterations = p.value("iterations", 0);
      return m;
    }
    case Family::kNB: {
      auto m = std::make_shared<NaiveBayesModel>();
      m->nominal = p.at("nominal").get<std::vector<bool>>();
      m->log_prior = p.at("log_prior").get<std::array<double, 2>>();
      m->mean = p.at("mean").get<std::array<std::vector<double>, 2>>();
      m->var = p.at("var").get<std::array<std::vector<double>, 2>>();
      m->log_prob = p.at("log_prob").get<std::array<std::vector<std::vector<double>>, 2>>();
      m->importance = from_vec(p.at("importance").get<std::vector<double>>());
      return m;
    }
    case Family::kLSVM: {
      auto m = std::make_shared<LinearSvmModel>();
      m->scaler = Scaler::from_json(p.at("scaler"));
      m->w = from_vec(p.at("w").get<std::vector<double>>());
      m->bias = p.at("bias").get<double>();
      m->platt_a = p.at("platt_a").get<double>();
      m->platt_b = p.at("platt_b").get<double>();
      return m;
    }
    case Family::kDT: {
      auto m = std::make_shared<DecisionTreeModel>();
      m->d = p.at("n_features").get<std::size_t>();
      m->tree = Tree::from_json(p.at("tree"));
      return m;
    }
    case Family::kRF: {
      auto m = std::make_shared<ForestModel>();
      m->d = p.at("n_features").get<std::size_t>();
      m->trees = trees_from(p.at("trees"));
      return m;
    }
    case Family::kADA: {
      auto m = std::make_shared<AdaBoostModel>();
      m->d = p.at("n_features").get<std::size_t>();
      m->stumps = trees_from(p.at("stumps"));
      m->alpha = p.at("alpha").get<std::vector<double>>();
      m->errors = p.at("errors").get<std::vector<double>>();
      return m;
    }
    case Family::kGBM: {
      auto m = std::make_shared<BoostingModel>();
      m->d = p.at("n_features").get<std::size_t>();
      m->base = p.at("base").get<double>();
      m->learning_rate = p.at("learning_rate").get<double>();
      m->trees = trees_from(p.at("trees"));
      m->loss = p.at("training_loss").get<std::vector<double>>();
      return m;
    }
  }
  throw DataError("unsupported family in model document");
}

const Tree& tree_of(const Predictor& predictor, std::size_t index) {
  if (const auto* dt = dynamic_cast<const DecisionTreeModel*>(&predictor)) {
    if (index != 0) throw ConfigError("export_tree: a decision tree has a single member");
    return dt->tree;
  }
  if (const auto* rf = dynamic_cast<const ForestModel*>(&predictor)) {
    if (index >= rf->trees.size()) throw ConfigError("export_tree: forest member index out of range");
    return rf->trees[index];
  }
  throw ConfigError("export_tree: " + to_string(predictor.family()) + " is not a tree-family predictor");
}

std::size_t tree_count(const Predictor& predictor) {
  if (dynamic_cast<const DecisionTreeModel*>(&predictor)) return 1;
  if (const auto* rf = dynamic_cast<const ForestModel*>(&predictor)) return rf->trees.size();
  return 0;
}

std::vector<double> gbm_training_loss(const Predictor& predictor) {
  if (const auto* g = dynamic_cast<const BoostingModel*>(&predictor)) return g->loss;
  throw ConfigError("training loss is only recorded for GBM");
}

std::vector<double> ada_round_errors(const Predictor& predictor) {
  if (const auto* a = dynamic_cast<const AdaBoostModel*>(&predictor)) return a->errors;
  throw ConfigError("round errors are only recorded for ADA");
}

}  // namespace nephro
