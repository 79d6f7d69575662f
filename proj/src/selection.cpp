#include "nephro/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "nephro/linear.hpp"
#include "nephro/resampling.hpp"

namespace nephro {

namespace {

double column_variance(const Matrix& x, Eigen::Index j) {
  const double m = x.col(j).mean();
  return (x.col(j).array() - m).square().mean();
}

Matrix standardized(const Matrix& x) {
  Matrix z = x;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double m = z.col(j).mean();
    const double sd = std::sqrt(column_variance(z, j));
    z.col(j) = (z.col(j).array() - m) / (sd > 1e-12 ? sd : 1.0);
  }
  return z;
}

double entropy_of(const std::map<double, double>& counts, double total) {
  double h = 0;
  for (const auto& [v, c] : counts) {
    if (c > 0) {
      const double p = c / total;
      h -= p * std::log2(p);
    }
  }
  return h;
}

// Bin index per row: equal-frequency cut points on the sorted column; equal
// values always share a bin.
std::vector<int> equal_frequency_bins(const Vector& col, int bins) {
  std::vector<double> sorted(col.data(), col.data() + col.size());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> cuts;
  for (int b = 1; b < bins; ++b) {
    const std::size_t pos = (static_cast<std::size_t>(b) * n) / static_cast<std::size_t>(bins);
    const double cut = sorted[std::min(pos, n - 1)];
    if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
  }
  std::vector<int> out(n);
  for (Eigen::Index i = 0; i < col.size(); ++i) {
    out[static_cast<std::size_t>(i)] = static_cast<int>(std::lower_bound(cuts.begin(), cuts.end(), col(i)) - cuts.begin());
  }
  return out;
}

double cv_accuracy(const Matrix& z, std::span<const int> y, const std::vector<std::size_t>& cols,
                   const FoldAssignment& folds, double l2) {
  long correct = 0;
  for (int f = 0; f < folds.k; ++f) {
    const auto tr = folds.train_rows(f);
    const auto te = folds.test_rows(f);
    Matrix xt(static_cast<Eigen::Index>(tr.size()), static_cast<Eigen::Index>(cols.size()));
    std::vector<int> yt(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
      for (std::size_t k = 0; k < cols.size(); ++k) {
        xt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            z(static_cast<Eigen::Index>(tr[i]), static_cast<Eigen::Index>(cols[k]));
      }
      yt[i] = y[tr[i]];
    }
    const auto fit = linear::fit_logit_newton(xt, yt, l2);
    for (std::size_t r : te) {
      double eta = fit.intercept;
      for (std::size_t k = 0; k < cols.size(); ++k) {
        eta += fit.coef(static_cast<Eigen::Index>(k)) * z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cols[k]));
      }
      correct += ((eta > 0 ? 1 : 0) == y[r]) ? 1 : 0;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

}  // namespace

nlohmann::json to_json(const std::vector<FeatureScore>& scores) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : scores) {
    nlohmann::json j{{"feature", s.feature}, {"score", s.score}, {"selected", s.selected}};
    if (s.p_value) j["p_value"] = *s.p_value;
    if (s.entropy) j["entropy"] = *s.entropy;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<std::string> ScoredSelection::selected() const {
  std::vector<std::string> out;
  for (const auto& s : scores) {
    if (s.selected) out.push_back(s.feature);
  }
  return out;
}

nlohmann::json ScoredSelection::to_json() const {
  return {{"scores", nephro::to_json(scores)}, {"selected", selected()}, {"notes", notes}};
}

ScoredSelection correlation_with_target(const EncodedData& data, double threshold) {
  ScoredSelection out;
  std::vector<double> y(data.y.begin(), data.y.end());
  for (std::size_t j = 0; j < data.cols(); ++j) {
    const Vector col = data.x.col(static_cast<Eigen::Index>(j));
    const double r = linear::pearson({col.data(), static_cast<std::size_t>(col.size())}, y);
    if (std::isnan(r)) {
      const auto msg = "correlation undefined for zero-variance feature '" + data.features[j].name + "'; excluded";
      warn(msg);
      out.notes.push_back(msg);
      continue;
    }
    out.scores.push_back({data.features[j].name, r, std::nullopt, std::nullopt, std::abs(r) >= threshold});
  }
  return out;
}

ScoredSelection logit_significance(const EncodedData& data, double alpha) {
  ScoredSelection out;
  const auto fit = linear::fit_logit_newton(data.x, data.y);
  if (fit.separated) {
    const auto msg = std::string("logit: separation detected; coefficients capped at +/-30");
    warn(msg);
    out.notes.push_back(msg);
  }
  if (!fit.converged) out.notes.push_back("logit: Newton iterations hit the limit");
  boost::math::normal_distribution<double> normal;
  for (std::size_t j = 0; j < data.cols(); ++j) {
    const auto k = static_cast<Eigen::Index>(j + 1);
    const double se = std::sqrt(std::max(fit.covariance(k, k), 0.0));
    const double t = se > 0 ? fit.coef(static_cast<Eigen::Index>(j)) / se : 0.0;
    const double p = 2.0 * boost::math::cdf(boost::math::complement(normal, std::abs(t)));
    out.scores.push_back({data.features[j].name, t, p, std::nullopt, p < alpha});
  }
  return out;
}

ScoredSelection information_gain_ranking(const EncodedData& data, std::size_t top_k, int bins) {
  ScoredSelection out;
  const double n = static_cast<double>(data.rows());
  std::map<double, double> label_counts;
  for (int v : data.y) label_counts[v] += 1;
  const double h_target = entropy_of(label_counts, n);
  for (std::size_t j = 0; j < data.cols(); ++j) {
    const Vector col = data.x.col(static_cast<Eigen::Index>(j));
    std::map<double, double> distinct;
    for (Eigen::Index i = 0; i < col.size(); ++i) distinct[col(i)] += 1;
    std::vector<int> bin(static_cast<std::size_t>(col.size()));
    if (data.nominal(j)) {
      for (Eigen::Index i = 0; i < col.size(); ++i) bin[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(col(i)));
    } else {
      bin = equal_frequency_bins(col, bins);
    }
    std::map<int, std::array<double, 2>> joint;
    for (std::size_t i = 0; i < bin.size(); ++i) joint[bin[i]][static_cast<std::size_t>(data.y[i] != 0)] += 1;
    double h_cond = 0;
    for (const auto& [b, c] : joint) {
      const double nb = c[0] + c[1];
      h_cond += nb / n * entropy_of({{0.0, c[0]}, {1.0, c[1]}}, nb);
    }
    const double ig = std::max(0.0, h_target - h_cond);
    out.scores.push_back({data.features[j].name, ig, std::nullopt, entropy_of(distinct, n), false});
  }
  std::stable_sort(out.scores.begin(), out.scores.end(),
                   [](const FeatureScore& a, const FeatureScore& b) { return a.score > b.score; });
  for (std::size_t i = 0; i < out.scores.size() && i < top_k; ++i) out.scores[i].selected = true;
  return out;
}

ScoredSelection variance_threshold(const EncodedData& data, double threshold) {
  ScoredSelection out;
  for (std::size_t j = 0; j < data.cols(); ++j) {
    const double v = column_variance(data.x, static_cast<Eigen::Index>(j));
    out.scores.push_back({data.features[j].name, v, std::nullopt, std::nullopt, v >= threshold});
  }
  return out;
}

nlohmann::json WrapperResult::to_json() const {
  return {{"selected", selected}, {"trace_features", trace_features}, {"trace_scores", trace_scores}};
}

WrapperResult wrapper_select(const EncodedData& data, WrapperMode mode, const WrapperOptions& options) {
  const std::size_t d = data.cols();
  if (options.target_size < 1) throw ConfigError("wrapper_select: target_size must be >= 1");
  if (options.target_size > d) {
    throw ConfigError("wrapper_select: target_size " + std::to_string(options.target_size) +
                      " exceeds the feature count " + std::to_string(d));
  }
  const Matrix z = standardized(data.x);
  WrapperResult out;

  if (mode == WrapperMode::kForward) {
    const auto folds = stratified_kfold(data.y, options.folds, options.seed);
    std::vector<std::size_t> chosen;
    std::vector<bool> used(d, false);
    double current = 0;
    while (chosen.size() < options.target_size) {
      double best = -1;
      std::size_t best_j = d;
      for (std::size_t j = 0; j < d; ++j) {
        if (used[j]) continue;
        auto cols = chosen;
        cols.push_back(j);
        const double acc = cv_accuracy(z, data.y, cols, folds, options.l2);
        if (acc > best + 1e-12) {
          best = acc;
          best_j = j;
        }
      }
      if (best_j == d) break;
      if (options.tolerance > 0 && !chosen.empty() && best - current < options.tolerance) break;
      chosen.push_back(best_j);
      used[best_j] = true;
      current = best;
      out.trace_features.push_back(data.features[best_j].name);
      out.trace_scores.push_back(best);
    }
    for (std::size_t j : chosen) out.selected.push_back(data.features[j].name);
    return out;
  }

  std::vector<std::size_t> remaining(d);
  std::iota(remaining.begin(), remaining.end(), 0);
  while (remaining.size() > options.target_size) {
    Matrix sub(z.rows(), static_cast<Eigen::Index>(remaining.size()));
    for (std::size_t k = 0; k < remaining.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = z.col(static_cast<Eigen::Index>(remaining[k]));
    const auto fit = linear::fit_logit_newton(sub, data.y, options.l2);
    std::size_t worst = 0;
    for (std::size_t k = 1; k < remaining.size(); ++k) {
      if (std::abs(fit.coef(static_cast<Eigen::Index>(k))) < std::abs(fit.coef(static_cast<Eigen::Index>(worst))) - 1e-12) worst = k;
    }
    out.trace_features.push_back(data.features[remaining[worst]].name);
    out.trace_scores.push_back(std::abs(fit.coef(static_cast<Eigen::Index>(worst))));
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  for (std::size_t j : remaining) out.selected.push_back(data.features[j].name);
  return out;
}

nlohmann::json SelectionReport::to_json() const {
  return {{"method_sets", method_sets}, {"votes", votes},       {"consensus", consensus},
          {"exclusions", exclusions},   {"final", final_set}, {"notes", notes}};
}

SelectionReport consensus_select(const std::map<std::string, std::vector<std::string>>& method_sets,
                                 const std::vector<std::string>& exclusions,
                                 const std::vector<std::string>& feature_order, int min_votes) {
  if (method_sets.size() < 2) throw ConfigError("consensus_select: at least 2 method sets are required");
  SelectionReport report;
  report.method_sets = method_sets;
  report.exclusions = exclusions;
  for (const auto& [method, features] : method_sets) {
    const std::set<std::string> unique(features.begin(), features.end());
    for (const auto& f : unique) report.votes[f] += 1;
  }
  auto rank = [&](const std::string& f) {
    const auto it = std::find(feature_order.begin(), feature_order.end(), f);
    return it == feature_order.end() ? feature_order.size() : static_cast<std::size_t>(it - feature_order.begin());
  };
  for (const auto& [f, v] : report.votes) {
    if (v >= min_votes) report.consensus.push_back(f);
  }
  std::stable_sort(report.consensus.begin(), report.consensus.end(),
                   [&](const std::string& a, const std::string& b) { return rank(a) < rank(b); });
  const std::set<std::string> excluded(exclusions.begin(), exclusions.end());
  for (const auto& f : report.consensus) {
    if (!excluded.count(f)) report.final_set.push_back(f);
  }
  for (const auto& e : exclusions) {
    if (!report.votes.count(e)) report.notes.push_back("exclusion '" + e + "' is not named by any method");
  }
  if (report.final_set.empty()) throw ComputeError("consensus_select: the final feature set is empty");
  return report;
}

double overlap_coefficient(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0.0;
  const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t common = 0;
  for (const auto& f : sa) common += sb.count(f);
  return static_cast<double>(common) / static_cast<double>(std::min(sa.size(), sb.size()));
}

}  // namespace nephro
