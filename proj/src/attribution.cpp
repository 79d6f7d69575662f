#include "nephro/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <unordered_map>

namespace nephro {

namespace {

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

double column_mean(const Matrix& x, Eigen::Index j) { return x.col(j).mean(); }

double column_std(const Matrix& x, Eigen::Index j) {
  const double m = column_mean(x, j);
  const double v = (x.col(j).array() - m).square().mean();
  return std::sqrt(v);
}

// Linear-interpolated quantile of sorted values.
double quantile_sorted(const std::vector<double>& s, double q) {
  if (s.empty()) return 0;
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return s[lo] + frac * (s[hi] - s[lo]);
}

std::vector<double> sorted_column(const Matrix& x, std::size_t j) {
  std::vector<double> s(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) s[static_cast<std::size_t>(i)] = x(i, static_cast<Eigen::Index>(j));
  std::sort(s.begin(), s.end());
  return s;
}

void check_feature(const Matrix& x, const FeatureInfo& info, std::size_t feature) {
  if (feature >= static_cast<std::size_t>(x.cols())) throw ConfigError("feature index out of range");
  if (feature < info.nominal.size() && info.nominal[feature]) {
    throw ConfigError("feature '" + info.names[feature] + "' is nominal; PDP/ALE need a numeric feature");
  }
}

std::string name_of(const FeatureInfo& info, std::size_t j) {
  return j < info.names.size() ? info.names[j] : "x" + std::to_string(j);
}

std::vector<double> shapley_weights(std::size_t d) {
  // w[s] = s! (d - s - 1)! / d!
  std::vector<double> w(d);
  for (std::size_t s = 0; s < d; ++s) {
    double lw = std::lgamma(static_cast<double>(s) + 1) + std::lgamma(static_cast<double>(d - s)) -
                std::lgamma(static_cast<double>(d) + 1);
    w[s] = std::exp(lw);
  }
  return w;
}

ShapleyAttribution sampled_impl(const BatchModel& f, Row row, const Matrix& background, int n_permutations,
                                std::uint64_t seed, kernels::Mode mode) {
  const std::size_t d = row.size();
  if (n_permutations < 1) throw ConfigError("n_permutations must be >= 1");
  if (d > 63) throw ConfigError("at most 63 features supported");
  Rng rng(seed);
  std::unordered_map<std::uint64_t, double> cache;
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(d, 0.0);

  for (int p = 0; p < n_permutations; ++p) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::uint64_t> chain(d + 1, 0);
    for (std::size_t k = 0; k < d; ++k) chain[k + 1] = chain[k] | (1ULL << order[k]);
    std::vector<std::uint64_t> missing;
    for (auto m : chain) {
      if (!cache.count(m) && std::find(missing.begin(), missing.end(), m) == missing.end()) missing.push_back(m);
    }
    if (!missing.empty()) {
      const auto vals = kernels::coalition_values(f, row, background, missing, mode);
      for (std::size_t i = 0; i < missing.size(); ++i) cache[missing[i]] = vals[i];
    }
    for (std::size_t k = 0; k < d; ++k) phi[order[k]] += cache[chain[k + 1]] - cache[chain[k]];
  }
  ShapleyAttribution out;
  for (auto& v : phi) v /= n_permutations;
  out.phi = std::move(phi);
  out.base_value = cache[0];
  out.output = cache[d == 64 ? ~0ULL : ((1ULL << d) - 1)];
  out.exact = false;
  out.n_permutations = n_permutations;
  return out;
}

ShapleyAttribution exact_impl(const BatchModel& f, Row row, const Matrix& background, kernels::Mode mode) {
  const std::size_t d = row.size();
  if (d > kMaxExactShapleyFeatures) {
    throw ConfigError("exact Shapley supports at most 15 features (got " + std::to_string(d) +
                      "); use sampled mode");
  }
  if (background.rows() == 0) throw ConfigError("empty background");
  const std::uint64_t n_masks = 1ULL << d;
  std::vector<std::uint64_t> masks(n_masks);
  std::iota(masks.begin(), masks.end(), 0ULL);
  const auto v = kernels::coalition_values(f, row, background, masks, mode);
  const auto w = shapley_weights(d);

  ShapleyAttribution out;
  out.phi.assign(d, 0.0);
  for (std::uint64_t m = 0; m < n_masks; ++m) {
    const auto size = static_cast<std::size_t>(__builtin_popcountll(m));
    for (std::size_t i = 0; i < d; ++i) {
      if ((m >> i) & 1ULL) continue;
      out.phi[i] += w[size] * (v[m | (1ULL << i)] - v[m]);
    }
  }
  out.base_value = v[0];
  out.output = v[n_masks - 1];
  return out;
}

ShapleyAttribution auto_impl(const BatchModel& f, Row row, const Matrix& background, int n_permutations,
                             std::uint64_t seed, kernels::Mode mode) {
  if (row.size() <= kMaxExactShapleyFeatures) return exact_impl(f, row, background, mode);
  return sampled_impl(f, row, background, n_permutations, seed, mode);
}

}  // namespace

BatchModel model_output(PredictorPtr predictor, int output_class) {
  if (!predictor) throw ConfigError("null predictor");
  if (output_class != 0 && output_class != 1) throw ConfigError("output class must be 0 or 1");
  return [predictor, output_class](const Matrix& x) -> Vector {
    Vector p1 = predictor->proba1(x);
    if (output_class == 1) return p1;
    return (1.0 - p1.array()).matrix();
  };
}

FeatureInfo FeatureInfo::numeric(std::size_t d) {
  FeatureInfo info;
  for (std::size_t j = 0; j < d; ++j) info.names.push_back("x" + std::to_string(j));
  info.nominal.assign(d, false);
  return info;
}

// ---------------------------------------------------------------- LIME

nlohmann::json LocalExplanation::to_json() const {
  nlohmann::json terms_json = nlohmann::json::array();
  for (const auto& t : terms) {
    nlohmann::json jt{{"feature", t.feature}, {"condition", t.condition}, {"weight", t.weight}};
    jt["lower"] = std::isfinite(t.lower) ? nlohmann::json(t.lower) : nlohmann::json(nullptr);
    jt["upper"] = std::isfinite(t.upper) ? nlohmann::json(t.upper) : nlohmann::json(nullptr);
    terms_json.push_back(jt);
  }
  return {{"terms", terms_json},
          {"intercept", intercept},
          {"fidelity_r2", fidelity_r2},
          {"model_output", model_output},
          {"local_prediction", local_prediction}};
}

LocalExplanation lime_explain(const BatchModel& f, Row row, const Matrix& background, const FeatureInfo& info,
                              const LimeOptions& options, std::uint64_t seed) {
  const auto d = static_cast<Eigen::Index>(row.size());
  if (background.rows() == 0) throw ConfigError("LIME needs a non-empty background");
  if (background.cols() != d) throw ConfigError("background width does not match the row");
  if (options.n_samples < 100) throw ConfigError("LIME needs n_samples >= 100");
  const auto ns = static_cast<Eigen::Index>(options.n_samples);
  auto is_nominal = [&](Eigen::Index j) {
    return static_cast<std::size_t>(j) < info.nominal.size() && info.nominal[static_cast<std::size_t>(j)];
  };

  std::vector<double> mean(static_cast<std::size_t>(d)), sd(static_cast<std::size_t>(d));
  std::vector<std::vector<double>> cuts(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    mean[uj] = column_mean(background, j);
    sd[uj] = column_std(background, j);
    if (!is_nominal(j)) {
      const auto s = sorted_column(background, uj);
      for (double q : {0.25, 0.5, 0.75}) {
        const double c = quantile_sorted(s, q);
        if (cuts[uj].empty() || c > cuts[uj].back()) cuts[uj].push_back(c);
      }
    }
  }
  auto bin_of = [&](std::size_t j, double v) {
    const auto& c = cuts[j];
    return static_cast<int>(std::lower_bound(c.begin(), c.end(), v) - c.begin());
  };

  // Perturbations; sample 0 is the row itself.
  Rng rng(seed);
  Matrix z(ns, d);
  for (Eigen::Index j = 0; j < d; ++j) z(0, j) = row[static_cast<std::size_t>(j)];
  for (Eigen::Index s = 1; s < ns; ++s) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (is_nominal(j)) {
        std::uniform_int_distribution<Eigen::Index> pick(0, background.rows() - 1);
        z(s, j) = background(pick(rng), j);
      } else {
        std::normal_distribution<double> g(mean[uj], sd[uj] > 0 ? sd[uj] : 1.0);
        z(s, j) = sd[uj] > 0 ? g(rng) : mean[uj];
      }
    }
  }
  const Vector y = f(z);

  // Interpretable representation.
  Matrix a(ns, d);
  for (Eigen::Index s = 0; s < ns; ++s) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (options.discretize) {
        const bool same = is_nominal(j) ? z(s, j) == row[uj] : bin_of(uj, z(s, j)) == bin_of(uj, row[uj]);
        a(s, j) = same ? 1.0 : 0.0;
      } else {
        a(s, j) = sd[uj] > 0 ? (z(s, j) - mean[uj]) / sd[uj] : 0.0;
      }
    }
  }

  const double width = options.kernel_width_scale * std::sqrt(static_cast<double>(d));
  Vector w(ns);
  for (Eigen::Index s = 0; s < ns; ++s) {
    double d2 = 0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      const double scale = sd[uj] > 0 ? sd[uj] : 1.0;
      const double diff = (z(s, j) - row[uj]) / scale;
      d2 += diff * diff;
    }
    w(s) = std::exp(-d2 / (width * width));
  }
  const double wsum = w.sum();
  if (!(wsum > 0)) throw ComputeError("LIME kernel weights vanished");

  // Weighted ridge with an unpenalized intercept, solved on centered data.
  const Eigen::RowVectorXd amean = (w.transpose() * a) / wsum;
  const double ymean = w.dot(y) / wsum;
  const Matrix ac = a.rowwise() - amean;
  const Vector yc = y.array() - ymean;
  Matrix gram = ac.transpose() * w.asDiagonal() * ac;
  gram.diagonal().array() += options.ridge;
  const Vector rhs = ac.transpose() * (w.asDiagonal() * yc);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) throw ComputeError("LIME surrogate system is singular");
  const Vector coef = ldlt.solve(rhs);
  if (!coef.allFinite()) throw ComputeError("LIME surrogate system is singular");
  const double intercept = ymean - amean.dot(coef);

  const Vector fitted = (a * coef).array() + intercept;
  const double ss_res = (w.array() * (y - fitted).array().square()).sum();
  const double ss_tot = (w.array() * yc.array().square()).sum();
  double r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  r2 = std::clamp(r2, 0.0, 1.0);

  LocalExplanation out;
  out.intercept = intercept;
  out.fidelity_r2 = r2;
  out.model_output = y(0);
  out.local_prediction = fitted(0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    LimeTerm t;
    t.feature = name_of(info, uj);
    t.weight = coef(j);
    const double v = row[uj];
    if (is_nominal(j) || !options.discretize) {
      t.condition = t.feature + " = " + fmt2(v);
      t.lower = t.upper = v;
    } else {
      const auto& c = cuts[uj];
      const int b = bin_of(uj, v);
      t.lower = b == 0 ? -inf : c[static_cast<std::size_t>(b - 1)];
      t.upper = b == static_cast<int>(c.size()) ? inf : c[static_cast<std::size_t>(b)];
      if (c.empty()) {
        t.condition = t.feature + " = " + fmt2(v);
      } else if (b == 0) {
        t.condition = t.feature + " <= " + fmt2(t.upper);
      } else if (b == static_cast<int>(c.size())) {
        t.condition = t.feature + " > " + fmt2(t.lower);
      } else {
        t.condition = fmt2(t.lower) + " < " + t.feature + " <= " + fmt2(t.upper);
      }
    }
    out.terms.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------- Shapley

double ShapleyAttribution::efficiency_gap() const {
  return base_value + std::accumulate(phi.begin(), phi.end(), 0.0) - output;
}

nlohmann::json ShapleyAttribution::to_json(const std::vector<std::string>& names) const {
  nlohmann::json contributions = nlohmann::json::array();
  for (std::size_t j = 0; j < phi.size(); ++j) {
    contributions.push_back({{"feature", j < names.size() ? names[j] : "x" + std::to_string(j)}, {"phi", phi[j]}});
  }
  nlohmann::json out{{"base_value", base_value},
                     {"output", output},
                     {"exact", exact},
                     {"efficiency_gap", efficiency_gap()},
                     {"contributions", contributions}};
  if (!exact) out["n_permutations"] = n_permutations;
  return out;
}

ShapleyAttribution shapley_exact(const BatchModel& f, Row row, const Matrix& background, kernels::Mode mode) {
  return exact_impl(f, row, background, mode);
}

ShapleyAttribution shapley_sampled(const BatchModel& f, Row row, const Matrix& background, int n_permutations,
                                   std::uint64_t seed) {
  if (background.rows() == 0) throw ConfigError("empty background");
  if (n_permutations < 64) throw ConfigError("sampled Shapley needs n_permutations >= 64");
  return sampled_impl(f, row, background, n_permutations, seed, kernels::default_mode());
}

ShapleyAttribution shapley_auto(const BatchModel& f, Row row, const Matrix& background, int n_permutations,
                                std::uint64_t seed) {
  return auto_impl(f, row, background, n_permutations, seed, kernels::default_mode());
}

nlohmann::json GlobalImportance::to_json() const {
  nlohmann::json ranked = nlohmann::json::array();
  for (auto j : ranking) ranked.push_back({{"feature", features[j]}, {"mean_abs_phi", mean_abs_phi[j]}});
  return {{"ranking", ranked}, {"n_rows", phi.rows()}};
}

GlobalImportance global_shapley(const BatchModel& f, const Matrix& rows, const Matrix& background,
                                const FeatureInfo& info, int n_permutations, std::uint64_t seed) {
  const auto d = static_cast<std::size_t>(rows.cols());
  GlobalImportance out;
  for (std::size_t j = 0; j < d; ++j) out.features.push_back(name_of(info, j));
  out.phi = Matrix::Zero(rows.rows(), rows.cols());
  // Parallel over rows; each row's coalitions run serially inside.
  kernels::for_each_index(static_cast<std::size_t>(rows.rows()), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto a = auto_impl(f, row_of(rows, r), background, n_permutations, derive_seed(seed, i),
                             kernels::Mode::kSerial);
    for (std::size_t j = 0; j < d; ++j) out.phi(r, static_cast<Eigen::Index>(j)) = a.phi[j];
  });
  out.mean_abs_phi.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    out.mean_abs_phi[j] = rows.rows() > 0 ? out.phi.col(static_cast<Eigen::Index>(j)).cwiseAbs().mean() : 0.0;
  }
  out.ranking.resize(d);
  std::iota(out.ranking.begin(), out.ranking.end(), 0);
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return out.mean_abs_phi[a] > out.mean_abs_phi[b]; });
  return out;
}

std::vector<DependencePoint> dependence_data(const GlobalImportance& global, const Matrix& rows,
                                             std::size_t feature, std::size_t color_feature) {
  if (feature >= static_cast<std::size_t>(rows.cols()) || color_feature >= static_cast<std::size_t>(rows.cols())) {
    throw ConfigError("dependence feature out of range");
  }
  if (global.phi.rows() != rows.rows()) throw ConfigError("attribution rows do not match the data");
  std::vector<DependencePoint> out;
  const auto fj = static_cast<Eigen::Index>(feature);
  const auto cj = static_cast<Eigen::Index>(color_feature);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out.push_back({rows(i, fj), global.phi(i, fj), rows(i, cj)});
  return out;
}

// ---------------------------------------------------------------- PDP / ALE

double GridFunction::weighted_mean() const {
  if (kind != Kind::kAle) {
    return values.empty() ? 0.0 : std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  }
  double total = 0, n = 0;
  for (std::size_t k = 0; k < bin_counts.size(); ++k) {
    total += static_cast<double>(bin_counts[k]) * 0.5 * (values[k] + values[k + 1]);
    n += static_cast<double>(bin_counts[k]);
  }
  return n > 0 ? total / n : 0.0;
}

nlohmann::json GridFunction::to_json() const {
  static const char* kinds[] = {"PDP1", "PDP2", "ALE"};
  nlohmann::json out{{"kind", kinds[static_cast<int>(kind)]},
                     {"features", features},
                     {"grid", grid},
                     {"values", values},
                     {"units", units},
                     {"notes", notes}};
  if (kind == Kind::kPdp2) out["grid2"] = grid2;
  if (kind == Kind::kAle) out["bin_counts"] = bin_counts;
  return out;
}

std::vector<double> percentile_grid(const Matrix& x, std::size_t feature, int grid_size) {
  if (grid_size < 2) throw ConfigError("grid_size must be >= 2");
  const auto s = sorted_column(x, feature);
  if (s.empty()) throw ConfigError("empty data");
  std::vector<double> grid;
  for (int g = 0; g < grid_size; ++g) {
    const double q = 0.05 + 0.90 * static_cast<double>(g) / static_cast<double>(grid_size - 1);
    const double v = quantile_sorted(s, q);
    if (grid.empty() || v > grid.back()) grid.push_back(v);
  }
  return grid;
}

GridFunction pdp(const BatchModel& f, const Matrix& x, const FeatureInfo& info, std::size_t feature,
                 const std::vector<double>& grid) {
  check_feature(x, info, feature);
  if (grid.empty()) throw ConfigError("empty PDP grid");
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (!(grid[g] > grid[g - 1])) throw ConfigError("PDP grid must be strictly increasing");
  }
  GridFunction out;
  out.kind = GridFunction::Kind::kPdp1;
  out.features = {name_of(info, feature)};
  out.grid = grid;
  const Vector v = kernels::pdp_curve(f, x, feature, grid);
  out.values.assign(v.data(), v.data() + v.size());
  out.units = "mean model output";
  return out;
}

GridFunction pdp(const BatchModel& f, const Matrix& x, const FeatureInfo& info, std::size_t feature, int grid_size) {
  check_feature(x, info, feature);
  auto out = pdp(f, x, info, feature, percentile_grid(x, feature, grid_size));
  if (static_cast<int>(out.grid.size()) < grid_size) {
    out.notes.push_back("grid collapsed to " + std::to_string(out.grid.size()) + " distinct points");
  }
  return out;
}

GridFunction pdp2(const BatchModel& f, const Matrix& x, const FeatureInfo& info, std::size_t feature_a,
                  std::size_t feature_b, int grid_size) {
  check_feature(x, info, feature_a);
  check_feature(x, info, feature_b);
  if (feature_a == feature_b) throw ConfigError("two-feature PDP needs distinct features");
  GridFunction out;
  out.kind = GridFunction::Kind::kPdp2;
  out.features = {name_of(info, feature_a), name_of(info, feature_b)};
  out.grid = percentile_grid(x, feature_a, grid_size);
  out.grid2 = percentile_grid(x, feature_b, grid_size);
  out.units = "mean model output";
  Matrix fixed = x;
  for (double ga : out.grid) {
    fixed.col(static_cast<Eigen::Index>(feature_a)).setConstant(ga);
    const Vector v = kernels::pdp_curve(f, fixed, feature_b, out.grid2);
    out.values.insert(out.values.end(), v.data(), v.data() + v.size());
  }
  return out;
}

GridFunction ale(const BatchModel& f, const Matrix& x, const FeatureInfo& info, std::size_t feature, int n_bins) {
  check_feature(x, info, feature);
  if (n_bins < 2) throw ConfigError("ALE needs n_bins >= 2");
  const auto s = sorted_column(x, feature);
  if (s.empty()) throw ConfigError("empty data");
  const auto fj = static_cast<Eigen::Index>(feature);

  // Edges are observed order statistics, so every half-open bin holds its upper edge.
  std::vector<double> edges;
  for (int k = 0; k <= n_bins; ++k) {
    const auto pos = static_cast<std::size_t>(
        std::llround(static_cast<double>(k) / n_bins * static_cast<double>(s.size() - 1)));
    const double e = s[pos];
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  GridFunction out;
  out.kind = GridFunction::Kind::kAle;
  out.features = {name_of(info, feature)};
  out.units = "centered model output";
  if (edges.size() < 2) {
    out.grid = edges;
    out.values.assign(edges.size(), 0.0);
    out.notes.push_back("feature is constant; ALE undefined, reported as zero");
    warn("ALE: feature '" + out.features[0] + "' is constant");
    return out;
  }
  if (static_cast<int>(edges.size()) - 1 < n_bins) {
    const auto msg = "ALE: " + std::to_string(n_bins - static_cast<int>(edges.size()) + 1) +
                     " empty quantile bins merged for '" + out.features[0] + "'";
    warn(msg);
    out.notes.push_back(msg);
  }

  const std::size_t nb = edges.size() - 1;
  auto bin_of = [&](double v) {
    // (e_k, e_{k+1}], the first bin also takes e_0.
    auto it = std::lower_bound(edges.begin(), edges.end(), v);
    std::size_t k = static_cast<std::size_t>(it - edges.begin());
    return k == 0 ? 0 : std::min(k - 1, nb - 1);
  };
  std::vector<std::size_t> bin(static_cast<std::size_t>(x.rows()));
  Matrix lower = x, upper = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto k = bin_of(x(i, fj));
    bin[static_cast<std::size_t>(i)] = k;
    lower(i, fj) = edges[k];
    upper(i, fj) = edges[k + 1];
  }
  const Vector diff = f(upper) - f(lower);
  std::vector<double> sum(nb, 0.0);
  std::vector<std::size_t> count(nb, 0);
  for (std::size_t i = 0; i < bin.size(); ++i) {
    sum[bin[i]] += diff(static_cast<Eigen::Index>(i));
    ++count[bin[i]];
  }

  out.grid = edges;
  out.values.assign(nb + 1, 0.0);
  for (std::size_t k = 0; k < nb; ++k) {
    const double effect = count[k] > 0 ? sum[k] / static_cast<double>(count[k]) : 0.0;
    out.values[k + 1] = out.values[k] + effect;
  }
  out.bin_counts = count;
  const double centre = out.weighted_mean();
  for (auto& v : out.values) v -= centre;
  return out;
}

}  // namespace nephro
