#include "nephro/missingness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

namespace nephro {

const MissingnessEntry& MissingnessProfile::at(std::string_view feature) const {
  for (const auto& e : entries) {
    if (e.feature == feature) return e;
  }
  throw DataError("missingness profile has no feature '" + std::string(feature) + "'");
}

nlohmann::json MissingnessProfile::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& e : entries) {
    rows_json.push_back({{"feature", e.feature},
                         {"missing_count", e.count},
                         {"missing_fraction", e.fraction},
                         {"missing_percent", std::round(e.fraction * 10000.0) / 100.0}});
  }
  return {{"rows", rows}, {"features", std::move(rows_json)}};
}

MissingnessProfile profile_missingness(const DataTable& table) {
  MissingnessProfile profile;
  profile.rows = table.rows();
  for (std::size_t c : table.schema().feature_indices()) {
    MissingnessEntry e;
    e.feature = table.schema().column(c).name;
    for (std::size_t r = 0; r < table.rows(); ++r) e.count += table.missing(r, c) ? 1 : 0;
    e.fraction = table.rows() ? static_cast<double>(e.count) / static_cast<double>(table.rows()) : 0.0;
    profile.entries.push_back(std::move(e));
  }
  return profile;
}

std::size_t MissingPattern::observed_count() const {
  return static_cast<std::size_t>(std::count(observed.begin(), observed.end(), true));
}

std::vector<MissingPattern> missing_patterns(const Matrix& data) {
  std::vector<MissingPattern> patterns;
  std::map<std::vector<bool>, std::size_t> index;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    std::vector<bool> mask(static_cast<std::size_t>(data.cols()));
    for (Eigen::Index c = 0; c < data.cols(); ++c) mask[static_cast<std::size_t>(c)] = !std::isnan(data(r, c));
    auto [it, inserted] = index.try_emplace(mask, patterns.size());
    if (inserted) patterns.push_back({mask, {}});
    patterns[it->second].rows.push_back(static_cast<std::size_t>(r));
  }
  return patterns;
}

namespace {

std::vector<Eigen::Index> indices_where(const std::vector<bool>& mask, bool value) {
  std::vector<Eigen::Index> out;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask[j] == value) out.push_back(static_cast<Eigen::Index>(j));
  }
  return out;
}

Eigen::MatrixXd regularized(Eigen::MatrixXd sigma, double ridge_scale) {
  const double p = static_cast<double>(sigma.rows());
  const double ridge = ridge_scale * std::max(sigma.trace(), 0.0) / std::max(p, 1.0);
  sigma.diagonal().array() += ridge;
  return sigma;
}

}  // namespace

EmEstimate em_mean_covariance(const Matrix& data, const std::vector<MissingPattern>& patterns,
                              const McarOptions& options) {
  const Eigen::Index p = data.cols();
  const double n = static_cast<double>(data.rows());

  EmEstimate est;
  est.mean = Vector::Zero(p);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double s = 0, ss = 0, k = 0;
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
      if (!std::isnan(data(r, j))) {
        s += data(r, j);
        ss += data(r, j) * data(r, j);
        ++k;
      }
    }
    if (k > 0) {
      est.mean(j) = s / k;
      cov(j, j) = std::max(ss / k - est.mean(j) * est.mean(j), 1e-12);
    }
  }

  for (int it = 0; it < options.max_iter; ++it) {
    Vector t1 = Vector::Zero(p);
    Eigen::MatrixXd t2 = Eigen::MatrixXd::Zero(p, p);
    for (const auto& pat : patterns) {
      const auto obs = indices_where(pat.observed, true);
      const auto mis = indices_where(pat.observed, false);
      if (mis.empty()) {
        for (std::size_t r : pat.rows) {
          const Vector x = data.row(static_cast<Eigen::Index>(r)).transpose();
          t1 += x;
          t2 += x * x.transpose();
        }
        continue;
      }
      if (obs.empty()) continue;
      const Eigen::MatrixXd s_oo = regularized(cov(obs, obs), options.ridge_scale);
      const Eigen::MatrixXd s_mo = cov(mis, obs);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(s_oo);
      const Eigen::MatrixXd b = ldlt.solve(s_mo.transpose()).transpose();  // S_mo S_oo^-1
      const Eigen::MatrixXd c = cov(mis, mis) - b * s_mo.transpose();
      for (std::size_t r : pat.rows) {
        Vector x(p);
        Vector xo(static_cast<Eigen::Index>(obs.size()));
        for (std::size_t k = 0; k < obs.size(); ++k) {
          xo(static_cast<Eigen::Index>(k)) = data(static_cast<Eigen::Index>(r), obs[k]);
          x(obs[k]) = xo(static_cast<Eigen::Index>(k));
        }
        const Vector xm = est.mean(mis) + b * (xo - est.mean(obs));
        for (std::size_t k = 0; k < mis.size(); ++k) x(mis[k]) = xm(static_cast<Eigen::Index>(k));
        t1 += x;
        t2 += x * x.transpose();
        t2(mis, mis) += c;
      }
    }
    const Vector mean = t1 / n;
    const Eigen::MatrixXd next = t2 / n - mean * mean.transpose();
    const double delta =
        std::max((mean - est.mean).cwiseAbs().maxCoeff(), (next - cov).cwiseAbs().maxCoeff());
    est.mean = mean;
    cov = next;
    est.iterations = it + 1;
    if (delta < options.tolerance) {
      est.converged = true;
      break;
    }
  }
  est.covariance = cov;
  return est;
}

double chi_square_sf(double statistic, double degrees_of_freedom) {
  if (statistic <= 0) return 1.0;
  boost::math::chi_squared dist(degrees_of_freedom);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

nlohmann::json MCARTestResult::to_json() const {
  return {{"statistic", statistic},       {"degrees_of_freedom", degrees_of_freedom},
          {"p_value", p_value},           {"n_patterns", n_patterns},
          {"sample_size", sample_size},   {"dropped_rows", dropped_rows},
          {"dropped_columns", dropped_columns}, {"em_iterations", em_iterations},
          {"notes", notes}};
}

MCARTestResult little_mcar_test(const Matrix& raw, const McarOptions& options,
                                std::span<const std::string> column_names) {
  MCARTestResult result;

  // Columns with fewer than two observed values or no spread carry no
  // information about the mechanism and make the covariance singular.
  std::vector<Eigen::Index> keep;
  std::vector<double> centers, scales;
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    double s = 0, ss = 0, k = 0;
    for (Eigen::Index r = 0; r < raw.rows(); ++r) {
      if (!std::isnan(raw(r, j))) {
        s += raw(r, j);
        ss += raw(r, j) * raw(r, j);
        ++k;
      }
    }
    const double m = k > 0 ? s / k : 0;
    const double var = k > 1 ? ss / k - m * m : 0;
    if (var > 1e-12 * std::max(1.0, m * m)) {
      keep.push_back(j);
      centers.push_back(m);
      scales.push_back(std::sqrt(var));
    } else {
      result.dropped_columns.push_back(static_cast<std::size_t>(j) < column_names.size()
                                           ? column_names[static_cast<std::size_t>(j)]
                                           : "column " + std::to_string(j));
    }
  }
  const Eigen::Index p = static_cast<Eigen::Index>(keep.size());
  if (p == 0) throw ComputeError("MCAR test: no column with observed variance");

  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    bool any = false;
    for (Eigen::Index j : keep) any = any || !std::isnan(raw(r, j));
    if (any) {
      rows.push_back(r);
    } else {
      ++result.dropped_rows;
    }
  }
  if (result.dropped_rows > 0) {
    const auto msg = std::to_string(result.dropped_rows) + " row(s) missing every variable dropped";
    warn("MCAR test: " + msg);
    result.notes.push_back(msg);
  }

  Matrix data(static_cast<Eigen::Index>(rows.size()), p);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index k = 0; k < p; ++k) {
      const double v = raw(rows[i], keep[static_cast<std::size_t>(k)]);
      data(static_cast<Eigen::Index>(i), k) =
          std::isnan(v) ? v : (v - centers[static_cast<std::size_t>(k)]) / scales[static_cast<std::size_t>(k)];
    }
  }

  const auto patterns = missing_patterns(data);
  result.sample_size = rows.size();
  result.n_patterns = patterns.size();
  if (patterns.size() < 2) throw ComputeError("MCAR test undefined: fewer than 2 missingness patterns");

  const auto em = em_mean_covariance(data, patterns, options);
  result.em_iterations = em.iterations;
  if (!em.converged) result.notes.push_back("EM stopped at the iteration limit");

  double d2 = 0;
  long observed_total = 0;
  for (const auto& pat : patterns) {
    const auto obs = indices_where(pat.observed, true);
    observed_total += static_cast<long>(obs.size());
    Vector ybar = Vector::Zero(static_cast<Eigen::Index>(obs.size()));
    for (std::size_t r : pat.rows) {
      for (std::size_t k = 0; k < obs.size(); ++k) {
        ybar(static_cast<Eigen::Index>(k)) += data(static_cast<Eigen::Index>(r), obs[k]);
      }
    }
    ybar /= static_cast<double>(pat.rows.size());
    const Vector diff = ybar - em.mean(obs);
    const Eigen::MatrixXd sigma = regularized(em.covariance(obs, obs), options.ridge_scale);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
      throw ComputeError("MCAR test: singular pattern covariance after regularization");
    }
    d2 += static_cast<double>(pat.rows.size()) * diff.dot(llt.solve(diff));
  }
  result.statistic = d2;
  result.degrees_of_freedom = static_cast<int>(observed_total - p);
  if (result.degrees_of_freedom <= 0) throw ComputeError("MCAR test: non-positive degrees of freedom");
  result.p_value = chi_square_sf(d2, result.degrees_of_freedom);
  result.notes.push_back("a small p-value rejects the MCAR hypothesis");
  return result;
}

MCARTestResult little_mcar_test(const DataTable& table, double sample_fraction, std::uint64_t seed,
                                const McarOptions& options) {
  if (!(sample_fraction > 0 && sample_fraction <= 1)) {
    throw ConfigError("MCAR test: sample fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> order(table.rows());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto m = static_cast<std::size_t>(std::llround(sample_fraction * static_cast<double>(table.rows())));
  order.resize(std::max<std::size_t>(m, 1));
  std::sort(order.begin(), order.end());

  const auto feats = table.schema().feature_indices();
  std::vector<std::string> names;
  for (std::size_t c : feats) names.push_back(table.schema().column(c).name);
  Matrix data(static_cast<Eigen::Index>(order.size()), static_cast<Eigen::Index>(feats.size()));
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t k = 0; k < feats.size(); ++k) {
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = table.at(order[i], feats[k]);
    }
  }
  return little_mcar_test(data, options, names);
}

}  // namespace nephro
