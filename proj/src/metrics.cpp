#include "nephro/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace nephro {

std::vector<std::string> ImportantFeatureSet::members() const {
  return {features.begin(), features.begin() + static_cast<std::ptrdiff_t>(n_members)};
}

double ImportantFeatureSet::cumulative() const {
  return std::accumulate(importances.begin(), importances.begin() + static_cast<std::ptrdiff_t>(n_members), 0.0);
}

nlohmann::json ImportantFeatureSet::to_json() const {
  nlohmann::json ranked = nlohmann::json::array();
  for (std::size_t i = 0; i < features.size(); ++i) {
    ranked.push_back({{"feature", features[i]}, {"importance", importances[i]}, {"member", i < n_members}});
  }
  return {{"cutoff", cutoff}, {"members", members()}, {"cumulative", cumulative()}, {"ranked", ranked}};
}

ImportantFeatureSet important_set(std::span<const double> importances, const std::vector<std::string>& names,
                                  double cutoff) {
  if (importances.size() != names.size()) throw ConfigError("importances and names differ in length");
  if (!(cutoff > 0 && cutoff <= 1)) throw ConfigError("cutoff must lie in (0, 1]");
  double total = 0;
  for (double v : importances) {
    if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("importances must be finite and non-negative");
    total += v;
  }
  if (!(total > 0)) throw ConfigError("importances are all zero");
  std::vector<std::size_t> order(importances.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return importances[a] > importances[b]; });
  ImportantFeatureSet out;
  out.cutoff = cutoff;
  double cum = 0;
  for (auto i : order) {
    out.features.push_back(names[i]);
    out.importances.push_back(importances[i] / total);
  }
  // Tolerance absorbs the rounding in the normalization (e.g. uniform weights).
  for (std::size_t k = 0; k < out.importances.size(); ++k) {
    cum += out.importances[k];
    if (cum >= cutoff - 1e-12) {
      out.n_members = k + 1;
      break;
    }
  }
  if (out.n_members == 0) out.n_members = out.features.size();
  return out;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ConfigError("cosine similarity needs equal-length vectors");
  double uv = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (!(uu > 0) || !(vv > 0)) throw ConfigError("cosine similarity of a zero vector");
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

double interpretability_score(std::size_t n_important, std::size_t d_total) {
  if (d_total == 0) throw ConfigError("d_total must be positive");
  if (n_important > d_total) throw ConfigError("n_important exceeds d_total");
  return static_cast<double>(d_total - n_important) / static_cast<double>(d_total);
}

Fidelity external_fidelity(const std::vector<std::string>& true_set, const std::vector<std::string>& explanation_set) {
  const std::set<std::string> t(true_set.begin(), true_set.end()), e(explanation_set.begin(), explanation_set.end());
  if (t.empty() || e.empty()) throw ConfigError("external fidelity needs non-empty feature sets");
  std::size_t common = 0;
  for (const auto& f : t) common += e.count(f);
  Fidelity out;
  out.precision = static_cast<double>(common) / static_cast<double>(t.size());
  out.recall = static_cast<double>(common) / static_cast<double>(e.size());
  const double s = out.precision + out.recall;
  out.f1 = s > 0 ? 2 * out.precision * out.recall / s : 0.0;
  return out;
}

CompositeIndices composite_indices(double f1, double interpretability, double accuracy) {
  for (double v : {f1, interpretability, accuracy}) {
    if (!(v >= 0 && v <= 1)) throw ConfigError("composite index inputs must lie in [0, 1]");
  }
  return {f1 * interpretability, f1 * accuracy};
}

double round_half_up(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // The nudge keeps values like 0.665 (stored as 0.66499..) rounding up.
  return std::floor(v * scale + 0.5 + 1e-9) / scale;
}

CosineValidation cosine_validated_count(std::span<const double> model_importances,
                                        std::span<const double> explainer_importances,
                                        const std::vector<std::string>& names, double cutoff) {
  if (model_importances.size() != explainer_importances.size()) {
    throw ConfigError("importance vectors differ in length");
  }
  const auto set = important_set(model_importances, names, cutoff);
  CosineValidation out;
  std::vector<double> em(model_importances.size(), 0.0);
  for (std::size_t m = 1; m <= set.n_members; ++m) {
    const auto j = static_cast<std::size_t>(std::find(names.begin(), names.end(), set.features[m - 1]) - names.begin());
    em[j] = model_importances[j];
    const double c = cosine_similarity(em, explainer_importances);
    out.cosine_by_prefix.push_back(c);
    if (m == 1 || c > out.cosine) {
      out.cosine = c;
      out.n_important = m;
    }
  }
  return out;
}

nlohmann::json InterpretabilityReport::to_json() const {
  nlohmann::json out{{"model", model},
                     {"interpretability", interpretability},
                     {"precision", fidelity.precision},
                     {"recall", fidelity.recall},
                     {"fidelity", fidelity.f1},
                     {"fii", fii},
                     {"facc", facc},
                     {"accuracy", accuracy},
                     {"d_total", d_total},
                     {"n_important", n_important},
                     {"true_set", true_set},
                     {"explanation_set", explanation_set},
                     {"notes", notes}};
  out["cosine"] = cosine ? nlohmann::json(*cosine) : nlohmann::json(nullptr);
  out["display"] = {{"interpretability", round_half_up(interpretability)},
                    {"fidelity", round_half_up(fidelity.f1)},
                    {"fii", round_half_up(fii)},
                    {"facc", round_half_up(facc)}};
  return out;
}

InterpretabilityReport interpretability_report(const std::string& model, std::size_t n_important,
                                               std::size_t d_total, const std::vector<std::string>& true_set,
                                               const std::vector<std::string>& explanation_set, double accuracy,
                                               std::optional<double> cosine) {
  InterpretabilityReport r;
  r.model = model;
  r.n_important = n_important;
  r.d_total = d_total;
  r.interpretability = interpretability_score(n_important, d_total);
  r.true_set = true_set;
  r.explanation_set = explanation_set;
  r.fidelity = external_fidelity(true_set, explanation_set);
  r.accuracy = accuracy;
  r.cosine = cosine;
  const auto ci = composite_indices(r.fidelity.f1, r.interpretability, accuracy);
  r.fii = ci.fii;
  r.facc = ci.facc;
  return r;
}

nlohmann::json scorecard(const std::vector<InterpretabilityReport>& reports) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : reports) rows.push_back(r.to_json());
  return {{"columns", {"interpretability", "fidelity", "fii", "facc", "cosine"}}, {"rows", rows}};
}

PublishedMetricsFixture PublishedMetricsFixture::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metrics fixture '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
    PublishedMetricsFixture f;
    for (const auto& t : j.at("tree_importances")) {
      f.tree_features.push_back(t.at("feature").get<std::string>());
      f.tree_importances.push_back(t.at("importance").get<double>());
    }
    f.cutoff = j.value("cutoff", 0.9);
    for (const auto& m : j.at("models")) {
      PublishedMetricsRow r;
      r.model = m.at("model").get<std::string>();
      r.n_important = m.at("n_important").get<std::size_t>();
      r.d_total = m.at("d_total").get<std::size_t>();
      r.true_set = m.at("true_set").get<std::vector<std::string>>();
      r.accuracy = m.at("accuracy").get<double>();
      const auto& p = m.at("printed");
      r.interpretability = p.at("interpretability").get<double>();
      r.fidelity = p.at("fidelity").get<double>();
      r.fii = p.at("fii").get<double>();
      r.facc = p.at("facc").get<double>();
      f.rows.push_back(std::move(r));
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed metrics fixture '" + path + "': " + e.what());
  }
}

std::vector<InterpretabilityReport> PublishedMetricsFixture::evaluate() const {
  const auto explanation = important_set(tree_importances, tree_features, cutoff).members();
  std::vector<InterpretabilityReport> out;
  for (const auto& r : rows) {
    out.push_back(interpretability_report(r.model, r.n_important, r.d_total, r.true_set, explanation, r.accuracy));
  }
  return out;
}

}  // namespace nephro
