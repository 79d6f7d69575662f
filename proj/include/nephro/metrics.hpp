#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nephro/common.hpp"

namespace nephro {

struct ImportantFeatureSet {
  std::vector<std::string> features;  // importance descending, ties by original index
  std::vector<double> importances;    // normalized, same order
  double cutoff = 0.9;
  std::size_t n_members = 0;          // minimal prefix reaching the cutoff

  std::vector<std::string> members() const;
  double cumulative() const;
  nlohmann::json to_json() const;
};

ImportantFeatureSet important_set(std::span<const double> importances, const std::vector<std::string>& names,
                                  double cutoff = 0.9);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

// Redundant / total, with redundant = d_total - n_important.
double interpretability_score(std::size_t n_important, std::size_t d_total);

struct Fidelity {
  double precision = 0, recall = 0, f1 = 0;
};

// P = |T ∩ E| / |T|, R = |T ∩ E| / |E|.
Fidelity external_fidelity(const std::vector<std::string>& true_set, const std::vector<std::string>& explanation_set);

struct CompositeIndices {
  double fii = 0, facc = 0;
};

CompositeIndices composite_indices(double f1, double interpretability, double accuracy);

double round_half_up(double v, int decimals = 2);

// Size of the prefix of the model's important set that maximizes the cosine
// between the model's importances (masked to the prefix) and the explainer's.
struct CosineValidation {
  std::size_t n_important = 0;
  double cosine = 0;
  std::vector<double> cosine_by_prefix;  // index m-1 for prefix size m
};

CosineValidation cosine_validated_count(std::span<const double> model_importances,
                                        std::span<const double> explainer_importances,
                                        const std::vector<std::string>& names, double cutoff = 0.9);

struct InterpretabilityReport {
  std::string model;
  double interpretability = 0;
  Fidelity fidelity;
  std::optional<double> cosine;
  double fii = 0, facc = 0, accuracy = 0;
  std::size_t d_total = 0, n_important = 0;
  std::vector<std::string> true_set, explanation_set;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
};

InterpretabilityReport interpretability_report(const std::string& model, std::size_t n_important,
                                               std::size_t d_total, const std::vector<std::string>& true_set,
                                               const std::vector<std::string>& explanation_set, double accuracy,
                                               std::optional<double> cosine = std::nullopt);

// Table-shaped document: one row per model, full precision plus 2-decimal display.
nlohmann::json scorecard(const std::vector<InterpretabilityReport>& reports);

// Published per-model inputs and the values printed for them.
struct PublishedMetricsRow {
  std::string model;
  std::size_t n_important = 0, d_total = 0;
  std::vector<std::string> true_set;
  double accuracy = 0;
  double interpretability = 0, fidelity = 0, fii = 0, facc = 0;  // as printed
};

struct PublishedMetricsFixture {
  std::vector<std::string> tree_features;
  std::vector<double> tree_importances;
  double cutoff = 0.9;
  std::vector<PublishedMetricsRow> rows;

  static PublishedMetricsFixture load(const std::string& path);
  std::vector<InterpretabilityReport> evaluate() const;
};

}  // namespace nephro
