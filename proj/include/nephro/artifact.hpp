#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nephro/attribution.hpp"
#include "nephro/counterfactual.hpp"
#include "nephro/models.hpp"
#include "nephro/table.hpp"

namespace nephro {

inline constexpr const char* kSchemaVersion = "1.0";

struct ArtifactFeature {
  std::string name;
  bool nominal = false;
  std::vector<std::string> categories;
  std::string unit;
  std::optional<std::pair<double, double>> range;
};

// Everything the explain service needs, in one self-contained document.
struct ModelArtifact {
  ModelSpec spec;
  PredictorPtr predictor;
  std::vector<ArtifactFeature> features;
  std::vector<std::string> classes;  // label per class code
  std::string schema_fingerprint;
  int explained_class = 0;           // attributions describe P(explained_class)
  FeatureSpace space;
  Matrix background;
  nlohmann::json cv_metrics;

  // Explainer defaults carried with the model.
  std::vector<std::string> immutables;
  std::vector<std::string> pdp_features, ale_features;
  int grid_size = 20, ale_bins = 10, lime_samples = 5000, permutations = 1024;
  int cf_k = 5, cf_budget = 2000;

  FeatureInfo info() const;
  std::vector<std::string> names() const;
  BatchModel explained_output() const;
  std::size_t index_of(const std::string& name) const;

  nlohmann::json to_json() const;
  static ModelArtifact from_json(const nlohmann::json& doc);
  void save(const std::string& path) const;
  static ModelArtifact load(const std::string& path);
};

// Features of an encoded table, with units and ranges from the schema.
std::vector<ArtifactFeature> artifact_features(const EncodedData& data, const Schema& schema);

}  // namespace nephro
