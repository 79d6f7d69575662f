#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "nephro/table.hpp"

namespace nephro {

struct FeatureScore {
  std::string feature;
  double score = 0;
  std::optional<double> p_value;
  std::optional<double> entropy;
  bool selected = false;
};

nlohmann::json to_json(const std::vector<FeatureScore>& scores);

struct ScoredSelection {
  std::vector<FeatureScore> scores;
  std::vector<std::string> notes;

  std::vector<std::string> selected() const;
  nlohmann::json to_json() const;
};

// Signed Pearson r of every feature with the label; selected when |r| >= threshold.
ScoredSelection correlation_with_target(const EncodedData& data, double threshold);

// Unregularized maximum-likelihood logit over all features; t = coef / se,
// two-sided normal p-value; selected when p < alpha.
ScoredSelection logit_significance(const EncodedData& data, double alpha);

// IG over 10 equal-frequency bins (numeric) or categories (nominal); entropy
// over the feature's distinct values. Sorted by IG descending, top_k selected.
ScoredSelection information_gain_ranking(const EncodedData& data, std::size_t top_k, int bins = 10);

// Population variance of the raw encoded column; kept when >= threshold.
ScoredSelection variance_threshold(const EncodedData& data, double threshold);

enum class WrapperMode { kForward, kRfe };

struct WrapperOptions {
  std::size_t target_size = 10;
  int folds = 5;
  // Forward only: stop early when the CV gain falls below this; 0 always reaches target_size.
  double tolerance = 0;
  double l2 = 1.0;  // ridge strength of the logistic model, on standardized features
  std::uint64_t seed = 0;
};

struct WrapperResult {
  std::vector<std::string> selected;
  // Forward: CV accuracy after each addition. RFE: feature removed per step.
  std::vector<double> trace_scores;
  std::vector<std::string> trace_features;
  nlohmann::json to_json() const;
};

WrapperResult wrapper_select(const EncodedData& data, WrapperMode mode, const WrapperOptions& options);

struct SelectionReport {
  std::map<std::string, std::vector<std::string>> method_sets;
  std::map<std::string, int> votes;
  std::vector<std::string> consensus;
  std::vector<std::string> exclusions;
  std::vector<std::string> final_set;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
};

// consensus = features named by at least `min_votes` methods; final = consensus
// minus exclusions. Output order follows `feature_order` when given, else
// lexicographic.
SelectionReport consensus_select(const std::map<std::string, std::vector<std::string>>& method_sets,
                                 const std::vector<std::string>& exclusions,
                                 const std::vector<std::string>& feature_order = {}, int min_votes = 2);

// |A ∩ B| / min(|A|, |B|).
double overlap_coefficient(const std::vector<std::string>& a, const std::vector<std::string>& b);

}  // namespace nephro
