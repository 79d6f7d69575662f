#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nephro/attribution.hpp"
#include "nephro/common.hpp"
#include "nephro/kernels.hpp"

namespace nephro {

// Per-feature search bounds and distance scales, taken from training data.
struct FeatureSpace {
  std::vector<std::string> names;
  std::vector<bool> nominal;
  std::vector<double> lower, upper;
  // 1/scale is the L1 weight: MAD, else std, else 1. Nominal features use 1.
  std::vector<double> scale;
  std::vector<std::vector<double>> categories;  // nominal only
  std::vector<double> medians;                  // lower median, always an observed value
  // Numeric only: 101 percentiles of the data; empty means sample the range uniformly.
  std::vector<std::vector<double>> quantiles;

  static FeatureSpace from_data(const Matrix& x, const FeatureInfo& info);
  std::size_t size() const { return names.size(); }
  std::size_t index_of(const std::string& name) const;
};

// MAD-normalized L1; a nominal change costs 1.
double weighted_l1(const FeatureSpace& space, Row a, Row b);

struct CounterfactualOptions {
  int k = 5;
  int budget = 2000;
  // -1 picks the class opposite to the prediction.
  int target_class = -1;
  std::vector<std::string> immutables;
  double sparsity_penalty = 0.1;
  // Returned counterfactuals differ pairwise by at least this weighted L1.
  double min_separation = 0.1;
};

struct Counterfactual {
  std::vector<double> row;
  int predicted_class = 0;
  double proba1 = 0;
  double distance = 0;
  double objective = 0;
  std::vector<bool> changed;
  std::size_t candidate = 0;

  std::size_t n_changed() const;
};

struct CounterfactualSet {
  std::vector<double> original;
  int original_class = 0;
  double original_proba1 = 0;
  int target_class = 0;
  std::vector<Counterfactual> counterfactuals;  // distance ascending
  bool found = false;
  std::optional<Counterfactual> best_invalid;
  std::vector<std::string> notes;

  nlohmann::json to_json(const FeatureSpace& space) const;
};

// `p1` returns P(class 1); class 1 iff p1 > 0.5.
CounterfactualSet counterfactual_search(const BatchModel& p1, Row row, const FeatureSpace& space,
                                        const CounterfactualOptions& options, std::uint64_t seed);

enum class CemMode { kPertinentNegative, kPertinentPositive };

struct CemResult {
  CemMode mode = CemMode::kPertinentNegative;
  std::vector<double> original;
  std::vector<double> delta;      // PN: added to the original to flip the class
  std::vector<bool> retained;     // PP: features kept from the original
  std::vector<double> explained;  // PN: original + delta; PP: masked row
  std::size_t sparsity = 0;
  int achieved_class = 0;
  double proba1 = 0;
  bool flagged = false;
  std::string method;
  std::vector<std::string> notes;

  nlohmann::json to_json(const FeatureSpace& space) const;
};

// Pertinent positives are exhaustive up to this many features, greedy beyond.
inline constexpr std::size_t kMaxExhaustivePpFeatures = 10;

CemResult cem_explain(const BatchModel& p1, Row row, CemMode mode, const FeatureSpace& space,
                      const CounterfactualOptions& options, std::uint64_t seed);

// Greedy pertinent positive: add the feature that best keeps the class until it holds.
CemResult pertinent_positive_greedy(const BatchModel& p1, Row row, const FeatureSpace& space);

}  // namespace nephro
