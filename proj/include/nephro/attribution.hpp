#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "nephro/common.hpp"
#include "nephro/kernels.hpp"
#include "nephro/models.hpp"

namespace nephro {

// P(output_class) as a batch function; the form every explainer consumes.
BatchModel model_output(PredictorPtr predictor, int output_class = 1);

struct FeatureInfo {
  std::vector<std::string> names;
  std::vector<bool> nominal;

  std::size_t size() const { return names.size(); }
  static FeatureInfo numeric(std::size_t d);
};

// ---------------------------------------------------------------- LIME

struct LimeOptions {
  int n_samples = 5000;
  // Quartile indicators when true; standardized raw features otherwise.
  bool discretize = true;
  double ridge = 1e-3;
  // Kernel width as a multiple of sqrt(d).
  double kernel_width_scale = 0.75;
};

struct LimeTerm {
  std::string feature;
  std::string condition;
  double weight = 0;
  double lower = 0, upper = 0;  // bin bounds (+-inf when open)
};

struct LocalExplanation {
  std::vector<LimeTerm> terms;  // one per feature, feature order
  double intercept = 0;
  double fidelity_r2 = 0;
  double model_output = 0;  // f(row) for the explained output
  double local_prediction = 0;
  nlohmann::json to_json() const;
};

LocalExplanation lime_explain(const BatchModel& f, Row row, const Matrix& background, const FeatureInfo& info,
                              const LimeOptions& options, std::uint64_t seed);

// ---------------------------------------------------------------- Shapley

struct ShapleyAttribution {
  std::vector<double> phi;
  double base_value = 0;
  double output = 0;  // f(row)
  bool exact = true;
  int n_permutations = 0;

  double efficiency_gap() const;
  nlohmann::json to_json(const std::vector<std::string>& names) const;
};

inline constexpr std::size_t kMaxExactShapleyFeatures = 15;

ShapleyAttribution shapley_exact(const BatchModel& f, Row row, const Matrix& background,
                                 kernels::Mode mode = kernels::default_mode());

ShapleyAttribution shapley_sampled(const BatchModel& f, Row row, const Matrix& background, int n_permutations,
                                   std::uint64_t seed);

// Exact when d <= 15, sampled otherwise.
ShapleyAttribution shapley_auto(const BatchModel& f, Row row, const Matrix& background, int n_permutations,
                                std::uint64_t seed);

struct GlobalImportance {
  std::vector<std::string> features;
  std::vector<double> mean_abs_phi;
  std::vector<std::size_t> ranking;  // indices, descending
  Matrix phi;                        // rows x features
  nlohmann::json to_json() const;
};

GlobalImportance global_shapley(const BatchModel& f, const Matrix& rows, const Matrix& background,
                                const FeatureInfo& info, int n_permutations, std::uint64_t seed);

struct DependencePoint {
  double value = 0, phi = 0, color = 0;
};

std::vector<DependencePoint> dependence_data(const GlobalImportance& global, const Matrix& rows,
                                             std::size_t feature, std::size_t color_feature);

// ---------------------------------------------------------------- PDP / ALE

struct GridFunction {
  enum class Kind { kPdp1, kPdp2, kAle };
  Kind kind = Kind::kPdp1;
  std::vector<std::string> features;
  std::vector<double> grid;    // first axis
  std::vector<double> grid2;   // second axis (PDP2)
  std::vector<double> values;  // PDP1/ALE: per grid point; PDP2: row-major grid x grid2
  // ALE only: rows per bin (bin k spans grid[k]..grid[k+1]).
  std::vector<std::size_t> bin_counts;
  std::string units;
  std::vector<std::string> notes;

  // ALE: count-weighted mean of bin-average values; 0 after centering.
  double weighted_mean() const;
  nlohmann::json to_json() const;
};

std::vector<double> percentile_grid(const Matrix& x, std::size_t feature, int grid_size);

GridFunction pdp(const BatchModel& f, const Matrix& x, const FeatureInfo& info, std::size_t feature,
                 int grid_size = 20);
GridFunction pdp(const BatchModel& f, const Matrix& x, const FeatureInfo& info, std::size_t feature,
                 const std::vector<double>& grid);
GridFunction pdp2(const BatchModel& f, const Matrix& x, const FeatureInfo& info, std::size_t feature_a,
                  std::size_t feature_b, int grid_size = 20);

GridFunction ale(const BatchModel& f, const Matrix& x, const FeatureInfo& info, std::size_t feature, int n_bins = 10);

}  // namespace nephro
