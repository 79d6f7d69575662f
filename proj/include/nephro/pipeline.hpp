#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nephro/artifact.hpp"
#include "nephro/imputation.hpp"
#include "nephro/models.hpp"
#include "nephro/resampling.hpp"
#include "nephro/selection.hpp"
#include "nephro/table.hpp"

namespace nephro {

struct PipelineConfig {
  std::string dataset = "data/ckd.csv";
  std::string schema = "data/ckd_schema.json";
  std::string out = "out";
  std::uint64_t seed = 42;
  bool canonical = false;
  bool plots = true;

  std::vector<double> mcar_fractions{0.3, 0.6, 0.8};

  double correlation_threshold = 0.5;
  double logit_alpha = 0.005;
  std::size_t ig_top_k = 10;
  int ig_bins = 10;
  double variance_threshold = 0.75;
  std::size_t wrapper_size = 10;
  int wrapper_folds = 5;
  // 0 runs forward selection to wrapper_size.
  double forward_tolerance = 0;
  std::vector<std::string> exclusions{"sg", "pcv", "sod", "pot", "rbc", "rbcc"};
  // Empty: model on the computed consensus minus exclusions.
  std::vector<std::string> final_features{"hemo", "sc", "al", "htn", "age", "dm"};

  int smote_k = 5;
  int folds = 10;

  std::vector<Family> families{Family::kLR, Family::kNB,  Family::kLSVM, Family::kDT,
                               Family::kRF, Family::kADA, Family::kGBM};
  Family primary = Family::kRF;
  std::map<Family, ParamGrid> grids;
  std::map<Family, std::map<std::string, double>> hyperparameters;

  std::size_t explain_row = 0;
  int background = 100;
  int lime_samples = 5000;
  int permutations = 1024;
  int global_rows = 100;
  int grid_size = 20;
  int ale_bins = 10;
  std::vector<std::string> pdp_features{"hemo", "sc"};
  std::vector<std::string> ale_features{"hemo", "sc"};
  std::string explained_class = "ckd";

  long counterfactual_row = -1;  // -1: first row of the class other than the explained one
  int cf_k = 5;
  int cf_budget = 2000;
  std::vector<std::string> immutables{"age"};

  double cutoff = 0.9;
  std::size_t d_total = 24;
  std::string metrics_fixture = "data/published_scorecard.json";
  std::string metrics_explainer = "lime";
  std::vector<Family> metrics_models{Family::kADA, Family::kRF, Family::kGBM};
  int metrics_rows = 50;

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
  std::string model_path;  // empty: <out>/model.json

  // Relative paths in the file resolve against the file's directory.
  static PipelineConfig load(const std::string& path);
  // NEPHRO_XAI_SEED overrides the seed.
  void apply_environment();
  std::string resolved_model_path() const;
  nlohmann::json to_json() const;
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }

  nlohmann::json run_profile();
  nlohmann::json run_mcar();
  nlohmann::json run_impute();
  nlohmann::json run_select();
  nlohmann::json run_train();
  nlohmann::json run_explain(std::optional<std::size_t> row = std::nullopt);
  nlohmann::json run_counterfactual(std::optional<long> row = std::nullopt);
  nlohmann::json run_metrics();
  // Every stage in order, then manifest.json.
  nlohmann::json run_all();

  // Cached intermediate state.
  const Schema& schema();
  const DataTable& raw();
  const ImputationPlan& plan();
  const ImputedTable& imputed();
  const EncodedData& encoded();
  const SelectionReport& selection();
  const EncodedData& modeling();
  const BalancedData& balanced();
  const FoldAssignment& folds();
  ModelSpec spec_for(Family family);
  const EvaluationReport& evaluation(Family family);

  std::filesystem::path out_path(const std::string& name) const;
  // Files written so far, relative to the output directory, in write order.
  const std::vector<std::string>& written() const { return written_; }

 private:
  nlohmann::json stamp(nlohmann::json doc) const;
  void write_json(const std::string& name, const nlohmann::json& doc);
  void write_file(const std::string& name, const std::string& text);
  ModelArtifact load_trained() const;
  std::vector<bool> nominal_flags(const EncodedData& data) const;

  PipelineConfig config_;
  std::vector<std::string> written_;
  std::optional<Schema> schema_;
  std::optional<DataTable> raw_;
  std::optional<ImputationPlan> plan_;
  std::optional<ImputedTable> imputed_;
  std::optional<EncodedData> encoded_;
  std::optional<SelectionReport> selection_;
  std::vector<std::string> selection_notes_;
  std::map<std::string, ScoredSelection> method_scores_;
  std::map<std::string, WrapperResult> wrapper_results_;
  std::optional<EncodedData> modeling_;
  std::optional<BalancedData> balanced_;
  std::optional<FoldAssignment> folds_;
  std::map<Family, ModelSpec> specs_;
  std::map<Family, GridSearchResult> grid_results_;
  std::map<Family, EvaluationReport> evaluations_;
};

// Per-stage exit status for the CLI: 2 config, 3 data, 4 anything else.
int exit_code_for(const std::exception& e);

}  // namespace nephro
