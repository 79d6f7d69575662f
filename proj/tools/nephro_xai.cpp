// nephro-xai: batch pipeline and explanation service for the CKD classifier.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "nephro/pipeline.hpp"
#include "nephro/service.hpp"
#include "render.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<long> row;
  std::string model;
  std::string exclude;
  std::optional<int> k;
  bool canonical = false;
  bool no_plots = false;
  std::string host;
  std::optional<int> port;
};

nephro::PipelineConfig make_config(const Overrides& o) {
  nephro::PipelineConfig c;
  if (!o.config.empty()) {
    c = nephro::PipelineConfig::load(o.config);
  } else if (std::filesystem::exists("config/default.ini")) {
    c = nephro::PipelineConfig::load("config/default.ini");
  }
  c.apply_environment();
  if (!o.data.empty()) c.dataset = o.data;
  if (!o.out.empty()) c.out = o.out;
  if (o.seed) c.seed = *o.seed;
  if (!o.model.empty()) c.model_path = o.model;
  if (!o.exclude.empty()) {
    c.exclusions.clear();
    std::stringstream ss(o.exclude);
    for (std::string item; std::getline(ss, item, ',');) {
      if (!item.empty()) c.exclusions.push_back(item);
    }
    // An explicit exclusion list means modeling on the computed consensus.
    c.final_features.clear();
  }
  if (o.k) {
    if (*o.k < 2) throw nephro::ConfigError("--k must be >= 2");
    c.folds = *o.k;
  }
  if (o.canonical) c.canonical = true;
  if (o.no_plots) c.plots = false;
  if (!o.host.empty()) c.host = o.host;
  if (o.port) c.port = *o.port;
  if (!std::filesystem::exists(c.dataset)) throw nephro::ConfigError("dataset '" + c.dataset + "' does not exist");
  if (!std::filesystem::exists(c.schema)) throw nephro::ConfigError("schema '" + c.schema + "' does not exist");
  return c;
}

int run_serve(const nephro::PipelineConfig& c) {
  const auto artifact = nephro::ModelArtifact::load(c.resolved_model_path());
  const auto schema = nephro::Schema::load(c.schema);
  if (artifact.schema_fingerprint != schema.fingerprint()) {
    throw nephro::DataError("model artifact was trained on a different schema (fingerprint mismatch)");
  }
  nephro::ExplainService service(artifact, {c.cors_origin, c.seed});
  nephro::serve(service, c.host, c.port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nephro-xai: CKD pipeline, explanations and explanation service"};
  app.fallthrough();
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config, "INI configuration file (default: config/default.ini when present)");
  app.add_option("--data", o.data, "Dataset CSV");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--seed", o.seed, "Master seed (overrides NEPHRO_XAI_SEED and the config)");
  app.add_option("--row", o.row, "Row index for explain / counterfactual");
  app.add_option("--model", o.model, "Model artifact path (default: <out>/model.json)");
  app.add_option("--exclude", o.exclude, "Comma-separated exclusion list; models on the computed consensus");
  app.add_option("--k", o.k, "Number of cross-validation folds");
  app.add_flag("--canonical", o.canonical, "Omit timestamps so reruns are byte-identical");
  app.add_flag("--no-plots", o.no_plots, "Skip SVG output");

  const std::vector<std::pair<std::string, std::string>> stages{
      {"profile", "Missing-value profile"},
      {"mcar", "Little's MCAR test on sampled rows"},
      {"impute", "Regression imputation, imputed CSV and mask"},
      {"select", "Feature selection and consensus"},
      {"train", "Grid search, cross-validation, model artifact and tree export"},
      {"explain", "LIME, Shapley, PDP and ALE documents for one row"},
      {"counterfactual", "Counterfactuals and contrastive explanations for one row"},
      {"metrics", "Interpretability and fidelity scorecard"},
      {"all", "Every stage in order plus a manifest"},
  };
  for (const auto& [name, help] : stages) app.add_subcommand(name, help);
  auto* serve = app.add_subcommand("serve", "Start the HTTP explanation service");
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--port", o.port, "Port");

  CLI11_PARSE(app, argc, argv);
  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    const auto config = make_config(o);
    if (stage == "serve") return run_serve(config);
    nephro::Pipeline pipeline(config);
    nlohmann::json doc;
    std::optional<std::size_t> explain_row;
    if (o.row) {
      if (*o.row < 0) throw nephro::ConfigError("--row must be >= 0");
      explain_row = static_cast<std::size_t>(*o.row);
    }
    if (stage == "profile") doc = pipeline.run_profile();
    else if (stage == "mcar") doc = pipeline.run_mcar();
    else if (stage == "impute") doc = pipeline.run_impute();
    else if (stage == "select") doc = pipeline.run_select();
    else if (stage == "train") doc = pipeline.run_train();
    else if (stage == "explain") doc = pipeline.run_explain(explain_row);
    else if (stage == "counterfactual") doc = pipeline.run_counterfactual(o.row);
    else if (stage == "metrics") doc = pipeline.run_metrics();
    else if (stage == "all") doc = pipeline.run_all();
    std::cout << nephro::render::text(doc);
    for (const auto& w : pipeline.written()) std::cerr << "wrote " << pipeline.out_path(w).string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "nephro-xai [" << stage << "] error: " << e.what() << '\n';
    return nephro::exit_code_for(e);
  }
}
