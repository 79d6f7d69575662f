#include "nephro/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nephro/attribution.hpp"
#include "nephro/counterfactual.hpp"
#include "nephro/metrics.hpp"
#include "nephro/missingness.hpp"
#include "nephro/plots.hpp"

namespace nephro {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': '" + text + "' is not a number");
  }
}

long to_long(const std::string& key, const std::string& text) {
  const double v = to_double(key, text);
  if (v != static_cast<double>(static_cast<long>(v))) throw ConfigError("config key '" + key + "' must be an integer");
  return static_cast<long>(v);
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config key '" + key + "': '" + text + "' is not a boolean");
}

std::vector<Family> to_families(const std::string& key, const std::string& text) {
  std::vector<Family> out;
  for (const auto& name : split_list(text)) {
    try {
      out.push_back(family_from_string(name));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': unknown model family '" + name + "'");
    }
  }
  return out;
}

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

Matrix rows_of(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

std::vector<int> labels_of(const std::vector<int>& y, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  for (auto r : rows) out.push_back(y[r]);
  return out;
}

// Seeded sample of `count` distinct row indices (all rows when fewer).
std::vector<std::size_t> sample_rows(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(n, count));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

// Stream ids for derive_seed so stages never share random streams.
enum Stream : std::uint64_t {
  kMcarStream = 100,
  kWrapperStream = 200,
  kSmoteStream = 300,
  kFoldStream = 301,
  kBackgroundStream = 400,
  kLimeStream = 401,
  kShapStream = 402,
  kGlobalStream = 403,
  kCounterfactualStream = 500,
  kMetricsStream = 600,
};

}  // namespace

// ---------------------------------------------------------------- config

PipelineConfig PipelineConfig::load(const std::string& path) {
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("cannot read config '" + path + "': " + e.message());
  }
  PipelineConfig c;
  const fs::path base = fs::absolute(fs::path(path)).parent_path();
  for (const auto& [section, body] : tree) {
    if (section.rfind("grid.", 0) == 0 || section.rfind("model.", 0) == 0) {
      const bool is_grid = section[0] == 'g';
      const auto fam_name = section.substr(section.find('.') + 1);
      const auto family = to_families(section, fam_name).at(0);
      for (const auto& [key, value] : body) {
        const auto full = section + "." + key;
        const auto text = value.get_value<std::string>();
        if (is_grid) {
          std::vector<double> values;
          for (const auto& item : split_list(text)) values.push_back(to_double(full, item));
          if (values.empty()) throw ConfigError("config key '" + full + "' has no values");
          c.grids[family].emplace_back(key, values);
        } else {
          c.hyperparameters[family][key] = to_double(full, text);
        }
      }
      continue;
    }
    for (const auto& [key, value] : body) {
      const auto full = section + "." + key;
      const auto v = value.get_value<std::string>();
      if (full == "data.dataset") c.dataset = resolve(base, v);
      else if (full == "data.schema") c.schema = resolve(base, v);
      else if (full == "run.seed") c.seed = static_cast<std::uint64_t>(to_long(full, v));
      else if (full == "run.out") c.out = resolve(base, v);
      else if (full == "run.canonical") c.canonical = to_bool(full, v);
      else if (full == "run.plots") c.plots = to_bool(full, v);
      else if (full == "mcar.fractions") {
        c.mcar_fractions.clear();
        for (const auto& item : split_list(v)) c.mcar_fractions.push_back(to_double(full, item));
      } else if (full == "selection.correlation_threshold") c.correlation_threshold = to_double(full, v);
      else if (full == "selection.logit_alpha") c.logit_alpha = to_double(full, v);
      else if (full == "selection.ig_top_k") c.ig_top_k = static_cast<std::size_t>(to_long(full, v));
      else if (full == "selection.ig_bins") c.ig_bins = static_cast<int>(to_long(full, v));
      else if (full == "selection.variance_threshold") c.variance_threshold = to_double(full, v);
      else if (full == "selection.wrapper_size") c.wrapper_size = static_cast<std::size_t>(to_long(full, v));
      else if (full == "selection.wrapper_folds") c.wrapper_folds = static_cast<int>(to_long(full, v));
      else if (full == "selection.forward_tolerance") c.forward_tolerance = to_double(full, v);
      else if (full == "selection.exclusions") c.exclusions = split_list(v);
      else if (full == "selection.final_features") c.final_features = split_list(v);
      else if (full == "resampling.smote_k") c.smote_k = static_cast<int>(to_long(full, v));
      else if (full == "resampling.folds") c.folds = static_cast<int>(to_long(full, v));
      else if (full == "models.families") c.families = to_families(full, v);
      else if (full == "models.primary") c.primary = to_families(full, v).at(0);
      else if (full == "explain.row") c.explain_row = static_cast<std::size_t>(to_long(full, v));
      else if (full == "explain.background") c.background = static_cast<int>(to_long(full, v));
      else if (full == "explain.lime_samples") c.lime_samples = static_cast<int>(to_long(full, v));
      else if (full == "explain.permutations") c.permutations = static_cast<int>(to_long(full, v));
      else if (full == "explain.global_rows") c.global_rows = static_cast<int>(to_long(full, v));
      else if (full == "explain.grid_size") c.grid_size = static_cast<int>(to_long(full, v));
      else if (full == "explain.ale_bins") c.ale_bins = static_cast<int>(to_long(full, v));
      else if (full == "explain.pdp_features") c.pdp_features = split_list(v);
      else if (full == "explain.ale_features") c.ale_features = split_list(v);
      else if (full == "explain.explained_class") c.explained_class = v;
      else if (full == "counterfactual.row") c.counterfactual_row = to_long(full, v);
      else if (full == "counterfactual.k") c.cf_k = static_cast<int>(to_long(full, v));
      else if (full == "counterfactual.budget") c.cf_budget = static_cast<int>(to_long(full, v));
      else if (full == "counterfactual.immutables") c.immutables = split_list(v);
      else if (full == "metrics.cutoff") c.cutoff = to_double(full, v);
      else if (full == "metrics.d_total") c.d_total = static_cast<std::size_t>(to_long(full, v));
      else if (full == "metrics.fixture") c.metrics_fixture = resolve(base, v);
      else if (full == "metrics.explainer") c.metrics_explainer = v;
      else if (full == "metrics.models") c.metrics_models = to_families(full, v);
      else if (full == "metrics.rows") c.metrics_rows = static_cast<int>(to_long(full, v));
      else if (full == "service.host") c.host = v;
      else if (full == "service.port") c.port = static_cast<int>(to_long(full, v));
      else if (full == "service.cors_origin") c.cors_origin = v;
      else if (full == "service.model") c.model_path = resolve(base, v);
      else throw ConfigError("unknown config key '" + full + "'");
    }
  }
  if (c.folds < 2) throw ConfigError("resampling.folds must be >= 2");
  if (c.metrics_explainer != "lime" && c.metrics_explainer != "shap") {
    throw ConfigError("metrics.explainer must be 'lime' or 'shap'");
  }
  return c;
}

void PipelineConfig::apply_environment() {
  if (const char* s = std::getenv("NEPHRO_XAI_SEED"); s && *s) {
    seed = static_cast<std::uint64_t>(to_long("NEPHRO_XAI_SEED", s));
  }
}

std::string PipelineConfig::resolved_model_path() const {
  return model_path.empty() ? (fs::path(out) / "model.json").string() : model_path;
}

nlohmann::json PipelineConfig::to_json() const {
  auto fams = [](const std::vector<Family>& v) {
    std::vector<std::string> out;
    for (auto f : v) out.push_back(to_string(f));
    return out;
  };
  nlohmann::json grids_json = nlohmann::json::object();
  for (const auto& [f, g] : grids) {
    for (const auto& [k, vals] : g) grids_json[to_string(f)][k] = vals;
  }
  nlohmann::json hp = nlohmann::json::object();
  for (const auto& [f, m] : hyperparameters) hp[to_string(f)] = m;
  // Paths are reported by file name only so documents do not depend on the checkout location.
  return {{"dataset", fs::path(dataset).filename().string()},
          {"schema", fs::path(schema).filename().string()},
          {"seed", seed},
          {"mcar_fractions", mcar_fractions},
          {"selection",
           {{"correlation_threshold", correlation_threshold},
            {"logit_alpha", logit_alpha},
            {"ig_top_k", ig_top_k},
            {"ig_bins", ig_bins},
            {"variance_threshold", variance_threshold},
            {"wrapper_size", wrapper_size},
            {"wrapper_folds", wrapper_folds},
            {"forward_tolerance", forward_tolerance},
            {"exclusions", exclusions},
            {"final_features", final_features}}},
          {"resampling", {{"smote_k", smote_k}, {"folds", folds}}},
          {"models", {{"families", fams(families)}, {"primary", to_string(primary)}, {"grids", grids_json},
                      {"hyperparameters", hp}}},
          {"explain",
           {{"row", explain_row},
            {"background", background},
            {"lime_samples", lime_samples},
            {"permutations", permutations},
            {"global_rows", global_rows},
            {"grid_size", grid_size},
            {"ale_bins", ale_bins},
            {"pdp_features", pdp_features},
            {"ale_features", ale_features},
            {"explained_class", explained_class}}},
          {"counterfactual", {{"row", counterfactual_row}, {"k", cf_k}, {"budget", cf_budget}, {"immutables", immutables}}},
          {"metrics",
           {{"cutoff", cutoff},
            {"d_total", d_total},
            {"explainer", metrics_explainer},
            {"models", fams(metrics_models)},
            {"rows", metrics_rows}}}};
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  return 4;
}

// ---------------------------------------------------------------- state

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {}

const Schema& Pipeline::schema() {
  if (!schema_) schema_ = Schema::load(config_.schema);
  return *schema_;
}

const DataTable& Pipeline::raw() {
  if (!raw_) raw_ = parse_dataset_file(config_.dataset, schema());
  return *raw_;
}

const ImputationPlan& Pipeline::plan() {
  if (!plan_) plan_ = fit_imputation_plan(raw());
  return *plan_;
}

const ImputedTable& Pipeline::imputed() {
  if (!imputed_) imputed_ = apply_imputation(raw(), plan());
  return *imputed_;
}

const EncodedData& Pipeline::encoded() {
  if (!encoded_) encoded_ = encode_for_model(imputed().table);
  return *encoded_;
}

const SelectionReport& Pipeline::selection() {
  if (selection_) return *selection_;
  const auto& data = encoded();
  method_scores_["correlation"] = correlation_with_target(data, config_.correlation_threshold);
  method_scores_["logit"] = logit_significance(data, config_.logit_alpha);
  method_scores_["information_gain"] = information_gain_ranking(data, config_.ig_top_k, config_.ig_bins);
  method_scores_["variance_threshold"] = variance_threshold(data, config_.variance_threshold);
  WrapperOptions wo;
  wo.target_size = std::min(config_.wrapper_size, data.cols() - 1);
  wo.folds = config_.wrapper_folds;
  wo.tolerance = config_.forward_tolerance;
  wo.seed = derive_seed(config_.seed, kWrapperStream);
  wrapper_results_["forward"] = wrapper_select(data, WrapperMode::kForward, wo);
  wrapper_results_["rfe"] = wrapper_select(data, WrapperMode::kRfe, wo);

  std::map<std::string, std::vector<std::string>> sets;
  for (const auto& [name, s] : method_scores_) sets[name] = s.selected();
  for (const auto& [name, w] : wrapper_results_) sets[name] = w.selected;
  auto report = consensus_select(sets, config_.exclusions, data.names());
  for (const auto& [name, s] : method_scores_) {
    for (const auto& n : s.notes) report.notes.push_back(n.rfind(name, 0) == 0 ? n : name + ": " + n);
  }
  if (method_scores_["logit"].selected().empty()) {
    report.notes.push_back("logit: no feature reaches significance on this data; the method contributes an empty set");
  }
  selection_ = std::move(report);
  return *selection_;
}

const EncodedData& Pipeline::modeling() {
  if (modeling_) return *modeling_;
  const auto& sel = selection();
  std::vector<std::string> names = config_.final_features.empty() ? sel.final_set : config_.final_features;
  if (names.empty()) throw ConfigError("no modeling features");
  modeling_ = encoded().select(names);
  return *modeling_;
}

std::vector<bool> Pipeline::nominal_flags(const EncodedData& data) const {
  std::vector<bool> out;
  for (std::size_t j = 0; j < data.cols(); ++j) out.push_back(data.nominal(j));
  return out;
}

const BalancedData& Pipeline::balanced() {
  if (!balanced_) {
    const auto& m = modeling();
    balanced_ = smote_balance(m.x, m.y, nominal_flags(m), config_.smote_k, derive_seed(config_.seed, kSmoteStream));
  }
  return *balanced_;
}

const FoldAssignment& Pipeline::folds() {
  if (!folds_) folds_ = stratified_kfold(balanced().y, config_.folds, derive_seed(config_.seed, kFoldStream));
  return *folds_;
}

ModelSpec Pipeline::spec_for(Family family) {
  if (auto it = specs_.find(family); it != specs_.end()) return it->second;
  ModelSpec spec{family, {}, derive_seed(config_.seed, static_cast<std::uint64_t>(family))};
  if (auto hp = config_.hyperparameters.find(family); hp != config_.hyperparameters.end()) spec.params = hp->second;
  spec.validate();
  if (auto g = config_.grids.find(family); g != config_.grids.end()) {
    const auto& m = modeling();
    auto grid = g->second;
    // Fixed hyperparameters enter the lattice as single-valued axes.
    for (const auto& [k, v] : spec.params) {
      if (std::none_of(grid.begin(), grid.end(), [&](const auto& axis) { return axis.first == k; })) {
        grid.emplace_back(k, std::vector<double>{v});
      }
    }
    auto result = grid_search(family, grid, spec.seed, balanced().x, balanced().y, folds(), nominal_flags(m));
    spec = result.best;
    grid_results_[family] = std::move(result);
  }
  specs_[family] = spec;
  return spec;
}

const EvaluationReport& Pipeline::evaluation(Family family) {
  if (auto it = evaluations_.find(family); it != evaluations_.end()) return it->second;
  const auto spec = spec_for(family);
  auto report = evaluate_cv(spec, balanced().x, balanced().y, folds(), nominal_flags(modeling()));
  return evaluations_.emplace(family, std::move(report)).first->second;
}

// ---------------------------------------------------------------- output

fs::path Pipeline::out_path(const std::string& name) const { return fs::path(config_.out) / name; }

nlohmann::json Pipeline::stamp(nlohmann::json doc) const {
  doc["schema_version"] = kSchemaVersion;
  if (!config_.canonical) doc["generated_at"] = timestamp_utc();
  return doc;
}

void Pipeline::write_file(const std::string& name, const std::string& text) {
  const auto path = out_path(name);
  fs::create_directories(path.parent_path());
  plots::write_text(path.string(), text);
  if (std::find(written_.begin(), written_.end(), name) == written_.end()) written_.push_back(name);
}

void Pipeline::write_json(const std::string& name, const nlohmann::json& doc) {
  write_file(name, stamp(doc).dump(2) + "\n");
}

ModelArtifact Pipeline::load_trained() const {
  const auto path = config_.resolved_model_path();
  if (!fs::exists(path)) throw ComputeError("train required first (no model artifact at " + path + ")");
  return ModelArtifact::load(path);
}

// ---------------------------------------------------------------- stages

nlohmann::json Pipeline::run_profile() {
  const auto& t = raw();
  const auto profile = profile_missingness(t);
  const auto counts = t.class_counts();
  const auto& target = t.schema().column(t.schema().target_index());
  nlohmann::json classes = nlohmann::json::object();
  for (std::size_t c = 0; c < counts.size() && c < target.categories.size(); ++c) classes[target.categories[c]] = counts[c];
  nlohmann::json doc{{"report", "profile"},
                     {"rows", t.rows()},
                     {"columns", t.cols()},
                     {"class_counts", classes},
                     {"missing_cells", t.missing_count()},
                     {"missingness", profile.to_json()},
                     {"notes",
                      {"percentages use the file's row count as denominator; the published missingness "
                       "table matches count/402 instead"}}};
  write_json("profile.json", doc);
  return doc;
}

nlohmann::json Pipeline::run_mcar() {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < config_.mcar_fractions.size(); ++i) {
    const double f = config_.mcar_fractions[i];
    auto r = little_mcar_test(raw(), f, derive_seed(config_.seed, kMcarStream + i));
    auto jr = r.to_json();
    jr["fraction"] = f;
    jr["rejects_mcar_at_0.005"] = r.p_value < 0.005;
    rows.push_back(jr);
  }
  nlohmann::json doc{{"report", "mcar"}, {"alpha", 0.005}, {"tests", rows}};
  write_json("mcar.json", doc);
  return doc;
}

nlohmann::json Pipeline::run_impute() {
  const auto& imp = imputed();
  std::ostringstream csv, mask;
  write_dataset(csv, imp.table);
  imp.write_mask(mask);
  write_file("imputed.csv", csv.str());
  write_file("imputation_mask.csv", mask.str());
  nlohmann::json doc{{"report", "imputation"},
                     {"missing_cells", raw().missing_count()},
                     {"imputed_cells", imp.imputed_count()},
                     {"fallback_cells", imp.fallback_count()},
                     {"plan", plan().to_json()}};
  write_json("imputation.json", doc);
  return doc;
}

nlohmann::json Pipeline::run_select() {
  const auto& sel = selection();
  const auto& m = modeling();
  nlohmann::json methods = nlohmann::json::object();
  for (const auto& [name, s] : method_scores_) methods[name] = s.to_json();
  for (const auto& [name, w] : wrapper_results_) methods[name] = w.to_json();
  nlohmann::json doc{{"report", "selection"}, {"methods", methods}, {"consensus", sel.to_json()}};
  doc["modeling_features"] = m.names();
  nlohmann::json notes = sel.notes;
  if (!config_.final_features.empty() && config_.final_features != sel.final_set) {
    notes.push_back("modeling features come from configuration and differ from the computed final set");
  }
  doc["notes"] = notes;
  write_json("selection.json", doc);
  return doc;
}

nlohmann::json Pipeline::run_train() {
  const auto& m = modeling();
  const auto& bal = balanced();
  const auto& fa = folds();
  const auto names = m.names();

  nlohmann::json reports = nlohmann::json::object();
  nlohmann::json table = nlohmann::json::array();
  for (auto family : config_.families) {
    const auto& rep = evaluation(family);
    reports[to_string(family)] = rep.to_json();
    const auto& cm = rep.cumulative_metrics;
    table.push_back({{"model", to_string(family)},
                     {"precision", cm.precision},
                     {"recall", cm.recall},
                     {"f1", cm.f1},
                     {"accuracy", cm.accuracy},
                     {"spec", spec_for(family).to_json()}});
  }
  const auto primary_spec = spec_for(config_.primary);
  const auto& primary_eval = evaluation(config_.primary);
  nlohmann::json grids = nlohmann::json::object();
  for (const auto& [f, g] : grid_results_) grids[to_string(f)] = g.to_json();

  const auto counts_before = [&] {
    std::array<std::size_t, 2> c{0, 0};
    for (int y : m.y) ++c[static_cast<std::size_t>(y)];
    return c;
  }();
  std::array<std::size_t, 2> counts_after{0, 0};
  for (int y : bal.y) ++counts_after[static_cast<std::size_t>(y)];
  const auto sizes = fa.sizes();

  // Final model on every balanced row.
  const auto final_model = train(primary_spec, bal.x, bal.y, nominal_flags(m));
  const Vector imp = final_model->feature_importances();

  nlohmann::json doc{{"report", "evaluation"},
                     {"features", names},
                     {"smote",
                      {{"k_neighbors", config_.smote_k},
                       {"before", {{"ckd", counts_before[0]}, {"notckd", counts_before[1]}}},
                       {"after", {{"ckd", counts_after[0]}, {"notckd", counts_after[1]}}},
                       {"synthetic_rows", bal.x.rows() - static_cast<Eigen::Index>(bal.n_original)}}},
                     {"folds", {{"k", fa.k}, {"sizes", sizes}}},
                     {"summary", table},
                     {"models", reports},
                     {"grid_search", grids},
                     {"primary", to_string(config_.primary)},
                     {"confusion_matrix", primary_eval.cumulative.to_json()},
                     {"primary_importances", nlohmann::json::object()},
                     {"notes",
                      {"SMOTE runs before fold assignment, as published; synthetic rows derived from test-fold "
                       "neighbours can leak into training folds, so CV scores are optimistic",
                       "the published text calls the cumulative sample count 250, but its own confusion "
                       "counts sum to 500; the cumulative matrix here covers all " +
                           std::to_string(primary_eval.cumulative.total()) + " balanced rows"}}};
  for (std::size_t j = 0; j < names.size(); ++j) doc["primary_importances"][names[j]] = imp(static_cast<Eigen::Index>(j));
  write_json("evaluation.json", doc);

  // Tree of the best fold.
  const int bf = primary_eval.best_fold;
  const auto train_rows = fa.train_rows(bf);
  const auto fold_model =
      train(primary_spec, rows_of(bal.x, train_rows), labels_of(bal.y, train_rows), nominal_flags(m));
  nlohmann::json tree_doc{{"report", "tree"}, {"best_fold", bf}, {"model", to_string(config_.primary)}};
  if (tree_count(*fold_model) > 0) {
    tree_doc["tree"] = tree_of(*fold_model, 0).export_nested(names);
  } else {
    ModelSpec dt{Family::kDT, {}, primary_spec.seed};
    const auto dt_model = train(dt, rows_of(bal.x, train_rows), labels_of(bal.y, train_rows), nominal_flags(m));
    tree_doc["model"] = "DT";
    tree_doc["tree"] = tree_of(*dt_model, 0).export_nested(names);
    tree_doc["notes"] = {"primary family has no trees; a CART on the same fold is exported"};
  }
  write_json("tree.json", tree_doc);

  // Artifact for the explain stages and the service.
  ModelArtifact art;
  art.spec = primary_spec;
  art.predictor = final_model;
  art.features = artifact_features(m, schema());
  art.classes = schema().column(schema().target_index()).categories;
  art.schema_fingerprint = schema().fingerprint();
  const auto cls = std::find(art.classes.begin(), art.classes.end(), config_.explained_class);
  if (cls == art.classes.end()) throw ConfigError("explain.explained_class '" + config_.explained_class + "' is not a class");
  art.explained_class = static_cast<int>(cls - art.classes.begin());
  FeatureInfo info = art.info();
  art.space = FeatureSpace::from_data(m.x, info);
  art.background = rows_of(bal.x, sample_rows(static_cast<std::size_t>(bal.x.rows()),
                                              static_cast<std::size_t>(config_.background),
                                              derive_seed(config_.seed, kBackgroundStream)));
  art.cv_metrics = primary_eval.cumulative_metrics.to_json();
  art.immutables = config_.immutables;
  art.pdp_features = config_.pdp_features;
  art.ale_features = config_.ale_features;
  art.grid_size = config_.grid_size;
  art.ale_bins = config_.ale_bins;
  art.lime_samples = config_.lime_samples;
  art.permutations = config_.permutations;
  art.cf_k = config_.cf_k;
  art.cf_budget = config_.cf_budget;
  const auto model_path = config_.resolved_model_path();
  fs::create_directories(fs::path(model_path).parent_path());
  art.save(model_path);
  if (fs::path(model_path).parent_path() == fs::path(config_.out)) written_.push_back("model.json");

  if (config_.plots) {
    std::vector<double> iv(imp.data(), imp.data() + imp.size());
    write_file("plots/importances.svg", plots::bar_chart(to_string(config_.primary) + " feature importances", names, iv));
  }
  return doc;
}

nlohmann::json Pipeline::run_explain(std::optional<std::size_t> row_opt) {
  const auto art = load_trained();
  const auto& m = modeling();
  if (m.names() != art.names()) throw ComputeError("model artifact features differ from the configured features; re-run train");
  const std::size_t row_idx = row_opt.value_or(config_.explain_row);
  if (row_idx >= m.rows()) throw ConfigError("row " + std::to_string(row_idx) + " out of range");
  const auto info = art.info();
  const auto f = art.explained_output();
  const Row row = row_of(m.x, static_cast<Eigen::Index>(row_idx));
  const auto names = art.names();

  LimeOptions lo;
  lo.n_samples = config_.lime_samples;
  const auto lime = lime_explain(f, row, art.background, info, lo, derive_seed(config_.seed, kLimeStream));
  const auto shap = shapley_auto(f, row, art.background, config_.permutations, derive_seed(config_.seed, kShapStream));

  const auto global_idx = sample_rows(m.rows(), static_cast<std::size_t>(config_.global_rows),
                                      derive_seed(config_.seed, kGlobalStream));
  const Matrix global_rows = rows_of(m.x, global_idx);
  const auto global = global_shapley(f, global_rows, art.background, info, config_.permutations,
                                     derive_seed(config_.seed, kGlobalStream + 1));

  nlohmann::json dependence = nlohmann::json::array();
  if (config_.pdp_features.size() >= 2) {
    const auto a = art.index_of(config_.pdp_features[0]), b = art.index_of(config_.pdp_features[1]);
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : dependence_data(global, global_rows, a, b)) pts.push_back({p.value, p.phi, p.color});
    dependence.push_back({{"feature", names[a]}, {"color", names[b]}, {"points", pts}});
  }
  nlohmann::json pdps = nlohmann::json::array(), ales = nlohmann::json::array();
  std::vector<GridFunction> pdp_fns, ale_fns;
  for (const auto& name : config_.pdp_features) {
    pdp_fns.push_back(pdp(f, m.x, info, art.index_of(name), config_.grid_size));
    pdps.push_back(pdp_fns.back().to_json());
  }
  if (config_.pdp_features.size() >= 2) {
    pdps.push_back(pdp2(f, m.x, info, art.index_of(config_.pdp_features[0]), art.index_of(config_.pdp_features[1]),
                        config_.grid_size)
                       .to_json());
  }
  for (const auto& name : config_.ale_features) {
    ale_fns.push_back(ale(f, m.x, info, art.index_of(name), config_.ale_bins));
    ales.push_back(ale_fns.back().to_json());
  }

  const double p_explained = f(m.x.row(static_cast<Eigen::Index>(row_idx)))(0);
  nlohmann::json row_json = nlohmann::json::object();
  for (std::size_t j = 0; j < names.size(); ++j) row_json[names[j]] = row[j];
  nlohmann::json doc{{"report", "explanations"},
                     {"row", row_idx},
                     {"values", row_json},
                     {"true_class", art.classes[static_cast<std::size_t>(m.y[row_idx])]},
                     {"explained_class", art.classes[static_cast<std::size_t>(art.explained_class)]},
                     {"probability", p_explained},
                     {"lime", lime.to_json()},
                     {"shapley", shap.to_json(names)},
                     {"global", global.to_json()},
                     {"dependence", dependence},
                     {"pdp", pdps},
                     {"ale", ales}};
  write_json("explanations.json", doc);

  if (config_.plots) {
    std::vector<std::string> lime_labels;
    std::vector<double> lime_w;
    for (const auto& t : lime.terms) {
      lime_labels.push_back(t.condition);
      lime_w.push_back(t.weight);
    }
    write_file("plots/lime.svg", plots::bar_chart("LIME weights, row " + std::to_string(row_idx), lime_labels, lime_w));
    write_file("plots/shapley.svg", plots::bar_chart("Shapley values, row " + std::to_string(row_idx), names, shap.phi));
    std::vector<std::string> gl;
    std::vector<double> gv;
    for (auto j : global.ranking) {
      gl.push_back(names[j]);
      gv.push_back(global.mean_abs_phi[j]);
    }
    write_file("plots/global_shapley.svg", plots::bar_chart("Mean |Shapley value|", gl, gv));
    for (const auto& g : pdp_fns) write_file("plots/pdp_" + g.features[0] + ".svg", plots::line_chart("PDP", g.features[0], g.grid, g.values));
    for (const auto& g : ale_fns) write_file("plots/ale_" + g.features[0] + ".svg", plots::line_chart("ALE", g.features[0], g.grid, g.values));
  }
  return doc;
}

nlohmann::json Pipeline::run_counterfactual(std::optional<long> row_opt) {
  const auto art = load_trained();
  const auto& m = modeling();
  if (m.names() != art.names()) throw ComputeError("model artifact features differ from the configured features; re-run train");
  long r = row_opt.value_or(config_.counterfactual_row);
  if (r < 0) {
    const int wanted = 1 - art.explained_class;
    const auto it = std::find(m.y.begin(), m.y.end(), wanted);
    if (it == m.y.end()) throw DataError("no row of the requested class");
    r = static_cast<long>(it - m.y.begin());
  }
  if (static_cast<std::size_t>(r) >= m.rows()) throw ConfigError("row " + std::to_string(r) + " out of range");
  const Row row = row_of(m.x, r);
  const auto p1 = model_output(art.predictor, 1);
  CounterfactualOptions co;
  co.k = config_.cf_k;
  co.budget = config_.cf_budget;
  co.immutables = config_.immutables;
  const auto seed = derive_seed(config_.seed, kCounterfactualStream);
  const auto cfs = counterfactual_search(p1, row, art.space, co, seed);
  const auto pn = cem_explain(p1, row, CemMode::kPertinentNegative, art.space, co, seed);
  const auto pp = cem_explain(p1, row, CemMode::kPertinentPositive, art.space, co, seed);
  const auto pp_greedy = pertinent_positive_greedy(p1, row, art.space);

  // Table form: one row per record, changed cells flagged.
  nlohmann::json table = nlohmann::json::array();
  const auto names = art.names();
  auto table_row = [&](const std::string& label, const std::vector<double>& v, int cls) {
    nlohmann::json cells = nlohmann::json::array();
    for (std::size_t j = 0; j < names.size(); ++j) {
      cells.push_back({{"feature", names[j]}, {"value", v[j]}, {"changed", v[j] != row[j]}});
    }
    table.push_back({{"label", label}, {"class", art.classes[static_cast<std::size_t>(cls)]}, {"cells", cells}});
  };
  table_row("original", cfs.original, cfs.original_class);
  for (std::size_t i = 0; i < cfs.counterfactuals.size(); ++i) {
    table_row("counterfactual " + std::to_string(i + 1), cfs.counterfactuals[i].row, cfs.counterfactuals[i].predicted_class);
  }
  nlohmann::json doc{{"report", "counterfactuals"},
                     {"row", r},
                     {"counterfactuals", cfs.to_json(art.space)},
                     {"table", table},
                     {"pertinent_negative", pn.to_json(art.space)},
                     {"pertinent_positive", pp.to_json(art.space)},
                     {"pertinent_positive_greedy", pp_greedy.to_json(art.space)}};
  write_json("counterfactuals.json", doc);
  return doc;
}

nlohmann::json Pipeline::run_metrics() {
  nlohmann::json doc{{"report", "scorecard"}};
  // Published inputs, recomputed.
  if (!config_.metrics_fixture.empty() && fs::exists(config_.metrics_fixture)) {
    const auto fx = PublishedMetricsFixture::load(config_.metrics_fixture);
    const auto reports = fx.evaluate();
    nlohmann::json cmp = nlohmann::json::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
      const auto& r = reports[i];
      const auto& p = fx.rows[i];
      cmp.push_back({{"model", r.model},
                     {"computed", {r.interpretability, r.fidelity.f1, r.fii, r.facc}},
                     {"printed", {p.interpretability, p.fidelity, p.fii, p.facc}}});
    }
    doc["published_inputs"] = {{"scorecard", scorecard(reports)}, {"comparison", cmp}};
  }

  // Models trained here.
  const auto& m = modeling();
  const auto& bal = balanced();
  const auto& fa = folds();
  const auto names = m.names();
  FeatureInfo info{names, nominal_flags(m)};
  std::vector<InterpretabilityReport> reports;
  nlohmann::json details = nlohmann::json::array();
  for (auto family : config_.metrics_models) {
    const auto spec = spec_for(family);
    const auto& ev = evaluation(family);
    const auto train_rows = fa.train_rows(ev.best_fold);
    const auto test_rows = fa.test_rows(ev.best_fold);
    const Matrix x_test = rows_of(bal.x, test_rows);
    const auto model = train(spec, rows_of(bal.x, train_rows), labels_of(bal.y, train_rows), info.nominal);
    const Vector em_v = model->feature_importances();
    const std::vector<double> em(em_v.data(), em_v.data() + em_v.size());

    const auto f = model_output(model, 0);
    const Matrix bg = rows_of(bal.x, sample_rows(train_rows.size(), static_cast<std::size_t>(config_.background),
                                                 derive_seed(config_.seed, kBackgroundStream)));
    const auto explain_idx = sample_rows(test_rows.size(), static_cast<std::size_t>(config_.metrics_rows),
                                         derive_seed(config_.seed, kMetricsStream));
    std::vector<double> ex(names.size(), 0.0);
    if (config_.metrics_explainer == "lime") {
      LimeOptions lo;
      lo.n_samples = config_.lime_samples;
      for (auto i : explain_idx) {
        const auto le = lime_explain(f, row_of(x_test, static_cast<Eigen::Index>(i)), bg, info, lo,
                                     derive_seed(config_.seed, kMetricsStream + 1 + i));
        for (std::size_t j = 0; j < names.size(); ++j) ex[j] += std::abs(le.terms[j].weight) / explain_idx.size();
      }
    } else {
      const auto g = global_shapley(f, rows_of(x_test, explain_idx), bg, info, config_.permutations,
                                    derive_seed(config_.seed, kMetricsStream));
      ex = g.mean_abs_phi;
    }

    nlohmann::json detail{{"model", to_string(family)}, {"best_fold", ev.best_fold}};
    detail["model_importances"] = em;
    detail["explainer_importances"] = ex;
    try {
      const auto cv = cosine_validated_count(em, ex, names, config_.cutoff);
      const auto true_set = important_set(em, names, config_.cutoff).members();
      // Surrogate: depth-4 CART mimicking the model's labels on the test fold.
      const auto predicted = model->predict(x_test);
      ModelSpec tree_spec{Family::kDT, {{"max_depth", 4}}, spec.seed};
      const auto surrogate = train(tree_spec, x_test, predicted, info.nominal);
      const Vector sv = surrogate->feature_importances();
      const auto surrogate_set = important_set(std::vector<double>(sv.data(), sv.data() + sv.size()), names, config_.cutoff);
      auto rep = interpretability_report(to_string(family), cv.n_important, config_.d_total, true_set,
                                         surrogate_set.members(), ev.cumulative_metrics.accuracy, cv.cosine);
      if (config_.d_total != names.size()) {
        rep.notes.push_back("d_total = " + std::to_string(config_.d_total) + " counts the pre-selection features; the model uses " +
                            std::to_string(names.size()));
      }
      rep.notes.push_back("I = redundant / total, so a larger value means fewer important features");
      detail["cosine_by_prefix"] = cv.cosine_by_prefix;
      detail["surrogate_importances"] = surrogate_set.to_json();
      reports.push_back(std::move(rep));
    } catch (const std::exception& e) {
      detail["error"] = e.what();
      warn("metrics: " + to_string(family) + ": " + e.what());
    }
    details.push_back(detail);
  }
  doc["computed"] = {{"explainer", config_.metrics_explainer}, {"scorecard", scorecard(reports)}, {"details", details}};
  write_json("scorecard.json", doc);
  return doc;
}

nlohmann::json Pipeline::run_all() {
  const auto start = std::chrono::steady_clock::now();
  run_profile();
  run_mcar();
  run_impute();
  run_select();
  run_train();
  run_explain();
  run_counterfactual();
  run_metrics();
  nlohmann::json files = nlohmann::json::array();
  for (const auto& w : written_) {
    const auto p = out_path(w);
    files.push_back({{"path", w}, {"bytes", fs::exists(p) ? fs::file_size(p) : 0}});
  }
  nlohmann::json doc{{"report", "manifest"}, {"config", config_.to_json()}, {"artifacts", files}};
  if (!config_.canonical) {
    doc["elapsed_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  write_json("manifest.json", doc);
  return doc;
}

}  // namespace nephro
