#include "nephro/artifact.hpp"

#include <fstream>

namespace nephro {

FeatureInfo ModelArtifact::info() const {
  FeatureInfo fi;
  for (const auto& f : features) {
    fi.names.push_back(f.name);
    fi.nominal.push_back(f.nominal);
  }
  return fi;
}

std::vector<std::string> ModelArtifact::names() const { return info().names; }

BatchModel ModelArtifact::explained_output() const { return model_output(predictor, explained_class); }

std::size_t ModelArtifact::index_of(const std::string& name) const {
  for (std::size_t j = 0; j < features.size(); ++j) {
    if (features[j].name == name) return j;
  }
  throw ConfigError("model has no feature '" + name + "'");
}

nlohmann::json ModelArtifact::to_json() const {
  nlohmann::json feats = nlohmann::json::array();
  for (const auto& f : features) {
    nlohmann::json jf{{"name", f.name}, {"kind", f.nominal ? "nominal" : "numeric"}, {"unit", f.unit}};
    if (f.nominal) jf["categories"] = f.categories;
    if (f.range) jf["range"] = {f.range->first, f.range->second};
    feats.push_back(jf);
  }
  nlohmann::json bg = nlohmann::json::array();
  for (Eigen::Index i = 0; i < background.rows(); ++i) {
    bg.push_back(std::vector<double>(background.row(i).data(), background.row(i).data() + background.cols()));
  }
  return {{"schema_version", kSchemaVersion},
          {"kind", "nephro-model"},
          {"spec", spec.to_json()},
          {"predictor", predictor->to_json()},
          {"features", feats},
          {"classes", classes},
          {"schema_fingerprint", schema_fingerprint},
          {"explained_class", explained_class},
          {"feature_space",
           {{"lower", space.lower},
            {"upper", space.upper},
            {"scale", space.scale},
            {"medians", space.medians},
            {"categories", space.categories},
            {"quantiles", space.quantiles}}},
          {"background", bg},
          {"cv_metrics", cv_metrics},
          {"explainer_defaults",
           {{"immutables", immutables},
            {"pdp_features", pdp_features},
            {"ale_features", ale_features},
            {"grid_size", grid_size},
            {"ale_bins", ale_bins},
            {"lime_samples", lime_samples},
            {"permutations", permutations},
            {"cf_k", cf_k},
            {"cf_budget", cf_budget}}}};
}

ModelArtifact ModelArtifact::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("kind").get<std::string>() != "nephro-model") throw DataError("not a model artifact");
    const auto version = doc.at("schema_version").get<std::string>();
    if (version.substr(0, version.find('.')) != "1") throw DataError("unsupported artifact version " + version);
    ModelArtifact a;
    a.spec = ModelSpec::from_json(doc.at("spec"));
    a.predictor = predictor_from_json(doc.at("predictor"));
    for (const auto& jf : doc.at("features")) {
      ArtifactFeature f;
      f.name = jf.at("name").get<std::string>();
      f.nominal = jf.at("kind").get<std::string>() == "nominal";
      f.unit = jf.value("unit", "");
      if (jf.contains("categories")) f.categories = jf.at("categories").get<std::vector<std::string>>();
      if (jf.contains("range")) f.range = {jf.at("range").at(0).get<double>(), jf.at("range").at(1).get<double>()};
      a.features.push_back(std::move(f));
    }
    if (a.features.size() != a.predictor->n_features()) throw DataError("artifact feature count mismatch");
    a.classes = doc.at("classes").get<std::vector<std::string>>();
    a.schema_fingerprint = doc.at("schema_fingerprint").get<std::string>();
    a.explained_class = doc.at("explained_class").get<int>();
    const auto& fs = doc.at("feature_space");
    a.space.names = a.names();
    for (const auto& f : a.features) a.space.nominal.push_back(f.nominal);
    a.space.lower = fs.at("lower").get<std::vector<double>>();
    a.space.upper = fs.at("upper").get<std::vector<double>>();
    a.space.scale = fs.at("scale").get<std::vector<double>>();
    a.space.medians = fs.at("medians").get<std::vector<double>>();
    a.space.categories = fs.at("categories").get<std::vector<std::vector<double>>>();
    if (fs.contains("quantiles")) a.space.quantiles = fs.at("quantiles").get<std::vector<std::vector<double>>>();
    const auto& bg = doc.at("background");
    const auto d = static_cast<Eigen::Index>(a.features.size());
    a.background.resize(static_cast<Eigen::Index>(bg.size()), d);
    for (std::size_t i = 0; i < bg.size(); ++i) {
      const auto row = bg[i].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != d) throw DataError("background row width mismatch");
      for (Eigen::Index j = 0; j < d; ++j) a.background(static_cast<Eigen::Index>(i), j) = row[static_cast<std::size_t>(j)];
    }
    a.cv_metrics = doc.value("cv_metrics", nlohmann::json::object());
    const auto& ed = doc.at("explainer_defaults");
    a.immutables = ed.at("immutables").get<std::vector<std::string>>();
    a.pdp_features = ed.at("pdp_features").get<std::vector<std::string>>();
    a.ale_features = ed.at("ale_features").get<std::vector<std::string>>();
    a.grid_size = ed.at("grid_size").get<int>();
    a.ale_bins = ed.at("ale_bins").get<int>();
    a.lime_samples = ed.at("lime_samples").get<int>();
    a.permutations = ed.at("permutations").get<int>();
    a.cf_k = ed.at("cf_k").get<int>();
    a.cf_budget = ed.at("cf_budget").get<int>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model artifact: ") + e.what());
  }
}

void ModelArtifact::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << to_json().dump(1) << '\n';
}

ModelArtifact ModelArtifact::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model artifact '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model artifact '" + path + "' is not JSON: " + e.what());
  }
  return from_json(doc);
}

std::vector<ArtifactFeature> artifact_features(const EncodedData& data, const Schema& schema) {
  std::vector<ArtifactFeature> out;
  for (const auto& f : data.features) {
    const auto& col = schema.column(schema.index_of(f.name));
    ArtifactFeature af;
    af.name = f.name;
    af.nominal = f.kind == ColumnKind::kNominal;
    af.categories = f.categories;
    af.unit = col.unit;
    af.range = col.range;
    if (af.nominal && !af.range) af.range = {0.0, static_cast<double>(af.categories.size()) - 1.0};
    out.push_back(std::move(af));
  }
  return out;
}

}  // namespace nephro
