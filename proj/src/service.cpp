#include "nephro/service.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>

#include <httplib.h>

#include "nephro/attribution.hpp"
#include "nephro/counterfactual.hpp"

namespace nephro {

namespace {

class HttpError : public std::runtime_error {
 public:
  HttpError(int status, std::string field, const std::string& message)
      : std::runtime_error(message), status(status), field(std::move(field)) {}
  int status;
  std::string field;
};

std::string opaque_id() {
  static std::atomic<std::uint64_t> counter{0};
  const auto t = static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(derive_seed(t, counter++)));
  return buf;
}

nlohmann::json error_body(const std::string& message, const std::string& field = {}) {
  nlohmann::json e{{"schema_version", kSchemaVersion}, {"error", message}};
  if (!field.empty()) e["field"] = field;
  return e;
}

int int_field(const nlohmann::json& doc, const std::string& key, int fallback, int lo, int hi) {
  if (!doc.contains(key)) return fallback;
  const auto& v = doc.at(key);
  if (!v.is_number_integer()) throw HttpError(400, key, "field '" + key + "' must be an integer");
  const auto x = v.get<long long>();
  if (x < lo || x > hi) {
    throw HttpError(422, key, "field '" + key + "' must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return static_cast<int>(x);
}

}  // namespace

ExplainService::ExplainService(ModelArtifact artifact, ServiceOptions options)
    : artifact_(std::move(artifact)), options_(std::move(options)) {}

template <class Fn>
ServiceResponse ExplainService::guarded(Fn&& fn) const {
  try {
    return fn();
  } catch (const HttpError& e) {
    return {e.status, error_body(e.what(), e.field)};
  } catch (const ConfigError& e) {
    // Degenerate but well-formed requests, e.g. every feature immutable.
    return {422, error_body(e.what())};
  } catch (const std::exception& e) {
    const auto id = opaque_id();
    std::cerr << "nephro-xai service: internal error " << id << ": " << e.what() << '\n';
    return {500, {{"schema_version", kSchemaVersion}, {"error", "internal error"}, {"id", id}}};
  }
}

nlohmann::json ExplainService::parse_body(const std::string& body) const {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw HttpError(400, "", "request body is not valid JSON");
  }
  if (!doc.is_object()) throw HttpError(400, "", "request body must be a JSON object");
  if (doc.contains("schema_version")) {
    const auto& v = doc.at("schema_version");
    if (!v.is_string()) throw HttpError(400, "schema_version", "field 'schema_version' must be a string");
    const auto s = v.get<std::string>();
    if (s.substr(0, s.find('.')) != "1") throw HttpError(400, "schema_version", "unsupported schema_version " + s);
  }
  if (doc.contains("schema_fingerprint")) {
    const auto& v = doc.at("schema_fingerprint");
    if (!v.is_string()) throw HttpError(400, "schema_fingerprint", "field 'schema_fingerprint' must be a string");
    if (v.get<std::string>() != artifact_.schema_fingerprint) {
      throw HttpError(409, "schema_fingerprint", "schema fingerprint does not match the loaded model");
    }
  }
  return doc;
}

std::vector<double> ExplainService::parse_record(const nlohmann::json& doc) const {
  if (!doc.contains("record")) throw HttpError(400, "record", "missing field 'record'");
  const auto& rec = doc.at("record");
  if (!rec.is_object()) throw HttpError(400, "record", "field 'record' must be an object");
  for (const auto& [key, _] : rec.items()) {
    const bool known = std::any_of(artifact_.features.begin(), artifact_.features.end(),
                                   [&](const ArtifactFeature& f) { return f.name == key; });
    if (!known) throw HttpError(400, key, "unknown feature '" + key + "'");
  }
  std::vector<double> row;
  for (const auto& f : artifact_.features) {
    if (!rec.contains(f.name)) throw HttpError(400, f.name, "missing feature '" + f.name + "'");
    const auto& v = rec.at(f.name);
    double x = 0;
    if (v.is_number()) {
      x = v.get<double>();
    } else if (f.nominal && v.is_string()) {
      const auto it = std::find(f.categories.begin(), f.categories.end(), v.get<std::string>());
      if (it == f.categories.end()) throw HttpError(422, f.name, "feature '" + f.name + "' has no category '" + v.get<std::string>() + "'");
      x = static_cast<double>(it - f.categories.begin());
    } else {
      throw HttpError(400, f.name, "feature '" + f.name + "' must be a number");
    }
    if (!std::isfinite(x)) throw HttpError(400, f.name, "feature '" + f.name + "' must be finite");
    if (f.nominal && x != std::floor(x)) throw HttpError(422, f.name, "feature '" + f.name + "' must be a category code");
    if (f.range && (x < f.range->first || x > f.range->second)) {
      char buf[64];
      std::snprintf(buf, sizeof buf, " outside [%g, %g]", f.range->first, f.range->second);
      throw HttpError(422, f.name, "feature '" + f.name + "'" + buf);
    }
    row.push_back(x);
  }
  return row;
}

std::uint64_t ExplainService::seed_from_header(const std::string& value) const {
  if (value.empty()) return options_.default_seed;
  std::size_t used = 0;
  const auto s = std::stoull(value, &used);
  if (used != value.size()) throw std::invalid_argument("X-Seed");
  return s;
}

ServiceResponse ExplainService::meta() const {
  return guarded([&]() -> ServiceResponse {
    nlohmann::json feats = nlohmann::json::array();
    for (const auto& f : artifact_.features) {
      nlohmann::json jf{{"name", f.name}, {"kind", f.nominal ? "nominal" : "numeric"}, {"unit", f.unit}};
      if (f.nominal) jf["categories"] = f.categories;
      if (f.range) jf["range"] = {f.range->first, f.range->second};
      jf["mutable"] = std::find(artifact_.immutables.begin(), artifact_.immutables.end(), f.name) ==
                      artifact_.immutables.end();
      feats.push_back(jf);
    }
    return {200,
            {{"schema_version", kSchemaVersion},
             {"family", to_string(artifact_.spec.family)},
             {"spec", artifact_.spec.to_json()},
             {"features", feats},
             {"classes", artifact_.classes},
             {"explained_class", artifact_.classes.at(static_cast<std::size_t>(artifact_.explained_class))},
             {"schema_fingerprint", artifact_.schema_fingerprint},
             {"cv_metrics", artifact_.cv_metrics},
             {"immutables", artifact_.immutables}}};
  });
}

ServiceResponse ExplainService::predict(const std::string& body) const {
  return guarded([&]() -> ServiceResponse {
    const auto doc = parse_body(body);
    const auto row = parse_record(doc);
    const auto pr = artifact_.predictor->predict_proba(Row(row));
    const int cls = pr[1] > 0.5 ? 1 : 0;
    return {200,
            {{"schema_version", kSchemaVersion},
             {"class", artifact_.classes.at(static_cast<std::size_t>(cls))},
             {"class_index", cls},
             {"probabilities", {{artifact_.classes.at(0), pr[0]}, {artifact_.classes.at(1), pr[1]}}}}};
  });
}

ServiceResponse ExplainService::explain(const std::string& body, std::uint64_t seed) const {
  return guarded([&]() -> ServiceResponse {
    const auto doc = parse_body(body);
    const auto row = parse_record(doc);
    const auto f = artifact_.explained_output();
    const auto info = artifact_.info();
    LimeOptions lo;
    lo.n_samples = artifact_.lime_samples;
    const auto lime = lime_explain(f, Row(row), artifact_.background, info, lo, derive_seed(seed, 1));
    const auto shap = shapley_auto(f, Row(row), artifact_.background, artifact_.permutations, derive_seed(seed, 2));
    const auto pr = artifact_.predictor->predict_proba(Row(row));
    const int cls = pr[1] > 0.5 ? 1 : 0;
    return {200,
            {{"schema_version", kSchemaVersion},
             {"class", artifact_.classes.at(static_cast<std::size_t>(cls))},
             {"probabilities", {{artifact_.classes.at(0), pr[0]}, {artifact_.classes.at(1), pr[1]}}},
             {"explained_class", artifact_.classes.at(static_cast<std::size_t>(artifact_.explained_class))},
             {"lime", lime.to_json()},
             {"shapley", shap.to_json(info.names)},
             {"efficiency_gap", shap.efficiency_gap()}}};
  });
}

ServiceResponse ExplainService::counterfactual(const std::string& body, std::uint64_t seed) const {
  return guarded([&]() -> ServiceResponse {
    const auto doc = parse_body(body);
    const auto row = parse_record(doc);
    CounterfactualOptions co;
    co.k = int_field(doc, "k", artifact_.cf_k, 1, 50);
    co.budget = int_field(doc, "budget", artifact_.cf_budget, 1, 100000);
    co.immutables = artifact_.immutables;
    if (doc.contains("immutables")) {
      const auto& im = doc.at("immutables");
      if (!im.is_array()) throw HttpError(400, "immutables", "field 'immutables' must be an array of feature names");
      co.immutables.clear();
      for (const auto& v : im) {
        if (!v.is_string()) throw HttpError(400, "immutables", "field 'immutables' must be an array of feature names");
        const auto name = v.get<std::string>();
        const bool known = std::any_of(artifact_.features.begin(), artifact_.features.end(),
                                       [&](const ArtifactFeature& f) { return f.name == name; });
        if (!known) throw HttpError(400, "immutables", "unknown feature '" + name + "' in immutables");
        co.immutables.push_back(name);
      }
    }
    if (doc.contains("target_class")) {
      const auto& t = doc.at("target_class");
      if (t.is_string()) {
        const auto it = std::find(artifact_.classes.begin(), artifact_.classes.end(), t.get<std::string>());
        if (it == artifact_.classes.end()) throw HttpError(422, "target_class", "unknown class '" + t.get<std::string>() + "'");
        co.target_class = static_cast<int>(it - artifact_.classes.begin());
      } else if (t.is_number_integer()) {
        co.target_class = t.get<int>();
        if (co.target_class != 0 && co.target_class != 1) throw HttpError(422, "target_class", "target_class must be 0 or 1");
      } else {
        throw HttpError(400, "target_class", "field 'target_class' must be a class name or index");
      }
    }
    const auto p1 = model_output(artifact_.predictor, 1);
    const auto set = counterfactual_search(p1, Row(row), artifact_.space, co, seed);
    auto out = set.to_json(artifact_.space);
    out["schema_version"] = kSchemaVersion;
    out["classes"] = artifact_.classes;
    return {200, out};
  });
}

ServiceResponse ExplainService::global() const {
  return guarded([&]() -> ServiceResponse {
    std::call_once(global_once_, [&] {
      const auto f = artifact_.explained_output();
      const auto info = artifact_.info();
      const Matrix& x = artifact_.background;
      const auto g = global_shapley(f, x, x, info, artifact_.permutations, options_.default_seed);
      nlohmann::json pdps = nlohmann::json::array(), ales = nlohmann::json::array();
      for (const auto& name : artifact_.pdp_features) pdps.push_back(pdp(f, x, info, artifact_.index_of(name), artifact_.grid_size).to_json());
      for (const auto& name : artifact_.ale_features) ales.push_back(ale(f, x, info, artifact_.index_of(name), artifact_.ale_bins).to_json());
      global_cache_ = {{"schema_version", kSchemaVersion},
                       {"explained_class", artifact_.classes.at(static_cast<std::size_t>(artifact_.explained_class))},
                       {"global", g.to_json()},
                       {"pdp", pdps},
                       {"ale", ales},
                       {"rows", x.rows()}};
    });
    return {200, global_cache_};
  });
}

void ExplainService::mount(httplib::Server& server) const {
  auto send = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json; charset=utf-8");
  };
  auto seeded = [this, send](httplib::Response& res, const httplib::Request& req, auto&& handler) {
    std::uint64_t seed = 0;
    try {
      seed = seed_from_header(req.get_header_value("X-Seed"));
    } catch (const std::exception&) {
      send(res, {400, error_body("header X-Seed must be an unsigned integer", "X-Seed")});
      return;
    }
    send(res, handler(seed));
  };
  server.Get("/model/meta", [this, send](const httplib::Request&, httplib::Response& res) { send(res, meta()); });
  server.Get("/global", [this, send](const httplib::Request&, httplib::Response& res) { send(res, global()); });
  server.Post("/predict", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, predict(req.body)); });
  server.Post("/explain", [this, seeded](const httplib::Request& req, httplib::Response& res) {
    seeded(res, req, [&](std::uint64_t s) { return explain(req.body, s); });
  });
  server.Post("/counterfactual", [this, seeded](const httplib::Request& req, httplib::Response& res) {
    seeded(res, req, [&](std::uint64_t s) { return counterfactual(req.body, s); });
  });
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  const auto origin = options_.cors_origin;
  server.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, X-Seed");
  });
  // Method, path and status only; request bodies carry patient values.
  server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    std::cerr << req.method << ' ' << req.path << ' ' << res.status << '\n';
  });
}

void serve(const ExplainService& service, const std::string& host, int port) {
  httplib::Server server;
  service.mount(server);
  std::cerr << "nephro-xai service listening on " << host << ':' << port << '\n';
  if (!server.listen(host, port)) throw ComputeError("cannot bind " + host + ":" + std::to_string(port));
}

}  // namespace nephro
