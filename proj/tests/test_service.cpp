#include <chrono>
#include <thread>

#include <gtest/gtest.h>

#include "nephro/service.hpp"
#include "nephro/table.hpp"
#include "support.hpp"

// After Eigen: resolv.h defines a _res macro.
#include <httplib.h>

using namespace nephro;
using nephro::testing::source_path;

namespace {

const ExplainService& service() {
  static const ExplainService s(ModelArtifact::load(source_path("models/reference_model.json")));
  return s;
}

nlohmann::json sick() {
  return {{"hemo", 9.1}, {"sc", 3.2}, {"al", 3}, {"htn", "yes"}, {"dm", 1}, {"age", 61}};
}

nlohmann::json healthy() {
  return {{"hemo", 15.0}, {"sc", 1.0}, {"al", 0}, {"htn", "no"}, {"dm", "no"}, {"age", 40}};
}

std::string body(const nlohmann::json& record, nlohmann::json extra = nlohmann::json::object()) {
  extra["record"] = record;
  return extra.dump();
}

}  // namespace

TEST(Service, MetaDescribesFeaturesAndFingerprint) {
  const auto r = service().meta();
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["features"].size(), 6u);
  EXPECT_EQ(r.body["family"], "RF");
  const auto schema = Schema::load(source_path("data/ckd_schema.json"));
  EXPECT_EQ(r.body["schema_fingerprint"], schema.fingerprint());
  for (const auto& f : r.body["features"]) {
    if (f["name"] == "age") {
      EXPECT_FALSE(f["mutable"].get<bool>());
    }
  }
}

TEST(Service, ReferenceRecordPredictsCkd) {
  const auto r = service().predict(body(sick()));
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["class"], "ckd");
  EXPECT_GT(r.body["probabilities"]["ckd"].get<double>(), 0.9);
}

TEST(Service, HealthyRecordPredictsNotCkd) {
  const auto r = service().predict(body(healthy()));
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["class"], "notckd");
}

TEST(Service, MissingFeatureIs400NamingIt) {
  auto rec = sick();
  rec.erase("sc");
  const auto r = service().predict(body(rec));
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["field"], "sc");
}

TEST(Service, MalformedInputsAre400) {
  EXPECT_EQ(service().predict("{not json").status, 400);
  EXPECT_EQ(service().predict("{}").status, 400);
  auto rec = sick();
  rec["zz"] = 1;
  EXPECT_EQ(service().predict(body(rec)).status, 400);
  rec = sick();
  rec["hemo"] = "low";
  EXPECT_EQ(service().predict(body(rec)).status, 400);
}

TEST(Service, OutOfRangeAndBadCategoryAre422) {
  auto rec = sick();
  rec["hemo"] = 99;
  const auto r = service().predict(body(rec));
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.body["field"], "hemo");
  rec = sick();
  rec["htn"] = "maybe";
  EXPECT_EQ(service().predict(body(rec)).status, 422);
  rec = sick();
  rec["dm"] = 0.5;
  EXPECT_EQ(service().predict(body(rec)).status, 422);
}

TEST(Service, FingerprintMismatchIs409) {
  const auto r = service().predict(body(sick(), {{"schema_fingerprint", "0000000000000000"}}));
  EXPECT_EQ(r.status, 409);
  const auto ok = service().predict(body(sick(), {{"schema_fingerprint", service().artifact().schema_fingerprint}}));
  EXPECT_EQ(ok.status, 200);
}

TEST(Service, ExplainIsEfficientAndSeeded) {
  const auto a = service().explain(body(sick()), 7);
  ASSERT_EQ(a.status, 200) << a.body.dump();
  EXPECT_LT(std::abs(a.body["efficiency_gap"].get<double>()), 0.02);
  EXPECT_EQ(a.body["shapley"]["contributions"].size(), 6u);
  EXPECT_EQ(a.body["lime"], service().explain(body(sick()), 7).body["lime"]);
}

TEST(Service, CounterfactualFlipsClassAndKeepsAge) {
  const auto r = service().counterfactual(body(sick(), {{"k", 3}}), 3);
  ASSERT_EQ(r.status, 200) << r.body.dump();
  ASSERT_TRUE(r.body["found"].get<bool>());
  for (const auto& cf : r.body["counterfactuals"]) {
    EXPECT_EQ(cf["predicted_class"], 1);
    EXPECT_EQ(cf["row"]["age"], 61);
    EXPECT_EQ(std::count(cf["changed"].begin(), cf["changed"].end(), "age"), 0);
  }
}

TEST(Service, CounterfactualOptionErrors) {
  const nlohmann::json all{"hemo", "sc", "al", "htn", "age", "dm"};
  EXPECT_EQ(service().counterfactual(body(sick(), {{"immutables", all}}), 1).status, 422);
  EXPECT_EQ(service().counterfactual(body(sick(), {{"k", 0}}), 1).status, 422);
  EXPECT_EQ(service().counterfactual(body(sick(), {{"target_class", "bogus"}}), 1).status, 422);
  EXPECT_EQ(service().counterfactual(body(sick(), {{"target_class", 2}}), 1).status, 422);
  EXPECT_EQ(service().counterfactual(body(sick(), {{"immutables", {"nope"}}}), 1).status, 400);
}

TEST(Service, SeedHeader) {
  EXPECT_EQ(service().seed_from_header(""), 42u);
  EXPECT_EQ(service().seed_from_header("17"), 17u);
  EXPECT_THROW(service().seed_from_header("x1"), std::invalid_argument);
  EXPECT_THROW(service().seed_from_header("12abc"), std::invalid_argument);
}

TEST(Service, HttpRoundTrip) {
  httplib::Server server;
  service().mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto meta = client.Get("/model/meta");
  ASSERT_TRUE(meta);
  EXPECT_EQ(meta->status, 200);
  EXPECT_EQ(meta->get_header_value("Access-Control-Allow-Origin"), "*");

  auto pred = client.Post("/predict", body(sick()), "application/json");
  ASSERT_TRUE(pred);
  EXPECT_EQ(pred->status, 200);
  EXPECT_EQ(nlohmann::json::parse(pred->body)["class"], "ckd");

  auto bad = client.Post("/predict", body(nlohmann::json::object()), "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  httplib::Headers seed{{"X-Seed", "oops"}};
  auto bad_seed = client.Post("/explain", seed, body(sick()), "application/json");
  ASSERT_TRUE(bad_seed);
  EXPECT_EQ(bad_seed->status, 400);

  auto pre = client.Options("/predict");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_FALSE(pre->get_header_value("Access-Control-Allow-Methods").empty());

  server.stop();
  t.join();
}
