#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "nephro/artifact.hpp"

namespace httplib {
class Server;
}

namespace nephro {

struct ServiceOptions {
  std::string cors_origin = "*";
  std::uint64_t default_seed = 42;
};

struct ServiceResponse {
  int status = 200;
  nlohmann::json body;
};

// Request handlers over a read-only model artifact. Handlers are const and safe to call concurrently.
class ExplainService {
 public:
  explicit ExplainService(ModelArtifact artifact, ServiceOptions options = {});

  const ModelArtifact& artifact() const { return artifact_; }
  const ServiceOptions& options() const { return options_; }

  ServiceResponse meta() const;
  ServiceResponse predict(const std::string& body) const;
  ServiceResponse explain(const std::string& body, std::uint64_t seed) const;
  ServiceResponse counterfactual(const std::string& body, std::uint64_t seed) const;
  ServiceResponse global() const;

  // X-Seed header value; empty means the default seed. Throws std::invalid_argument when malformed.
  std::uint64_t seed_from_header(const std::string& value) const;

  // Registers every route plus CORS handling.
  void mount(httplib::Server& server) const;

 private:
  template <class Fn>
  ServiceResponse guarded(Fn&& fn) const;
  std::vector<double> parse_record(const nlohmann::json& doc) const;
  nlohmann::json parse_body(const std::string& body) const;

  ModelArtifact artifact_;
  ServiceOptions options_;
  mutable std::once_flag global_once_;
  mutable nlohmann::json global_cache_;
};

// Blocks until the server stops.
void serve(const ExplainService& service, const std::string& host, int port);

}  // namespace nephro
