#pragma once

#include <array>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nephro/common.hpp"
#include "nephro/tree.hpp"

namespace nephro {

enum class Family { kLR, kNB, kLSVM, kDT, kRF, kADA, kGBM };

std::string to_string(Family family);
Family family_from_string(std::string_view name);

// Hyperparameters are a flat name -> number record; unknown names are rejected
// at training time so a typo in a config grid cannot silently fall back.
struct ModelSpec {
  Family family = Family::kRF;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;

  double param(const std::string& name, double fallback) const;
  // Defaults merged with `params`.
  std::map<std::string, double> resolved() const;
  void validate() const;
  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& doc);
};

std::map<std::string, double> default_hyperparameters(Family family);

class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual Family family() const = 0;
  virtual std::size_t n_features() const = 0;
  // P(class 1 | x).
  virtual double proba1(Row x) const = 0;
  // Non-negative, sums to 1.
  virtual Vector feature_importances() const = 0;
  virtual nlohmann::json parameters() const = 0;

  std::array<double, 2> predict_proba(Row x) const;
  // Class 1 only when its probability is strictly above one half.
  int predict(Row x) const { return proba1(x) > 0.5 ? 1 : 0; }
  Vector proba1(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;
  nlohmann::json to_json() const;
};

using PredictorPtr = std::shared_ptr<const Predictor>;

// `nominal` flags columns holding category codes; only naive Bayes uses it.
PredictorPtr train(const ModelSpec& spec, const Matrix& x, std::span<const int> y,
                   const std::vector<bool>& nominal = {});

PredictorPtr predictor_from_json(const nlohmann::json& doc);

// Tree access for export: DT returns its tree, RF returns member `index`.
const Tree& tree_of(const Predictor& predictor, std::size_t index = 0);
std::size_t tree_count(const Predictor& predictor);

// Training diagnostics exposed for property tests.
std::vector<double> gbm_training_loss(const Predictor& predictor);
std::vector<double> ada_round_errors(const Predictor& predictor);

Vector normalize_importances(Vector raw);

}  // namespace nephro
