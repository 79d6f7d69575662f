#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nephro/common.hpp"
#include "nephro/table.hpp"

namespace nephro {

struct MissingnessEntry {
  std::string feature;
  std::size_t count = 0;
  double fraction = 0;  // count / rows, exactly
};

struct MissingnessProfile {
  std::size_t rows = 0;
  std::vector<MissingnessEntry> entries;  // one per non-target column, schema order

  const MissingnessEntry& at(std::string_view feature) const;
  nlohmann::json to_json() const;
};

MissingnessProfile profile_missingness(const DataTable& table);

// Rows sharing one observed/missing mask. `observed[j]` is true when column j
// is present. Patterns are listed in order of first appearance.
struct MissingPattern {
  std::vector<bool> observed;
  std::vector<std::size_t> rows;

  std::size_t observed_count() const;
};

// NaN cells are missing. Member sets partition the rows of `data`.
std::vector<MissingPattern> missing_patterns(const Matrix& data);

struct McarOptions {
  int max_iter = 100;
  double tolerance = 1e-6;
  // Sigma + (ridge_scale * trace(Sigma) / p) * I before every inversion.
  double ridge_scale = 1e-6;
};

struct EmEstimate {
  Vector mean;
  Matrix covariance;
  int iterations = 0;
  bool converged = false;
};

// Maximum-likelihood mean and covariance of a multivariate normal sample with
// missing cells (NaN), by expectation-maximization.
EmEstimate em_mean_covariance(const Matrix& data, const std::vector<MissingPattern>& patterns,
                              const McarOptions& options = {});

struct MCARTestResult {
  double statistic = 0;
  int degrees_of_freedom = 0;
  double p_value = 1;
  std::size_t n_patterns = 0;
  std::size_t sample_size = 0;
  std::size_t dropped_rows = 0;  // rows with every variable missing
  std::vector<std::string> dropped_columns;
  int em_iterations = 0;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
};

// Little's chi-square test of the MCAR hypothesis on a numeric matrix
// (NaN = missing). Columns are standardized on their observed cells first so
// the ridge term is scale-free; the statistic is affine invariant.
MCARTestResult little_mcar_test(const Matrix& data, const McarOptions& options = {},
                                std::span<const std::string> column_names = {});

// Runs the test on a random `sample_fraction` of the table's rows over every
// non-target column (nominal columns enter as their category codes).
MCARTestResult little_mcar_test(const DataTable& table, double sample_fraction, std::uint64_t seed,
                                const McarOptions& options = {});

// Upper tail of the chi-square distribution.
double chi_square_sf(double statistic, double degrees_of_freedom);

}  // namespace nephro
