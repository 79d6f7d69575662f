#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "nephro/common.hpp"
#include "nephro/kernels.hpp"

namespace nephro::testing {

inline std::string source_path(const std::string& rel) { return std::string(NEPHRO_SOURCE_DIR) + "/" + rel; }

inline Matrix gaussian_matrix(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = g(rng);
  }
  return m;
}

inline BatchModel linear_model(std::vector<double> coef, double intercept = 0.0) {
  return [coef = std::move(coef), intercept](const Matrix& x) {
    Vector out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double s = intercept;
      for (std::size_t j = 0; j < coef.size(); ++j) s += coef[j] * x(i, static_cast<Eigen::Index>(j));
      out(i) = s;
    }
    return out;
  };
}

// Row-wise function lifted to a batch model.
template <class Fn>
BatchModel rowwise(Fn fn) {
  return [fn](const Matrix& x) {
    Vector out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = fn(row_of(x, i));
    return out;
  };
}


// Correlated Gaussian rows (AR(1) correlation 0.5 between neighbouring columns).
inline Matrix correlated_gaussian(Eigen::Index n, Eigen::Index d, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    double prev = g(rng);
    m(i, 0) = prev;
    for (Eigen::Index j = 1; j < d; ++j) {
      prev = 0.5 * prev + std::sqrt(0.75) * g(rng);
      m(i, j) = prev;
    }
  }
  return m;
}

// Each cell deleted independently with probability `rate`.
inline Matrix mcar_synthetic(Eigen::Index n, Eigen::Index d, double rate, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m = correlated_gaussian(n, d, rng);
  std::bernoulli_distribution drop(rate);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (drop(rng)) m(i, j) = kMissing;
    }
  }
  return m;
}

// Column 1 goes missing mostly when column 0 is high.
inline Matrix mar_synthetic(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m = correlated_gaussian(n, d, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double rate = m(i, 0) > 0 ? 0.6 : 0.05;
    if (u(rng) < rate) m(i, 1) = kMissing;
  }
  return m;
}

}  // namespace nephro::testing
