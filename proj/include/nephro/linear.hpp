#pragma once

#include <cmath>
#include <span>

#include "nephro/common.hpp"

namespace nephro::linear {

inline double sigmoid(double z) {
  if (z >= 0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct OlsFit {
  Vector coef;
  double intercept = 0;
  bool rank_deficient = false;
};

// Ordinary least squares with an intercept (column-pivoted QR).
OlsFit fit_ols(const Matrix& x, const Vector& y);

struct LogitFit {
  Vector coef;
  double intercept = 0;
  // Inverse observed information, intercept first.
  Matrix covariance;
  int iterations = 0;
  bool converged = false;
  // Coefficients hit the cap (complete or quasi-complete separation).
  bool separated = false;
};

// Maximum-likelihood logistic regression by damped Newton iterations.
// `ridge` (default 0) penalizes the slopes only.
LogitFit fit_logit_newton(const Matrix& x, std::span<const int> y, double ridge = 0.0,
                          int max_iter = 100, double coef_cap = 30.0);

double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace nephro::linear
