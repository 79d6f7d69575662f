#include "nephro/linear.hpp"

#include <algorithm>
#include <cmath>

namespace nephro::linear {

OlsFit fit_ols(const Matrix& x, const Vector& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = x;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  OlsFit fit;
  fit.rank_deficient = qr.rank() < p + 1;
  const Vector beta = qr.solve(y);
  fit.intercept = beta(0);
  fit.coef = beta.tail(p);
  return fit;
}

namespace {

double log_likelihood(const Eigen::MatrixXd& design, std::span<const int> y, const Vector& beta) {
  const Vector eta = design * beta;
  double ll = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // log(1 + exp(eta)) computed stably
    const double z = eta(i);
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    ll += (y[static_cast<std::size_t>(i)] ? z : 0.0) - softplus;
  }
  return ll;
}

}  // namespace

LogitFit fit_logit_newton(const Matrix& x, std::span<const int> y, double ridge, int max_iter,
                          double coef_cap) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = x;

  Vector beta = Vector::Zero(p + 1);
  double mean_y = 0;
  for (int v : y) mean_y += v;
  mean_y /= static_cast<double>(n);
  if (mean_y > 0 && mean_y < 1) beta(0) = std::log(mean_y / (1 - mean_y));

  Vector penalty = Vector::Constant(p + 1, ridge);
  penalty(0) = 0;
  auto objective = [&](const Vector& b) {
    return log_likelihood(design, y, b) - 0.5 * (penalty.array() * b.array().square()).sum();
  };

  LogitFit fit;
  Eigen::MatrixXd hessian(p + 1, p + 1);
  double current = objective(beta);
  for (int it = 0; it < max_iter; ++it) {
    const Vector eta = design * beta;
    Vector grad = -penalty.cwiseProduct(beta);
    Vector w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pi = sigmoid(eta(i));
      w(i) = std::max(pi * (1 - pi), 1e-12);
      grad += design.row(i).transpose() * (y[static_cast<std::size_t>(i)] - pi);
    }
    hessian = design.transpose() * w.asDiagonal() * design;
    hessian.diagonal() += penalty;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    Vector step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      hessian.diagonal().array() += 1e-8 * std::max(1.0, hessian.diagonal().maxCoeff());
      step = hessian.ldlt().solve(grad);
    }
    // Step halving keeps the objective monotone.
    double scale = 1.0;
    Vector next = beta + step;
    double value = objective(next);
    for (int h = 0; h < 30 && !(value >= current - 1e-12); ++h) {
      scale *= 0.5;
      next = beta + scale * step;
      value = objective(next);
    }
    const double delta = (scale * step).cwiseAbs().maxCoeff();
    beta = next;
    current = value;
    fit.iterations = it + 1;
    if (beta.tail(p).cwiseAbs().maxCoeff() > coef_cap) {
      fit.separated = true;
      break;
    }
    if (delta < 1e-10) {
      fit.converged = true;
      break;
    }
  }
  if (fit.separated) {
    for (Eigen::Index j = 1; j <= p; ++j) beta(j) = std::clamp(beta(j), -coef_cap, coef_cap);
  }

  // Observed information at the final estimate.
  const Vector eta = design * beta;
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pi = sigmoid(eta(i));
    w(i) = std::max(pi * (1 - pi), 1e-12);
  }
  hessian = design.transpose() * w.asDiagonal() * design;
  hessian.diagonal() += penalty;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(hessian);
  if (lu.isInvertible()) {
    fit.covariance = lu.inverse();
  } else {
    hessian.diagonal().array() += 1e-8 * std::max(1.0, hessian.diagonal().maxCoeff());
    fit.covariance = hessian.inverse();
  }
  fit.intercept = beta(0);
  fit.coef = beta.tail(p);
  return fit;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0 || sbb <= 0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

}  // namespace nephro::linear
