#pragma once

#include <span>

#include <Eigen/Core>

#include "tense/types.hpp"

namespace tense {

enum class KernelFamily { SquaredExponential, Matern };

/// Stationary correlation specification. The metric carries the Mahalanobis
/// geometry for the squared-exponential family (an isotropic length scale
/// theta corresponds to metric = theta^2 * I). The Matern family is isotropic
/// and uses theta directly with smoothness nu.
struct KernelSpec {
  KernelFamily family = KernelFamily::SquaredExponential;
  double theta = 1.0;
  double nu = 2.5;
  Eigen::MatrixXd metric;

  static KernelSpec squared_exponential(double theta, int dim);
  static KernelSpec matern(double theta, double nu, int dim);

  void validate() const;  // throws std::invalid_argument
};

/// dx' * metric^{-1} * dx via Cholesky solve. Throws std::invalid_argument on
/// dimension mismatch or a non-SPD metric.
double mahalanobis_sq(const Eigen::VectorXd& dx, const Eigen::MatrixXd& metric);

/// Correlation in (0, 1]; exactly 1 at dx = 0 for every family.
double stationary_correlation(const KernelSpec& spec, const Eigen::VectorXd& dx);

/// n x n covariance matrix with entries sigma^2 * r(x_i - x_j).
Eigen::MatrixXd stationary_cov_matrix(const KernelSpec& spec, double sigma,
                                      std::span<const Eigen::VectorXd> points);

Eigen::MatrixXd stationary_cov_matrix(const KernelSpec& spec, double sigma,
                                      std::span<const Vec2> points);

}  // namespace tense
