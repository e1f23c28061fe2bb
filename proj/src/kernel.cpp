#include "tense/kernel.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace tense {

KernelSpec KernelSpec::squared_exponential(double theta, int dim) {
  KernelSpec spec;
  spec.family = KernelFamily::SquaredExponential;
  spec.theta = theta;
  spec.metric = theta * theta * Eigen::MatrixXd::Identity(dim, dim);
  return spec;
}

KernelSpec KernelSpec::matern(double theta, double nu, int dim) {
  KernelSpec spec;
  spec.family = KernelFamily::Matern;
  spec.theta = theta;
  spec.nu = nu;
  spec.metric = theta * theta * Eigen::MatrixXd::Identity(dim, dim);
  return spec;
}

void KernelSpec::validate() const {
  if (!(theta > 0.0)) throw std::invalid_argument("KernelSpec: theta must be positive");
  if (family == KernelFamily::Matern && !(nu > 0.0))
    throw std::invalid_argument("KernelSpec: nu must be positive");
  if (metric.rows() == 0 || metric.rows() != metric.cols())
    throw std::invalid_argument("KernelSpec: metric must be square and non-empty");
  if (!metric.isApprox(metric.transpose(), 1e-12))
    throw std::invalid_argument("KernelSpec: metric must be symmetric");
}

double mahalanobis_sq(const Eigen::VectorXd& dx, const Eigen::MatrixXd& metric) {
  if (metric.rows() != metric.cols() || dx.size() != metric.rows())
    throw std::invalid_argument("mahalanobis_sq: dimension mismatch");
  if (dx.isZero(0.0)) return 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(metric);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("mahalanobis_sq: metric is not positive definite");
  return dx.dot(llt.solve(dx));
}

namespace {

// Matern correlation at scaled distance z = sqrt(2 nu) * |dx| / theta.
// Closed forms for the common half-integer orders, modified Bessel K for the rest.
double matern_profile(double z, double nu) {
  if (z <= 0.0) return 1.0;
  if (std::abs(nu - 0.5) < 1e-12) return std::exp(-z);
  if (std::abs(nu - 1.5) < 1e-12) return (1.0 + z) * std::exp(-z);
  if (std::abs(nu - 2.5) < 1e-12) return (1.0 + z + z * z / 3.0) * std::exp(-z);
  const double scale = std::pow(2.0, 1.0 - nu) / std::tgamma(nu);
  return scale * std::pow(z, nu) * std::cyl_bessel_k(nu, z);
}

}  // namespace

double stationary_correlation(const KernelSpec& spec, const Eigen::VectorXd& dx) {
  spec.validate();
  if (dx.isZero(0.0)) return 1.0;
  if (spec.family == KernelFamily::SquaredExponential)
    return std::exp(-mahalanobis_sq(dx, spec.metric));
  const double z = std::sqrt(2.0 * spec.nu) * dx.norm() / spec.theta;
  return matern_profile(z, spec.nu);
}

namespace {

template <typename PointSpan>
Eigen::MatrixXd cov_matrix_impl(const KernelSpec& spec, double sigma, PointSpan points) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd cov(n, n);
  const double s2 = sigma * sigma;
  for (Eigen::Index i = 0; i < n; ++i) {
    cov(i, i) = s2;
    for (Eigen::Index j = 0; j < i; ++j) {
      Eigen::VectorXd dx = points[i] - points[j];
      const double value = s2 * stationary_correlation(spec, dx);
      cov(i, j) = value;
      cov(j, i) = value;
    }
  }
  return cov;
}

}  // namespace

Eigen::MatrixXd stationary_cov_matrix(const KernelSpec& spec, double sigma,
                                      std::span<const Eigen::VectorXd> points) {
  return cov_matrix_impl(spec, sigma, points);
}

Eigen::MatrixXd stationary_cov_matrix(const KernelSpec& spec, double sigma,
                                      std::span<const Vec2> points) {
  return cov_matrix_impl(spec, sigma, points);
}

}  // namespace tense
