#include "tense/nscov.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace tense {

void NsCovSpec::validate() const {
  if (!(sigma > 0.0) || !(theta > 0.0) || !(alpha3 > 0.0))
    throw std::invalid_argument("NsCovSpec: sigma, theta and alpha3 must be positive");
  if (!surface) throw std::invalid_argument("NsCovSpec: surface required");
}

namespace {

double det3(const Eigen::Matrix3d& m) {
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

}  // namespace

NsPointData ns_point_data(const NsCovSpec& spec, const Vec2& x) {
  spec.validate();
  NsPointData data;
  data.embedded = spec.surface->embed(x);
  data.metric = local_metric(spec.surface->gradient(x), spec.theta, spec.alpha3).sigma3d;
  data.quarter_root_det = std::pow(det3(data.metric), 0.25);
  return data;
}

double ns_quadratic_form(const NsPointData& a, const NsPointData& b) {
  const Eigen::Matrix3d averaged = 0.5 * (a.metric + b.metric);
  Eigen::LLT<Eigen::Matrix3d> llt(averaged);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("ns_quadratic_form: averaged metric not positive definite");
  const Vec3 dv = a.embedded - b.embedded;
  return dv.dot(llt.solve(dv));
}

double ns_quadratic_form(const NsCovSpec& spec, const Vec2& x, const Vec2& xp) {
  return ns_quadratic_form(ns_point_data(spec, x), ns_point_data(spec, xp));
}

double ns_covariance(const NsCovSpec& spec, const NsPointData& a, const NsPointData& b) {
  // 2^{3/2} |A|^{1/4} |B|^{1/4} / |A + B|^{1/2}  ==  |A|^{1/4}|B|^{1/4} / |avg|^{1/2}
  const Eigen::Matrix3d averaged = 0.5 * (a.metric + b.metric);
  Eigen::LLT<Eigen::Matrix3d> llt(averaged);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("ns_covariance: averaged metric not positive definite");
  const Vec3 dv = a.embedded - b.embedded;
  const double quad = dv.dot(llt.solve(dv));
  const double prefactor = a.quarter_root_det * b.quarter_root_det / std::sqrt(det3(averaged));
  return spec.sigma * spec.sigma * prefactor * std::exp(-quad);
}

double ns_covariance(const NsCovSpec& spec, const Vec2& x, const Vec2& xp) {
  return ns_covariance(spec, ns_point_data(spec, x), ns_point_data(spec, xp));
}

Eigen::MatrixXd assemble_cov_matrix(const NsCovSpec& spec, std::span<const Vec2> points) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(points.size());
  std::vector<NsPointData> cache;
  cache.reserve(points.size());
  for (const Vec2& p : points) cache.push_back(ns_point_data(spec, p));

  Eigen::MatrixXd cov(n, n);
  const double s2 = spec.sigma * spec.sigma;
  for (Eigen::Index i = 0; i < n; ++i) {
    cov(i, i) = s2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double value = ns_covariance(spec, cache[i], cache[j]);
      cov(i, j) = value;
      cov(j, i) = value;
    }
  }
  return cov;
}

std::pair<double, bool> min_eigenvalue_check(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols())
    throw std::invalid_argument("min_eigenvalue_check: matrix must be square");
  const double magnitude = matrix.cwiseAbs().maxCoeff();
  if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, magnitude))
    throw std::invalid_argument("min_eigenvalue_check: matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix, Eigen::EigenvaluesOnly);
  const double min_eig = solver.eigenvalues().minCoeff();
  const double tolerance = 1e-8 * static_cast<double>(matrix.rows()) * magnitude;
  return {min_eig, min_eig >= -tolerance};
}

double paciorek_cov_2d(double sigma, const Eigen::Matrix2d& metric_a,
                       const Eigen::Matrix2d& metric_b, const Vec2& dx) {
  const Eigen::Matrix2d averaged = 0.5 * (metric_a + metric_b);
  Eigen::LLT<Eigen::Matrix2d> llt(averaged);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("paciorek_cov_2d: averaged metric not positive definite");
  const double quad = dx.dot(llt.solve(dx));
  const double prefactor = std::pow(metric_a.determinant(), 0.25) *
                           std::pow(metric_b.determinant(), 0.25) /
                           std::sqrt(averaged.determinant());
  return sigma * sigma * prefactor * std::exp(-quad);
}

GeodesicExample geodesic_counterexample(double theta) {
  if (!(theta > 0.0)) throw std::invalid_argument("geodesic_counterexample: theta > 0");
  // Points A=(0.5,1), B=(0.75,1), C=(1,1+), D=(1,1-) around a tear ending at
  // (0.75,1); the C-D geodesic detours around the end point, length 0.5.
  const double dist[4][4] = {{0.0, 0.25, 0.5, 0.5},
                             {0.25, 0.0, 0.25, 0.25},
                             {0.5, 0.25, 0.0, 0.5},
                             {0.5, 0.25, 0.5, 0.0}};
  GeodesicExample example;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      example.cov(i, j) = std::exp(-dist[i][j] * dist[i][j] / (theta * theta));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> solver(example.cov, Eigen::EigenvaluesOnly);
  example.min_eigenvalue = solver.eigenvalues().minCoeff();
  return example;
}

}  // namespace tense
