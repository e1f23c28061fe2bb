#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "tense/surface.hpp"
#include "tense/types.hpp"

namespace tense {

/// Non-stationary squared-exponential covariance on an embedded torn surface.
/// Local 3x3 metrics are averaged pairwise inside a quadratic form with a
/// determinant prefactor, which keeps the assembled matrices valid (PSD)
/// while the tears decorrelate points on opposite sides.
struct NsCovSpec {
  double sigma = 1.0;
  double theta = 1.0;
  double alpha3 = 0.5;
  std::shared_ptr<const EmbeddingSurface> surface;

  void validate() const;  // throws std::invalid_argument
};

/// Per-point quantities reused across pairwise evaluations.
struct NsPointData {
  Vec3 embedded;
  Eigen::Matrix3d metric;
  double quarter_root_det = 1.0;  // |metric|^{1/4}
};

NsPointData ns_point_data(const NsCovSpec& spec, const Vec2& x);

/// Q = dv' * [(Sigma(x) + Sigma(x')) / 2]^{-1} * dv with dv the embedded
/// difference vector.
double ns_quadratic_form(const NsCovSpec& spec, const Vec2& x, const Vec2& xp);
double ns_quadratic_form(const NsPointData& a, const NsPointData& b);

double ns_covariance(const NsCovSpec& spec, const Vec2& x, const Vec2& xp);
double ns_covariance(const NsCovSpec& spec, const NsPointData& a, const NsPointData& b);

Eigen::MatrixXd assemble_cov_matrix(const NsCovSpec& spec, std::span<const Vec2> points);

/// Smallest eigenvalue plus a PSD verdict against -1e-8 * n * max|entry|.
/// Throws std::invalid_argument for non-symmetric input.
std::pair<double, bool> min_eigenvalue_check(const Eigen::MatrixXd& matrix);

/// Two-dimensional Paciorek covariance (no embedding); the source
/// construction the lifted 3-D form specialises.
double paciorek_cov_2d(double sigma, const Eigen::Matrix2d& metric_a,
                       const Eigen::Matrix2d& metric_b, const Vec2& dx);

/// The four-point demonstration that geodesic distances routed around a tear
/// endpoint do not produce a valid covariance: with unit sigma the matrix
/// loses positive semi-definiteness for theta > 0.25 / sqrt(0.5 ln 2).
struct GeodesicExample {
  Eigen::Matrix4d cov;
  double min_eigenvalue = 0.0;
};

GeodesicExample geodesic_counterexample(double theta);

inline constexpr double kGeodesicPsdThreshold = 0.42466090014400953;  // 0.25/sqrt(0.5 ln 2)

}  // namespace tense
