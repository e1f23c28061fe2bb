#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tense/types.hpp"

namespace tense {

/// Region-aware scalar surface v(x, y) torn along discontinuity lines.
///
/// Regions partition the domain; v is smooth inside each region and may jump
/// across region boundaries. All evaluation goes through the region id so a
/// finite-difference gradient can refuse to difference across a tear.
class EmbeddingSurface {
 public:
  using RegionFn = std::function<int(const Vec2&)>;
  using ValueFn = std::function<double(int region, const Vec2&)>;
  using GradFn = std::function<Vec2(int region, const Vec2&)>;

  EmbeddingSurface(std::string name, Box2 domain, RegionFn region_of, ValueFn value);

  void set_gradient(GradFn grad) { grad_ = std::move(grad); }
  void set_tear_lines(std::vector<Segment> tears) { tears_ = std::move(tears); }

  const std::string& name() const { return name_; }
  const Box2& domain() const { return domain_; }
  bool has_analytic_gradient() const { return static_cast<bool>(grad_); }
  const std::vector<Segment>& tear_lines() const { return tears_; }

  /// Region id containing x; tear lines belong to exactly one side.
  int region_of(const Vec2& x) const;

  double value(const Vec2& x) const;

  /// (x, y, v(x, y)).
  Vec3 embed(const Vec2& x) const;

  /// (v_x, v_y), analytic when provided, otherwise finite differences that
  /// switch to one-sided stencils rather than reach into another region.
  Vec2 gradient(const Vec2& x) const;

  /// Distance from x to the nearest tear line; +inf when none are declared.
  double distance_to_tear(const Vec2& x) const;

  /// Finite-difference step: 1e-5 times the domain width along the axis.
  double fd_step(int axis) const { return 1e-5 * domain_.width(axis); }

 private:
  void require_inside(const Vec2& x) const;
  double fd_axis(const Vec2& x, int axis, int region) const;

  std::string name_;
  Box2 domain_;
  RegionFn region_fn_;
  ValueFn value_fn_;
  GradFn grad_;
  std::vector<Segment> tears_;
};

/// Orthonormal frame aligned with the embedded tangent plane: w1 along the
/// in-plane direction of steepest ascent of v, w2 the in-plane level
/// direction, w3 the surface normal. Degenerate gradients fall back to the
/// canonical axes.
struct TangentBasis {
  Vec3 w1, w2, w3;
};

inline constexpr double kDegenerateGradSq = 1e-12;

TangentBasis tangent_basis(const Vec2& grad);

/// Position-dependent 3x3 metric whose tangent-plane eigenvalues
/// theta^2 (1 + r^2) and theta^2 undo the compression induced by a stretched
/// embedding, with alpha3^2 free along the normal.
struct LocalMetric {
  Eigen::Matrix3d sigma3d;
  TangentBasis basis;
  Vec3 eigenvalues;  // alpha1^2, alpha2^2, alpha3^2
  Vec2 grad;
  double r_sq = 0.0;
};

LocalMetric local_metric(const Vec2& grad, double theta, double alpha3);
LocalMetric local_metric(const EmbeddingSurface& surface, const Vec2& x, double theta,
                         double alpha3);

/// The 3x2 linear operator lifting a 2-D displacement onto the tangent plane.
Eigen::Matrix<double, 3, 2> embedding_operator(const Vec2& grad);

}  // namespace tense
