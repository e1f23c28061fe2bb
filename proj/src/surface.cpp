#include "tense/surface.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace tense {

EmbeddingSurface::EmbeddingSurface(std::string name, Box2 domain, RegionFn region_of,
                                   ValueFn value)
    : name_(std::move(name)),
      domain_(domain),
      region_fn_(std::move(region_of)),
      value_fn_(std::move(value)) {
  if (!region_fn_ || !value_fn_)
    throw std::invalid_argument("EmbeddingSurface: region and value callables required");
  if (!(domain_.xmax > domain_.xmin) || !(domain_.ymax > domain_.ymin))
    throw std::invalid_argument("EmbeddingSurface: empty domain");
}

void EmbeddingSurface::require_inside(const Vec2& x) const {
  if (!domain_.contains(x))
    throw std::domain_error("EmbeddingSurface '" + name_ + "': point outside domain");
}

int EmbeddingSurface::region_of(const Vec2& x) const {
  require_inside(x);
  return region_fn_(x);
}

double EmbeddingSurface::value(const Vec2& x) const {
  require_inside(x);
  return value_fn_(region_fn_(x), x);
}

Vec3 EmbeddingSurface::embed(const Vec2& x) const { return Vec3(x.x(), x.y(), value(x)); }

// One axis of the finite-difference gradient. Central stencil when both
// neighbours stay in the same region and domain; otherwise second-order
// one-sided, degrading to first-order when even the two-step point is cut off.
double EmbeddingSurface::fd_axis(const Vec2& x, int axis, int region) const {
  const double h = fd_step(axis);
  Vec2 step = Vec2::Zero();
  step[axis] = h;

  const auto usable = [&](const Vec2& p) {
    return domain_.contains(p) && region_fn_(p) == region;
  };

  const Vec2 xp = x + step;
  const Vec2 xm = x - step;
  const bool plus_ok = usable(xp);
  const bool minus_ok = usable(xm);

  if (plus_ok && minus_ok)
    return (value_fn_(region, xp) - value_fn_(region, xm)) / (2.0 * h);

  const double v0 = value_fn_(region, x);
  if (plus_ok) {
    const Vec2 xpp = x + 2.0 * step;
    if (usable(xpp))
      return (-3.0 * v0 + 4.0 * value_fn_(region, xp) - value_fn_(region, xpp)) / (2.0 * h);
    return (value_fn_(region, xp) - v0) / h;
  }
  if (minus_ok) {
    const Vec2 xmm = x - 2.0 * step;
    if (usable(xmm))
      return (3.0 * v0 - 4.0 * value_fn_(region, xm) + value_fn_(region, xmm)) / (2.0 * h);
    return (v0 - value_fn_(region, xm)) / h;
  }
  throw std::runtime_error("EmbeddingSurface '" + name_ +
                           "': gradient stencil has no usable neighbour on axis " +
                           std::to_string(axis));
}

Vec2 EmbeddingSurface::gradient(const Vec2& x) const {
  require_inside(x);
  const int region = region_fn_(x);
  if (grad_) return grad_(region, x);
  return Vec2(fd_axis(x, 0, region), fd_axis(x, 1, region));
}

double EmbeddingSurface::distance_to_tear(const Vec2& x) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Segment& tear : tears_) best = std::min(best, point_segment_distance(x, tear));
  return best;
}

TangentBasis tangent_basis(const Vec2& grad) {
  const double vx = grad.x();
  const double vy = grad.y();
  const double r_sq = vx * vx + vy * vy;
  if (r_sq < kDegenerateGradSq)
    return {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  TangentBasis basis;
  basis.w1 = Vec3(vx, vy, r_sq) / std::sqrt(r_sq + r_sq * r_sq);
  basis.w2 = Vec3(-vy, vx, 0.0) / std::sqrt(r_sq);
  basis.w3 = Vec3(-vx, -vy, 1.0) / std::sqrt(r_sq + 1.0);
  return basis;
}

LocalMetric local_metric(const Vec2& grad, double theta, double alpha3) {
  if (!(theta > 0.0) || !(alpha3 > 0.0))
    throw std::invalid_argument("local_metric: theta and alpha3 must be positive");
  const double vx = grad.x();
  const double vy = grad.y();
  const double r_sq = vx * vx + vy * vy;
  const double t2 = theta * theta;
  const double k = alpha3 * alpha3 / (r_sq + 1.0);

  LocalMetric metric;
  metric.grad = grad;
  metric.r_sq = r_sq;
  metric.basis = tangent_basis(grad);
  metric.eigenvalues = Vec3(t2 * (1.0 + r_sq), t2, alpha3 * alpha3);
  // Closed form of the spectral sum; regular at r = 0.
  metric.sigma3d << t2 + k * vx * vx, k * vx * vy, vx * (t2 - k),
      k * vx * vy, t2 + k * vy * vy, vy * (t2 - k),
      vx * (t2 - k), vy * (t2 - k), t2 * r_sq + k;
  return metric;
}

LocalMetric local_metric(const EmbeddingSurface& surface, const Vec2& x, double theta,
                         double alpha3) {
  return local_metric(surface.gradient(x), theta, alpha3);
}

Eigen::Matrix<double, 3, 2> embedding_operator(const Vec2& grad) {
  Eigen::Matrix<double, 3, 2> lift;
  lift << 1.0, 0.0, 0.0, 1.0, grad.x(), grad.y();
  return lift;
}

}  // namespace tense
