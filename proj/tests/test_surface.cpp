#include "tense/surface.hpp"

#include <cmath>

#include <doctest.h>
#include <Eigen/Dense>

#include "tense/models.hpp"
#include "tense/rng.hpp"

using namespace tense;

TEST_CASE("embed uses the region containing the point") {
  const auto toy1 = builtin_embedding("toy1");
  const Vec3 flat = toy1->embed(Vec2(0.5, 1.0));
  CHECK(flat == Vec3(0.5, 1.0, 0.0));

  const auto oly = builtin_embedding("olympus");
  CHECK(oly->embed(Vec2(10.0, 130.0)) == Vec3(10.0, 130.0, 1.0));
  CHECK(oly->embed(Vec2(0.0, 0.0)) == Vec3(0.0, 0.0, 0.0));

  CHECK_THROWS_AS(toy1->embed(Vec2(-0.1, 0.5)), std::domain_error);
}

TEST_CASE("analytic gradients at hand-checked points") {
  const auto toy1 = builtin_embedding("toy1");
  CHECK(toy1->gradient(Vec2(0.5, 1.5)) == Vec2(0.0, 0.0));
  const Vec2 grad = toy1->gradient(Vec2(1.0, 1.5));
  CHECK(grad.x() == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(grad.y() == doctest::Approx(0.0));
}

namespace {

// Same geometry and values, but no analytic gradient, so evaluation goes
// through the finite-difference path.
std::shared_ptr<EmbeddingSurface> strip_gradient(
    const std::shared_ptr<const EmbeddingSurface>& surface) {
  return std::make_shared<EmbeddingSurface>(
      surface->name() + "_fd", surface->domain(),
      [surface](const Vec2& p) { return surface->region_of(p); },
      [surface](int, const Vec2& p) { return surface->value(p); });
}

}  // namespace

TEST_CASE("finite differences are exact on planar surfaces") {
  const auto fd = strip_gradient(planar_surface(0.7, -1.3));
  Rng rng(21);
  for (int i = 0; i < 50; ++i) {
    const Vec2 p(rng.uniform(0.1, 1.9), rng.uniform(0.1, 1.9));
    const Vec2 grad = fd->gradient(p);
    CHECK(grad.x() == doctest::Approx(0.7).epsilon(1e-8));
    CHECK(grad.y() == doctest::Approx(-1.3).epsilon(1e-8));
  }
}

TEST_CASE("finite differences track analytic gradients away from tears") {
  Rng rng(22);
  for (const char* name : {"toy1", "toy2", "toy3", "olympus"}) {
    const auto surface = builtin_embedding(name);
    const auto fd = strip_gradient(surface);
    const Box2& domain = surface->domain();
    const double h = std::max(surface->fd_step(0), surface->fd_step(1));
    int checked = 0;
    while (checked < 40) {
      const Vec2 p(rng.uniform(domain.xmin + 4 * h, domain.xmax - 4 * h),
                   rng.uniform(domain.ymin + 4 * h, domain.ymax - 4 * h));
      if (surface->distance_to_tear(p) < 2 * h) continue;
      const Vec2 exact = surface->gradient(p);
      const Vec2 approx = fd->gradient(p);
      const double scale = 1.0 + exact.norm();
      CHECK((approx - exact).norm() <= 1e-6 * scale);
      ++checked;
    }
  }
}

TEST_CASE("one-sided stencils never difference across a tear") {
  const auto toy1 = builtin_embedding("toy1");
  const auto fd = strip_gradient(toy1);
  const double h = toy1->fd_step(1);
  // Just below the tear at a steep x: a central stencil in y would cross it
  // and see the jump (order 1/h); the one-sided stencil stays smooth.
  const Vec2 p(1.75, 1.0 - 0.5 * h);
  const Vec2 grad = fd->gradient(p);
  const Vec2 exact = toy1->gradient(p);
  CHECK(std::abs(grad.y() - exact.y()) < 1e-4);
  CHECK(grad.x() == doctest::Approx(exact.x()).epsilon(1e-5));
}

TEST_CASE("gradient at the domain corner falls back to one-sided stencils") {
  const auto fd = strip_gradient(planar_surface(2.0, 3.0));
  const Vec2 corner(0.0, 0.0);
  const Vec2 grad = fd->gradient(corner);
  CHECK(grad.x() == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(grad.y() == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("tangent basis hand values and degenerate limit") {
  const TangentBasis basis = tangent_basis(Vec2(1.0, 0.0));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(basis.w1.isApprox(Vec3(inv_sqrt2, 0.0, inv_sqrt2), 1e-14));
  CHECK(basis.w2.isApprox(Vec3(0.0, 1.0, 0.0), 1e-14));
  CHECK(basis.w3.isApprox(Vec3(-inv_sqrt2, 0.0, inv_sqrt2), 1e-14));

  const TangentBasis degenerate = tangent_basis(Vec2(0.0, 0.0));
  CHECK(degenerate.w1 == Vec3::UnitX());
  CHECK(degenerate.w2 == Vec3::UnitY());
  CHECK(degenerate.w3 == Vec3::UnitZ());
}

TEST_CASE("tangent basis is orthonormal for random gradients") {
  Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    const Vec2 grad(rng.uniform(-5, 5), rng.uniform(-5, 5));
    const TangentBasis basis = tangent_basis(grad);
    CHECK(std::abs(basis.w1.norm() - 1.0) < 1e-12);
    CHECK(std::abs(basis.w2.norm() - 1.0) < 1e-12);
    CHECK(std::abs(basis.w3.norm() - 1.0) < 1e-12);
    CHECK(std::abs(basis.w1.dot(basis.w2)) < 1e-12);
    CHECK(std::abs(basis.w1.dot(basis.w3)) < 1e-12);
    CHECK(std::abs(basis.w2.dot(basis.w3)) < 1e-12);
  }
}

TEST_CASE("local metric closed form") {
  const LocalMetric flat = local_metric(Vec2(0.0, 0.0), 0.7, 0.4);
  CHECK(flat.sigma3d.isApprox(Vec3(0.49, 0.49, 0.16).asDiagonal().toDenseMatrix(), 1e-14));

  const LocalMetric slope = local_metric(Vec2(1.0, 0.0), 1.0, 2.0);
  Eigen::Matrix3d expected;
  expected << 3, 0, -1, 0, 1, 0, -1, 0, 3;
  CHECK(slope.sigma3d.isApprox(expected, 1e-14));

  // For that metric the lifted projection equals the 2-D inverse (theta = 1).
  const auto lift = embedding_operator(Vec2(1.0, 0.0));
  const Eigen::Matrix2d projected =
      lift.transpose() * slope.sigma3d.inverse() * lift;
  CHECK(projected.isApprox(Eigen::Matrix2d::Identity(), 1e-10));
}

TEST_CASE("projection identity and spectral structure over random draws") {
  Rng rng(24);
  for (int i = 0; i < 200; ++i) {
    const Vec2 grad(rng.uniform(-4, 4), rng.uniform(-4, 4));
    const double theta = rng.uniform(0.2, 3.0);
    const double alpha3 = std::exp(rng.uniform(std::log(0.05), std::log(50.0)));
    const LocalMetric metric = local_metric(grad, theta, alpha3);

    const auto lift = embedding_operator(grad);
    const Eigen::Matrix2d projected =
        lift.transpose() * metric.sigma3d.llt().solve(lift);
    const Eigen::Matrix2d target = Eigen::Matrix2d::Identity() / (theta * theta);
    CHECK((projected - target).cwiseAbs().maxCoeff() <= 1e-9 / (theta * theta));

    // Eigenvalues are {theta^2 (1 + r^2), theta^2, alpha3^2}.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(metric.sigma3d);
    Eigen::Vector3d expected = metric.eigenvalues;
    std::sort(expected.data(), expected.data() + 3);
    for (int k = 0; k < 3; ++k)
      CHECK(solver.eigenvalues()[k] ==
            doctest::Approx(expected[k]).epsilon(1e-9));

    // Spectral consistency with the basis.
    CHECK((metric.sigma3d * metric.basis.w1 - metric.eigenvalues[0] * metric.basis.w1)
              .cwiseAbs()
              .maxCoeff() <= 1e-10 * metric.eigenvalues.maxCoeff());
    CHECK((metric.sigma3d * metric.basis.w2 - metric.eigenvalues[1] * metric.basis.w2)
              .cwiseAbs()
              .maxCoeff() <= 1e-10 * metric.eigenvalues.maxCoeff());
    CHECK((metric.sigma3d * metric.basis.w3 - metric.eigenvalues[2] * metric.basis.w3)
              .cwiseAbs()
              .maxCoeff() <= 1e-10 * metric.eigenvalues.maxCoeff());
  }
}

TEST_CASE("alpha3 never leaks into the projected metric") {
  Rng rng(25);
  for (int i = 0; i < 50; ++i) {
    const Vec2 grad(rng.uniform(-3, 3), rng.uniform(-3, 3));
    const double theta = rng.uniform(0.3, 2.0);
    const auto lift = embedding_operator(grad);
    Eigen::Matrix2d reference;
    bool first = true;
    for (const double alpha3 : {0.05, 0.5, 5.0, 50.0}) {
      const LocalMetric metric = local_metric(grad, theta, alpha3);
      const Eigen::Matrix2d projected =
          lift.transpose() * metric.sigma3d.llt().solve(lift);
      if (first) {
        reference = projected;
        first = false;
      } else {
        CHECK((projected - reference).cwiseAbs().maxCoeff() <= 1e-9 / (theta * theta));
      }
    }
  }
}

TEST_CASE("local metric validates parameters") {
  CHECK_THROWS_AS(local_metric(Vec2(1, 1), 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(local_metric(Vec2(1, 1), 1.0, -2.0), std::invalid_argument);
}
