#include "tense/models.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tense/rng.hpp"

namespace tense {

namespace {

// Shared geometry constants. Tear lines always belong to the region with the
// larger y (half-open bands), and the toy3 circles keep their boundary points.

namespace toy1 {
constexpr double kTearY = 1.0;
constexpr double kTearX0 = 0.75;
constexpr Box2 kDomain{0.0, 2.0, 0.0, 2.0};

int region(const Vec2& p) { return p.y() >= kTearY ? 1 : 0; }

double jump_term(int region, const Vec2& p) {
  if (p.x() <= kTearX0) return 0.0;
  const double side = region == 1 ? 1.0 : -1.0;
  const double dx = p.x() - kTearX0;
  return side * dx * dx;
}

double f(int region, const Vec2& p) {
  return 0.4 * std::sin(5.0 * p.x()) + 0.4 * std::cos(5.0 * p.y()) +
         0.8 * jump_term(region, p);
}

double v(int region, const Vec2& p) { return -0.4 * jump_term(region, p); }

Vec2 v_grad(int region, const Vec2& p) {
  if (p.x() <= kTearX0) return Vec2::Zero();
  const double side = region == 1 ? 1.0 : -1.0;
  return Vec2(-0.8 * side * (p.x() - kTearX0), 0.0);
}
}  // namespace toy1

namespace toy2 {
constexpr double kLowerTearY = 0.75;
constexpr double kUpperTearY = 1.25;
constexpr double kLowerTearX0 = 0.6;
constexpr double kUpperTearX0 = 1.0;
constexpr Box2 kDomain{0.0, 2.0, 0.0, 2.0};

int region(const Vec2& p) {
  if (p.y() >= kUpperTearY) return 2;
  if (p.y() >= kLowerTearY) return 1;
  return 0;
}

// x coordinate of the line interpolating the interior fault end points.
double b(double y) {
  return kLowerTearX0 + (kUpperTearX0 - kLowerTearX0) * (y - kLowerTearY) /
                            (kUpperTearY - kLowerTearY);
}

double f(int region, const Vec2& p) {
  double value = 0.4 * std::sin(5.0 * p.x()) + 0.4 * std::cos(5.0 * p.y());
  if (region == 2 && p.x() > kUpperTearX0)
    value += 1.2 * (p.x() - kUpperTearX0) * (p.x() - kUpperTearX0);
  if (region == 0 && p.x() > kLowerTearX0)
    value -= 0.6 * (p.x() - kLowerTearX0) * (p.x() - kLowerTearX0);
  return value;
}

double v(int region, const Vec2& p) {
  if (region == 1) {
    const double bx = b(p.y());
    if (p.x() > bx) return 0.6 * (p.x() - bx) * (p.x() - bx);
    return 0.0;
  }
  if (region == 0 && p.x() > kLowerTearX0)
    return -0.6 * (p.x() - kLowerTearX0) * (p.x() - kLowerTearX0);
  return 0.0;
}

Vec2 v_grad(int region, const Vec2& p) {
  if (region == 1) {
    const double bx = b(p.y());
    if (p.x() <= bx) return Vec2::Zero();
    const double slope = (kUpperTearX0 - kLowerTearX0) / (kUpperTearY - kLowerTearY);
    return Vec2(1.2 * (p.x() - bx), -1.2 * (p.x() - bx) * slope);
  }
  if (region == 0 && p.x() > kLowerTearX0)
    return Vec2(-1.2 * (p.x() - kLowerTearX0), 0.0);
  return Vec2::Zero();
}
}  // namespace toy2

namespace toy3 {
constexpr double kInnerRadius = 0.4;
constexpr Box2 kDomain{-1.0, 1.0, -1.0, 1.0};
const Vec2 kCenters[4] = {Vec2(1.0, 0.0), Vec2(0.0, 1.0), Vec2(-1.0, 0.0), Vec2(0.0, -1.0)};

int region(const Vec2& p) {
  if (p.norm() < kInnerRadius) return 0;
  double dist_sq[4];
  for (int i = 0; i < 4; ++i) dist_sq[i] = (p - kCenters[i]).squaredNorm();
  // Closed discs; a point in two adjacent discs belongs to the later one.
  for (int i = 0; i < 4; ++i) {
    const int next = (i + 1) % 4;
    if (dist_sq[i] <= 1.0 && dist_sq[next] > 1.0) return i + 1;
  }
  throw std::logic_error("toy3 region classification failed");
}

double f(int region, const Vec2& p) {
  double value = 0.5 * (std::sin(3.0 * p.x()) + std::cos(3.5 * p.y()));
  if (region > 0) {
    const double radial = p.norm() - kInnerRadius;
    const double sign = (region % 2 == 1) ? 1.0 : -1.0;
    value += sign * radial * radial;
  }
  return value;
}

double v(int region, const Vec2& p) {
  if (region != 1 && region != 3) return 0.0;
  const double radial = p.norm() - kInnerRadius;
  return 0.5 * (region - 2) * radial * radial;
}

Vec2 v_grad(int region, const Vec2& p) {
  if (region != 1 && region != 3) return Vec2::Zero();
  const double rho = p.norm();
  if (rho == 0.0) return Vec2::Zero();
  return (region - 2) * (rho - kInnerRadius) / rho * p;
}

std::vector<Segment> tear_polylines() {
  // Unit-circle arcs between adjacent regions, sampled for reporting.
  std::vector<Segment> segments;
  constexpr int kSamples = 48;
  for (const Vec2& center : kCenters) {
    Vec2 prev;
    bool have_prev = false;
    for (int i = 0; i <= kSamples; ++i) {
      const double angle = 2.0 * M_PI * i / kSamples;
      const Vec2 point = center + Vec2(std::cos(angle), std::sin(angle));
      const bool keep = kDomain.contains(point) && point.norm() > kInnerRadius;
      if (keep && have_prev) segments.push_back({prev, point});
      prev = point;
      have_prev = keep;
    }
  }
  return segments;
}
}  // namespace toy3

namespace oly {
using olympus::kFaultLeftX;
using olympus::kFaultY;
using olympus::kXMax;
constexpr Box2 kDomain{0.0, 118.0, 0.0, 160.0};

int region(const Vec2& p) {
  for (int i = 4; i >= 0; --i)
    if (p.y() >= kFaultY[i]) return i + 1;
  return 0;
}

// Normalised quadratic bent away from the fault line starting at left.
double bend(double x, double left, double coeff) {
  if (x <= left) return 0.0;
  const double u = (x - left) / (kXMax - left);
  return coeff * u * u;
}

double v(int region, const Vec2& p) {
  switch (region) {
    case 0: return bend(p.x(), kFaultLeftX[0], 1.0);
    case 1: return bend(p.x(), olympus::interp_b1(p.y()), -1.2);
    case 2: return bend(p.x(), olympus::interp_b2(p.y()), 3.0);
    case 3: return 0.0;
    case 4: return bend(p.x(), kFaultLeftX[3], -2.0);
    default: return 1.0;
  }
}

Vec2 bend_grad(double x, double left, double coeff, double left_slope_y) {
  if (x <= left) return Vec2::Zero();
  const double w = kXMax - left;
  const double u = (x - left) / w;
  const double gx = 2.0 * coeff * u / w;
  const double gy = 2.0 * coeff * u * left_slope_y * (x - kXMax) / (w * w);
  return Vec2(gx, gy);
}

Vec2 v_grad(int region, const Vec2& p) {
  constexpr double kSlopeB1 = (52.0 - 94.0) / (85.5 - 73.5);
  constexpr double kSlopeB2 = (64.0 - 52.0) / (99.5 - 85.5);
  switch (region) {
    case 0: return bend_grad(p.x(), kFaultLeftX[0], 1.0, 0.0);
    case 1: return bend_grad(p.x(), olympus::interp_b1(p.y()), -1.2, kSlopeB1);
    case 2: return bend_grad(p.x(), olympus::interp_b2(p.y()), 3.0, kSlopeB2);
    case 4: return bend_grad(p.x(), kFaultLeftX[3], -2.0, 0.0);
    default: return Vec2::Zero();
  }
}

std::vector<Segment> tears() {
  std::vector<Segment> segments;
  for (int i = 0; i < 5; ++i)
    segments.push_back({Vec2(kFaultLeftX[i], kFaultY[i]), Vec2(kXMax, kFaultY[i])});
  return segments;
}
}  // namespace oly

std::shared_ptr<const EmbeddingSurface> make_toy1() {
  auto surface = std::make_shared<EmbeddingSurface>("toy1", toy1::kDomain, toy1::region,
                                                    toy1::v);
  surface->set_gradient(toy1::v_grad);
  surface->set_tear_lines({{Vec2(toy1::kTearX0, toy1::kTearY), Vec2(2.0, toy1::kTearY)}});
  return surface;
}

std::shared_ptr<const EmbeddingSurface> make_toy2() {
  auto surface = std::make_shared<EmbeddingSurface>("toy2", toy2::kDomain, toy2::region,
                                                    toy2::v);
  surface->set_gradient(toy2::v_grad);
  surface->set_tear_lines(
      {{Vec2(toy2::kLowerTearX0, toy2::kLowerTearY), Vec2(2.0, toy2::kLowerTearY)},
       {Vec2(toy2::kUpperTearX0, toy2::kUpperTearY), Vec2(2.0, toy2::kUpperTearY)}});
  return surface;
}

std::shared_ptr<const EmbeddingSurface> make_toy3() {
  auto surface = std::make_shared<EmbeddingSurface>("toy3", toy3::kDomain, toy3::region,
                                                    toy3::v);
  surface->set_gradient(toy3::v_grad);
  surface->set_tear_lines(toy3::tear_polylines());
  return surface;
}

std::shared_ptr<const EmbeddingSurface> make_olympus() {
  auto surface = std::make_shared<EmbeddingSurface>("olympus", oly::kDomain, oly::region,
                                                    oly::v);
  surface->set_gradient(oly::v_grad);
  surface->set_tear_lines(oly::tears());
  return surface;
}

}  // namespace

namespace olympus {
double interp_b1(double y) {
  return kFaultLeftX[0] +
         (y - kFaultY[0]) / (kFaultY[1] - kFaultY[0]) * (kFaultLeftX[1] - kFaultLeftX[0]);
}
double interp_b2(double y) {
  return kFaultLeftX[1] +
         (y - kFaultY[1]) / (kFaultY[2] - kFaultY[1]) * (kFaultLeftX[2] - kFaultLeftX[1]);
}
}  // namespace olympus

TestFunction test_function_from_name(std::string_view name) {
  if (name == "toy1") return TestFunction::Toy1;
  if (name == "toy2") return TestFunction::Toy2TwoRift;
  if (name == "toy3") return TestFunction::Toy3Curved;
  if (name == "smooth") return TestFunction::SmoothNoJump;
  throw std::invalid_argument("unknown test function: " + std::string(name));
}

std::string_view test_function_name(TestFunction fn) {
  switch (fn) {
    case TestFunction::Toy1: return "toy1";
    case TestFunction::Toy2TwoRift: return "toy2";
    case TestFunction::Toy3Curved: return "toy3";
    case TestFunction::SmoothNoJump: return "smooth";
  }
  throw std::logic_error("unreachable");
}

Box2 function_domain(TestFunction fn) {
  switch (fn) {
    case TestFunction::Toy1: return toy1::kDomain;
    case TestFunction::Toy2TwoRift: return toy2::kDomain;
    case TestFunction::Toy3Curved: return toy3::kDomain;
    case TestFunction::SmoothNoJump: return toy1::kDomain;
  }
  throw std::logic_error("unreachable");
}

double eval_test_function(TestFunction fn, const Vec2& x) {
  if (!function_domain(fn).contains(x))
    throw std::domain_error(std::string(test_function_name(fn)) + ": point outside domain");
  switch (fn) {
    case TestFunction::Toy1: return toy1::f(toy1::region(x), x);
    case TestFunction::Toy2TwoRift: return toy2::f(toy2::region(x), x);
    case TestFunction::Toy3Curved: return toy3::f(toy3::region(x), x);
    case TestFunction::SmoothNoJump:
      return 0.4 * std::sin(5.0 * x.x()) + 0.4 * std::cos(5.0 * x.y());
  }
  throw std::logic_error("unreachable");
}

int region_id(std::string_view name, const Vec2& x) {
  if (name == "toy1") return toy1::region(x);
  if (name == "toy2") return toy2::region(x);
  if (name == "toy3") return toy3::region(x);
  if (name == "olympus") return oly::region(x);
  if (name == "smooth" || name == "flat") return 0;
  throw std::invalid_argument("unknown region geometry: " + std::string(name));
}

std::shared_ptr<const EmbeddingSurface> planar_surface(double a, double b, Box2 domain) {
  auto surface = std::make_shared<EmbeddingSurface>(
      "planar", domain, [](const Vec2&) { return 0; },
      [a, b](int, const Vec2& p) { return a * p.x() + b * p.y(); });
  surface->set_gradient([a, b](int, const Vec2&) { return Vec2(a, b); });
  return surface;
}

std::shared_ptr<const EmbeddingSurface> flat_surface(Box2 domain) {
  auto surface = std::make_shared<EmbeddingSurface>(
      "flat", domain, [](const Vec2&) { return 0; },
      [](int, const Vec2&) { return 0.0; });
  surface->set_gradient([](int, const Vec2&) { return Vec2::Zero(); });
  return surface;
}

std::shared_ptr<const EmbeddingSurface> builtin_embedding(std::string_view name) {
  if (name == "toy1") return make_toy1();
  if (name == "toy2") return make_toy2();
  if (name == "toy3") return make_toy3();
  if (name == "olympus") return make_olympus();
  if (name == "flat") return flat_surface();
  if (name == "planar") return planar_surface(1.0, 0.0);
  throw std::invalid_argument("unknown embedding surface: " + std::string(name));
}

double npv(const NpvParams& params) {
  if (params.times.size() != params.profits.size())
    throw std::invalid_argument("npv: times and profits must have equal length");
  if (!(params.period > 0.0)) throw std::invalid_argument("npv: period must be positive");
  if (params.discount < 0.0) throw std::invalid_argument("npv: negative discount factor");
  double total = 0.0;
  for (std::size_t i = 0; i < params.times.size(); ++i)
    total += params.profits[i] / std::pow(1.0 + params.discount, params.times[i] / params.period);
  return total;
}

std::vector<double> synthetic_replicates(TestFunction fn, const Vec2& x, int count,
                                         double noise_sd, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("synthetic_replicates: count must be >= 1");
  const double base = eval_test_function(fn, x);
  Rng rng(seed);
  std::vector<double> values(static_cast<std::size_t>(count));
  for (double& value : values) value = base + noise_sd * rng.normal();
  return values;
}

}  // namespace tense
