#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "tense/surface.hpp"
#include "tense/types.hpp"

namespace tense {

/// Ground-truth test functions with known discontinuity geometry.
enum class TestFunction { Toy1, Toy2TwoRift, Toy3Curved, SmoothNoJump };

TestFunction test_function_from_name(std::string_view name);
std::string_view test_function_name(TestFunction fn);
Box2 function_domain(TestFunction fn);

/// Exact evaluation; points on a tear line resolve to the region above it.
double eval_test_function(TestFunction fn, const Vec2& x);

/// Region identifier for the named geometry
/// ("toy1", "toy2", "toy3", "olympus", "smooth"/"flat").
int region_id(std::string_view name, const Vec2& x);

/// Built-in embedding surfaces: "toy1", "toy2", "toy3", "olympus", "flat",
/// "planar" (unit slope in x). All carry analytic gradients and tear lines.
std::shared_ptr<const EmbeddingSurface> builtin_embedding(std::string_view name);

std::shared_ptr<const EmbeddingSurface> planar_surface(double a, double b,
                                                       Box2 domain = {0.0, 2.0, 0.0, 2.0});
std::shared_ptr<const EmbeddingSurface> flat_surface(Box2 domain = {0.0, 2.0, 0.0, 2.0});

/// Discounted profit sum: sum_i profits[i] / (1 + discount)^{times[i]/period}.
struct NpvParams {
  double discount = 0.0;     // discounting factor, fraction
  double period = 365.0;     // discounting time period, days
  std::vector<double> times;
  std::vector<double> profits;
};

double npv(const NpvParams& params);

/// Stand-in for replicate simulator output: f(x) plus seeded Gaussian noise.
std::vector<double> synthetic_replicates(TestFunction fn, const Vec2& x, int count,
                                         double noise_sd, std::uint64_t seed);

namespace olympus {
inline constexpr double kFaultY[5] = {73.5, 85.5, 99.5, 103.5, 123.5};
inline constexpr double kFaultLeftX[5] = {94.0, 52.0, 64.0, 87.0, 0.0};
inline constexpr double kXMax = 118.0;
double interp_b1(double y);
double interp_b2(double y);
}  // namespace olympus

}  // namespace tense
