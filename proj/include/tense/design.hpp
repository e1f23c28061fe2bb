#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tense/emulator.hpp"
#include "tense/surface.hpp"
#include "tense/types.hpp"

namespace tense {

/// Sequential design state: a finite candidate pool, the ordered selections so
/// far, and zero-valued ghost runs pinning known boundary behaviour.
struct DesignState {
  std::vector<Vec2> candidates;
  std::vector<Vec2> selected;
  std::vector<std::pair<Vec2, double>> ghosts;  // value is always 0
  std::optional<int> nn_k;  // nearest-neighbour truncation during scoring
};

/// Greedily appends `budget` candidates, each minimizing the mean adjusted
/// variance over eval_grid given the ghosts and previous selections (scoring
/// needs no run values). Ties break to the lowest candidate index. Returns
/// the newly selected points in order.
std::vector<Vec2> sequential_design(const PriorSpec& prior, DesignState& state,
                                    std::span<const Vec2> eval_grid, int budget);

/// Mean over eval_grid of the adjusted variance given the design points
/// (values never enter). With nn_k, each variance evaluation is truncated to
/// the k nearest design points in embedded 3-D distance; nn_k >= n reproduces
/// the exact score bit for bit.
double mean_adjusted_variance(const PriorSpec& prior, std::span<const Vec2> design_points,
                              std::span<const Vec2> eval_grid,
                              std::optional<int> nn_k = std::nullopt);

/// One point pair per (fault, x) entry, offset above and below the fault and
/// verified to land in the domain and in distinct regions.
std::vector<std::pair<Vec2, Vec2>> straddle_pairs(const EmbeddingSurface& surface,
                                                  std::span<const Segment> faults,
                                                  double offset,
                                                  std::span<const double> xs);

/// Evenly spaced zero-valued pseudo-runs along a boundary polyline. A closed
/// polyline (first vertex == last) spaces `count` points around the loop; an
/// open one includes both end points.
std::vector<std::pair<Vec2, double>> ghost_points(std::span<const Vec2> boundary_polyline,
                                                  int count);

/// Upper-credible-interval region parameters: a point belongs when
/// mean + c * sd > f_plus - delta.
struct UciSpec {
  double c = 3.0;        // Pukelsheim three-sigma multiplier
  double delta = 0.0;    // decision tolerance, output units
  double f_plus = 0.0;   // best observed value
};

std::vector<bool> uci_region(const AdjustedEmulator& emulator, std::span<const Vec2> grid,
                             const UciSpec& uci);

}  // namespace tense
