#include "tense/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "tense/parallel.hpp"

namespace tense {

namespace {

// Quantities shared by every candidate within one greedy step: covariances
// and embedded distances against the fixed prefix of the active set (ghosts
// plus points selected so far). Entries are produced by the same kernel
// evaluations the uncached path would make, so cached and uncached scoring
// agree bit for bit.
struct ScoreCache {
  Eigen::MatrixXd prefix_cov;    // p x p, nugget already on the diagonal
  Eigen::MatrixXd cross_prefix;  // g x p prior covariance grid -> prefix
  Eigen::MatrixXd dist_prefix;   // g x p squared embedded distances
};

// Mean adjusted variance over the grid for the active set. The optional cache
// must cover a prefix of `active`; with nn_k, each variance evaluation is
// truncated to the k nearest active points in embedded distance (ties to the
// lower index, chosen indices kept in original order, so nn_k >= n coincides
// with exact scoring).
double score_active_set(const PriorKernel& kernel,
                        const std::vector<PriorKernel::Cached>& active,
                        const std::vector<PriorKernel::Cached>& grid,
                        std::optional<int> nn_k, const ScoreCache* cache = nullptr) {
  const auto n = static_cast<Eigen::Index>(active.size());
  const auto g = static_cast<Eigen::Index>(grid.size());
  const double s2 = kernel.spec().sigma * kernel.spec().sigma;
  const double diag = s2 * (1.0 + kernel.spec().nugget);
  const auto p = cache ? cache->prefix_cov.rows() : Eigen::Index{0};

  Eigen::MatrixXd var_d(n, n);
  if (cache) var_d.topLeftCorner(p, p) = cache->prefix_cov;
  for (Eigen::Index i = p; i < n; ++i) {
    var_d(i, i) = diag;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double value = kernel.cov(active[i], active[j]);
      var_d(i, j) = value;
      var_d(j, i) = value;
    }
  }
  for (Eigen::Index i = 0; i < p; ++i) var_d(i, i) = diag;

  Eigen::MatrixXd cross_all(g, n);
  if (cache) cross_all.leftCols(p) = cache->cross_prefix;
  for (Eigen::Index q = 0; q < g; ++q)
    for (Eigen::Index i = p; i < n; ++i) cross_all(q, i) = kernel.cov(grid[q], active[i]);

  const bool exact = !nn_k.has_value() || *nn_k >= static_cast<int>(active.size());

  double total = 0.0;
  if (exact) {
    Eigen::LLT<Eigen::MatrixXd> llt(var_d);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("design scoring: Var(D) factorization failed");
    Eigen::VectorXd cross(n);
    Eigen::VectorXd solved(n);
    for (Eigen::Index q = 0; q < g; ++q) {
      cross = cross_all.row(q).transpose();
      solved = cross;
      llt.solveInPlace(solved);
      total += s2 - cross.dot(solved);
    }
  } else {
    const int k = *nn_k;
    if (k < 1) throw std::invalid_argument("design scoring: nn_k must be >= 1");

    Eigen::MatrixXd dist_all(g, n);
    if (cache) dist_all.leftCols(p) = cache->dist_prefix;
    for (Eigen::Index i = p; i < n; ++i) {
      const Vec3 point = kernel.embedded(active[i]);
      for (Eigen::Index q = 0; q < g; ++q)
        dist_all(q, i) = (kernel.embedded(grid[q]) - point).squaredNorm();
    }

    std::vector<int> order(active.size());
    Eigen::MatrixXd var_k(k, k);
    Eigen::VectorXd cross(k);
    Eigen::VectorXd solved(k);
    Eigen::LLT<Eigen::MatrixXd> llt;
    for (Eigen::Index q = 0; q < g; ++q) {
      const auto row = dist_all.row(q);
      const auto closer = [&row](int a, int b) {
        if (row[a] != row[b]) return row[a] < row[b];
        return a < b;
      };
      std::iota(order.begin(), order.end(), 0);
      std::nth_element(order.begin(), order.begin() + (k - 1), order.end(), closer);
      std::sort(order.begin(), order.begin() + k);
      for (int i = 0; i < k; ++i) {
        cross[i] = cross_all(q, order[i]);
        for (int j = 0; j < k; ++j) var_k(i, j) = var_d(order[i], order[j]);
      }
      llt.compute(var_k);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("design scoring: Var(D) factorization failed");
      solved = cross;
      llt.solveInPlace(solved);
      total += s2 - cross.dot(solved);
    }
  }
  return total / static_cast<double>(g);
}

}  // namespace

double mean_adjusted_variance(const PriorSpec& prior, std::span<const Vec2> design_points,
                              std::span<const Vec2> eval_grid, std::optional<int> nn_k) {
  if (eval_grid.empty())
    throw std::invalid_argument("mean_adjusted_variance: empty evaluation grid");
  const PriorKernel kernel(prior);
  std::vector<PriorKernel::Cached> active;
  active.reserve(design_points.size());
  for (const Vec2& p : design_points) active.push_back(kernel.prepare(p));
  std::vector<PriorKernel::Cached> grid;
  grid.reserve(eval_grid.size());
  for (const Vec2& p : eval_grid) grid.push_back(kernel.prepare(p));
  if (active.empty()) return prior.sigma * prior.sigma;
  return score_active_set(kernel, active, grid, nn_k);
}

std::vector<Vec2> sequential_design(const PriorSpec& prior, DesignState& state,
                                    std::span<const Vec2> eval_grid, int budget) {
  if (budget < 1) throw std::invalid_argument("sequential_design: budget must be >= 1");
  if (state.candidates.empty())
    throw std::invalid_argument("sequential_design: candidate set is empty");
  if (eval_grid.empty())
    throw std::invalid_argument("sequential_design: empty evaluation grid");

  const PriorKernel kernel(prior);
  const double diag = prior.sigma * prior.sigma * (1.0 + prior.nugget);

  std::vector<PriorKernel::Cached> cand_cache;
  cand_cache.reserve(state.candidates.size());
  for (const Vec2& p : state.candidates) cand_cache.push_back(kernel.prepare(p));

  std::vector<PriorKernel::Cached> grid_cache;
  grid_cache.reserve(eval_grid.size());
  for (const Vec2& p : eval_grid) grid_cache.push_back(kernel.prepare(p));
  const auto g = static_cast<Eigen::Index>(grid_cache.size());

  // Active-set prefix: ghosts first, then selections in order.
  std::vector<PriorKernel::Cached> base;
  for (const auto& [point, value] : state.ghosts) base.push_back(kernel.prepare(point));
  for (const Vec2& p : state.selected) base.push_back(kernel.prepare(p));

  ScoreCache cache;
  const auto grow_cache = [&](const PriorKernel::Cached& added) {
    const auto p = cache.prefix_cov.rows();
    cache.prefix_cov.conservativeResize(p + 1, p + 1);
    cache.prefix_cov(p, p) = diag;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double value = kernel.cov(added, base[j]);
      cache.prefix_cov(p, j) = value;
      cache.prefix_cov(j, p) = value;
    }
    cache.cross_prefix.conservativeResize(g, p + 1);
    cache.dist_prefix.conservativeResize(g, p + 1);
    const Vec3 point = kernel.embedded(added);
    for (Eigen::Index q = 0; q < g; ++q) {
      cache.cross_prefix(q, p) = kernel.cov(grid_cache[q], added);
      cache.dist_prefix(q, p) = (kernel.embedded(grid_cache[q]) - point).squaredNorm();
    }
  };
  for (const auto& cached : base) grow_cache(cached);

  std::vector<bool> used(state.candidates.size(), false);
  for (const Vec2& p : state.selected)
    for (std::size_t i = 0; i < state.candidates.size(); ++i)
      if (!used[i] && state.candidates[i] == p) used[i] = true;

  const auto available =
      static_cast<int>(std::count(used.begin(), used.end(), false));
  if (budget > available)
    throw std::invalid_argument("sequential_design: budget exceeds available candidates");

  std::vector<Vec2> chosen;
  chosen.reserve(budget);
  std::vector<double> scores(state.candidates.size());

  for (int step = 0; step < budget; ++step) {
    parallel_for(state.candidates.size(), [&](std::size_t i) {
      if (used[i]) {
        scores[i] = std::numeric_limits<double>::infinity();
        return;
      }
      std::vector<PriorKernel::Cached> active = base;
      active.push_back(cand_cache[i]);
      scores[i] = score_active_set(kernel, active, grid_cache, state.nn_k, &cache);
    });

    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] < best_score) {
        best_score = scores[i];
        best = i;
      }
    }
    if (!std::isfinite(best_score))
      throw std::runtime_error("sequential_design: no scoreable candidate");

    used[best] = true;
    base.push_back(cand_cache[best]);
    grow_cache(cand_cache[best]);
    chosen.push_back(state.candidates[best]);
    state.selected.push_back(state.candidates[best]);
  }
  return chosen;
}

std::vector<std::pair<Vec2, Vec2>> straddle_pairs(const EmbeddingSurface& surface,
                                                  std::span<const Segment> faults,
                                                  double offset,
                                                  std::span<const double> xs) {
  if (!(offset > 0.0)) throw std::invalid_argument("straddle_pairs: offset must be positive");
  if (faults.size() != xs.size())
    throw std::invalid_argument("straddle_pairs: one x location per fault required");

  std::vector<std::pair<Vec2, Vec2>> pairs;
  pairs.reserve(faults.size());
  for (std::size_t i = 0; i < faults.size(); ++i) {
    const Segment& fault = faults[i];
    if (fault.a.y() != fault.b.y())
      throw std::invalid_argument("straddle_pairs: fault segment must be horizontal");
    const Vec2 above(xs[i], fault.a.y() + offset);
    const Vec2 below(xs[i], fault.a.y() - offset);
    if (!surface.domain().contains(above) || !surface.domain().contains(below))
      throw std::invalid_argument("straddle_pairs: offset point falls outside the domain");
    if (surface.region_of(above) == surface.region_of(below))
      throw std::invalid_argument(
          "straddle_pairs: pair lands in one region; offset too small for the geometry");
    pairs.emplace_back(above, below);
  }
  return pairs;
}

std::vector<std::pair<Vec2, double>> ghost_points(std::span<const Vec2> boundary_polyline,
                                                  int count) {
  if (count < 0) throw std::invalid_argument("ghost_points: count must be >= 0");
  if (count == 0) return {};
  if (boundary_polyline.size() < 2)
    throw std::invalid_argument("ghost_points: polyline needs at least 2 vertices");

  std::vector<double> cumulative(boundary_polyline.size(), 0.0);
  for (std::size_t i = 1; i < boundary_polyline.size(); ++i)
    cumulative[i] =
        cumulative[i - 1] + (boundary_polyline[i] - boundary_polyline[i - 1]).norm();
  const double length = cumulative.back();
  if (!(length > 0.0)) throw std::invalid_argument("ghost_points: degenerate polyline");

  const bool closed = boundary_polyline.front() == boundary_polyline.back();
  std::vector<std::pair<Vec2, double>> ghosts;
  ghosts.reserve(count);
  for (int i = 0; i < count; ++i) {
    double target;
    if (closed) target = length * static_cast<double>(i) / static_cast<double>(count);
    else if (count == 1) target = 0.5 * length;
    else target = length * static_cast<double>(i) / static_cast<double>(count - 1);

    auto upper = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    std::size_t seg = upper == cumulative.begin()
                          ? 0
                          : static_cast<std::size_t>(upper - cumulative.begin()) - 1;
    seg = std::min(seg, boundary_polyline.size() - 2);
    const double seg_len = cumulative[seg + 1] - cumulative[seg];
    const double t = seg_len > 0.0 ? (target - cumulative[seg]) / seg_len : 0.0;
    const Vec2 point =
        boundary_polyline[seg] + t * (boundary_polyline[seg + 1] - boundary_polyline[seg]);
    ghosts.emplace_back(point, 0.0);
  }
  return ghosts;
}

std::vector<bool> uci_region(const AdjustedEmulator& emulator, std::span<const Vec2> grid,
                             const UciSpec& uci) {
  if (grid.empty()) throw std::invalid_argument("uci_region: empty grid");
  if (!(uci.c > 0.0)) throw std::invalid_argument("uci_region: c must be positive");
  std::vector<bool> mask(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto moments = emulator.moments(grid[i]);
    mask[i] = moments.mean + uci.c * std::sqrt(std::max(moments.variance, 0.0)) >
              uci.f_plus - uci.delta;
  }
  return mask;
}

}  // namespace tense
