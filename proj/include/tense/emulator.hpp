#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "tense/kernel.hpp"
#include "tense/nscov.hpp"
#include "tense/types.hpp"

namespace tense {

enum class KernelMode { Stationary2D, Tense };

inline constexpr const char* kGhostLabel = "ghost";

/// Second-order prior: constant mean, prior SD, and the covariance mode.
/// Stationary2D is the plain squared-exponential/Matern baseline; Tense is
/// the torn-embedding non-stationary covariance.
struct PriorSpec {
  double mean = 0.0;
  double sigma = 1.0;
  double theta = 1.0;
  double alpha3 = 0.5;  // Tense only
  double nugget = 1e-8; // fraction of sigma^2 added to the Var(D) diagonal
  KernelMode mode = KernelMode::Tense;
  std::shared_ptr<const EmbeddingSurface> surface;  // Tense only
  KernelFamily family = KernelFamily::SquaredExponential;  // Stationary2D only
  double matern_nu = 2.5;

  KernelSpec kernel2d() const;
  NsCovSpec ns() const;
  void validate() const;
  double cov(const Vec2& a, const Vec2& b) const;
};

/// Design points with observed simulator outputs. Exact duplicates are
/// rejected; the optional labels mark pseudo-runs such as ghost points.
struct TrainingSet {
  std::vector<Vec2> points;
  std::vector<double> values;
  std::vector<std::string> labels;  // empty, or one per run

  void add(const Vec2& point, double value, std::string label = {});
  std::size_t size() const { return points.size(); }
  bool is_ghost(std::size_t i) const { return i < labels.size() && labels[i] == kGhostLabel; }
  void validate() const;
};

/// Prior covariance evaluator with per-point caching so repeated pairwise
/// evaluation against a fixed set does not redo the embedding work.
class PriorKernel {
 public:
  explicit PriorKernel(const PriorSpec& spec);

  struct Cached {
    Vec2 point;
    NsPointData ns;  // populated in Tense mode
  };

  Cached prepare(const Vec2& point) const;
  double cov(const Cached& a, const Cached& b) const;
  double operator()(const Vec2& a, const Vec2& b) const;

  /// Coordinates distance is measured in: embedded 3-vector for Tense,
  /// (x, y, 0) for the stationary baseline.
  Vec3 embedded(const Cached& cached) const;

  const PriorSpec& spec() const { return spec_; }

 private:
  PriorSpec spec_;
  KernelSpec kernel2d_;
  NsCovSpec ns_;
};

/// Prior adjusted by training runs; serves mean/variance queries.
/// Immutable after construction and safe for concurrent queries.
class AdjustedEmulator {
 public:
  AdjustedEmulator(PriorSpec prior, TrainingSet data);

  AdjustedEmulator(AdjustedEmulator&&) = default;
  AdjustedEmulator& operator=(AdjustedEmulator&&) = default;

  struct Moments {
    double mean = 0.0;
    double variance = 0.0;
  };

  Moments moments(const Vec2& x) const;

  /// Adjusted means and joint adjusted covariance over a list of points.
  void joint_moments(std::span<const Vec2> points, Eigen::VectorXd& means,
                     Eigen::MatrixXd& cov) const;

  const PriorSpec& prior() const { return prior_; }
  const TrainingSet& data() const { return data_; }

  /// Nugget fraction actually applied (escalated from the prior value when
  /// the factorization needed it).
  double nugget_used() const { return nugget_used_; }

  /// Number of negative predicted variances clamped to zero so far.
  std::int64_t variance_clamp_count() const { return clamps_->load(); }

 private:
  Eigen::VectorXd cross_cov(const PriorKernel::Cached& q) const;

  PriorSpec prior_;
  TrainingSet data_;
  PriorKernel kernel_;
  std::vector<PriorKernel::Cached> cache_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd weights_;
  double nugget_used_ = 0.0;
  std::unique_ptr<std::atomic<std::int64_t>> clamps_;
};

/// Draws from a multivariate normal with the joint adjusted moments.
/// Deterministic for a fixed seed; returns grid.size() x count.
Eigen::MatrixXd sample_realizations(const AdjustedEmulator& emulator,
                                    std::span<const Vec2> grid, int count,
                                    std::uint64_t seed);

struct LooRecord {
  Vec2 point;
  double observed = 0.0;
  double predicted_mean = 0.0;
  double predicted_sd = 0.0;
  double standardized_error = 0.0;
};

/// Leave-one-out diagnostics: rebuild without run i, predict at x_i.
std::vector<LooRecord> loo_diagnostics(const PriorSpec& prior, const TrainingSet& data);

struct MleOptions {
  double theta_lo = 0.05;
  double theta_hi = 5.0;
  bool include_ghosts = false;
  int iterations = 60;
};

struct MleResult {
  double theta_hat = 0.0;
  double theta_lo = 0.0;
  double theta_hi = 0.0;
  double log_likelihood = 0.0;
};

/// Profile-likelihood estimate of theta by golden-section search over
/// log theta: sigma^2 is profiled out analytically, the mean is fixed to the
/// sample mean, alpha3 stays at the template value.
MleResult estimate_theta_mle(const PriorSpec& prior_template, const TrainingSet& data,
                             const MleOptions& options = {});

/// Linear-interpolation empirical quantile of the given values.
double empirical_quantile(std::vector<double> values, double q);

enum class ReplicateTarget { Mean, StdDev, Quantile };

/// Emulates a per-point summary of replicate outputs (rows of `replicates`
/// hold the R >= 2 replicate values of one point); (mean, sigma) of the prior
/// are reset to the summary series' sample statistics.
AdjustedEmulator emulate_replicates(const PriorSpec& prior_template,
                                    const std::vector<Vec2>& points,
                                    const Eigen::MatrixXd& replicates, ReplicateTarget target,
                                    double quantile = 0.5);

std::map<double, AdjustedEmulator> quantile_emulate(const PriorSpec& prior_template,
                                                    const std::vector<Vec2>& points,
                                                    const Eigen::MatrixXd& replicates,
                                                    std::span<const double> quantiles);

}  // namespace tense
