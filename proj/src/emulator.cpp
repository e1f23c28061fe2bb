#include "tense/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tense/rng.hpp"

namespace tense {

KernelSpec PriorSpec::kernel2d() const {
  if (family == KernelFamily::Matern) return KernelSpec::matern(theta, matern_nu, 2);
  return KernelSpec::squared_exponential(theta, 2);
}

NsCovSpec PriorSpec::ns() const { return NsCovSpec{sigma, theta, alpha3, surface}; }

void PriorSpec::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("PriorSpec: sigma must be positive");
  if (!(theta > 0.0)) throw std::invalid_argument("PriorSpec: theta must be positive");
  if (nugget < 0.0 || nugget > 1e-2)
    throw std::invalid_argument("PriorSpec: nugget must lie in [0, 1e-2]");
  if (mode == KernelMode::Tense) ns().validate();
  else kernel2d().validate();
}

double PriorSpec::cov(const Vec2& a, const Vec2& b) const {
  const PriorKernel kernel(*this);
  return kernel(a, b);
}

void TrainingSet::add(const Vec2& point, double value, std::string label) {
  if (labels.empty() && !label.empty()) labels.resize(points.size());
  points.push_back(point);
  values.push_back(value);
  if (!labels.empty() || !label.empty()) labels.push_back(std::move(label));
}

void TrainingSet::validate() const {
  if (points.size() != values.size())
    throw std::invalid_argument("TrainingSet: points/values length mismatch");
  if (!labels.empty() && labels.size() != points.size())
    throw std::invalid_argument("TrainingSet: labels length mismatch");
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (points[i] == points[j]) {
        std::ostringstream msg;
        msg << "TrainingSet: duplicate design point (" << points[i].x() << ", "
            << points[i].y() << ") at indices " << j << " and " << i;
        throw std::invalid_argument(msg.str());
      }
}

PriorKernel::PriorKernel(const PriorSpec& spec) : spec_(spec) {
  spec_.validate();
  if (spec_.mode == KernelMode::Tense) ns_ = spec_.ns();
  else kernel2d_ = spec_.kernel2d();
}

PriorKernel::Cached PriorKernel::prepare(const Vec2& point) const {
  Cached cached;
  cached.point = point;
  if (spec_.mode == KernelMode::Tense) cached.ns = ns_point_data(ns_, point);
  return cached;
}

double PriorKernel::cov(const Cached& a, const Cached& b) const {
  if (spec_.mode == KernelMode::Tense) return ns_covariance(ns_, a.ns, b.ns);
  const Eigen::VectorXd dx = a.point - b.point;
  return spec_.sigma * spec_.sigma * stationary_correlation(kernel2d_, dx);
}

double PriorKernel::operator()(const Vec2& a, const Vec2& b) const {
  return cov(prepare(a), prepare(b));
}

Vec3 PriorKernel::embedded(const Cached& cached) const {
  if (spec_.mode == KernelMode::Tense) return cached.ns.embedded;
  return Vec3(cached.point.x(), cached.point.y(), 0.0);
}

AdjustedEmulator::AdjustedEmulator(PriorSpec prior, TrainingSet data)
    : prior_(std::move(prior)),
      data_(std::move(data)),
      kernel_(prior_),
      clamps_(std::make_unique<std::atomic<std::int64_t>>(0)) {
  data_.validate();
  const auto n = static_cast<Eigen::Index>(data_.size());
  nugget_used_ = prior_.nugget;
  if (n == 0) return;  // prior-only emulator

  cache_.reserve(data_.size());
  for (const Vec2& p : data_.points) cache_.push_back(kernel_.prepare(p));

  const double s2 = prior_.sigma * prior_.sigma;
  Eigen::MatrixXd var_d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    var_d(i, i) = s2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double value = kernel_.cov(cache_[i], cache_[j]);
      var_d(i, j) = value;
      var_d(j, i) = value;
    }
  }

  // Factorize, escalating the nugget tenfold on failure up to 1e-4 sigma^2.
  double fraction = prior_.nugget;
  while (true) {
    chol_.compute(var_d + fraction * s2 * Eigen::MatrixXd::Identity(n, n));
    if (chol_.info() == Eigen::Success) break;
    const double next = fraction == 0.0 ? 1e-10 : fraction * 10.0;
    if (next > 1e-4) {
      std::ostringstream msg;
      msg << "AdjustedEmulator: Var(D) factorization failed for n=" << n
          << " runs even with nugget fraction 1e-4; the design is too "
             "ill-conditioned (coincident or near-coincident points?)";
      throw std::runtime_error(msg.str());
    }
    fraction = next;
  }
  nugget_used_ = fraction;

  Eigen::VectorXd centered(n);
  for (Eigen::Index i = 0; i < n; ++i) centered[i] = data_.values[i] - prior_.mean;
  weights_ = chol_.solve(centered);
}

Eigen::VectorXd AdjustedEmulator::cross_cov(const PriorKernel::Cached& q) const {
  const auto n = static_cast<Eigen::Index>(cache_.size());
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) k[i] = kernel_.cov(q, cache_[i]);
  return k;
}

AdjustedEmulator::Moments AdjustedEmulator::moments(const Vec2& x) const {
  const double s2 = prior_.sigma * prior_.sigma;
  if (data_.size() == 0) return {prior_.mean, s2};
  const Eigen::VectorXd k = cross_cov(kernel_.prepare(x));
  const double mean = prior_.mean + k.dot(weights_);
  double variance = s2 - k.dot(chol_.solve(k));
  if (variance < 0.0) {
    clamps_->fetch_add(1, std::memory_order_relaxed);
    variance = 0.0;
  }
  return {mean, variance};
}

void AdjustedEmulator::joint_moments(std::span<const Vec2> points, Eigen::VectorXd& means,
                                     Eigen::MatrixXd& cov) const {
  const auto m = static_cast<Eigen::Index>(points.size());
  const auto n = static_cast<Eigen::Index>(cache_.size());
  const double s2 = prior_.sigma * prior_.sigma;

  std::vector<PriorKernel::Cached> query;
  query.reserve(points.size());
  for (const Vec2& p : points) query.push_back(kernel_.prepare(p));

  cov.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    cov(i, i) = s2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double value = kernel_.cov(query[i], query[j]);
      cov(i, j) = value;
      cov(j, i) = value;
    }
  }

  means.resize(m);
  if (n == 0) {
    means.setConstant(prior_.mean);
    return;
  }

  Eigen::MatrixXd cross(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) cross(i, j) = kernel_.cov(query[i], cache_[j]);

  means = prior_.mean + (cross * weights_).array();
  cov -= cross * chol_.solve(cross.transpose());
  cov = 0.5 * (cov + cov.transpose()).eval();
}

Eigen::MatrixXd sample_realizations(const AdjustedEmulator& emulator,
                                    std::span<const Vec2> grid, int count,
                                    std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_realizations: count must be >= 1");
  const auto n = static_cast<Eigen::Index>(grid.size());
  Eigen::VectorXd means;
  Eigen::MatrixXd cov;
  emulator.joint_moments(grid, means, cov);

  const double s2 = emulator.prior().sigma * emulator.prior().sigma;
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 1e-10;
  while (true) {
    llt.compute(cov + jitter * s2 * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) break;
    jitter *= 10.0;
    if (jitter > 1e-4)
      throw std::runtime_error(
          "sample_realizations: joint covariance factorization failed even at "
          "jitter 1e-4 sigma^2");
  }

  Rng rng(seed);
  const Eigen::MatrixXd root = llt.matrixL();
  Eigen::MatrixXd samples(n, count);
  Eigen::VectorXd z(n);
  for (int s = 0; s < count; ++s) {
    for (Eigen::Index i = 0; i < n; ++i) z[i] = rng.normal();
    samples.col(s) = means + root * z;
  }
  return samples;
}

std::vector<LooRecord> loo_diagnostics(const PriorSpec& prior, const TrainingSet& data) {
  data.validate();
  const std::size_t n = data.size();
  if (n < 3) throw std::invalid_argument("loo_diagnostics: need at least 3 runs");

  std::vector<LooRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TrainingSet rest;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      rest.add(data.points[j], data.values[j],
               j < data.labels.size() ? data.labels[j] : std::string{});
    }
    const AdjustedEmulator emulator(prior, std::move(rest));
    const auto moments = emulator.moments(data.points[i]);
    LooRecord record;
    record.point = data.points[i];
    record.observed = data.values[i];
    record.predicted_mean = moments.mean;
    record.predicted_sd = std::sqrt(std::max(moments.variance, 0.0));
    const double floor = 1e-12 * prior.sigma;
    record.standardized_error =
        (record.observed - record.predicted_mean) / std::max(record.predicted_sd, floor);
    records.push_back(record);
  }
  return records;
}

namespace {

// Profiled negative log likelihood (up to an additive constant):
// 0.5 * (n log sigma_hat^2 + log|R| + n), with R the unit-variance
// correlation matrix at the given theta plus the nugget.
double profiled_negloglik(const PriorSpec& prior_template, const std::vector<Vec2>& points,
                          const Eigen::VectorXd& centered, double theta) {
  PriorSpec unit = prior_template;
  unit.sigma = 1.0;
  unit.theta = theta;
  const PriorKernel kernel(unit);
  const auto n = static_cast<Eigen::Index>(points.size());

  std::vector<PriorKernel::Cached> cache;
  cache.reserve(points.size());
  for (const Vec2& p : points) cache.push_back(kernel.prepare(p));

  Eigen::MatrixXd corr(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    corr(i, i) = 1.0 + unit.nugget;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double value = kernel.cov(cache[i], cache[j]);
      corr(i, j) = value;
      corr(j, i) = value;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();

  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) log_det += 2.0 * std::log(llt.matrixLLT()(i, i));

  const double scale = centered.dot(llt.solve(centered)) / static_cast<double>(n);
  if (!(scale > 0.0) || !std::isfinite(scale) || !std::isfinite(log_det))
    return std::numeric_limits<double>::infinity();
  return 0.5 * (static_cast<double>(n) * std::log(scale) + log_det + static_cast<double>(n));
}

}  // namespace

MleResult estimate_theta_mle(const PriorSpec& prior_template, const TrainingSet& data,
                             const MleOptions& options) {
  data.validate();
  if (!(options.theta_lo > 0.0) || !(options.theta_hi > options.theta_lo))
    throw std::invalid_argument("estimate_theta_mle: bounds must satisfy 0 < lo < hi");

  std::vector<Vec2> points;
  std::vector<double> values;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!options.include_ghosts && data.is_ghost(i)) continue;
    points.push_back(data.points[i]);
    values.push_back(data.values[i]);
  }
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 5) throw std::invalid_argument("estimate_theta_mle: need at least 5 runs");

  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  Eigen::VectorXd centered(n);
  for (Eigen::Index i = 0; i < n; ++i) centered[i] = values[i] - mean;

  const auto objective = [&](double log_theta) {
    return profiled_negloglik(prior_template, points, centered, std::exp(log_theta));
  };

  // Golden-section search over log theta.
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = std::log(options.theta_lo);
  double hi = std::log(options.theta_hi);
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double f1 = objective(x1);
  double f2 = objective(x2);
  for (int it = 0; it < options.iterations; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = objective(x2);
    }
  }
  const double best_log = f1 <= f2 ? x1 : x2;
  const double best_val = std::min(f1, f2);
  if (!std::isfinite(best_val))
    throw std::runtime_error("estimate_theta_mle: likelihood not finite anywhere in bracket");

  MleResult result;
  result.theta_hat = std::exp(best_log);
  result.theta_lo = options.theta_lo;
  result.theta_hi = options.theta_hi;
  result.log_likelihood =
      -(best_val + 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI));
  return result;
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("empirical_quantile: empty sample");
  if (!(q > 0.0) || !(q < 1.0))
    throw std::invalid_argument("empirical_quantile: q must lie in (0, 1)");
  std::sort(values.begin(), values.end());
  const double position = q * static_cast<double>(values.size() - 1);
  const auto lower = static_cast<std::size_t>(position);
  if (lower + 1 >= values.size()) return values.back();
  const double fraction = position - static_cast<double>(lower);
  return values[lower] + fraction * (values[lower + 1] - values[lower]);
}

AdjustedEmulator emulate_replicates(const PriorSpec& prior_template,
                                    const std::vector<Vec2>& points,
                                    const Eigen::MatrixXd& replicates, ReplicateTarget target,
                                    double quantile) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (replicates.rows() != n)
    throw std::invalid_argument("emulate_replicates: one replicate row per point required");
  if (replicates.cols() < 2)
    throw std::invalid_argument("emulate_replicates: need at least 2 replicates");

  std::vector<double> targets(points.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd row = replicates.row(i);
    switch (target) {
      case ReplicateTarget::Mean:
        targets[i] = row.mean();
        break;
      case ReplicateTarget::StdDev: {
        const double mu = row.mean();
        targets[i] = std::sqrt((row.array() - mu).square().sum() /
                               static_cast<double>(row.size() - 1));
        break;
      }
      case ReplicateTarget::Quantile:
        targets[i] = empirical_quantile({row.data(), row.data() + row.size()}, quantile);
        break;
    }
  }

  const double mean =
      std::accumulate(targets.begin(), targets.end(), 0.0) / targets.size();
  double variance = 0.0;
  for (const double t : targets) variance += (t - mean) * (t - mean);
  variance /= std::max<std::size_t>(targets.size() - 1, 1);
  const double sd_floor = 1e-12 * (1.0 + std::abs(mean));
  const double sd = std::max(std::sqrt(variance), sd_floor);

  PriorSpec prior = prior_template;
  prior.mean = mean;
  prior.sigma = sd;

  TrainingSet data;
  for (std::size_t i = 0; i < points.size(); ++i) data.add(points[i], targets[i]);
  return AdjustedEmulator(std::move(prior), std::move(data));
}

std::map<double, AdjustedEmulator> quantile_emulate(const PriorSpec& prior_template,
                                                    const std::vector<Vec2>& points,
                                                    const Eigen::MatrixXd& replicates,
                                                    std::span<const double> quantiles) {
  std::map<double, AdjustedEmulator> emulators;
  for (const double q : quantiles)
    emulators.emplace(q, emulate_replicates(prior_template, points, replicates,
                                            ReplicateTarget::Quantile, q));
  return emulators;
}

}  // namespace tense
