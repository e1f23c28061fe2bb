#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tense/emulator.hpp"
#include "tense/models.hpp"
#include "tense/types.hpp"

namespace tense {

/// Configuration errors map to CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridSpec {
  int nx = 0;
  int ny = 0;
};

struct RunConfig {
  std::optional<TestFunction> function;
  std::shared_ptr<const EmbeddingSurface> surface;

  // Prior; mean/sigma may be deferred to the sample statistics of the runs.
  std::optional<double> mean;
  std::optional<double> sigma;
  double theta = 1.0;
  double alpha3 = 0.5;
  double nugget = 1e-8;
  KernelMode mode = KernelMode::Tense;
  KernelFamily family = KernelFamily::SquaredExponential;
  double matern_nu = 2.5;

  GridSpec grid{80, 80};
  std::optional<Box2> box;

  std::string runs_path;
  std::optional<GridSpec> runs_grid;

  struct Design {
    int budget = 0;
    GridSpec candidates{40, 40};
    GridSpec eval{60, 60};
    std::optional<int> nn_k;
    std::vector<double> straddle_fault_ys;
    std::vector<double> straddle_xs;
    double straddle_offset = 0.0;
    std::vector<Vec2> ghost_polyline;
    int ghost_count = 0;
  } design;

  struct Uci {
    double c = 3.0;
    double delta = 0.0;
    std::optional<double> f_plus;  // defaults to the best observed run value
  } uci;

  struct Sample {
    GridSpec grid{8, 8};
    std::vector<double> jump_xs;
    double jump_y = 0.0;
    double jump_eps = 0.02;
    bool jump_enabled = false;
  } sample;

  struct Report {
    std::vector<double> theta_bounds{0.05, 5.0};
    int psd_sets = 50;
    int psd_max_points = 40;
  } report;

  std::uint64_t seed = 1;
  std::string out_dir = ".";

  /// Effective evaluation box: explicit > surface domain > function domain.
  Box2 resolve_box() const;
};

RunConfig load_config(const std::string& path);

/// Cell-center grid over the box, row-major in y then x.
std::vector<Vec2> make_grid(const Box2& box, int nx, int ny);

/// Runs CSV: header with columns from {index, x, y, f, source}; ghost rows
/// carry value 0 regardless of f. Rows without f are evaluated on `function`
/// when given, otherwise rejected.
TrainingSet load_runs_csv(const std::string& path, std::optional<TestFunction> function);

void save_runs_csv(const std::string& path, const TrainingSet& data);

/// Prior with mean/sigma resolved against the run values (sample mean and SD
/// of the non-ghost runs when left unset).
PriorSpec resolve_prior(const RunConfig& config, const TrainingSet& runs);

}  // namespace tense
