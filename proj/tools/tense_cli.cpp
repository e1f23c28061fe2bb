// Command-line front end: grid evaluation, sequential design, realization
// sampling, and diagnostics reporting for torn-embedding emulators.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tense/config.hpp"
#include "tense/design.hpp"
#include "tense/emulator.hpp"
#include "tense/models.hpp"
#include "tense/nscov.hpp"
#include "tense/parallel.hpp"
#include "tense/rng.hpp"

namespace {

using namespace tense;
using nlohmann::json;

std::string format_g6(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6g", value);
  return buffer;
}

std::string format_full(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::filesystem::path prepare_out_dir(const RunConfig& config) {
  std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TrainingSet load_runs(const RunConfig& config) {
  if (!config.runs_path.empty()) return load_runs_csv(config.runs_path, config.function);
  if (config.runs_grid) {
    if (!config.function)
      throw ConfigError("runs_grid requires a function to auto-evaluate");
    TrainingSet data;
    for (const Vec2& p :
         make_grid(config.resolve_box(), config.runs_grid->nx, config.runs_grid->ny))
      data.add(p, eval_test_function(*config.function, p));
    return data;
  }
  return {};
}

// Design-phase prior: run values are unavailable, and variance-only scoring
// is invariant to (mean, sigma), so auto settings fall back to (0, 1).
PriorSpec design_prior(const RunConfig& config) {
  RunConfig defaulted = config;
  if (!defaulted.mean) defaulted.mean = 0.0;
  if (!defaulted.sigma) defaulted.sigma = 1.0;
  return resolve_prior(defaulted, TrainingSet{});
}

int cmd_eval_grid(const RunConfig& config, bool binary) {
  const TrainingSet runs = load_runs(config);
  const PriorSpec prior = resolve_prior(config, runs);
  const AdjustedEmulator emulator(prior, runs);

  const Box2 box = config.resolve_box();
  const std::vector<Vec2> grid = make_grid(box, config.grid.nx, config.grid.ny);

  std::vector<AdjustedEmulator::Moments> moments(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) { moments[i] = emulator.moments(grid[i]); });

  const auto clamps = emulator.variance_clamp_count();
  if (clamps > static_cast<std::int64_t>(0.001 * grid.size()))
    std::cerr << "warning: " << clamps << " of " << grid.size()
              << " predicted variances were clamped at zero\n";

  const auto dir = prepare_out_dir(config);
  {
    std::ofstream out(dir / "grid.csv");
    if (!out) throw std::runtime_error("cannot write grid.csv");
    out << "x,y,mean,sd\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out << format_g6(grid[i].x()) << ',' << format_g6(grid[i].y()) << ','
          << format_g6(moments[i].mean) << ','
          << format_g6(std::sqrt(std::max(moments[i].variance, 0.0))) << "\n";
    }
  }

  // Cells sitting on a tear line get flagged: the half-open side convention
  // decides their value, which a caller may want to know about.
  {
    std::ofstream out(dir / "grid_flags.csv");
    out << "x,y,flag\n";
    if (config.surface) {
      const double tol =
          1e-9 * std::max(box.xmax - box.xmin, box.ymax - box.ymin);
      for (const Vec2& p : grid)
        if (config.surface->distance_to_tear(p) <= tol)
          out << format_g6(p.x()) << ',' << format_g6(p.y()) << ",on-tear\n";
    }
  }

  if (binary) {
    std::ofstream out(dir / "grid.bin", std::ios::binary);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double record[4] = {grid[i].x(), grid[i].y(), moments[i].mean,
                                std::sqrt(std::max(moments[i].variance, 0.0))};
      out.write(reinterpret_cast<const char*>(record), sizeof(record));
    }
  }
  return 0;
}

int cmd_design(const RunConfig& config, int wave) {
  if (wave < 1) throw ConfigError("--wave must be >= 1");
  if (config.design.budget < 1) throw ConfigError("design.budget must be >= 1");
  const Box2 box = config.resolve_box();

  DesignState state;
  state.nn_k = config.design.nn_k;
  state.candidates = make_grid(box, config.design.candidates.nx, config.design.candidates.ny);
  std::vector<Vec2> eval_grid = make_grid(box, config.design.eval.nx, config.design.eval.ny);

  std::vector<std::pair<Vec2, Vec2>> straddles;
  PriorSpec prior = design_prior(config);

  if (wave == 1) {
    if (config.design.ghost_count > 0)
      state.ghosts = ghost_points(config.design.ghost_polyline, config.design.ghost_count);
    if (!config.design.straddle_fault_ys.empty()) {
      if (!config.surface) throw ConfigError("straddle pairs require a surface");
      std::vector<Segment> faults;
      for (const double y : config.design.straddle_fault_ys)
        faults.push_back({Vec2(box.xmin, y), Vec2(box.xmax, y)});
      straddles = straddle_pairs(*config.surface, faults, config.design.straddle_offset,
                                 config.design.straddle_xs);
      for (const auto& [above, below] : straddles) {
        state.selected.push_back(above);
        state.selected.push_back(below);
      }
    }
  } else {
    // Later waves restrict candidates and the variance target to the UCI
    // region of the previous wave's emulator.
    const TrainingSet runs = load_runs(config);
    if (runs.size() == 0)
      throw ConfigError("wave >= 2 needs the previous wave's runs (runs / runs_grid)");
    const PriorSpec run_prior = resolve_prior(config, runs);
    const AdjustedEmulator emulator(run_prior, runs);

    UciSpec uci;
    uci.c = config.uci.c;
    uci.delta = config.uci.delta;
    if (config.uci.f_plus) {
      uci.f_plus = *config.uci.f_plus;
    } else {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < runs.size(); ++i)
        if (!runs.is_ghost(i)) best = std::max(best, runs.values[i]);
      uci.f_plus = best;
    }

    const std::vector<bool> cand_mask = uci_region(emulator, state.candidates, uci);
    std::vector<Vec2> masked;
    for (std::size_t i = 0; i < state.candidates.size(); ++i)
      if (cand_mask[i]) masked.push_back(state.candidates[i]);
    state.candidates = std::move(masked);
    if (state.candidates.empty())
      throw std::runtime_error("wave design: UCI region contains no candidates");

    const std::vector<bool> eval_mask = uci_region(emulator, eval_grid, uci);
    std::vector<Vec2> masked_eval;
    for (std::size_t i = 0; i < eval_grid.size(); ++i)
      if (eval_mask[i]) masked_eval.push_back(eval_grid[i]);
    if (!masked_eval.empty()) eval_grid = std::move(masked_eval);

    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (runs.is_ghost(i)) state.ghosts.emplace_back(runs.points[i], 0.0);
      else state.selected.push_back(runs.points[i]);
    }
  }

  const std::size_t preseeded = state.selected.size();
  sequential_design(prior, state, eval_grid, config.design.budget);

  const auto dir = prepare_out_dir(config);
  std::ofstream out(dir / ("design_wave" + std::to_string(wave) + ".csv"));
  if (!out) throw std::runtime_error("cannot write design file");
  out << "index,x,y,source\n";
  int index = 0;
  if (wave == 1) {
    for (const auto& [point, value] : state.ghosts)
      out << index++ << ',' << format_full(point.x()) << ',' << format_full(point.y())
          << ",ghost\n";
    for (const auto& [above, below] : straddles) {
      out << index++ << ',' << format_full(above.x()) << ',' << format_full(above.y())
          << ",straddle\n";
      out << index++ << ',' << format_full(below.x()) << ',' << format_full(below.y())
          << ",straddle\n";
    }
  }
  for (std::size_t i = preseeded; i < state.selected.size(); ++i)
    out << index++ << ',' << format_full(state.selected[i].x()) << ','
        << format_full(state.selected[i].y()) << ",greedy\n";
  return 0;
}

int cmd_sample(const RunConfig& config, int count) {
  if (count < 1) throw ConfigError("--count must be >= 1");
  const TrainingSet runs = load_runs(config);
  const PriorSpec prior = resolve_prior(config, runs);
  const AdjustedEmulator emulator(prior, runs);

  const Box2 box = config.resolve_box();
  std::vector<Vec2> points = make_grid(box, config.sample.grid.nx, config.sample.grid.ny);

  // Probe pairs around the jump-check line come last, two per x location.
  const std::size_t probe_start = points.size();
  if (config.sample.jump_enabled) {
    for (const double x : config.sample.jump_xs) {
      points.emplace_back(x, config.sample.jump_y + config.sample.jump_eps);
      points.emplace_back(x, config.sample.jump_y - config.sample.jump_eps);
    }
  }

  const Eigen::MatrixXd samples = sample_realizations(emulator, points, count, config.seed);

  const auto dir = prepare_out_dir(config);
  std::ofstream out(dir / "samples.csv");
  if (!out) throw std::runtime_error("cannot write samples.csv");
  out << "x,y";
  for (int s = 1; s <= count; ++s) out << ",sample_" << s;
  out << "\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << format_g6(points[i].x()) << ',' << format_g6(points[i].y());
    for (int s = 0; s < count; ++s)
      out << ',' << format_g6(samples(static_cast<Eigen::Index>(i), s));
    out << "\n";
  }

  if (config.sample.jump_enabled && !config.sample.jump_xs.empty()) {
    const auto jump = [&](std::size_t pair, int s) {
      const auto row = static_cast<Eigen::Index>(probe_start + 2 * pair);
      return samples(row, s) - samples(row + 1, s);
    };
    for (std::size_t j = 0; j < config.sample.jump_xs.size(); ++j) {
      double mean_abs = 0.0;
      for (int s = 0; s < count; ++s) mean_abs += std::abs(jump(j, s));
      mean_abs /= count;
      out << "# jump_mean_abs x=" << format_g6(config.sample.jump_xs[j])
          << " value=" << format_g6(mean_abs) << "\n";
    }
    for (std::size_t j = 1; j < config.sample.jump_xs.size(); ++j) {
      int dominated = 0;
      for (int s = 0; s < count; ++s)
        if (std::abs(jump(0, s)) > std::abs(jump(j, s))) ++dominated;
      out << "# jump_dominance x=" << format_g6(config.sample.jump_xs[0]) << " vs x="
          << format_g6(config.sample.jump_xs[j])
          << " freq=" << format_g6(static_cast<double>(dominated) / count) << "\n";
    }
  }
  return 0;
}

int cmd_report(const RunConfig& config) {
  const TrainingSet runs = load_runs(config);
  if (runs.size() == 0)
    throw ConfigError("report needs runs (runs / runs_grid) for the LOO and MLE sections");
  const PriorSpec prior = resolve_prior(config, runs);

  json report;

  {
    json block;
    const GeodesicExample example = geodesic_counterexample(1.0);
    block["theta"] = 1.0;
    block["min_eigenvalue"] = example.min_eigenvalue;
    block["psd_threshold_theta"] = kGeodesicPsdThreshold;
    json matrix = json::array();
    for (int i = 0; i < 4; ++i) {
      json row = json::array();
      for (int j = 0; j < 4; ++j) row.push_back(example.cov(i, j));
      matrix.push_back(row);
    }
    block["matrix"] = matrix;
    json sweep = json::array();
    for (const double theta : {0.1, 0.5, 1.0, 2.0}) {
      const GeodesicExample swept = geodesic_counterexample(theta);
      sweep.push_back({{"theta", theta},
                       {"min_eigenvalue", swept.min_eigenvalue},
                       {"psd", swept.min_eigenvalue >= -1e-12}});
    }
    block["sweep"] = sweep;
    report["geodesic"] = block;
  }

  {
    const std::vector<LooRecord> records = loo_diagnostics(prior, runs);
    json table = json::array();
    double max_abs = 0.0;
    int within = 0;
    for (const LooRecord& record : records) {
      table.push_back({{"x", record.point.x()},
                       {"y", record.point.y()},
                       {"observed", record.observed},
                       {"mean", record.predicted_mean},
                       {"sd", record.predicted_sd},
                       {"standardized_error", record.standardized_error}});
      max_abs = std::max(max_abs, std::abs(record.standardized_error));
      if (std::abs(record.standardized_error) < 3.0) ++within;
    }
    report["loo"] = {{"records", table},
                     {"max_abs_standardized_error", max_abs},
                     {"fraction_within_3sd",
                      static_cast<double>(within) / static_cast<double>(records.size())}};
  }

  {
    MleOptions options;
    options.theta_lo = config.report.theta_bounds[0];
    options.theta_hi = config.report.theta_bounds[1];
    try {
      const MleResult result = estimate_theta_mle(prior, runs, options);
      report["mle"] = {{"theta_hat", result.theta_hat},
                       {"bracket", {result.theta_lo, result.theta_hi}},
                       {"log_likelihood", result.log_likelihood}};
    } catch (const std::exception& e) {
      // Degenerate data (for example constant runs) has no finite profiled
      // likelihood; the other report sections are still useful.
      report["mle"] = {{"error", e.what()}};
    }
  }

  {
    json sweep = json::array();
    std::uint64_t salt = 0;
    for (const char* name : {"toy1", "toy2", "toy3", "olympus", "flat", "planar"}) {
      const auto surface = builtin_embedding(name);
      NsCovSpec spec{prior.sigma, prior.theta, prior.alpha3, surface};
      Rng rng(config.seed + 77 * ++salt);
      double worst = std::numeric_limits<double>::infinity();
      int violations = 0;
      for (int set = 0; set < config.report.psd_sets; ++set) {
        const int n =
            2 + static_cast<int>(rng.uniform() * (config.report.psd_max_points - 1));
        std::vector<Vec2> points;
        points.reserve(n);
        const Box2& domain = surface->domain();
        for (int i = 0; i < n; ++i)
          points.emplace_back(rng.uniform(domain.xmin, domain.xmax),
                              rng.uniform(domain.ymin, domain.ymax));
        const auto [min_eig, psd] = min_eigenvalue_check(assemble_cov_matrix(spec, points));
        worst = std::min(worst, min_eig);
        if (!psd) ++violations;
      }
      sweep.push_back({{"surface", name},
                       {"sets", config.report.psd_sets},
                       {"worst_min_eigenvalue", worst},
                       {"violations", violations}});
    }
    report["psd_sweep"] = sweep;
  }

  const auto dir = prepare_out_dir(config);
  std::ofstream out(dir / "report.json");
  if (!out) throw std::runtime_error("cannot write report.json");
  out << report.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Torn-embedding non-stationary emulation (TENSE) toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
  int wave = 1;
  int count = 100;
  bool binary = false;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON configuration file")->required();
    cmd->add_option("--out", out_override, "output directory (overrides config)");
    cmd->add_option("--seed", seed_override, "seed (overrides config)")
        ->each([&](const std::string&) { has_seed_override = true; });
  };

  CLI::App* eval = app.add_subcommand("eval-grid", "evaluate emulator mean/sd on a grid");
  add_common(eval);
  eval->add_flag("--binary", binary, "also write full-precision binary output");

  CLI::App* design = app.add_subcommand("design", "sequential minimum-variance design");
  add_common(design);
  design->add_option("--wave", wave, "design wave (>= 2 restricts to the UCI region)");

  CLI::App* sample = app.add_subcommand("sample", "draw emulator realizations");
  add_common(sample);
  sample->add_option("--count", count, "number of realizations");

  CLI::App* rep = app.add_subcommand("report", "diagnostics report (LOO, MLE, PSD sweeps)");
  add_common(rep);

  CLI11_PARSE(app, argc, argv);

  try {
    tense::RunConfig config = tense::load_config(config_path);
    if (!out_override.empty()) config.out_dir = out_override;
    if (has_seed_override) config.seed = seed_override;

    if (eval->parsed()) return cmd_eval_grid(config, binary);
    if (design->parsed()) return cmd_design(config, wave);
    if (sample->parsed()) return cmd_sample(config, count);
    if (rep->parsed()) return cmd_report(config);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const tense::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}
