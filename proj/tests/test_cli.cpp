#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>
#include <sys/wait.h>

#include "tense/config.hpp"
#include "tense/design.hpp"
#include "tense/models.hpp"

using namespace tense;
namespace fs = std::filesystem;

namespace {

const fs::path& scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "tense_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run_cli(const std::string& args) {
  const std::string command = std::string(TENSE_CLI_PATH) + " " + args;
  const int status = std::system(command.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const std::string& name, const std::string& body) {
  const fs::path path = scratch_dir() / name;
  std::ofstream out(path);
  out << body;
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream stream(line);
    std::string field;
    while (std::getline(stream, field, ',')) fields.push_back(field);
    rows.push_back(fields);
  }
  return rows;
}

const char* kToy1Config = R"({
  "function": "toy1",
  "surface": "toy1",
  "prior": {"mean": 0.0, "sigma": 0.7, "theta": 0.5, "alpha3": 0.5, "mode": "tense"},
  "grid": {"nx": 80, "ny": 80},
  "runs_grid": {"nx": 4, "ny": 4},
  "sample": {"nx": 4, "ny": 4,
             "jump_check": {"xs": [1.75, 0.25], "y": 1.0, "eps": 0.02}},
  "seed": 11
})";

}  // namespace

TEST_CASE("eval-grid writes the documented CSV layout deterministically") {
  const fs::path config = write_config("toy1.json", kToy1Config);
  const fs::path out_a = scratch_dir() / "eval_a";
  const fs::path out_b = scratch_dir() / "eval_b";

  CHECK(run_cli("eval-grid --config " + config.string() + " --out " + out_a.string()) == 0);
  CHECK(run_cli("eval-grid --config " + config.string() + " --out " + out_b.string()) == 0);

  const auto rows = read_csv(out_a / "grid.csv");
  REQUIRE(rows.size() == 6401);  // header + 80 * 80 cells
  CHECK(rows[0] == std::vector<std::string>{"x", "y", "mean", "sd"});

  // Byte-identical rerun.
  CHECK(slurp(out_a / "grid.csv") == slurp(out_b / "grid.csv"));
  CHECK(fs::exists(out_a / "grid_flags.csv"));
}

TEST_CASE("grid CSV round-trips at the printed precision; binary export matches") {
  const fs::path config = write_config("toy1_rt.json", kToy1Config);
  const fs::path out = scratch_dir() / "eval_rt";
  CHECK(run_cli("eval-grid --binary --config " + config.string() + " --out " +
                out.string()) == 0);

  const auto rows = read_csv(out / "grid.csv");
  REQUIRE(rows.size() == 6401);
  for (std::size_t i = 1; i < rows.size(); i += 517) {
    for (const std::string& field : rows[i]) {
      char reformatted[64];
      std::snprintf(reformatted, sizeof(reformatted), "%.6g", std::stod(field));
      CHECK(field == reformatted);
    }
  }

  CHECK(fs::file_size(out / "grid.bin") == 6400u * 4u * sizeof(double));
  std::ifstream bin(out / "grid.bin", std::ios::binary);
  double record[4];
  bin.read(reinterpret_cast<char*>(record), sizeof(record));
  char printed[64];
  std::snprintf(printed, sizeof(printed), "%.6g", record[2]);
  CHECK(rows[1][2] == printed);  // binary carries the same field, full precision
}

TEST_CASE("custom piecewise-quadratic surfaces load from JSON") {
  const fs::path config_path = write_config("custom_surface.json", R"({
    "surface": {"custom": {
      "name": "step",
      "domain": [0, 2, 0, 2],
      "regions": [
        {"where": [{"axis": "y", "op": "<", "value": 1.0}]},
        {"where": []}
      ],
      "values": [
        {"c": 0.0},
        {"c": 1.0, "xx": 0.25}
      ],
      "tears": [[0.0, 1.0, 2.0, 1.0]]
    }},
    "prior": {"mean": 0.0, "sigma": 1.0, "theta": 0.5, "alpha3": 0.5},
    "grid": {"nx": 4, "ny": 4},
    "seed": 1
  })");

  const RunConfig config = load_config(config_path.string());
  REQUIRE(config.surface != nullptr);
  CHECK(config.surface->region_of(Vec2(0.5, 0.5)) == 0);
  CHECK(config.surface->region_of(Vec2(0.5, 1.5)) == 1);
  CHECK(config.surface->value(Vec2(0.5, 0.5)) == 0.0);
  CHECK(config.surface->value(Vec2(1.0, 1.5)) == doctest::Approx(1.25));
  CHECK(config.surface->gradient(Vec2(1.0, 1.5)) == Vec2(0.5, 0.0));
  CHECK(config.surface->tear_lines().size() == 1);

  // And the CLI consumes it end to end.
  const fs::path out = scratch_dir() / "custom_eval";
  CHECK(run_cli("eval-grid --config " + config_path.string() + " --out " + out.string()) ==
        0);
  CHECK(read_csv(out / "grid.csv").size() == 17);
}

TEST_CASE("nn_k accepts a boolean for the default truncation") {
  const fs::path config_path = write_config("nn_default.json", R"({
    "surface": "toy1",
    "prior": {"mean": 0, "sigma": 1},
    "design": {"budget": 1, "nn_k": true}
  })");
  const RunConfig config = load_config(config_path.string());
  REQUIRE(config.design.nn_k.has_value());
  CHECK(*config.design.nn_k == 12);
}

TEST_CASE("eval-grid with an empty design returns the prior everywhere") {
  const fs::path config = write_config("prior_only.json", R"({
    "surface": "toy1",
    "prior": {"mean": 0.25, "sigma": 0.7, "theta": 0.5, "alpha3": 0.5},
    "grid": {"nx": 5, "ny": 5},
    "seed": 1
  })");
  const fs::path out = scratch_dir() / "eval_prior";
  CHECK(run_cli("eval-grid --config " + config.string() + " --out " + out.string()) == 0);
  const auto rows = read_csv(out / "grid.csv");
  REQUIRE(rows.size() == 26);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][2] == "0.25");
    CHECK(rows[i][3] == "0.7");
  }
}

TEST_CASE("design wave 1 emits greedy rows") {
  const fs::path config = write_config("design_small.json", R"({
    "surface": "toy1",
    "prior": {"mean": 0.0, "sigma": 0.7, "theta": 0.5, "alpha3": 0.5},
    "design": {"budget": 5, "candidates": {"nx": 8, "ny": 8}, "eval": {"nx": 9, "ny": 9}},
    "seed": 3
  })");
  const fs::path out = scratch_dir() / "design_small";
  CHECK(run_cli("design --config " + config.string() + " --out " + out.string()) == 0);
  const auto rows = read_csv(out / "design_wave1.csv");
  REQUIRE(rows.size() == 6);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][3] == "greedy");
}

TEST_CASE("olympus-style wave 1 carries ghosts, straddles and greedy picks") {
  const fs::path config = write_config("design_olympus.json", R"({
    "surface": "olympus",
    "prior": {"mean": 0.0, "sigma": 1.0, "theta": 12.0, "alpha3": 0.5},
    "design": {
      "budget": 41,
      "candidates": {"nx": 14, "ny": 14},
      "eval": {"nx": 16, "ny": 16},
      "nn_k": 12,
      "straddle": {"fault_ys": [85.5, 99.5, 123.5], "xs": [100.0, 100.0, 60.0],
                   "offset": 1.5},
      "ghost": {"polyline": [[4,4],[114,4],[114,156],[4,156],[4,4]], "count": 36}
    },
    "seed": 5
  })");
  const fs::path out = scratch_dir() / "design_olympus";
  CHECK(run_cli("design --config " + config.string() + " --wave 1 --out " + out.string()) ==
        0);
  const auto rows = read_csv(out / "design_wave1.csv");
  REQUIRE(rows.size() == 84);  // header + 36 ghosts + 6 straddles + 41 greedy
  int ghosts = 0, straddles = 0, greedy = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][3] == "ghost") ++ghosts;
    else if (rows[i][3] == "straddle") ++straddles;
    else if (rows[i][3] == "greedy") ++greedy;
  }
  CHECK(ghosts == 36);
  CHECK(straddles == 6);
  CHECK(greedy == 41);
  CHECK(straddles + greedy == 47);  // the non-ghost wave-1 runs
}

TEST_CASE("design wave 2 restricts to the previous UCI region") {
  const std::string base = R"({
    "function": "toy1",
    "surface": "toy1",
    "prior": {"mean": "auto", "sigma": "auto", "theta": 0.5, "alpha3": 0.5},
    "design": {"budget": 4, "candidates": {"nx": 10, "ny": 10}, "eval": {"nx": 8, "ny": 8}},
    "uci": {"c": 3.0, "delta": 0.3},
    "runs": ")" +
                           (scratch_dir() / "wave1" / "design_wave1.csv").string() + R"(",
    "seed": 7
  })";

  const fs::path config1 = write_config("wave1.json", R"({
    "function": "toy1",
    "surface": "toy1",
    "prior": {"mean": 0.0, "sigma": 0.7, "theta": 0.5, "alpha3": 0.5},
    "design": {"budget": 10, "candidates": {"nx": 10, "ny": 10}, "eval": {"nx": 8, "ny": 8}},
    "seed": 7
  })");
  const fs::path out1 = scratch_dir() / "wave1";
  CHECK(run_cli("design --config " + config1.string() + " --out " + out1.string()) == 0);

  const fs::path config2 = write_config("wave2.json", base);
  const fs::path out2 = scratch_dir() / "wave2";
  CHECK(run_cli("design --config " + config2.string() + " --wave 2 --out " + out2.string()) ==
        0);

  // Recreate the wave-1 emulator and check every wave-2 point satisfies the
  // UCI membership rule.
  const TrainingSet runs =
      load_runs_csv((out1 / "design_wave1.csv").string(), TestFunction::Toy1);
  RunConfig config = load_config(config2.string());
  const PriorSpec prior = resolve_prior(config, runs);
  const AdjustedEmulator emulator(prior, runs);
  double best = -1e300;
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (!runs.is_ghost(i)) best = std::max(best, runs.values[i]);

  const auto rows = read_csv(out2 / "design_wave2.csv");
  REQUIRE(rows.size() == 5);
  std::vector<Vec2> picks;
  for (std::size_t i = 1; i < rows.size(); ++i)
    picks.emplace_back(std::stod(rows[i][1]), std::stod(rows[i][2]));
  const auto mask = uci_region(emulator, picks, UciSpec{3.0, 0.3, best});
  for (const bool member : mask) CHECK(member);
}

TEST_CASE("sample pins design points and reports the tear jump") {
  const fs::path config = write_config("sample.json", kToy1Config);
  const fs::path out_a = scratch_dir() / "sample_a";
  const fs::path out_b = scratch_dir() / "sample_b";

  CHECK(run_cli("sample --config " + config.string() + " --count 1 --out " +
                out_a.string()) == 0);
  const auto rows = read_csv(out_a / "samples.csv");
  REQUIRE(rows.size() >= 17);  // header + 16 grid points + probes
  for (std::size_t i = 1; i <= 16; ++i) {
    const Vec2 p(std::stod(rows[i][0]), std::stod(rows[i][1]));
    const double observed = eval_test_function(TestFunction::Toy1, p);
    CHECK(std::stod(rows[i][2]) == doctest::Approx(observed).epsilon(2e-3));
  }

  CHECK(run_cli("sample --config " + config.string() + " --count 200 --out " +
                out_b.string()) == 0);
  const std::string contents = slurp(out_b / "samples.csv");
  const auto pos = contents.find("# jump_dominance x=1.75 vs x=0.25 freq=");
  REQUIRE(pos != std::string::npos);
  const double freq = std::stod(contents.substr(pos + 39));
  CHECK(freq >= 0.95);

  const fs::path out_c = scratch_dir() / "sample_c";
  CHECK(run_cli("sample --config " + config.string() + " --count 200 --out " +
                out_c.string()) == 0);
  CHECK(slurp(out_b / "samples.csv") == slurp(out_c / "samples.csv"));
}

TEST_CASE("report carries the diagnostics blocks") {
  const fs::path config = write_config("report.json", R"({
    "function": "toy1",
    "surface": "toy1",
    "prior": {"mean": "auto", "sigma": "auto", "theta": 0.5, "alpha3": 0.5},
    "runs_grid": {"nx": 5, "ny": 4},
    "report": {"theta_bounds": [0.05, 5.0], "psd_sets": 10, "psd_max_points": 25},
    "seed": 13
  })");
  const fs::path out = scratch_dir() / "report";
  CHECK(run_cli("report --config " + config.string() + " --out " + out.string()) == 0);

  const nlohmann::json report = nlohmann::json::parse(slurp(out / "report.json"));
  CHECK(std::abs(report["geodesic"]["min_eigenvalue"].get<double>() - (-0.0251)) < 5e-4);
  CHECK(report["geodesic"]["psd_threshold_theta"].get<double>() ==
        doctest::Approx(0.4246609).epsilon(1e-6));
  CHECK(report["geodesic"]["sweep"][0]["psd"].get<bool>());        // theta = 0.1
  CHECK_FALSE(report["geodesic"]["sweep"][2]["psd"].get<bool>());  // theta = 1.0
  for (const auto& entry : report["psd_sweep"]) CHECK(entry["violations"].get<int>() == 0);
  CHECK(report["mle"].contains("theta_hat"));
  CHECK(report["loo"]["records"].size() == 20);
}

TEST_CASE("report on constant data zeroes the LOO errors") {
  const fs::path runs = scratch_dir() / "constant_runs.csv";
  {
    std::ofstream out(runs);
    out << "x,y,f\n";
    for (int i = 0; i < 6; ++i) out << 0.2 + 0.3 * i << "," << 0.3 + 0.2 * i << ",2.5\n";
  }
  const fs::path config = write_config("report_const.json", R"({
    "surface": "toy1",
    "prior": {"mean": 2.5, "sigma": 1.0, "theta": 0.5, "alpha3": 0.5},
    "runs": ")" + runs.string() + R"(",
    "report": {"psd_sets": 2, "psd_max_points": 10},
    "seed": 17
  })");
  const fs::path out = scratch_dir() / "report_const";
  CHECK(run_cli("report --config " + config.string() + " --out " + out.string()) == 0);
  const nlohmann::json report = nlohmann::json::parse(slurp(out / "report.json"));
  for (const auto& record : report["loo"]["records"])
    CHECK(std::abs(record["standardized_error"].get<double>()) < 1e-9);
  CHECK(report["mle"].contains("error"));  // constant data has no finite MLE
}

TEST_CASE("output is independent of the thread count") {
  const fs::path config = write_config("threads.json", kToy1Config);
  const fs::path out_one = scratch_dir() / "threads_one";
  const fs::path out_many = scratch_dir() / "threads_many";
  const std::string base = " eval-grid --config " + config.string() + " --out ";
  CHECK(std::system(("TENSE_THREADS=1 " + std::string(TENSE_CLI_PATH) + base +
                     out_one.string())
                        .c_str()) == 0);
  CHECK(std::system(("TENSE_THREADS=7 " + std::string(TENSE_CLI_PATH) + base +
                     out_many.string())
                        .c_str()) == 0);
  CHECK(slurp(out_one / "grid.csv") == slurp(out_many / "grid.csv"));
}

TEST_CASE("exit codes distinguish config errors") {
  CHECK(run_cli("eval-grid --config /nonexistent/conf.json") == 2);
  const fs::path bad = write_config("bad_surface.json", R"({
    "surface": "not_a_surface",
    "prior": {"mean": 0, "sigma": 1}
  })");
  CHECK(run_cli("eval-grid --config " + bad.string()) == 2);
}
