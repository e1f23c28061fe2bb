#include "tense/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tense {

namespace {

using nlohmann::json;

Box2 box_from_json(const json& node) {
  if (!node.is_array() || node.size() != 4)
    throw ConfigError("box must be an array [xmin, xmax, ymin, ymax]");
  Box2 box{node[0].get<double>(), node[1].get<double>(), node[2].get<double>(),
           node[3].get<double>()};
  if (!(box.xmax > box.xmin) || !(box.ymax > box.ymin))
    throw ConfigError("box must have positive extent");
  return box;
}

GridSpec grid_from_json(const json& node, GridSpec fallback) {
  GridSpec grid = fallback;
  if (node.contains("nx")) grid.nx = node.at("nx").get<int>();
  if (node.contains("ny")) grid.ny = node.at("ny").get<int>();
  if (grid.nx < 2 || grid.ny < 2) throw ConfigError("grid sizes must be >= 2");
  return grid;
}

// Piecewise-quadratic custom surface: ordered regions of axis-inequality
// conjunctions, one quadratic v(x, y) per region.
std::shared_ptr<const EmbeddingSurface> custom_surface(const json& node) {
  if (!node.contains("domain")) throw ConfigError("custom surface: domain required");
  const Box2 domain = box_from_json(node.at("domain"));
  const std::string name = node.value("name", std::string("custom"));

  struct Clause {
    int axis = 0;
    int op = 0;  // 0: <, 1: <=, 2: >, 3: >=
    double value = 0.0;
  };
  struct Quadratic {
    double c = 0, x = 0, y = 0, xx = 0, yy = 0, xy = 0;
  };

  std::vector<std::vector<Clause>> regions;
  for (const json& region : node.at("regions")) {
    std::vector<Clause> clauses;
    for (const json& where : region.value("where", json::array())) {
      Clause clause;
      const std::string axis = where.at("axis").get<std::string>();
      if (axis == "x") clause.axis = 0;
      else if (axis == "y") clause.axis = 1;
      else throw ConfigError("custom surface: axis must be 'x' or 'y'");
      const std::string op = where.at("op").get<std::string>();
      if (op == "<") clause.op = 0;
      else if (op == "<=") clause.op = 1;
      else if (op == ">") clause.op = 2;
      else if (op == ">=") clause.op = 3;
      else throw ConfigError("custom surface: op must be one of < <= > >=");
      clause.value = where.at("value").get<double>();
      clauses.push_back(clause);
    }
    regions.push_back(std::move(clauses));
  }
  if (regions.empty()) throw ConfigError("custom surface: at least one region required");

  std::vector<Quadratic> quadratics;
  const json& values = node.at("values");
  if (!values.is_array() || values.size() != regions.size())
    throw ConfigError("custom surface: one value entry per region required");
  for (const json& value : values) {
    Quadratic q;
    q.c = value.value("c", 0.0);
    q.x = value.value("x", 0.0);
    q.y = value.value("y", 0.0);
    q.xx = value.value("xx", 0.0);
    q.yy = value.value("yy", 0.0);
    q.xy = value.value("xy", 0.0);
    quadratics.push_back(q);
  }

  auto region_fn = [regions, name](const Vec2& p) {
    for (std::size_t r = 0; r < regions.size(); ++r) {
      bool all = true;
      for (const Clause& clause : regions[r]) {
        const double v = clause.axis == 0 ? p.x() : p.y();
        const bool ok = clause.op == 0   ? v < clause.value
                        : clause.op == 1 ? v <= clause.value
                        : clause.op == 2 ? v > clause.value
                                         : v >= clause.value;
        if (!ok) {
          all = false;
          break;
        }
      }
      if (all) return static_cast<int>(r);
    }
    throw std::runtime_error("custom surface '" + name + "': point matches no region");
  };
  auto value_fn = [quadratics](int region, const Vec2& p) {
    const Quadratic& q = quadratics[static_cast<std::size_t>(region)];
    return q.c + q.x * p.x() + q.y * p.y() + q.xx * p.x() * p.x() + q.yy * p.y() * p.y() +
           q.xy * p.x() * p.y();
  };
  auto grad_fn = [quadratics](int region, const Vec2& p) {
    const Quadratic& q = quadratics[static_cast<std::size_t>(region)];
    return Vec2(q.x + 2.0 * q.xx * p.x() + q.xy * p.y(),
                q.y + 2.0 * q.yy * p.y() + q.xy * p.x());
  };

  auto surface = std::make_shared<EmbeddingSurface>(name, domain, region_fn, value_fn);
  surface->set_gradient(grad_fn);
  if (node.contains("tears")) {
    std::vector<Segment> tears;
    for (const json& tear : node.at("tears")) {
      if (!tear.is_array() || tear.size() != 4)
        throw ConfigError("custom surface: tear must be [x0, y0, x1, y1]");
      tears.push_back({Vec2(tear[0].get<double>(), tear[1].get<double>()),
                       Vec2(tear[2].get<double>(), tear[3].get<double>())});
    }
    surface->set_tear_lines(std::move(tears));
  }
  return surface;
}

std::shared_ptr<const EmbeddingSurface> surface_from_json(const json& node) {
  if (node.is_string()) return builtin_embedding(node.get<std::string>());
  if (node.is_object()) {
    if (node.contains("custom")) return custom_surface(node.at("custom"));
    const std::string name = node.at("name").get<std::string>();
    if (name == "planar") {
      Box2 domain{0.0, 2.0, 0.0, 2.0};
      if (node.contains("domain")) domain = box_from_json(node.at("domain"));
      return planar_surface(node.value("a", 1.0), node.value("b", 0.0), domain);
    }
    return builtin_embedding(name);
  }
  throw ConfigError("surface must be a name string or an object");
}

std::optional<double> number_or_auto(const json& node, const char* key) {
  if (!node.contains(key)) return std::nullopt;
  const json& value = node.at(key);
  if (value.is_string()) {
    if (value.get<std::string>() == "auto") return std::nullopt;
    throw ConfigError(std::string(key) + " must be a number or \"auto\"");
  }
  return value.get<double>();
}

}  // namespace

Box2 RunConfig::resolve_box() const {
  if (box) return *box;
  if (surface) return surface->domain();
  if (function) return function_domain(*function);
  throw ConfigError("no evaluation box: provide grid.box, a surface, or a function");
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }

  try {
    RunConfig config;
    if (root.contains("function"))
      config.function = test_function_from_name(root.at("function").get<std::string>());
    if (root.contains("surface")) config.surface = surface_from_json(root.at("surface"));

    if (root.contains("prior")) {
      const json& prior = root.at("prior");
      config.mean = number_or_auto(prior, "mean");
      config.sigma = number_or_auto(prior, "sigma");
      config.theta = prior.value("theta", config.theta);
      config.alpha3 = prior.value("alpha3", config.alpha3);
      config.nugget = prior.value("nugget", config.nugget);
      const std::string mode = prior.value("mode", std::string("tense"));
      if (mode == "tense") config.mode = KernelMode::Tense;
      else if (mode == "stationary2d") config.mode = KernelMode::Stationary2D;
      else throw ConfigError("prior.mode must be 'tense' or 'stationary2d'");
      const std::string family = prior.value("family", std::string("se"));
      if (family == "se") config.family = KernelFamily::SquaredExponential;
      else if (family == "matern") config.family = KernelFamily::Matern;
      else throw ConfigError("prior.family must be 'se' or 'matern'");
      config.matern_nu = prior.value("nu", config.matern_nu);
    }
    if (config.mode == KernelMode::Tense && !config.surface)
      throw ConfigError("tense mode requires a surface");

    if (root.contains("grid")) {
      const json& grid = root.at("grid");
      config.grid = grid_from_json(grid, config.grid);
      if (grid.contains("box")) config.box = box_from_json(grid.at("box"));
    }

    config.runs_path = root.value("runs", std::string{});
    if (root.contains("runs_grid"))
      config.runs_grid = grid_from_json(root.at("runs_grid"), GridSpec{4, 4});

    if (root.contains("design")) {
      const json& design = root.at("design");
      config.design.budget = design.value("budget", 0);
      if (design.contains("candidates"))
        config.design.candidates = grid_from_json(design.at("candidates"), config.design.candidates);
      if (design.contains("eval"))
        config.design.eval = grid_from_json(design.at("eval"), config.design.eval);
      if (design.contains("nn_k")) {
        const json& nn = design.at("nn_k");
        if (nn.is_boolean()) {
          if (nn.get<bool>()) config.design.nn_k = 12;
        } else {
          config.design.nn_k = nn.get<int>();
        }
      }
      if (design.contains("straddle")) {
        const json& straddle = design.at("straddle");
        config.design.straddle_fault_ys =
            straddle.at("fault_ys").get<std::vector<double>>();
        config.design.straddle_xs = straddle.at("xs").get<std::vector<double>>();
        config.design.straddle_offset = straddle.at("offset").get<double>();
      }
      if (design.contains("ghost")) {
        const json& ghost = design.at("ghost");
        for (const json& vertex : ghost.at("polyline")) {
          if (!vertex.is_array() || vertex.size() != 2)
            throw ConfigError("ghost polyline vertices must be [x, y]");
          config.design.ghost_polyline.emplace_back(vertex[0].get<double>(),
                                                    vertex[1].get<double>());
        }
        config.design.ghost_count = ghost.value("count", 0);
      }
    }

    if (root.contains("uci")) {
      const json& uci = root.at("uci");
      config.uci.c = uci.value("c", config.uci.c);
      config.uci.delta = uci.value("delta", config.uci.delta);
      config.uci.f_plus = number_or_auto(uci, "f_plus");
    }

    if (root.contains("sample")) {
      const json& sample = root.at("sample");
      config.sample.grid = grid_from_json(sample, config.sample.grid);
      if (sample.contains("jump_check")) {
        const json& jump = sample.at("jump_check");
        config.sample.jump_xs = jump.at("xs").get<std::vector<double>>();
        config.sample.jump_y = jump.at("y").get<double>();
        config.sample.jump_eps = jump.value("eps", 0.02);
        config.sample.jump_enabled = true;
      }
    }

    if (root.contains("report")) {
      const json& report = root.at("report");
      if (report.contains("theta_bounds"))
        config.report.theta_bounds = report.at("theta_bounds").get<std::vector<double>>();
      if (config.report.theta_bounds.size() != 2)
        throw ConfigError("report.theta_bounds must be [lo, hi]");
      config.report.psd_sets = report.value("psd_sets", config.report.psd_sets);
      config.report.psd_max_points =
          report.value("psd_max_points", config.report.psd_max_points);
    }

    config.seed = root.value("seed", config.seed);
    config.out_dir = root.value("out", config.out_dir);
    return config;
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::vector<Vec2> make_grid(const Box2& box, int nx, int ny) {
  if (nx < 1 || ny < 1) throw ConfigError("grid sizes must be positive");
  std::vector<Vec2> points;
  points.reserve(static_cast<std::size_t>(nx) * ny);
  const double dx = (box.xmax - box.xmin) / nx;
  const double dy = (box.ymax - box.ymin) / ny;
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix)
      points.emplace_back(box.xmin + (ix + 0.5) * dx, box.ymin + (iy + 0.5) * dy);
  return points;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream stream(line);
  std::string field;
  while (std::getline(stream, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

TrainingSet load_runs_csv(const std::string& path, std::optional<TestFunction> function) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open runs file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("runs file is empty: " + path);

  const std::vector<std::string> header = split_csv_line(line);
  int col_x = -1, col_y = -1, col_f = -1, col_source = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "x") col_x = static_cast<int>(i);
    else if (header[i] == "y") col_y = static_cast<int>(i);
    else if (header[i] == "f") col_f = static_cast<int>(i);
    else if (header[i] == "source") col_source = static_cast<int>(i);
  }
  if (col_x < 0 || col_y < 0)
    throw ConfigError("runs file must have 'x' and 'y' columns: " + path);

  TrainingSet data;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const std::vector<std::string> fields = split_csv_line(line);
    const Vec2 point(std::stod(fields.at(col_x)), std::stod(fields.at(col_y)));
    std::string label;
    if (col_source >= 0) {
      const std::string source = fields.at(col_source);
      if (source == kGhostLabel) label = kGhostLabel;
    }
    double value;
    if (label == kGhostLabel) value = 0.0;
    else if (col_f >= 0) value = std::stod(fields.at(col_f));
    else if (function) value = eval_test_function(*function, point);
    else
      throw ConfigError("runs file has no 'f' column and no function is configured: " + path);
    data.add(point, value, label);
  }
  data.validate();
  return data;
}

void save_runs_csv(const std::string& path, const TrainingSet& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write runs file: " + path);
  out << "x,y,f,source\n";
  char buffer[128];
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::snprintf(buffer, sizeof(buffer), "%.17g,%.17g,%.17g,%s", data.points[i].x(),
                  data.points[i].y(), data.values[i],
                  i < data.labels.size() ? data.labels[i].c_str() : "");
    out << buffer << "\n";
  }
}

PriorSpec resolve_prior(const RunConfig& config, const TrainingSet& runs) {
  PriorSpec prior;
  prior.theta = config.theta;
  prior.alpha3 = config.alpha3;
  prior.nugget = config.nugget;
  prior.mode = config.mode;
  prior.surface = config.surface;
  prior.family = config.family;
  prior.matern_nu = config.matern_nu;

  std::vector<double> observed;
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (!runs.is_ghost(i)) observed.push_back(runs.values[i]);

  if (config.mean) {
    prior.mean = *config.mean;
  } else {
    if (observed.empty())
      throw ConfigError("prior.mean is 'auto' but there are no non-ghost runs");
    double sum = 0.0;
    for (const double v : observed) sum += v;
    prior.mean = sum / observed.size();
  }

  if (config.sigma) {
    prior.sigma = *config.sigma;
  } else {
    if (observed.size() < 2)
      throw ConfigError("prior.sigma is 'auto' but fewer than 2 non-ghost runs exist");
    double variance = 0.0;
    for (const double v : observed) variance += (v - prior.mean) * (v - prior.mean);
    variance /= observed.size() - 1;
    if (!(variance > 0.0))
      throw ConfigError("prior.sigma is 'auto' but the runs have zero spread");
    prior.sigma = std::sqrt(variance);
  }
  return prior;
}

}  // namespace tense
