#include "pcc/scenario_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <sstream>

namespace pcc {

namespace {

using json = nlohmann::ordered_json;

constexpr double kDeg = std::numbers::pi / 180.0;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ScenarioError(path.empty() ? "(document)" : path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
      throw ScenarioError(join(path, key), "unknown field");
    }
  }
}

const json& member(const json& obj, const std::string& path, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ScenarioError(join(path, key), "missing required field");
  return *it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ScenarioError(path, "expected a number");
  return v.get<double>();
}

std::string string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ScenarioError(path, "expected a string");
  return v.get<std::string>();
}

Vec vector(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty() || v.size() > 6) throw ScenarioError(path, "expected an array of 1 to 6 numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = number(v[i], path + "[" + std::to_string(i) + "]");
  }
  return out;
}

Mat matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty() || v.size() > 6) throw ScenarioError(path, "expected a square array of rows");
  const auto n = static_cast<Eigen::Index>(v.size());
  Mat out(n, n);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string row_path = path + "[" + std::to_string(i) + "]";
    const Vec row = vector(v[i], row_path);
    if (row.size() != n) throw ScenarioError(row_path, "expected " + std::to_string(n) + " entries");
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const Mat& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vec(m.row(i).transpose())));
  return a;
}

// Per-component factor from document units to internal units: the heading of
// the unicycle state and measurement is in degrees in the document.
Vec angle_units(ModelKind kind, int dim) {
  Vec d = Vec::Ones(dim);
  if (kind == ModelKind::kUnicycle) d(2) = kDeg;
  return d;
}

Mat scaled(const Mat& m, const Vec& d) { return d.asDiagonal() * m * d.asDiagonal(); }

ModelKind model_from(const json& v, const std::string& path) {
  try {
    return parse_model(string(v, path));
  } catch (const ScenarioError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(path, e.what());
  }
}

PlannerOverrides planner_from(const json& j, ModelKind kind) {
  const std::string path = "planner";
  only_keys(j, path, {"horizon", "bounds", "cost", "constraint", "k_sigma"});
  PlannerOverrides p;
  if (j.contains("horizon")) {
    const json& h = j["horizon"];
    if (!h.is_number_integer()) throw ScenarioError("planner.horizon", "expected an integer");
    p.horizon = h.get<int>();
  }
  if (j.contains("bounds")) {
    const json& b = j["bounds"];
    only_keys(b, "planner.bounds", {"lower", "upper"});
    ControlBounds cb;
    cb.lower = vector(member(b, "planner.bounds", "lower"), "planner.bounds.lower");
    cb.upper = vector(member(b, "planner.bounds", "upper"), "planner.bounds.upper");
    if (kind == ModelKind::kUnicycle) {
      // turn rate in deg/s
      if (cb.lower.size() == 2) cb.lower(1) *= kDeg;
      if (cb.upper.size() == 2) cb.upper(1) *= kDeg;
    }
    p.bounds = cb;
  }
  if (j.contains("cost")) {
    const json& c = j["cost"];
    only_keys(c, "planner.cost", {"position_weight", "control_weight", "terminal_weight"});
    CostSpec cs;
    if (c.contains("position_weight")) cs.position_weight = number(c["position_weight"], "planner.cost.position_weight");
    if (c.contains("control_weight")) cs.control_weight = number(c["control_weight"], "planner.cost.control_weight");
    if (c.contains("terminal_weight")) cs.terminal_weight = number(c["terminal_weight"], "planner.cost.terminal_weight");
    p.cost = cs;
  }
  if (j.contains("constraint")) {
    try {
      p.constraint = parse_constraint_kind(string(j["constraint"], "planner.constraint"));
    } catch (const ScenarioError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ScenarioError("planner.constraint", e.what());
    }
  }
  if (j.contains("k_sigma")) p.k_sigma = number(j["k_sigma"], "planner.k_sigma");
  return p;
}

ScenarioConfig from_json(const json& doc) {
  only_keys(doc, "", {"model", "robots", "static_obstacles", "eps", "measurement_noise", "noise_scale", "dt",
                      "max_duration", "goal_tolerance", "seed", "planner"});
  ScenarioConfig cfg;
  cfg.model = model_from(member(doc, "", "model"), "model");
  const MotionModel model(cfg.model);

  const json& robots = member(doc, "", "robots");
  if (!robots.is_array()) throw ScenarioError("robots", "expected an array");
  for (std::size_t i = 0; i < robots.size(); ++i) {
    const std::string path = "robots[" + std::to_string(i) + "]";
    const json& r = robots[i];
    only_keys(r, path, {"id", "start", "goal", "radius"});
    RobotSpec spec;
    spec.id = string(member(r, path, "id"), path + ".id");
    spec.start = vector(member(r, path, "start"), path + ".start");
    if (cfg.model == ModelKind::kUnicycle && spec.start.size() == 3) spec.start(2) *= kDeg;
    spec.goal = vector(member(r, path, "goal"), path + ".goal");
    spec.radius = number(member(r, path, "radius"), path + ".radius");
    cfg.robots.push_back(std::move(spec));
  }

  const json& obstacles = member(doc, "", "static_obstacles");
  if (!obstacles.is_array()) throw ScenarioError("static_obstacles", "expected an array");
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const std::string path = "static_obstacles[" + std::to_string(i) + "]";
    const json& o = obstacles[i];
    only_keys(o, path, {"center", "cov", "radius"});
    Body b;
    b.center.mean = vector(member(o, path, "center"), path + ".center");
    b.center.cov = matrix(member(o, path, "cov"), path + ".cov");
    b.radius = number(member(o, path, "radius"), path + ".radius");
    cfg.static_obstacles.push_back(std::move(b));
  }

  cfg.eps = number(member(doc, "", "eps"), "eps");

  const json& noise = member(doc, "", "measurement_noise");
  only_keys(noise, "measurement_noise", {"process", "measurement"});
  const Mat process = matrix(member(noise, "measurement_noise", "process"), "measurement_noise.process");
  const Mat measurement =
      matrix(member(noise, "measurement_noise", "measurement"), "measurement_noise.measurement");
  cfg.noise.process =
      process.rows() == model.state_dim() ? scaled(process, angle_units(cfg.model, model.state_dim())) : process;
  cfg.noise.measurement = measurement.rows() == model.measurement_dim()
                              ? scaled(measurement, angle_units(cfg.model, model.measurement_dim()))
                              : measurement;

  cfg.noise_scale = number(member(doc, "", "noise_scale"), "noise_scale");
  cfg.dt = number(member(doc, "", "dt"), "dt");
  cfg.max_duration = number(member(doc, "", "max_duration"), "max_duration");
  cfg.goal_tolerance = number(member(doc, "", "goal_tolerance"), "goal_tolerance");
  if (doc.contains("seed")) {
    const json& s = doc["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
      throw ScenarioError("seed", "expected a nonnegative integer");
    }
    cfg.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("planner")) cfg.planner = planner_from(doc["planner"], cfg.model);

  cfg.validate();
  return cfg;
}

// 1-based line and column of a byte offset.
std::pair<std::size_t, std::size_t> locate(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, column] = locate(text, e.byte);
    throw ScenarioError("line " + std::to_string(line) + ", column " + std::to_string(column),
                        "malformed JSON");
  }
  return from_json(doc);
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path.string(), "cannot open scenario file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_scenario(buffer.str());
  } catch (const ScenarioError& e) {
    const std::string what = e.what();
    const std::string message = e.field().empty() ? what : what.substr(e.field().size() + 2);
    throw ScenarioError(path.string() + ": " + e.field(), message);
  }
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
  const MotionModel model(cfg.model);
  json doc;
  doc["model"] = std::string(model_id(cfg.model));
  doc["robots"] = json::array();
  for (const RobotSpec& r : cfg.robots) {
    Vec start = r.start;
    if (cfg.model == ModelKind::kUnicycle) start(2) /= kDeg;
    doc["robots"].push_back({{"id", r.id}, {"start", to_json(start)}, {"goal", to_json(r.goal)}, {"radius", r.radius}});
  }
  doc["static_obstacles"] = json::array();
  for (const Body& b : cfg.static_obstacles) {
    doc["static_obstacles"].push_back(
        {{"center", to_json(b.center.mean)}, {"cov", to_json(b.center.cov)}, {"radius", b.radius}});
  }
  doc["eps"] = cfg.eps;
  const Vec ds = angle_units(cfg.model, model.state_dim()).cwiseInverse();
  const Vec dm = angle_units(cfg.model, model.measurement_dim()).cwiseInverse();
  doc["measurement_noise"] = {{"process", to_json(scaled(cfg.noise.process, ds))},
                              {"measurement", to_json(scaled(cfg.noise.measurement, dm))}};
  doc["noise_scale"] = cfg.noise_scale;
  doc["dt"] = cfg.dt;
  doc["max_duration"] = cfg.max_duration;
  doc["goal_tolerance"] = cfg.goal_tolerance;
  doc["seed"] = cfg.seed;

  const PlannerOverrides& p = cfg.planner;
  json planner = json::object();
  if (p.horizon) planner["horizon"] = *p.horizon;
  if (p.bounds) {
    ControlBounds b = *p.bounds;
    if (cfg.model == ModelKind::kUnicycle && b.lower.size() == 2) {
      b.lower(1) /= kDeg;
      b.upper(1) /= kDeg;
    }
    planner["bounds"] = {{"lower", to_json(b.lower)}, {"upper", to_json(b.upper)}};
  }
  if (p.cost) {
    planner["cost"] = {{"position_weight", p.cost->position_weight},
                       {"control_weight", p.cost->control_weight},
                       {"terminal_weight", p.cost->terminal_weight}};
  }
  if (p.constraint) planner["constraint"] = std::string(constraint_kind_id(*p.constraint));
  if (p.k_sigma) planner["k_sigma"] = *p.k_sigma;
  if (!planner.empty()) doc["planner"] = planner;
  return doc.dump(2) + "\n";
}

}  // namespace pcc
