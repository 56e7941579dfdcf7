#include "pcc/export.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace pcc {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<std::string> state_names(ModelKind kind) {
  if (kind == ModelKind::kUnicycle) return {"x", "y", "theta_deg"};
  return {"x", "y", "z", "vx", "vy", "vz"};
}

std::vector<std::string> control_names(ModelKind kind) {
  if (kind == ModelKind::kUnicycle) return {"v", "omega_deg_s"};
  return {"ax", "ay", "az"};
}

// File units per internal unit, per component.
Vec state_units(ModelKind kind) {
  Vec d = Vec::Ones(MotionModel(kind).state_dim());
  if (kind == ModelKind::kUnicycle) d(2) = 1.0 / kDeg;
  return d;
}

Vec control_units(ModelKind kind) {
  Vec d = Vec::Ones(MotionModel(kind).control_dim());
  if (kind == ModelKind::kUnicycle) d(1) = 1.0 / kDeg;
  return d;
}

std::vector<std::string> trajectory_header(ModelKind kind) {
  const auto s = state_names(kind);
  std::vector<std::string> h{"tick", "robot"};
  for (const auto& n : s) h.push_back("truth_" + n);
  for (const auto& n : s) h.push_back("mean_" + n);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i; j < s.size(); ++j) h.push_back("cov_" + s[i] + "_" + s[j]);
  for (const auto& n : control_names(kind)) h.push_back("u_" + n);
  h.push_back("min_margin");
  return h;
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream s(line);
  while (std::getline(s, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& text, std::size_t line) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::runtime_error("trajectory csv line " + std::to_string(line) + ": bad number '" + text + "'");
  }
  return x;
}

struct Frame {
  double x0, y0, scale, height;  // world (x0, y0) maps to the panel's lower-left corner
  double top;                    // panel offset in the document
  std::array<double, 2> map(double x, double y) const {
    return {20.0 + (x - x0) * scale, top + height - 20.0 - (y - y0) * scale};
  }
};

constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                                "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};

void svg_panel(std::ostream& out, const RunLog& log, const ScenarioConfig& cfg, int a, int b, double top,
               const char* title) {
  const MotionModel model(cfg.model);
  double lo_a = std::numeric_limits<double>::infinity(), hi_a = -lo_a, lo_b = lo_a, hi_b = -lo_a;
  auto extend = [&](double u, double v, double r) {
    lo_a = std::min(lo_a, u - r);
    hi_a = std::max(hi_a, u + r);
    lo_b = std::min(lo_b, v - r);
    hi_b = std::max(hi_b, v + r);
  };
  for (const TickRecord& rec : log.ticks)
    for (std::size_t i = 0; i < rec.robots.size(); ++i) {
      const Vec p = model.position(rec.robots[i].truth);
      extend(p(a), p(b), cfg.robots[i].radius);
    }
  for (const RobotSpec& r : cfg.robots) {
    extend(r.start(a), r.start(b), r.radius);
    extend(r.goal(a), r.goal(b), r.radius);
  }
  for (const Body& o : cfg.static_obstacles) extend(o.center.mean(a), o.center.mean(b), o.radius);
  const double span = std::max({hi_a - lo_a, hi_b - lo_b, 1e-6});
  const double size = 560.0;
  const Frame f{lo_a, lo_b, size / span, size + 40.0, top};

  out << "  <g>\n";
  out << "    <text x=\"20\" y=\"" << format_double(top + 14.0) << "\" font-family=\"sans-serif\" font-size=\"12\">"
      << title << "</text>\n";
  for (const Body& o : cfg.static_obstacles) {
    const auto c = f.map(o.center.mean(a), o.center.mean(b));
    out << "    <circle cx=\"" << format_double(c[0]) << "\" cy=\"" << format_double(c[1]) << "\" r=\""
        << format_double(o.radius * f.scale) << "\" fill=\"#999999\"/>\n";
  }
  for (std::size_t i = 0; i < cfg.robots.size(); ++i) {
    const char* color = kColors[i % kColors.size()];
    const RobotSpec& r = cfg.robots[i];
    const auto g = f.map(r.goal(a), r.goal(b));
    out << "    <circle cx=\"" << format_double(g[0]) << "\" cy=\"" << format_double(g[1]) << "\" r=\""
        << format_double(r.radius * f.scale) << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-dasharray=\"4 3\"/>\n";
    out << "    <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (const TickRecord& rec : log.ticks) {
      const Vec p = model.position(rec.robots[i].truth);
      const auto q = f.map(p(a), p(b));
      out << (first ? "" : " ") << format_double(q[0]) << ',' << format_double(q[1]);
      first = false;
    }
    out << "\"><title>" << r.id << "</title></polyline>\n";
    const auto s = f.map(r.start(a), r.start(b));
    out << "    <circle cx=\"" << format_double(s[0]) << "\" cy=\"" << format_double(s[1]) << "\" r=\"3\" fill=\""
        << color << "\"/>\n";
  }
  out << "  </g>\n";
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace

std::string format_double(double x) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), ptr);
}

void write_trajectory_csv(std::ostream& out, const RunLog& log, const ScenarioConfig& cfg) {
  const Vec su = state_units(cfg.model);
  const Vec cu = control_units(cfg.model);
  write_row(out, trajectory_header(cfg.model));
  for (const TickRecord& rec : log.ticks) {
    for (std::size_t i = 0; i < rec.robots.size(); ++i) {
      const RobotTick& r = rec.robots[i];
      std::vector<std::string> cells{std::to_string(rec.tick), cfg.robots[i].id};
      for (Eigen::Index k = 0; k < su.size(); ++k) cells.push_back(format_double(r.truth(k) * su(k)));
      for (Eigen::Index k = 0; k < su.size(); ++k) cells.push_back(format_double(r.belief.mean(k) * su(k)));
      for (Eigen::Index k = 0; k < su.size(); ++k)
        for (Eigen::Index m = k; m < su.size(); ++m) cells.push_back(format_double(r.belief.cov(k, m) * su(k) * su(m)));
      for (Eigen::Index k = 0; k < cu.size(); ++k) cells.push_back(format_double(r.control(k) * cu(k)));
      cells.push_back(format_double(r.min_margin));
      write_row(out, cells);
    }
  }
}

RunLog read_trajectory_csv(std::istream& in, const ScenarioConfig& cfg) {
  const std::vector<std::string> header = trajectory_header(cfg.model);
  const Vec su = state_units(cfg.model);
  const Vec cu = control_units(cfg.model);
  const auto ns = su.size();
  const auto nc = cu.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < cfg.robots.size(); ++i) index[cfg.robots[i].id] = i;

  std::string line;
  if (!std::getline(in, line) || split(line) != header) {
    throw std::runtime_error("trajectory csv: header does not match the scenario's model");
  }
  RunLog log;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> c = split(line);
    if (c.size() != header.size()) {
      throw std::runtime_error("trajectory csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " columns");
    }
    const int tick = static_cast<int>(parse_double(c[0], line_no));
    const auto it = index.find(c[1]);
    if (it == index.end()) {
      throw std::runtime_error("trajectory csv line " + std::to_string(line_no) + ": unknown robot '" + c[1] + "'");
    }
    if (log.ticks.empty() || log.ticks.back().tick != tick) {
      if (tick != static_cast<int>(log.ticks.size())) {
        throw std::runtime_error("trajectory csv line " + std::to_string(line_no) + ": ticks out of order");
      }
      log.ticks.push_back({tick, std::vector<RobotTick>(cfg.robots.size())});
    }
    RobotTick& r = log.ticks.back().robots[it->second];
    std::size_t col = 2;
    r.truth = Vec(ns);
    r.belief.mean = Vec(ns);
    r.belief.cov = Mat(ns, ns);
    r.control = Vec(nc);
    for (Eigen::Index k = 0; k < ns; ++k) r.truth(k) = parse_double(c[col++], line_no) / su(k);
    for (Eigen::Index k = 0; k < ns; ++k) r.belief.mean(k) = parse_double(c[col++], line_no) / su(k);
    for (Eigen::Index k = 0; k < ns; ++k)
      for (Eigen::Index m = k; m < ns; ++m) {
        r.belief.cov(k, m) = parse_double(c[col++], line_no) / (su(k) * su(m));
        r.belief.cov(m, k) = r.belief.cov(k, m);
      }
    for (Eigen::Index k = 0; k < nc; ++k) r.control(k) = parse_double(c[col++], line_no) / cu(k);
    r.min_margin = parse_double(c[col], line_no);
    r.messages_received = static_cast<int>(cfg.robots.size()) - 1;
  }
  for (const TickRecord& rec : log.ticks)
    for (const RobotTick& r : rec.robots)
      if (r.truth.size() == 0) {
        throw std::runtime_error("trajectory csv: tick " + std::to_string(rec.tick) + " is missing a robot");
      }
  return log;
}

void write_metrics_csv(std::ostream& out, const RunMetrics& metrics) {
  out << "robot,min_distance,length,duration,reached,collisions\n";
  for (const RobotMetrics& r : metrics.robots) {
    write_row(out, {r.id, format_double(r.min_distance), format_double(r.length), format_double(r.duration),
                    r.reached ? "true" : "false", std::to_string(r.collisions)});
  }
  if (metrics.robots.empty()) return;
  write_row(out, {"all", format_double(metrics.min_distance), format_double(metrics.mean_length),
                  format_double(metrics.max_duration), metrics.success ? "true" : "false",
                  std::to_string(metrics.collisions)});
}

void write_trajectories_svg(std::ostream& out, const RunLog& log, const ScenarioConfig& cfg) {
  const bool side = MotionModel(cfg.model).position_dim() == 3;
  const double panel = 600.0;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"" << format_double(side ? 2 * panel : panel)
      << "\" viewBox=\"0 0 600 " << format_double(side ? 2 * panel : panel) << "\">\n";
  out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg_panel(out, log, cfg, 0, 1, 0.0, "top view (x-y)");
  if (side) svg_panel(out, log, cfg, 0, 2, panel, "side view (x-z)");
  out << "</svg>\n";
}

ExportPaths export_run(const RunLog& log, const RunMetrics& metrics, const ScenarioConfig& cfg,
                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error(dir.string() + ": " + ec.message());
  ExportPaths paths{dir / "trajectory.csv", dir / "metrics.csv", dir / "trajectories.svg"};

  std::ofstream traj = open_for_write(paths.trajectory_csv);
  write_trajectory_csv(traj, log, cfg);
  finish(traj, paths.trajectory_csv);

  std::ofstream met = open_for_write(paths.metrics_csv);
  write_metrics_csv(met, log.ticks.empty() ? RunMetrics{} : metrics);
  finish(met, paths.metrics_csv);

  std::ofstream svg = open_for_write(paths.svg);
  write_trajectories_svg(svg, log, cfg);
  finish(svg, paths.svg);
  return paths;
}

}  // namespace pcc
