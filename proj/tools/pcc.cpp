#include "pcc/collision.hpp"
#include "pcc/export.hpp"
#include "pcc/scenario_io.hpp"
#include "pcc/simulation.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace pcc;

namespace {

// Reference values shown next to ours by `table1`.
struct ReferenceRow {
  Method method;
  double value;
};
constexpr ReferenceRow kTable1Reference[] = {
    {Method::kMonteCarlo, 0.1728},   {Method::kLambert, 0.4280},     {Method::kBoundingVolume, 1.0},
    {Method::kMaxDensity, 1.0},      {Method::kChanceLinear, 0.5398}, {Method::kRectBox, 0.1601},
    {Method::kBound, 0.1772},
};
constexpr double kMatchTolerance = 5e-4;

enum class Format { kTable, kCsv };

void add_format(CLI::App* cmd, Format& format) {
  cmd->add_option("--format", format, "Output format: table or csv")
      ->transform(CLI::CheckedTransformer(std::map<std::string, Format>{{"table", Format::kTable},
                                                                         {"csv", Format::kCsv}}));
}

struct BodyFlags {
  std::vector<double> mean;
  std::vector<double> cov;
  double radius = 0.2;
};

void add_body(CLI::App* cmd, const std::string& name, BodyFlags& b) {
  cmd->add_option("--" + name + "-mean", b.mean, "Center mean, comma separated (2 or 3 numbers)")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--" + name + "-cov", b.cov,
                  "Center covariance: n diagonal entries or n*n row-major entries, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--" + name + "-radius", b.radius, "Radius in m")->capture_default_str();
}

Body to_body(const BodyFlags& f, const std::string& name) {
  const auto n = static_cast<Eigen::Index>(f.mean.size());
  if (n != 2 && n != 3) throw std::invalid_argument("--" + name + "-mean: expected 2 or 3 numbers");
  Body b;
  b.center.mean = Eigen::Map<const Eigen::VectorXd>(f.mean.data(), n);
  if (static_cast<Eigen::Index>(f.cov.size()) == n) {
    b.center.cov = Eigen::Map<const Eigen::VectorXd>(f.cov.data(), n).asDiagonal();
  } else if (static_cast<Eigen::Index>(f.cov.size()) == n * n) {
    b.center.cov = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        f.cov.data(), n, n);
  } else {
    throw std::invalid_argument("--" + name + "-cov: expected " + std::to_string(n) + " or " +
                                std::to_string(n * n) + " numbers");
  }
  b.radius = f.radius;
  try {
    b.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(name + ": " + e.what());
  }
  return b;
}

std::vector<Method> methods_from(const std::string& id) {
  if (id == "all") return {kAllMethods.begin(), kAllMethods.end()};
  return {parse_method(id)};
}

std::string fixed(double x, int digits) {
  if (!std::isfinite(x)) return format_double(x);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

// ---------------------------------------------------------------- collide

struct CollideArgs {
  BodyFlags robot{{0.38, 0.0}, {0.04, 0.04}, 0.2};
  BodyFlags obstacle{{0.0, 0.0}, {0.0, 0.0}, 0.2};
  std::string method = "all";
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  int repetitions = 20;
  Format format = Format::kTable;
};

void add_query_flags(CLI::App* cmd, CollideArgs& a) {
  add_body(cmd, "robot", a.robot);
  add_body(cmd, "obstacle", a.obstacle);
  cmd->add_option("--method", a.method, "Method id or 'all' (bound, mc, lambert, bounding-volume, max-density, "
                                        "chance-linear, rect-box)")
      ->capture_default_str();
  cmd->add_option("--samples", a.samples, "Samples for mc and lambert")->capture_default_str()->check(
      CLI::PositiveNumber);
  cmd->add_option("--seed", a.seed, "Sampling seed")->capture_default_str();
  cmd->add_option("--threads", a.threads, "Sampling threads (0 = all cores)")->capture_default_str();
  add_format(cmd, a.format);
}

int run_collide(const CollideArgs& a) {
  const CollisionQuery q(to_body(a.robot, "robot"), to_body(a.obstacle, "obstacle"));
  const std::vector<Method> methods = methods_from(a.method);
  const SamplingOptions opts{a.samples, a.seed, a.threads};
  int status = 0;
  if (a.format == Format::kCsv) std::cout << "method,value,ci_half_width,wall_ms\n";
  for (Method m : methods) {
    std::optional<ProbabilityEstimate> e;
    std::string error;
    try {
      e = estimate(m, q, opts);
    } catch (const std::logic_error& ex) {
      // with --method all an inapplicable method is reported, not fatal
      error = ex.what();
      if (methods.size() == 1) status = 1;
    }
    const std::string id(method_id(m));
    if (a.format == Format::kCsv) {
      if (e) {
        std::cout << id << ',' << format_double(e->value) << ','
                  << (e->half_width_95 ? format_double(*e->half_width_95) : "") << ','
                  << format_double(e->wall_time_s * 1e3) << '\n';
      } else {
        std::cout << id << ",,,\n";
      }
    } else if (e) {
      std::printf("%-16s %10s %12s %10s ms\n", id.c_str(), fixed(e->value, 4).c_str(),
                  e->half_width_95 ? ("+/- " + fixed(*e->half_width_95, 4)).c_str() : "",
                  fixed(e->wall_time_s * 1e3, 3).c_str());
    }
    if (!e) std::cerr << (methods.size() == 1 ? "error: " : "n/a: ") << error << '\n';
  }
  return status;
}

int run_benchmark(const CollideArgs& a) {
  const CollisionQuery q(to_body(a.robot, "robot"), to_body(a.obstacle, "obstacle"));
  const SamplingOptions opts{a.samples, a.seed, a.threads};
  if (a.format == Format::kCsv) std::cout << "method,mean_ms,stddev_ms,repetitions\n";
  const std::vector<Method> methods = methods_from(a.method);
  for (Method m : methods) {
    const std::string id(method_id(m));
    TimingStats t;
    try {
      t = benchmark_method(m, q, a.repetitions, opts);
    } catch (const std::logic_error& ex) {
      if (methods.size() == 1) throw;
      std::cerr << "n/a: " << ex.what() << '\n';
      continue;
    }
    if (a.format == Format::kCsv) {
      std::cout << id << ',' << format_double(t.mean_s * 1e3) << ',' << format_double(t.stddev_s * 1e3) << ','
                << t.repetitions << '\n';
    } else {
      std::printf("%-16s %12s +/- %-10s ms  (%d runs)\n", id.c_str(), fixed(t.mean_s * 1e3, 4).c_str(),
                  fixed(t.stddev_s * 1e3, 4).c_str(), t.repetitions);
    }
  }
  return 0;
}

// ---------------------------------------------------------------- table1

struct Table1Args {
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string out;
  Format format = Format::kTable;
};

int run_table1(const Table1Args& a) {
  Body robot{GaussianBelief{Vec(2), Mat(2, 2)}, 0.2};
  robot.center.mean << 0.38, 0.0;
  robot.center.cov << 0.04, 0.0, 0.0, 0.04;
  Vec origin = Vec::Zero(2);
  const CollisionQuery q(robot, Body{GaussianBelief::point(origin), 0.2});
  // lambert needs an obstacle density: give the obstacle the robot's covariance
  const CollisionQuery q_uncertain(robot, Body{GaussianBelief{origin, robot.center.cov}, 0.2});
  const SamplingOptions opts{a.samples, a.seed, a.threads};

  std::ostringstream csv;
  csv << "method,label,obstacle_cov,value,ci_half_width,reference,abs_diff,match\n";
  std::vector<std::array<std::string, 6>> rows;
  for (const ReferenceRow& ref : kTable1Reference) {
    const bool uncertain = ref.method == Method::kLambert;
    const ProbabilityEstimate e = estimate(ref.method, uncertain ? q_uncertain : q, opts);
    const double diff = std::abs(e.value - ref.value);
    const bool match = diff < kMatchTolerance;
    const std::string hw = e.half_width_95 ? format_double(*e.half_width_95) : "";
    csv << method_id(ref.method) << ",\"" << method_label(ref.method) << "\"," << (uncertain ? "0.04*I" : "0") << ','
        << format_double(e.value) << ','
        << hw << ',' << format_double(ref.value) << ',' << format_double(diff) << ','
        << (match ? "match" : "mismatch") << '\n';
    rows.push_back({std::string(method_label(ref.method)), fixed(e.value, 4), fixed(ref.value, 4), fixed(diff, 4),
                    match ? "match" : "MISMATCH", fixed(e.wall_time_s * 1e3, 3)});
  }
  if (!a.out.empty()) write_file(a.out, csv.str());
  if (a.format == Format::kCsv) {
    std::cout << csv.str();
  } else {
    std::printf("%-34s %8s %10s %8s %-9s %10s\n", "method", "value", "reference", "|diff|", "flag", "local ms");
    for (const auto& r : rows) {
      std::printf("%-34s %8s %10s %8s %-9s %10s\n", r[0].c_str(), r[1].c_str(), r[2].c_str(), r[3].c_str(),
                  r[4].c_str(), r[5].c_str());
    }
  }
  return 0;
}

// ---------------------------------------------------------------- table2

struct Table2Args {
  std::vector<double> scales{1.0, 4.0, 16.0};
  int seeds = 10;
  std::uint64_t seed = 0;
  double eps = 0.1;
  unsigned threads = 1;
  std::string out;
  Format format = Format::kTable;
};

struct Trend {
  std::string check;
  bool pass;
  std::string detail;
};

std::vector<Trend> table2_trends(const std::vector<NoiseScalingCell>& cells) {
  auto find = [&](ConstraintKind k, double s) -> const NoiseScalingCell& {
    return *std::find_if(cells.begin(), cells.end(),
                         [&](const NoiseScalingCell& c) { return c.method == k && c.scale == s; });
  };
  std::vector<double> scales;
  for (const NoiseScalingCell& c : cells)
    if (c.method == ConstraintKind::kChanceBound) scales.push_back(c.scale);
  std::sort(scales.begin(), scales.end());

  std::vector<Trend> out;
  bool monotone = true;
  std::string detail;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    const double l = find(ConstraintKind::kChanceBound, scales[i]).l;
    detail += (i ? " <= " : "") + fixed(l, 4);
    if (i > 0 && l < find(ConstraintKind::kChanceBound, scales[i - 1]).l) monotone = false;
  }
  out.push_back({"bound l nondecreasing in noise scale", monotone, detail});
  for (double s : scales) {
    const NoiseScalingCell& ours = find(ConstraintKind::kChanceBound, s);
    const NoiseScalingCell& bv = find(ConstraintKind::kBoundingVolume, s);
    out.push_back({"bounding-volume l >= bound l at scale " + format_double(s), bv.l >= ours.l,
                   fixed(bv.l, 4) + " vs " + fixed(ours.l, 4)});
  }
  for (double s : scales) {
    const NoiseScalingCell& ours = find(ConstraintKind::kChanceBound, s);
    const NoiseScalingCell& bv = find(ConstraintKind::kBoundingVolume, s);
    out.push_back({"bounding-volume d >= bound d at scale " + format_double(s), bv.d >= ours.d,
                   fixed(bv.d, 4) + " vs " + fixed(ours.d, 4)});
  }
  return out;
}

int run_table2(const Table2Args& a) {
  if (a.scales.empty()) throw std::invalid_argument("--scales: at least one scale is required");
  for (double s : a.scales)
    if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("--scales: scales must be >= 0");
  const ScenarioConfig base = scenario_single_obstacle(a.eps, a.seed);
  const std::vector<NoiseScalingCell> cells = experiment_noise_scaling(
      base, {ConstraintKind::kChanceBound, ConstraintKind::kBoundingVolume}, a.scales, a.seeds, {a.threads});
  const std::vector<Trend> trends = table2_trends(cells);

  std::ostringstream table;
  table << "method,scale,runs,d,l,T,success_rate,collisions\n";
  for (const NoiseScalingCell& c : cells) {
    table << constraint_kind_id(c.method) << ',' << format_double(c.scale) << ',' << c.runs << ','
          << format_double(c.d) << ',' << format_double(c.l) << ',' << format_double(c.T) << ','
          << format_double(c.success_rate) << ',' << c.collisions << '\n';
  }
  std::ostringstream summary;
  summary << "check,result,detail\n";
  for (const Trend& t : trends) summary << '"' << t.check << "\"," << (t.pass ? "pass" : "fail") << ",\"" << t.detail
                                        << "\"\n";
  if (!a.out.empty()) {
    write_file(std::filesystem::path(a.out) / "table2.csv", table.str());
    write_file(std::filesystem::path(a.out) / "trends.csv", summary.str());
  }
  if (a.format == Format::kCsv) {
    std::cout << table.str() << '\n' << summary.str();
    return 0;
  }
  std::printf("%-16s %6s %5s %8s %8s %8s %8s %6s\n", "method", "scale", "runs", "d", "l", "T", "success", "coll");
  for (const NoiseScalingCell& c : cells) {
    std::printf("%-16s %6s %5d %8s %8s %8s %8s %6d\n", std::string(constraint_kind_id(c.method)).c_str(),
                format_double(c.scale).c_str(), c.runs, fixed(c.d, 3).c_str(), fixed(c.l, 3).c_str(),
                fixed(c.T, 2).c_str(), fixed(c.success_rate, 2).c_str(), c.collisions);
  }
  std::printf("\n");
  for (const Trend& t : trends) std::printf("%-4s %-44s %s\n", t.pass ? "pass" : "FAIL", t.check.c_str(),
                                            t.detail.c_str());
  return 0;
}

// ---------------------------------------------------------------- simulate / plot

struct ScenarioSource {
  std::string scenario;
  std::string preset;
  std::optional<double> eps;
  std::optional<std::uint64_t> seed;
};

void add_source(CLI::App* cmd, ScenarioSource& s) {
  auto* file = cmd->add_option("--scenario", s.scenario, "Scenario file (JSON)");
  auto* preset = cmd->add_option("--preset", s.preset, "Built-in scenario")
                     ->check(CLI::IsMember(preset_names()));
  file->excludes(preset);
  preset->excludes(file);
  cmd->add_option("--eps", s.eps, "Collision probability threshold (preset default 0.1)");
  cmd->add_option("--seed", s.seed, "Noise seed (preset default 0)");
}

ScenarioConfig load(const ScenarioSource& s) {
  ScenarioConfig cfg;
  if (!s.scenario.empty()) {
    cfg = load_scenario(s.scenario);
  } else if (!s.preset.empty()) {
    cfg = preset_scenario(s.preset, 0.1, 0);
  } else {
    throw std::invalid_argument("one of --scenario or --preset is required");
  }
  if (s.eps) cfg.eps = *s.eps;
  if (s.seed) cfg.seed = *s.seed;
  cfg.validate();
  return cfg;
}

struct SimulateArgs {
  ScenarioSource source;
  std::optional<double> noise_scale;
  unsigned threads = 1;
  std::string out;
  Format format = Format::kTable;
};

int run_simulate(const SimulateArgs& a) {
  ScenarioConfig cfg = load(a.source);
  if (a.noise_scale) {
    cfg.noise_scale = *a.noise_scale;
    cfg.validate();
  }
  const RunResult r = run_scenario(cfg, {a.threads});
  if (!a.out.empty()) {
    export_run(r.log, r.metrics, cfg, a.out);
    write_file(std::filesystem::path(a.out) / "scenario.json", scenario_to_json(cfg));
  }
  const RunMetrics& m = r.metrics;
  if (a.format == Format::kCsv) {
    write_metrics_csv(std::cout, m);
    return 0;
  }
  std::printf("success     %s\n", m.success ? "true" : "false");
  std::printf("d           %s m\n", fixed(m.min_distance, 4).c_str());
  std::printf("l           %s m\n", fixed(m.mean_length, 4).c_str());
  std::printf("T           %s s\n", fixed(m.max_duration, 2).c_str());
  std::printf("collisions  %d\n", m.collisions);
  std::printf("plan time   %s ms mean, %s ms max\n", fixed(m.plan_time_mean_ms, 3).c_str(),
              fixed(m.plan_time_max_ms, 3).c_str());
  for (const RobotMetrics& rm : m.robots) {
    std::printf("  %-8s reached %-5s d %s  l %s  T %s\n", rm.id.c_str(), rm.reached ? "true" : "false",
                fixed(rm.min_distance, 4).c_str(), fixed(rm.length, 4).c_str(), fixed(rm.duration, 2).c_str());
  }
  return 0;
}

struct PlotArgs {
  ScenarioSource source;
  std::string trajectory;
  std::string out;
};

int run_plot(const PlotArgs& a) {
  const ScenarioConfig cfg = load(a.source);
  std::ifstream in(a.trajectory, std::ios::binary);
  if (!in) throw std::runtime_error(a.trajectory + ": cannot open");
  RunLog log;
  try {
    log = read_trajectory_csv(in, cfg);
  } catch (const std::runtime_error& e) {
    throw std::invalid_argument(a.trajectory + ": " + e.what());
  }
  std::ostringstream svg;
  write_trajectories_svg(svg, log, cfg);
  write_file(a.out, svg.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collision probabilities between Gaussian spheres and chance-constrained multi-robot planning"};
  app.require_subcommand(1);
  std::function<int()> run;

  CollideArgs collide;
  auto* c = app.add_subcommand("collide", "Collision probability of one robot/obstacle pair by each method");
  add_query_flags(c, collide);
  c->callback([&] { run = [&] { return run_collide(collide); }; });

  CollideArgs bench;
  bench.samples = 100'000;
  auto* b = app.add_subcommand("benchmark", "Wall-time statistics of the probability methods");
  add_query_flags(b, bench);
  b->add_option("--repetitions", bench.repetitions, "Timed calls per method")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  b->callback([&] { run = [&] { return run_benchmark(bench); }; });

  Table1Args t1;
  auto* t1c = app.add_subcommand("table1", "All methods on the reference query next to the reference values");
  t1c->add_option("--samples", t1.samples, "Samples for mc and lambert")->capture_default_str()->check(
      CLI::PositiveNumber);
  t1c->add_option("--seed", t1.seed, "Sampling seed")->capture_default_str();
  t1c->add_option("--threads", t1.threads, "Sampling threads (0 = all cores)")->capture_default_str();
  t1c->add_option("--out", t1.out, "Write the CSV to this file");
  add_format(t1c, t1.format);
  t1c->callback([&] { run = [&] { return run_table1(t1); }; });

  Table2Args t2;
  auto* t2c = app.add_subcommand("table2", "Noise-scaling study: bound vs bounding-volume planner");
  t2c->add_option("--scales", t2.scales, "Measurement noise scales, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  t2c->add_option("--seeds", t2.seeds, "Runs per cell")->capture_default_str()->check(CLI::PositiveNumber);
  t2c->add_option("--seed", t2.seed, "First seed")->capture_default_str();
  t2c->add_option("--eps", t2.eps, "Collision probability threshold")->capture_default_str();
  t2c->add_option("--threads", t2.threads, "Planner threads per tick")->capture_default_str();
  t2c->add_option("--out", t2.out, "Write table2.csv and trends.csv into this directory");
  add_format(t2c, t2.format);
  t2c->callback([&] { run = [&] { return run_table2(t2); }; });

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Closed-loop multi-robot run");
  add_source(s, sim.source);
  s->add_option("--noise-scale", sim.noise_scale, "Measurement noise multiplier (0 = noise-free)");
  s->add_option("--threads", sim.threads, "Planner threads per tick")->capture_default_str();
  s->add_option("--out", sim.out, "Write trajectory.csv, metrics.csv, trajectories.svg and scenario.json here");
  add_format(s, sim.format);
  s->callback([&] { run = [&] { return run_simulate(sim); }; });

  PlotArgs plot;
  auto* p = app.add_subcommand("plot", "Render a trajectory.csv as SVG");
  add_source(p, plot.source);
  p->add_option("--trajectory", plot.trajectory, "trajectory.csv from simulate")->required();
  p->add_option("--out", plot.out, "SVG file to write")->required();
  p->callback([&] { run = [&] { return run_plot(plot); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  try {
    return run();
  } catch (const std::logic_error& e) {  // invalid input: bad geometry, scenario, method id
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
