#include "pcc/simulation.hpp"

#include "pcc/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <set>
#include <thread>

namespace pcc {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string indexed(const char* name, std::size_t i) {
  return std::string(name) + "[" + std::to_string(i) + "]";
}

bool finite(const Vec& v) { return v.allFinite(); }

void check_covariance(const Mat& m, int dim, const std::string& field) {
  if (m.rows() != dim || m.cols() != dim) {
    throw ScenarioError(field, "expected a " + std::to_string(dim) + "x" + std::to_string(dim) + " matrix");
  }
  try {
    require_covariance(m, "covariance");
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(field, e.what());
  }
}

Vec zero_control(const MotionModel& model) { return Vec::Zero(model.control_dim()); }

Vec brake_control(const MotionModel& model, const Vec& state, const Vec& relaxed_first,
                  const PlannerConfig& pc) {
  if (model.kind() == ModelKind::kUnicycle) {
    // Stop translating; turning in place is kept so the robot can reorient.
    Vec u(2);
    u << 0.0, relaxed_first(1);
    return pc.bounds.clamp(u);
  }
  return pc.bounds.clamp(Vec(-state.tail(3) / pc.dt));
}

// The plan a braking robot actually follows, so that others are told the truth.
HorizonPlan braking_plan(const MotionModel& model, const Vec& x0, const Vec& first, const PlannerConfig& pc) {
  HorizonPlan p;
  p.states.push_back(x0);
  for (int l = 0; l < pc.horizon; ++l) {
    const Vec u = l == 0 ? first : brake_control(model, p.states.back(), first, pc);
    p.controls.push_back(u);
    p.states.push_back(model.step(p.states.back(), u, pc.dt));
  }
  p.status = SolverStatus::kInfeasibleRelaxed;
  return p;
}

bool inside_any(const MotionModel& model, const Vec& mean, double radius,
                const std::vector<ObstacleForecast>& obstacles) {
  const Vec p = model.position(mean);
  for (const ObstacleForecast& f : obstacles) {
    if ((p - f.at(0).mean).norm() < radius + f.radius) return true;
  }
  return false;
}

TrajectoryMessage message_from_plan(const MotionModel& model, std::size_t sender, double radius,
                                    const BeliefState& belief, const HorizonPlan& plan,
                                    const PlannerConfig& pc) {
  TrajectoryMessage m{sender, {}, radius};
  const std::vector<BeliefState> horizon =
      propagate_horizon(model, belief, plan.controls, pc.dt, pc.process_noise);
  for (std::size_t l = 0; l < horizon.size(); ++l) {
    m.steps.push_back({model.position(plan.states[l]), model.position_cov(horizon[l].cov)});
  }
  return m;
}

TrajectoryMessage message_from_belief(const MotionModel& model, std::size_t sender, double radius,
                                      const BeliefState& belief) {
  return TrajectoryMessage{sender, {{model.position(belief.mean), model.position_cov(belief.cov)}}, radius};
}

// A message sent at tick t-1 describes times t-1, t, ...; the receiver at tick t
// drops the first entry so that index 0 is the current time.
ObstacleForecast forecast_from_message(const TrajectoryMessage& m) {
  ObstacleForecast f;
  f.radius = m.radius;
  if (m.steps.size() > 1) {
    f.steps.assign(m.steps.begin() + 1, m.steps.end());
  } else {
    f.steps = m.steps;
  }
  return f;
}

struct Agent {
  Vec truth;
  BeliefState belief;
  std::optional<HorizonPlan> warm;
  std::optional<TrajectoryMessage> sent;  // from the previous tick's plan
  PlannerConfig config;
};

struct PlanOutcome {
  HorizonPlan plan;
  bool escape = false;  // already inside a contact radius when planning
  double seconds = 0.0;
  std::exception_ptr error;
};

}  // namespace

NoiseSpec default_noise(ModelKind kind) {
  NoiseSpec n;
  if (kind == ModelKind::kUnicycle) {
    n.measurement = Vec::Zero(3).asDiagonal();
    n.measurement.diagonal() << 0.02, 0.02, 1.2 * kDeg * kDeg;
    n.process = Mat::Identity(3, 3) * 1e-4;
  } else {
    n.measurement = Mat::Identity(3, 3) * 0.02;
    n.process = Mat::Identity(6, 6) * 1e-4;
  }
  return n;
}

void ScenarioConfig::validate() const {
  const MotionModel m(model);
  const int np = m.position_dim();
  if (robots.empty()) throw ScenarioError("robots", "at least one robot is required");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < robots.size(); ++i) {
    const RobotSpec& r = robots[i];
    const std::string f = indexed("robots", i);
    if (r.id.empty()) throw ScenarioError(f + ".id", "must not be empty");
    if (!ids.insert(r.id).second) throw ScenarioError(f + ".id", "duplicate id '" + r.id + "'");
    const int start_dim = 3;  // (x, y, theta) or (x, y, z)
    if (r.start.size() != start_dim || !finite(r.start)) {
      throw ScenarioError(f + ".start", "expected " + std::to_string(start_dim) + " finite numbers");
    }
    if (r.goal.size() != np || !finite(r.goal)) {
      throw ScenarioError(f + ".goal", "expected " + std::to_string(np) + " finite numbers");
    }
    if (!(r.radius > 0.0) || !std::isfinite(r.radius)) throw ScenarioError(f + ".radius", "must be positive");
  }
  for (std::size_t i = 0; i < static_obstacles.size(); ++i) {
    const Body& b = static_obstacles[i];
    const std::string f = indexed("static_obstacles", i);
    if (b.center.mean.size() != np || !finite(b.center.mean)) {
      throw ScenarioError(f + ".center", "expected " + std::to_string(np) + " finite numbers");
    }
    check_covariance(b.center.cov, np, f + ".cov");
    if (!(b.radius > 0.0) || !std::isfinite(b.radius)) throw ScenarioError(f + ".radius", "must be positive");
  }
  if (!(eps > 0.0 && eps < 1.0)) throw ScenarioError("eps", "must lie in (0, 1)");
  check_covariance(noise.process, m.state_dim(), "measurement_noise.process");
  check_covariance(noise.measurement, m.measurement_dim(), "measurement_noise.measurement");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) throw ScenarioError("noise_scale", "must be >= 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ScenarioError("dt", "must be positive");
  if (!(max_duration > 0.0) || !std::isfinite(max_duration)) throw ScenarioError("max_duration", "must be positive");
  if (!(goal_tolerance >= 0.0) || !std::isfinite(goal_tolerance)) {
    throw ScenarioError("goal_tolerance", "must be >= 0");
  }
  if (planner.k_sigma && !(*planner.k_sigma >= 0.0)) throw ScenarioError("planner.k_sigma", "must be >= 0");
  try {
    planner_config(robots.front()).validate(m);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("planner", e.what());
  }
}

PlannerConfig ScenarioConfig::planner_config(const RobotSpec& robot) const {
  PlannerConfig c = PlannerConfig::defaults(model);
  c.dt = dt;
  c.eps = eps;
  c.robot_radius = robot.radius;
  c.process_noise = noise.process;
  if (planner.horizon) c.horizon = *planner.horizon;
  if (planner.bounds) c.bounds = *planner.bounds;
  if (planner.cost) c.cost = *planner.cost;
  if (planner.constraint) c.constraint = *planner.constraint;
  if (planner.k_sigma) c.k_sigma = *planner.k_sigma;
  return c;
}

Vec ScenarioConfig::initial_state(const RobotSpec& robot) const {
  if (model == ModelKind::kUnicycle) return MotionModel(model).normalized(robot.start);
  Vec x = Vec::Zero(6);
  x.head(3) = robot.start;
  return x;
}

ScenarioConfig scenario_position_exchange(ModelKind kind, int n_robots, double radius, double eps,
                                          std::uint64_t seed) {
  const bool planar = kind == ModelKind::kUnicycle;
  if (planar ? (n_robots != 2 && n_robots != 4) : (n_robots != 4 && n_robots != 6)) {
    throw std::invalid_argument("position exchange supports 2 or 4 unicycles and 4 or 6 3-D robots, got " +
                                std::to_string(n_robots));
  }
  ScenarioConfig cfg;
  cfg.model = kind;
  cfg.eps = eps;
  cfg.seed = seed;
  cfg.noise = default_noise(kind);
  cfg.max_duration = 30.0;
  for (int i = 0; i < n_robots; ++i) {
    const double angle = std::numbers::pi + 2.0 * std::numbers::pi * i / n_robots;
    const double x = 2.0 * std::cos(angle);
    const double y = 2.0 * std::sin(angle);
    RobotSpec r;
    r.id = "r" + std::to_string(i);
    r.radius = radius;
    if (planar) {
      r.start = Vec(3);
      r.start << x, y, wrap_angle(angle + std::numbers::pi);
      r.goal = Vec(2);
      r.goal << -x, -y;
    } else {
      r.start = Vec(3);
      r.start << x, y, 1.0;
      r.goal = Vec(3);
      r.goal << -x, -y, 1.0;
    }
    // cos/sin of multiples of pi/2 leave 1e-16 residue; snap it for clean files
    for (Eigen::Index k = 0; k < r.start.size(); ++k)
      if (std::abs(r.start(k)) < 1e-12) r.start(k) = 0.0;
    for (Eigen::Index k = 0; k < r.goal.size(); ++k)
      if (std::abs(r.goal(k)) < 1e-12) r.goal(k) = 0.0;
    cfg.robots.push_back(std::move(r));
  }
  return cfg;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"exchange2", "exchange4", "exchange4-3d", "exchange6-3d"};
  return names;
}

ScenarioConfig preset_scenario(const std::string& name, double eps, std::uint64_t seed) {
  if (name == "exchange2") return scenario_position_exchange(ModelKind::kUnicycle, 2, 0.2, eps, seed);
  if (name == "exchange4") return scenario_position_exchange(ModelKind::kUnicycle, 4, 0.2, eps, seed);
  if (name == "exchange4-3d") return scenario_position_exchange(ModelKind::kDoubleIntegrator3D, 4, 0.2, eps, seed);
  if (name == "exchange6-3d") return scenario_position_exchange(ModelKind::kDoubleIntegrator3D, 6, 0.2, eps, seed);
  throw std::invalid_argument("unknown preset '" + name +
                              "' (expected exchange2, exchange4, exchange4-3d or exchange6-3d)");
}

ScenarioConfig scenario_single_obstacle(double eps, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.model = ModelKind::kUnicycle;
  cfg.eps = eps;
  cfg.seed = seed;
  cfg.noise = default_noise(cfg.model);
  cfg.max_duration = 30.0;
  RobotSpec r;
  r.id = "r0";
  r.start = Vec::Zero(3);
  r.goal = Vec(2);
  r.goal << 3.0, 0.0;
  r.radius = 0.2;
  cfg.robots.push_back(r);
  Vec c(2);
  c << 1.5, 0.0;
  cfg.static_obstacles.push_back(Body{GaussianBelief::point(c), 0.2});
  return cfg;
}

RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const MotionModel model = cfg.motion_model();
  const std::size_t n = cfg.robots.size();
  const Mat h = model.measurement_matrix();
  const bool exact_state = cfg.noise_scale == 0.0;
  const Mat q = cfg.noise.measurement * cfg.noise_scale;
  const Mat q_factor = psd_sqrt_factor(q);
  // Zero noise scale is the noise-free diagnostic mode: no process noise either.
  const Mat process = exact_state ? Mat(Mat::Zero(model.state_dim(), model.state_dim())) : cfg.noise.process;
  const Mat r_factor = psd_sqrt_factor(process);
  const long max_ticks = std::lround(cfg.max_duration / cfg.dt);

  std::vector<ObstacleForecast> statics;
  for (const Body& b : cfg.static_obstacles) statics.push_back(ObstacleForecast::stationary(b.center, b.radius));

  std::vector<Agent> agents(n);
  for (std::size_t i = 0; i < n; ++i) {
    Agent& a = agents[i];
    a.truth = cfg.initial_state(cfg.robots[i]);
    a.config = cfg.planner_config(cfg.robots[i]);
    a.config.process_noise = process;
    Mat p0 = Mat::Zero(model.state_dim(), model.state_dim());
    if (!exact_state) p0 = symmetrized(h.transpose() * q * h);
    a.belief = {a.truth, p0};
  }

  auto sample = [](std::uint64_t key, const Mat& factor) {
    NormalSampler normal(key);
    Vec z(factor.cols());
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal();
    return Vec(factor * z);
  };

  RunResult result;
  for (long tick = 0;; ++tick) {
    const auto t = static_cast<std::uint64_t>(tick);
    TickRecord rec;
    rec.tick = static_cast<int>(tick);
    rec.robots.resize(n);

    // (1) measurement update
    for (std::size_t i = 0; i < n; ++i) {
      Agent& a = agents[i];
      if (exact_state) {
        a.belief = {a.truth, Mat::Zero(model.state_dim(), model.state_dim())};
      } else {
        Vec z = h * a.truth + sample(stream_key(cfg.seed, {t, i, 0}), q_factor);
        if (auto idx = model.angle_index()) z(*idx) = wrap_angle(z(*idx));
        try {
          a.belief = ekf_update(model, a.belief, z, q);
        } catch (const std::exception& e) {
          throw std::runtime_error("tick " + std::to_string(tick) + ", robot " + cfg.robots[i].id + ": " + e.what());
        }
      }
    }

    // (2) message exchange: previous plans, or the current belief before the first plan
    std::vector<TrajectoryMessage> outbox(n);
    for (std::size_t i = 0; i < n; ++i) {
      outbox[i] = agents[i].sent ? *agents[i].sent
                                 : message_from_belief(model, i, cfg.robots[i].radius, agents[i].belief);
    }

    bool all_reached = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double dist = (model.position(agents[i].truth) - cfg.robots[i].goal).norm();
      all_reached = all_reached && dist <= cfg.goal_tolerance;
    }
    if (all_reached || tick >= max_ticks) {
      for (std::size_t i = 0; i < n; ++i) {
        RobotTick& rt = rec.robots[i];
        rt.truth = agents[i].truth;
        rt.belief = agents[i].belief;
        rt.control = zero_control(model);
        rt.min_margin = std::numeric_limits<double>::infinity();
        rt.messages_received = static_cast<int>(n - 1);
      }
      result.log.ticks.push_back(std::move(rec));
      break;
    }

    // (3) plan, one independent problem per robot
    std::vector<PlanOutcome> outcomes(n);
    auto plan_robot = [&](std::size_t i) {
      try {
        std::vector<ObstacleForecast> obstacles = statics;
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i) obstacles.push_back(forecast_from_message(outbox[j]));
        }
        const Agent& a = agents[i];
        const auto start = std::chrono::steady_clock::now();
        outcomes[i].plan = plan(model, {a.belief, cfg.robots[i].goal, obstacles, a.warm ? &*a.warm : nullptr},
                                a.config);
        outcomes[i].escape = inside_any(model, a.belief.mean, cfg.robots[i].radius, obstacles);
        outcomes[i].seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      } catch (...) {
        outcomes[i].error = std::current_exception();
      }
    };
    const unsigned workers = std::min<unsigned>(
        options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads,
        static_cast<unsigned>(n));
    if (workers <= 1) {
      for (std::size_t i = 0; i < n; ++i) plan_robot(i);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t i = w; i < n; i += workers) plan_robot(i);
        });
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!outcomes[i].error) continue;
      try {
        std::rethrow_exception(outcomes[i].error);
      } catch (const std::exception& e) {
        throw std::runtime_error("tick " + std::to_string(tick) + ", robot " + cfg.robots[i].id + ": " + e.what());
      }
    }

    // (4) apply the first control, propagate truth and belief
    for (std::size_t i = 0; i < n; ++i) {
      Agent& a = agents[i];
      const HorizonPlan& p = outcomes[i].plan;
      // Infeasible plans mean brake, unless the robot already overlaps something:
      // then the least-violating plan is the way out.
      const bool brake = p.status == SolverStatus::kInfeasibleRelaxed && !outcomes[i].escape;
      const HorizonPlan executed =
          brake ? braking_plan(model, a.belief.mean,
                               brake_control(model, a.belief.mean, p.controls.front(), a.config), a.config)
                : p;
      const Vec u = executed.controls.front();

      RobotTick& rt = rec.robots[i];
      rt.truth = a.truth;
      rt.belief = a.belief;
      rt.control = u;
      rt.min_margin = p.min_margin();
      rt.status = p.status;
      rt.messages_received = static_cast<int>(n - 1);
      rt.plan_time_s = outcomes[i].seconds;

      a.sent = message_from_plan(model, i, cfg.robots[i].radius, a.belief, executed, a.config);
      a.truth = model.normalized(model.step(a.truth, u, cfg.dt) +
                                 sample(stream_key(cfg.seed, {t, i, 1}), r_factor));
      a.belief = ekf_predict(model, a.belief, u, cfg.dt, process);
      a.warm = shift_warm_start(model, p, a.belief.mean, cfg.dt);
    }
    result.log.ticks.push_back(std::move(rec));
  }

  result.metrics = compute_metrics(result.log, cfg);
  return result;
}

RunMetrics compute_metrics(const RunLog& log, const ScenarioConfig& cfg) {
  const MotionModel model = cfg.motion_model();
  const std::size_t n = cfg.robots.size();
  const double inf = std::numeric_limits<double>::infinity();
  RunMetrics m;
  m.robots.resize(n);
  std::vector<std::optional<double>> arrival(n);
  std::vector<double> plan_sum(n, 0.0);
  std::vector<int> plan_count(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    m.robots[i].id = cfg.robots[i].id;
    m.robots[i].min_distance = inf;
  }
  m.min_distance = inf;

  for (std::size_t k = 0; k < log.ticks.size(); ++k) {
    const TickRecord& rec = log.ticks[k];
    if (rec.robots.size() != n) throw std::invalid_argument("log does not match the scenario's robot count");
    for (std::size_t i = 0; i < n; ++i) {
      const Vec p = model.position(rec.robots[i].truth);
      RobotMetrics& rm = m.robots[i];
      if (k > 0) rm.length += (p - model.position(log.ticks[k - 1].robots[i].truth)).norm();
      if (!arrival[i] && (p - cfg.robots[i].goal).norm() <= cfg.goal_tolerance) arrival[i] = rec.tick * cfg.dt;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = (p - model.position(rec.robots[j].truth)).norm();
        rm.min_distance = std::min(rm.min_distance, d);
        m.robots[j].min_distance = std::min(m.robots[j].min_distance, d);
        if (d < cfg.robots[i].radius + cfg.robots[j].radius) {
          ++rm.collisions;
          ++m.robots[j].collisions;
          ++m.collisions;
        }
      }
      for (const Body& b : cfg.static_obstacles) {
        const double d = (p - b.center.mean).norm();
        rm.min_distance = std::min(rm.min_distance, d);
        if (d < cfg.robots[i].radius + b.radius) {
          ++rm.collisions;
          ++m.collisions;
        }
      }
      if (rec.robots[i].plan_time_s > 0.0) {
        plan_sum[i] += rec.robots[i].plan_time_s;
        ++plan_count[i];
        rm.plan_time_max_ms = std::max(rm.plan_time_max_ms, rec.robots[i].plan_time_s * 1e3);
      }
    }
  }

  const double end_time = log.ticks.empty() ? 0.0 : log.ticks.back().tick * cfg.dt;
  double total_plan = 0.0;
  int total_count = 0;
  m.success = !log.ticks.empty();
  for (std::size_t i = 0; i < n; ++i) {
    RobotMetrics& rm = m.robots[i];
    rm.reached = arrival[i].has_value();
    rm.duration = arrival[i].value_or(end_time);
    if (plan_count[i] > 0) rm.plan_time_mean_ms = plan_sum[i] / plan_count[i] * 1e3;
    total_plan += plan_sum[i];
    total_count += plan_count[i];
    m.plan_time_max_ms = std::max(m.plan_time_max_ms, rm.plan_time_max_ms);
    m.min_distance = std::min(m.min_distance, rm.min_distance);
    m.mean_length += rm.length / static_cast<double>(n);
    m.max_duration = std::max(m.max_duration, rm.duration);
    m.success = m.success && rm.reached;
  }
  if (total_count > 0) m.plan_time_mean_ms = total_plan / total_count * 1e3;
  m.success = m.success && m.collisions == 0;
  return m;
}

std::vector<NoiseScalingCell> experiment_noise_scaling(const ScenarioConfig& base,
                                                       const std::vector<ConstraintKind>& methods,
                                                       const std::vector<double>& scales, int seeds,
                                                       const RunOptions& options) {
  if (seeds < 1) throw std::invalid_argument("experiment_noise_scaling: seeds must be >= 1");
  std::vector<NoiseScalingCell> cells;
  for (ConstraintKind method : methods) {
    for (double scale : scales) {
      NoiseScalingCell cell;
      cell.method = method;
      cell.scale = scale;
      int successes = 0;
      for (int s = 0; s < seeds; ++s) {
        ScenarioConfig cfg = base;
        cfg.noise_scale = scale;
        cfg.planner.constraint = method;
        cfg.seed = base.seed + static_cast<std::uint64_t>(s);
        const RunMetrics m = run_scenario(cfg, options).metrics;
        cell.d += m.min_distance;
        cell.l += m.mean_length;
        cell.T += m.max_duration;
        cell.collisions += m.collisions;
        successes += m.success ? 1 : 0;
        ++cell.runs;
      }
      cell.d /= cell.runs;
      cell.l /= cell.runs;
      cell.T /= cell.runs;
      cell.success_rate = static_cast<double>(successes) / cell.runs;
      cells.push_back(cell);
    }
  }
  return cells;
}

}  // namespace pcc
