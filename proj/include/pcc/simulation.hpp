#pragma once

#include "pcc/collision.hpp"
#include "pcc/ekf.hpp"
#include "pcc/planner.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcc {

/// Raised for invalid scenarios; `field` names the offending entry
/// (for example "robots[1].radius").
class ScenarioError : public std::invalid_argument {
 public:
  ScenarioError(std::string field, const std::string& message)
      : std::invalid_argument(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct RobotSpec {
  std::string id;
  Vec start;  // unicycle (x, y, theta) in radians; integrator position (velocity starts at 0)
  Vec goal;   // position
  double radius = 0.2;
};

/// Planner settings a scenario may override; unset entries use the model defaults.
struct PlannerOverrides {
  std::optional<int> horizon;
  std::optional<ControlBounds> bounds;
  std::optional<CostSpec> cost;
  std::optional<ConstraintKind> constraint;
  std::optional<double> k_sigma;
};

struct ScenarioConfig {
  ModelKind model = ModelKind::kUnicycle;
  std::vector<RobotSpec> robots;
  std::vector<Body> static_obstacles;
  double eps = 0.1;
  NoiseSpec noise;           // process R (state dim) and measurement Q (3x3, rad^2 for heading)
  double noise_scale = 1.0;  // multiplies Q; 0 means exact state knowledge and no process noise
  double dt = 0.1;
  double max_duration = 30.0;
  double goal_tolerance = 0.1;
  std::uint64_t seed = 0;
  PlannerOverrides planner;

  /// Throws ScenarioError naming the first invalid field.
  void validate() const;
  MotionModel motion_model() const { return MotionModel(model); }
  PlannerConfig planner_config(const RobotSpec& robot) const;
  Vec initial_state(const RobotSpec& robot) const;
};

/// Default noise: Q = diag(0.02 m^2, 0.02 m^2, 1.2 deg^2) for the unicycle,
/// 0.02 m^2 per axis for the integrator; R = 1e-4 per state component.
NoiseSpec default_noise(ModelKind kind);

/// Robots evenly spaced on a circle of radius 2 m (3-D: at z = 1 m), each
/// heading for the antipodal start. Unicycle: n in {2, 4}; integrator: n in {4, 6}.
ScenarioConfig scenario_position_exchange(ModelKind kind, int n_robots, double radius, double eps,
                                          std::uint64_t seed);
/// exchange2, exchange4, exchange4-3d, exchange6-3d.
ScenarioConfig preset_scenario(const std::string& name, double eps, std::uint64_t seed);
const std::vector<std::string>& preset_names();

/// One robot from (0, 0) to (3, 0) past a known obstacle of radius 0.2 m at (1.5, 0).
ScenarioConfig scenario_single_obstacle(double eps, std::uint64_t seed);

/// Per-step broadcast of a robot's last plan: mean pose and position covariance.
struct TrajectoryMessage {
  std::size_t sender = 0;
  std::vector<GaussianBelief> steps;  // look-ahead 0..L of the sender's previous plan
  double radius = 0.0;
};

struct RobotTick {
  Vec truth;
  BeliefState belief;  // after the measurement update
  Vec control;         // applied
  double min_margin = 0.0;
  SolverStatus status = SolverStatus::kConverged;
  int messages_received = 0;
  double plan_time_s = 0.0;
};

struct TickRecord {
  int tick = 0;
  std::vector<RobotTick> robots;
};

/// Append-only, one record per tick, one entry per robot.
struct RunLog {
  std::vector<TickRecord> ticks;
};

struct RobotMetrics {
  std::string id;
  double min_distance = 0.0;  // to any other robot or obstacle, center to center
  double length = 0.0;
  double duration = 0.0;
  bool reached = false;
  int collisions = 0;
  double plan_time_mean_ms = 0.0;
  double plan_time_max_ms = 0.0;
};

struct RunMetrics {
  std::vector<RobotMetrics> robots;
  double min_distance = 0.0;  // d
  double mean_length = 0.0;   // l averaged over robots
  double max_duration = 0.0;  // T of the slowest robot
  int collisions = 0;
  bool success = false;
  double plan_time_mean_ms = 0.0;
  double plan_time_max_ms = 0.0;
};

struct RunResult {
  RunMetrics metrics;
  RunLog log;
};

struct RunOptions {
  unsigned threads = 1;  // planners per tick in parallel; results do not depend on it
};

/// Closed-loop run: measure and update, exchange last plans, plan, apply the
/// first control with process noise, predict. Ends when every robot is within
/// goal_tolerance or max_duration has elapsed.
RunResult run_scenario(const ScenarioConfig& cfg, const RunOptions& options = {});

/// d, l, T and collisions from the ground-truth states in `log`.
RunMetrics compute_metrics(const RunLog& log, const ScenarioConfig& cfg);

struct NoiseScalingCell {
  ConstraintKind method = ConstraintKind::kChanceBound;
  double scale = 1.0;
  int runs = 0;
  double d = 0.0;  // means over seeds
  double l = 0.0;
  double T = 0.0;
  double success_rate = 0.0;
  int collisions = 0;
};

/// Runs every (method, scale, seed) combination of `base` with seeds
/// base.seed .. base.seed + seeds - 1 and averages d, l, T per cell.
std::vector<NoiseScalingCell> experiment_noise_scaling(const ScenarioConfig& base,
                                                       const std::vector<ConstraintKind>& methods,
                                                       const std::vector<double>& scales, int seeds,
                                                       const RunOptions& options = {});

}  // namespace pcc
