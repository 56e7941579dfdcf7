#pragma once

#include "pcc/ekf.hpp"
#include "pcc/gaussian.hpp"
#include "pcc/motion_model.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace pcc {

/// Box constraint on a single control vector.
struct ControlBounds {
  Vec lower;
  Vec upper;

  /// v in [v_min, v_max], |omega| <= omega_max.
  static ControlBounds unicycle(double v_min, double v_max, double omega_max);
  /// |a_i| <= a_max on every axis.
  static ControlBounds double_integrator(double a_max);
  static ControlBounds defaults(ModelKind kind);

  Vec clamp(const Vec& u) const { return u.cwiseMax(lower).cwiseMin(upper); }
  bool contains(const Vec& u) const;
  void validate(int control_dim) const;
};

/// Stage cost w_p |p - goal|^2 + w_u |u|^2, terminal cost w_T |p_L - goal|^2.
struct CostSpec {
  double position_weight = 1.0;
  double control_weight = 0.05;
  double terminal_weight = 5.0;

  void validate() const;
};

enum class SolverStatus { kConverged, kIterationCapped, kInfeasibleRelaxed };
std::string_view solver_status_name(SolverStatus s);

/// Which collision test the planner enforces at each horizon step.
enum class ConstraintKind {
  kChanceBound,     // chi-squared chance constraint
  kBoundingVolume,  // spheres inflated by k_sigma standard deviations must not overlap
};
std::string_view constraint_kind_id(ConstraintKind k);
ConstraintKind parse_constraint_kind(std::string_view id);

struct HorizonPlan {
  std::vector<Vec> controls;                 // L
  std::vector<Vec> states;                   // L + 1, states[0] is the planning origin
  std::vector<std::vector<double>> margins;  // L x obstacles, rows are steps 1..L
  double cost = 0.0;
  SolverStatus status = SolverStatus::kConverged;
  int iterations = 0;

  double min_margin() const;
};

/// Predicted obstacle center beliefs for look-ahead steps 0..; shorter
/// forecasts are extended by holding the last belief.
struct ObstacleForecast {
  std::vector<GaussianBelief> steps;
  double radius = 0.0;

  const GaussianBelief& at(std::size_t step) const {
    return steps[std::min(step, steps.size() - 1)];
  }
  /// Zero-velocity forecast for a static obstacle.
  static ObstacleForecast stationary(GaussianBelief belief, double radius);
};

struct PlannerConfig {
  int horizon = 10;
  double dt = 0.1;
  double eps = 0.1;
  double robot_radius = 0.2;
  ControlBounds bounds;
  CostSpec cost;
  ConstraintKind constraint = ConstraintKind::kChanceBound;
  double k_sigma = 3.0;  // bounding-volume inflation
  Mat process_noise;     // R used for the last-loop covariance propagation
  int max_iterations = 200;
  double initial_penalty = 1e3;
  bool record_trace = false;

  static PlannerConfig defaults(ModelKind kind);
  void validate(const MotionModel& model) const;
};

/// Diagnostics of one optimization run (filled when record_trace is set).
struct PlannerTrace {
  std::vector<double> penalty_weight;  // per accepted iterate
  std::vector<double> objective;       // augmented objective at that weight
};

struct PlanRequest {
  BeliefState belief;
  Vec goal;  // position
  std::span<const ObstacleForecast> obstacles;
  const HorizonPlan* warm_start = nullptr;  // already shifted
};

/// Receding-horizon plan: minimizes the tracking cost over the control
/// sequence subject to control bounds and one collision constraint per
/// (step, obstacle). Returns the best feasible iterate, or the least
/// violating one flagged kInfeasibleRelaxed.
HorizonPlan plan(const MotionModel& model, const PlanRequest& request, const PlannerConfig& config,
                 PlannerTrace* trace = nullptr);

/// Shifts controls one step forward, duplicates the last, re-rolls the states from `initial_state`.
HorizonPlan shift_warm_start(const MotionModel& model, const HorizonPlan& previous,
                             const Vec& initial_state, double dt);

/// Tracking cost of a plan (states and controls as stored).
double evaluate_cost(const MotionModel& model, const HorizonPlan& plan, const Vec& goal,
                     const CostSpec& cost);

/// Rolls `controls` forward from `x0`.
std::vector<Vec> rollout(const MotionModel& model, const Vec& x0, std::span<const Vec> controls,
                         double dt);

}  // namespace pcc
