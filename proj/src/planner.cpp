#include "pcc/planner.hpp"

#include "pcc/collision.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pcc {

namespace {

constexpr double kMaxPenalty = 1e12;
constexpr double kFeasibilityTol = 1e-6;
// The penalty acts on h - offset so that penalty minimizers land on the
// feasible side of the true constraint h >= 0.
constexpr double kPenaltyOffset = 1e-4;
constexpr double kArmijo = 1e-4;

// One (step, obstacle) constraint: |p - center|^2 >= clearance_sq, reported as
// scale * (|p - center|^2 - clearance_sq). Its gradient at an iterate is the
// affine-form gradient 2 * lambda_max * mu of the margin about that iterate.
struct KeepOut {
  Vec center;
  double clearance_sq = 0.0;
  double scale = 1.0;

  double h(const Vec& p) const { return (p - center).squaredNorm() - clearance_sq; }
  Vec grad_h(const Vec& p) const { return 2.0 * (p - center); }
  double margin(const Vec& p) const { return scale * h(p); }
};

struct Evaluation {
  std::vector<Vec> states;
  double cost = 0.0;
  double penalty = 0.0;  // sum of min(0, h - offset)^2
  double objective = 0.0;
  double min_margin = std::numeric_limits<double>::infinity();
};

class ShootingProblem {
 public:
  ShootingProblem(const MotionModel& model, const Vec& x0, const Vec& goal,
                  const PlannerConfig& config, std::vector<std::vector<KeepOut>> keepouts)
      : model_(model), x0_(x0), goal_(goal), config_(config), keepouts_(std::move(keepouts)),
        m_(model.control_dim()), horizon_(config.horizon) {}

  int control_dim() const { return m_; }
  int horizon() const { return horizon_; }

  Vec control(const Eigen::VectorXd& flat, int l) const { return flat.segment(l * m_, m_); }

  Eigen::VectorXd project(Eigen::VectorXd flat) const {
    for (int l = 0; l < horizon_; ++l) {
      flat.segment(l * m_, m_) = config_.bounds.clamp(control(flat, l));
    }
    return flat;
  }

  Evaluation evaluate(const Eigen::VectorXd& flat, double rho) const {
    Evaluation ev;
    ev.states.reserve(static_cast<std::size_t>(horizon_) + 1);
    ev.states.push_back(x0_);
    const CostSpec& w = config_.cost;
    for (int l = 0; l < horizon_; ++l) {
      const Vec u = control(flat, l);
      const Vec& x = ev.states.back();
      ev.cost += w.position_weight * (model_.position(x) - goal_).squaredNorm() +
                 w.control_weight * u.squaredNorm();
      ev.states.push_back(model_.step(x, u, config_.dt));
    }
    ev.cost += w.terminal_weight * (model_.position(ev.states.back()) - goal_).squaredNorm();
    for (int l = 1; l <= horizon_; ++l) {
      const Vec p = model_.position(ev.states[static_cast<std::size_t>(l)]);
      for (const KeepOut& k : keepouts_[static_cast<std::size_t>(l - 1)]) {
        ev.min_margin = std::min(ev.min_margin, k.margin(p));
        const double v = std::min(0.0, k.h(p) - kPenaltyOffset);
        ev.penalty += v * v;
      }
    }
    ev.objective = ev.cost + rho * ev.penalty;
    return ev;
  }

  // Adjoint gradient of the augmented objective with respect to the flat controls.
  Eigen::VectorXd gradient(const Eigen::VectorXd& flat, const Evaluation& ev, double rho) const {
    const int n = model_.state_dim();
    const int np = model_.position_dim();
    const CostSpec& w = config_.cost;
    Eigen::VectorXd grad(flat.size());
    Vec adjoint = Vec::Zero(n);
    {
      const Vec p = model_.position(ev.states.back());
      adjoint.head(np) += 2.0 * w.terminal_weight * (p - goal_);
    }
    for (int l = horizon_; l >= 1; --l) {
      // adjoint holds the downstream part of d/dx_l; add the explicit terms of x_l
      const auto idx = static_cast<std::size_t>(l);
      const Vec p = model_.position(ev.states[idx]);
      Vec dp = Vec::Zero(np);
      for (const KeepOut& k : keepouts_[idx - 1]) {
        const double v = std::min(0.0, k.h(p) - kPenaltyOffset);
        if (v < 0.0) dp += 2.0 * rho * v * k.grad_h(p);
      }
      if (l < horizon_) dp += 2.0 * w.position_weight * (p - goal_);
      adjoint.head(np) += dp;

      // step l-1 -> l
      const Vec u = control(flat, l - 1);
      const MotionJacobians j = model_.jacobians(ev.states[idx - 1], u, config_.dt);
      grad.segment((l - 1) * m_, m_) = 2.0 * w.control_weight * u + j.control.transpose() * adjoint;
      adjoint = j.state.transpose() * adjoint;
    }
    return grad;
  }

  std::vector<std::vector<double>> margins(const std::vector<Vec>& states) const {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(horizon_));
    for (int l = 1; l <= horizon_; ++l) {
      const Vec p = model_.position(states[static_cast<std::size_t>(l)]);
      for (const KeepOut& k : keepouts_[static_cast<std::size_t>(l - 1)]) {
        out[static_cast<std::size_t>(l - 1)].push_back(k.margin(p));
      }
    }
    return out;
  }

 private:
  const MotionModel& model_;
  Vec x0_;
  Vec goal_;
  const PlannerConfig& config_;
  std::vector<std::vector<KeepOut>> keepouts_;
  int m_;
  int horizon_;
};

struct SolveResult {
  Eigen::VectorXd controls;
  Evaluation eval;
  bool feasible = false;
  bool converged = false;
  int iterations = 0;
};

bool better(const SolveResult& a, const SolveResult& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.feasible) return a.eval.cost < b.eval.cost;
  if (a.eval.penalty != b.eval.penalty) return a.eval.penalty < b.eval.penalty;
  return a.eval.cost < b.eval.cost;
}

SolveResult solve(const ShootingProblem& problem, Eigen::VectorXd u, const PlannerConfig& config,
                  PlannerTrace* trace) {
  double rho = config.initial_penalty;
  u = problem.project(std::move(u));
  Evaluation ev = problem.evaluate(u, rho);
  Eigen::VectorXd grad = problem.gradient(u, ev, rho);

  SolveResult best_feasible;
  SolveResult best_any;
  bool have_feasible = false;
  auto consider = [&](const Eigen::VectorXd& cand, const Evaluation& e, int it) {
    SolveResult r{cand, e, e.min_margin >= -kFeasibilityTol, false, it};
    if (r.feasible && (!have_feasible || r.eval.cost < best_feasible.eval.cost)) {
      best_feasible = r;
      have_feasible = true;
    }
    if (best_any.controls.size() == 0 || better(r, best_any)) best_any = r;
  };
  consider(u, ev, 0);
  if (trace) {
    trace->penalty_weight.push_back(rho);
    trace->objective.push_back(ev.objective);
  }

  double step = 1e-2;
  bool converged = false;
  int it = 0;
  while (it < config.max_iterations) {
    ++it;
    bool accepted = false;
    Eigen::VectorXd next;
    Evaluation next_ev;
    for (int ls = 0; ls < 50; ++ls) {
      next = problem.project(u - step * grad);
      const double decrease = grad.dot(u - next);
      if (decrease <= 0.0) break;  // projected gradient vanished
      next_ev = problem.evaluate(next, rho);
      if (next_ev.objective <= ev.objective - kArmijo * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }

    bool stationary = !accepted;
    if (accepted) {
      const Eigen::VectorXd next_grad = problem.gradient(next, next_ev, rho);
      const Eigen::VectorXd s = next - u;
      const Eigen::VectorXd y = next_grad - grad;
      const double sy = s.dot(y);
      const double prev_objective = ev.objective;
      // Barzilai-Borwein trial step for the next line search
      step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-10, 1e4) : std::min(step * 2.0, 1e4);
      u = std::move(next);
      ev = std::move(next_ev);
      grad = next_grad;
      consider(u, ev, it);
      if (trace) {
        trace->penalty_weight.push_back(rho);
        trace->objective.push_back(ev.objective);
      }
      stationary = prev_objective - ev.objective <= 1e-12 * std::max(1.0, std::abs(prev_objective)) ||
                   s.lpNorm<Eigen::Infinity>() < 1e-10;
    }

    const bool feasible = ev.min_margin >= -kFeasibilityTol;
    if (!feasible) {
      if (rho >= kMaxPenalty && stationary) break;
      rho = std::min(rho * 2.0, kMaxPenalty);
      ev.objective = ev.cost + rho * ev.penalty;
      grad = problem.gradient(u, ev, rho);
      step = std::max(step * 0.5, 1e-10);
    } else if (stationary) {
      converged = true;
      break;
    }
  }

  SolveResult out = have_feasible ? best_feasible : best_any;
  out.converged = converged && have_feasible;
  out.iterations = it;
  return out;
}

Eigen::VectorXd flatten(std::span<const Vec> controls, int m) {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(controls.size()) * m);
  for (std::size_t l = 0; l < controls.size(); ++l) {
    flat.segment(static_cast<Eigen::Index>(l) * m, m) = controls[l];
  }
  return flat;
}

// Heading-pursuit rollout for the unicycle; `bias` rotates the target heading
// (negative = keep right).
Eigen::VectorXd unicycle_seed(const MotionModel& model, const Vec& x0, const Vec& goal,
                              const PlannerConfig& config, double bias) {
  const ControlBounds& b = config.bounds;
  std::vector<Vec> controls;
  Vec x = x0;
  for (int l = 0; l < config.horizon; ++l) {
    const Vec d = goal - model.position(x);
    const double dist = d.norm();
    Vec u(2);
    if (dist < 1e-9) {
      u << 0.0, 0.0;
    } else {
      const double err = wrap_angle(std::atan2(d(1), d(0)) + bias - x(2));
      const double v = b.upper(0) * std::max(0.0, std::cos(err)) * std::min(1.0, dist / 0.5);
      u << v, 3.0 * err;
    }
    u = b.clamp(u);
    controls.push_back(u);
    x = model.step(x, u, config.dt);
  }
  return flatten(controls, 2);
}

// PD pursuit for the double integrator; `bias` adds a lateral acceleration to
// the right of the goal direction in the x-y plane.
Eigen::VectorXd integrator_seed(const MotionModel& model, const Vec& x0, const Vec& goal,
                                const PlannerConfig& config, double bias) {
  const ControlBounds& b = config.bounds;
  std::vector<Vec> controls;
  Vec x = x0;
  for (int l = 0; l < config.horizon; ++l) {
    const Vec d = goal - model.position(x);
    Vec a = 2.0 * d - 2.5 * Vec(x.tail(3));
    const double planar = std::hypot(d(0), d(1));
    if (bias != 0.0 && planar > 1e-9) {
      Vec right(3);
      right << d(1) / planar, -d(0) / planar, 0.0;
      a += bias * b.upper(0) * right;
    }
    a = b.clamp(a);
    controls.push_back(a);
    x = model.step(x, a, config.dt);
  }
  return flatten(controls, 3);
}

Eigen::VectorXd braking_seed(const MotionModel& model, const Vec& x0, const PlannerConfig& config) {
  std::vector<Vec> controls;
  Vec x = x0;
  for (int l = 0; l < config.horizon; ++l) {
    Vec u;
    if (model.kind() == ModelKind::kUnicycle) {
      u = Vec::Zero(2);
    } else {
      u = config.bounds.clamp(Vec(-x.tail(3) / config.dt));
    }
    controls.push_back(u);
    x = model.step(x, u, config.dt);
  }
  return flatten(controls, model.control_dim());
}

void validate_request(const MotionModel& model, const PlanRequest& req, const PlannerConfig& config) {
  if (req.belief.mean.size() != model.state_dim() || req.belief.cov.rows() != model.state_dim() ||
      req.belief.cov.cols() != model.state_dim()) {
    throw std::invalid_argument("plan: belief does not match the motion model");
  }
  if (req.goal.size() != model.position_dim()) {
    throw std::invalid_argument("plan: goal dimension does not match the motion model");
  }
  for (const ObstacleForecast& f : req.obstacles) {
    if (f.steps.empty()) throw std::invalid_argument("plan: malformed forecast (empty)");
    if (!(f.radius > 0.0)) throw std::invalid_argument("plan: malformed forecast (radius)");
    for (const GaussianBelief& g : f.steps) {
      if (g.mean.size() != model.position_dim() || g.cov.rows() != model.position_dim() ||
          g.cov.cols() != model.position_dim() || !g.mean.allFinite() || !g.cov.allFinite()) {
        throw std::invalid_argument("plan: malformed forecast (dimension)");
      }
    }
  }
  if (req.warm_start &&
      static_cast<int>(req.warm_start->controls.size()) != config.horizon) {
    throw std::invalid_argument("plan: warm start has the wrong horizon");
  }
}

std::vector<std::vector<KeepOut>> build_keepouts(const MotionModel& model, const PlanRequest& req,
                                                 const PlannerConfig& config) {
  std::vector<Vec> last_loop;
  if (req.warm_start) {
    last_loop = req.warm_start->controls;
  } else {
    last_loop.assign(static_cast<std::size_t>(config.horizon), Vec::Zero(model.control_dim()));
  }
  const std::vector<BeliefState> horizon =
      propagate_horizon(model, req.belief, last_loop, config.dt, config.process_noise);

  std::vector<std::vector<KeepOut>> out(static_cast<std::size_t>(config.horizon));
  for (int l = 1; l <= config.horizon; ++l) {
    const BeliefState& robot = horizon[static_cast<std::size_t>(l)];
    const Mat robot_cov = model.position_cov(robot.cov);
    auto& row = out[static_cast<std::size_t>(l - 1)];
    for (const ObstacleForecast& f : req.obstacles) {
      const GaussianBelief& obs = f.at(static_cast<std::size_t>(l));
      const double contact = config.robot_radius + f.radius;
      KeepOut k{obs.mean, contact * contact, 1.0};
      if (config.constraint == ConstraintKind::kChanceBound) {
        try {
          const ChanceConstraint cc(symmetrized(robot_cov + obs.cov), k.clearance_sq, config.eps);
          // g = T - lambda (alpha - |mu|^2)  <=>  |mu|^2 >= alpha - T / lambda
          k.clearance_sq = cc.alpha() - cc.threshold() / cc.lambda_max();
          k.scale = cc.lambda_max();
        } catch (const DegenerateCovariance&) {
          // both centers known exactly: plain contact test
        }
      } else {
        const double sr = std::sqrt(std::max(0.0, max_eigenvalue(robot_cov)));
        const double so = std::sqrt(std::max(0.0, max_eigenvalue(obs.cov)));
        const double reach = contact + config.k_sigma * (sr + so);
        k.clearance_sq = reach * reach;
      }
      row.push_back(std::move(k));
    }
  }
  return out;
}

}  // namespace

ControlBounds ControlBounds::unicycle(double v_min, double v_max, double omega_max) {
  ControlBounds b;
  b.lower.resize(2);
  b.upper.resize(2);
  b.lower << v_min, -omega_max;
  b.upper << v_max, omega_max;
  return b;
}

ControlBounds ControlBounds::double_integrator(double a_max) {
  ControlBounds b;
  b.lower = Vec::Constant(3, -a_max);
  b.upper = Vec::Constant(3, a_max);
  return b;
}

ControlBounds ControlBounds::defaults(ModelKind kind) {
  return kind == ModelKind::kUnicycle ? unicycle(0.0, 0.5, 1.5) : double_integrator(1.0);
}

bool ControlBounds::contains(const Vec& u) const {
  return u.size() == lower.size() && (u.array() >= lower.array()).all() &&
         (u.array() <= upper.array()).all();
}

void ControlBounds::validate(int control_dim) const {
  if (lower.size() != control_dim || upper.size() != control_dim) {
    throw std::invalid_argument("control bounds do not match the control dimension");
  }
  if (!(lower.array() <= upper.array()).all() || !lower.allFinite() || !upper.allFinite()) {
    throw std::invalid_argument("control bounds are empty or not finite");
  }
}

void CostSpec::validate() const {
  if (position_weight < 0.0 || control_weight < 0.0 || terminal_weight < 0.0) {
    throw std::invalid_argument("cost weights must be nonnegative");
  }
  if (position_weight == 0.0 && control_weight == 0.0 && terminal_weight == 0.0) {
    throw std::invalid_argument("at least one cost weight must be positive");
  }
}

std::string_view solver_status_name(SolverStatus s) {
  switch (s) {
    case SolverStatus::kConverged: return "converged";
    case SolverStatus::kIterationCapped: return "iteration-capped";
    case SolverStatus::kInfeasibleRelaxed: return "infeasible-relaxed";
  }
  return "unknown";
}

std::string_view constraint_kind_id(ConstraintKind k) {
  return k == ConstraintKind::kChanceBound ? "bound" : "bounding-volume";
}

ConstraintKind parse_constraint_kind(std::string_view id) {
  if (id == "bound") return ConstraintKind::kChanceBound;
  if (id == "bounding-volume") return ConstraintKind::kBoundingVolume;
  throw std::invalid_argument("unknown planner constraint '" + std::string(id) +
                              "' (expected bound or bounding-volume)");
}

double HorizonPlan::min_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& row : margins)
    for (double v : row) m = std::min(m, v);
  return m;
}

ObstacleForecast ObstacleForecast::stationary(GaussianBelief belief, double radius) {
  return ObstacleForecast{{std::move(belief)}, radius};
}

PlannerConfig PlannerConfig::defaults(ModelKind kind) {
  PlannerConfig c;
  c.bounds = ControlBounds::defaults(kind);
  if (kind == ModelKind::kUnicycle) {
    c.horizon = 10;
    c.process_noise = Mat::Identity(3, 3) * 1e-4;
  } else {
    c.horizon = 20;
    c.process_noise = Mat::Identity(6, 6) * 1e-4;
  }
  return c;
}

void PlannerConfig::validate(const MotionModel& model) const {
  if (horizon < 1) throw std::invalid_argument("planner horizon must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("planner dt must be positive");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("planner eps must lie in (0, 1)");
  if (!(robot_radius > 0.0)) throw std::invalid_argument("robot radius must be positive");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  bounds.validate(model.control_dim());
  cost.validate();
  if (process_noise.rows() != model.state_dim() || process_noise.cols() != model.state_dim()) {
    throw std::invalid_argument("process noise does not match the state dimension");
  }
}

std::vector<Vec> rollout(const MotionModel& model, const Vec& x0, std::span<const Vec> controls,
                         double dt) {
  std::vector<Vec> states;
  states.reserve(controls.size() + 1);
  states.push_back(x0);
  for (const Vec& u : controls) states.push_back(model.step(states.back(), u, dt));
  return states;
}

HorizonPlan plan(const MotionModel& model, const PlanRequest& request, const PlannerConfig& config,
                 PlannerTrace* trace) {
  config.validate(model);
  validate_request(model, request, config);

  const Vec& x0 = request.belief.mean;
  ShootingProblem problem(model, x0, request.goal, config, build_keepouts(model, request, config));

  std::vector<Eigen::VectorXd> seeds;
  if (request.warm_start) seeds.push_back(flatten(request.warm_start->controls, model.control_dim()));
  if (model.kind() == ModelKind::kUnicycle) {
    seeds.push_back(unicycle_seed(model, x0, request.goal, config, 0.0));
    seeds.push_back(unicycle_seed(model, x0, request.goal, config, -0.6));
  } else {
    seeds.push_back(integrator_seed(model, x0, request.goal, config, 0.0));
    seeds.push_back(integrator_seed(model, x0, request.goal, config, 0.75));
  }
  seeds.push_back(braking_seed(model, x0, config));

  SolveResult best;
  int total_iterations = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    PlannerTrace* t = (trace && i == 0) ? trace : nullptr;
    SolveResult r = solve(problem, seeds[i], config, t);
    total_iterations += r.iterations;
    if (i == 0 || better(r, best)) best = std::move(r);
  }

  HorizonPlan out;
  for (int l = 0; l < config.horizon; ++l) out.controls.push_back(problem.control(best.controls, l));
  out.states = std::move(best.eval.states);
  out.margins = problem.margins(out.states);
  out.cost = best.eval.cost;
  out.iterations = total_iterations;
  if (!best.feasible) {
    out.status = SolverStatus::kInfeasibleRelaxed;
  } else {
    out.status = best.converged ? SolverStatus::kConverged : SolverStatus::kIterationCapped;
  }
  return out;
}

HorizonPlan shift_warm_start(const MotionModel& model, const HorizonPlan& previous,
                             const Vec& initial_state, double dt) {
  if (previous.controls.empty()) throw std::invalid_argument("shift_warm_start: empty plan");
  HorizonPlan seed;
  seed.controls.assign(previous.controls.begin() + 1, previous.controls.end());
  seed.controls.push_back(previous.controls.back());
  seed.states = rollout(model, initial_state, seed.controls, dt);
  seed.status = previous.status;
  return seed;
}

double evaluate_cost(const MotionModel& model, const HorizonPlan& plan, const Vec& goal,
                     const CostSpec& cost) {
  if (plan.states.size() != plan.controls.size() + 1) {
    throw std::invalid_argument("evaluate_cost: plan states/controls are inconsistent");
  }
  double total = 0.0;
  for (std::size_t l = 0; l < plan.controls.size(); ++l) {
    total += cost.position_weight * (model.position(plan.states[l]) - goal).squaredNorm() +
             cost.control_weight * plan.controls[l].squaredNorm();
  }
  total += cost.terminal_weight * (model.position(plan.states.back()) - goal).squaredNorm();
  return total;
}

}  // namespace pcc
