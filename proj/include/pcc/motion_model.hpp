#pragma once

#include "pcc/linalg.hpp"

#include <optional>
#include <string_view>

namespace pcc {

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Below this |omega| (rad/s) the unicycle uses its second-order Taylor form.
inline constexpr double kOmegaSwitch = 1e-6;

struct MotionJacobians {
  Mat state;    // F = df/dx
  Mat control;  // G = df/du
};

/// Unicycle kinematics, state (x, y, theta), control (v, omega).
Vec unicycle_step(const Vec& x, const Vec& u, double dt);
MotionJacobians unicycle_jacobians(const Vec& x, const Vec& u, double dt);

/// 3-D double integrator, state (p, v), control = acceleration.
Vec double_integrator_step(const Vec& x, const Vec& u, double dt);
MotionJacobians double_integrator_jacobians(double dt);

enum class ModelKind { kUnicycle, kDoubleIntegrator3D };

std::string_view model_id(ModelKind kind);
ModelKind parse_model(std::string_view id);

/// Value type dispatching to one of the two kinematic models.
class MotionModel {
 public:
  explicit MotionModel(ModelKind kind) : kind_(kind) {}

  ModelKind kind() const { return kind_; }
  int state_dim() const { return kind_ == ModelKind::kUnicycle ? 3 : 6; }
  int control_dim() const { return kind_ == ModelKind::kUnicycle ? 2 : 3; }
  int position_dim() const { return kind_ == ModelKind::kUnicycle ? 2 : 3; }
  /// The measured pose: (x, y, theta) for the unicycle, position for the integrator.
  int measurement_dim() const { return 3; }
  std::optional<int> angle_index() const {
    return kind_ == ModelKind::kUnicycle ? std::optional<int>(2) : std::nullopt;
  }

  Vec step(const Vec& x, const Vec& u, double dt) const;
  MotionJacobians jacobians(const Vec& x, const Vec& u, double dt) const;

  Vec position(const Vec& x) const { return x.head(position_dim()); }
  Mat position_cov(const Mat& cov) const {
    return cov.topLeftCorner(position_dim(), position_dim());
  }

  /// H such that z = H x (+ noise).
  Mat measurement_matrix() const;
  Vec measure(const Vec& x) const { return measurement_matrix() * x; }

  /// State with its angle component (if any) wrapped.
  Vec normalized(Vec x) const;

 private:
  ModelKind kind_;
};

}  // namespace pcc
