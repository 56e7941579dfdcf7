#include "pcc/motion_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pcc {

namespace {

// sin(h) / h and its derivative with respect to a = 2h.
double sinc_half(double a) {
  const double h = 0.5 * a;
  if (std::abs(h) < 1e-4) return 1.0 - h * h / 6.0;
  return std::sin(h) / h;
}

double sinc_half_derivative(double a) {
  const double h = 0.5 * a;
  if (std::abs(h) < 1e-3) return -h / 6.0 + h * h * h / 60.0;
  return 0.5 * (h * std::cos(h) - std::sin(h)) / (h * h);
}

void require_sizes(const Vec& x, const Vec& u, int nx, int nu, const char* who) {
  if (x.size() != nx || u.size() != nu) {
    throw std::invalid_argument(std::string(who) + ": state/control size mismatch");
  }
}

}  // namespace

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::fmod(a + std::numbers::pi, kTwoPi);
  if (r <= 0.0) r += kTwoPi;
  return r - std::numbers::pi;
}

Vec unicycle_step(const Vec& x, const Vec& u, double dt) {
  require_sizes(x, u, 3, 2, "unicycle_step");
  const double theta = x(2);
  const double v = u(0);
  const double omega = u(1);
  Vec next(3);
  if (std::abs(omega) >= kOmegaSwitch) {
    // (v/w)(sin(t + w dt) - sin t) rewritten as v dt sinc(w dt / 2) cos(t + w dt / 2),
    // which is the same expression without the cancellation at small w.
    const double a = omega * dt;
    const double chord = v * dt * sinc_half(a);
    const double mid = theta + 0.5 * a;
    next << x(0) + chord * std::cos(mid), x(1) + chord * std::sin(mid), wrap_angle(theta + a);
  } else {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double bend = 0.5 * v * omega * dt * dt;
    next << x(0) + v * dt * c - bend * s, x(1) + v * dt * s + bend * c,
        wrap_angle(theta + omega * dt);
  }
  return next;
}

MotionJacobians unicycle_jacobians(const Vec& x, const Vec& u, double dt) {
  require_sizes(x, u, 3, 2, "unicycle_jacobians");
  const double theta = x(2);
  const double v = u(0);
  const double omega = u(1);
  MotionJacobians j{Mat::Identity(3, 3), Mat::Zero(3, 2)};
  j.control(2, 1) = dt;
  if (std::abs(omega) >= kOmegaSwitch) {
    const double a = omega * dt;
    const double sc = sinc_half(a);
    const double dsc = sinc_half_derivative(a);
    const double mid = theta + 0.5 * a;
    const double cm = std::cos(mid);
    const double sm = std::sin(mid);
    j.state(0, 2) = -v * dt * sc * sm;
    j.state(1, 2) = v * dt * sc * cm;
    j.control(0, 0) = dt * sc * cm;
    j.control(1, 0) = dt * sc * sm;
    j.control(0, 1) = v * dt * (dsc * dt * cm - 0.5 * dt * sc * sm);
    j.control(1, 1) = v * dt * (dsc * dt * sm + 0.5 * dt * sc * cm);
  } else {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double dt2 = dt * dt;
    j.state(0, 2) = -v * dt * s - 0.5 * v * omega * dt2 * c;
    j.state(1, 2) = v * dt * c - 0.5 * v * omega * dt2 * s;
    j.control(0, 0) = dt * c - 0.5 * omega * dt2 * s;
    j.control(1, 0) = dt * s + 0.5 * omega * dt2 * c;
    j.control(0, 1) = -0.5 * v * dt2 * s;
    j.control(1, 1) = 0.5 * v * dt2 * c;
  }
  return j;
}

Vec double_integrator_step(const Vec& x, const Vec& u, double dt) {
  require_sizes(x, u, 6, 3, "double_integrator_step");
  Vec next(6);
  next.head(3) = x.head(3) + dt * x.tail(3) + 0.5 * dt * dt * u;
  next.tail(3) = x.tail(3) + dt * u;
  return next;
}

MotionJacobians double_integrator_jacobians(double dt) {
  MotionJacobians j{Mat::Identity(6, 6), Mat::Zero(6, 3)};
  j.state.topRightCorner(3, 3) = dt * Mat::Identity(3, 3);
  j.control.topRows(3) = 0.5 * dt * dt * Mat::Identity(3, 3);
  j.control.bottomRows(3) = dt * Mat::Identity(3, 3);
  return j;
}

std::string_view model_id(ModelKind kind) {
  return kind == ModelKind::kUnicycle ? "unicycle" : "double-integrator-3d";
}

ModelKind parse_model(std::string_view id) {
  if (id == "unicycle") return ModelKind::kUnicycle;
  if (id == "double-integrator-3d") return ModelKind::kDoubleIntegrator3D;
  throw std::invalid_argument("unknown model '" + std::string(id) + "'");
}

Vec MotionModel::step(const Vec& x, const Vec& u, double dt) const {
  return kind_ == ModelKind::kUnicycle ? unicycle_step(x, u, dt) : double_integrator_step(x, u, dt);
}

MotionJacobians MotionModel::jacobians(const Vec& x, const Vec& u, double dt) const {
  if (kind_ == ModelKind::kUnicycle) return unicycle_jacobians(x, u, dt);
  require_sizes(x, u, 6, 3, "double_integrator_jacobians");
  return double_integrator_jacobians(dt);
}

Mat MotionModel::measurement_matrix() const {
  return Mat::Identity(measurement_dim(), state_dim());
}

Vec MotionModel::normalized(Vec x) const {
  if (auto idx = angle_index()) x(*idx) = wrap_angle(x(*idx));
  return x;
}

}  // namespace pcc
