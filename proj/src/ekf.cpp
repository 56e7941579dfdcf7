#include "pcc/ekf.hpp"

#include <Eigen/Cholesky>

#include <algorithm>

namespace pcc {

BeliefState ekf_predict(const MotionModel& model, const BeliefState& b, const Vec& u, double dt,
                        const Mat& process_noise) {
  const MotionJacobians j = model.jacobians(b.mean, u, dt);
  BeliefState out;
  out.mean = model.step(b.mean, u, dt);
  out.cov = symmetrized(j.state * b.cov * j.state.transpose() + process_noise);
  return out;
}

BeliefState ekf_update(const MotionModel& model, const BeliefState& b, const Vec& z,
                       const Mat& measurement_noise) {
  const Mat h = model.measurement_matrix();
  Vec innovation = z - h * b.mean;
  if (auto idx = model.angle_index(); idx && *idx < innovation.size()) {
    innovation(*idx) = wrap_angle(innovation(*idx));
  }
  const Mat s = symmetrized(h * b.cov * h.transpose() + measurement_noise);
  const Eigen::LDLT<Mat> ldlt(s);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw FilterDivergence();
  // K = P H^T S^{-1}
  const Mat gain = ldlt.solve(h * b.cov).transpose();

  BeliefState out;
  out.mean = model.normalized(b.mean + gain * innovation);
  const Mat i_kh = Mat::Identity(b.cov.rows(), b.cov.cols()) - gain * h;
  out.cov = symmetrized(i_kh * b.cov * i_kh.transpose() +
                        gain * measurement_noise * gain.transpose());
  if (!out.cov.allFinite() || !out.mean.allFinite()) throw FilterDivergence();
  const double tr = out.cov.trace();
  if (tr < 0.0 || min_eigenvalue(out.cov) < -1e-10 * std::max(tr, 1e-300)) {
    throw FilterDivergence();
  }
  return out;
}

std::vector<BeliefState> propagate_horizon(const MotionModel& model, const BeliefState& b,
                                           std::span<const Vec> controls, double dt,
                                           const Mat& process_noise) {
  std::vector<BeliefState> out;
  out.reserve(controls.size() + 1);
  out.push_back(b);
  for (const Vec& u : controls) {
    out.push_back(ekf_predict(model, out.back(), u, dt, process_noise));
  }
  return out;
}

}  // namespace pcc
