#pragma once

#include "pcc/motion_model.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace pcc {

/// Gaussian belief over the full robot state.
struct BeliefState {
  Vec mean;
  Mat cov;
};

/// R: additive process noise per step. Q: measurement noise.
struct NoiseSpec {
  Mat process;
  Mat measurement;
};

class FilterDivergence : public std::runtime_error {
 public:
  FilterDivergence() : std::runtime_error("filter divergence") {}
};

/// mean <- f(mean, u); cov <- F cov F^T + R, re-symmetrized.
BeliefState ekf_predict(const MotionModel& model, const BeliefState& b, const Vec& u, double dt,
                        const Mat& process_noise);

/// Kalman update for z = H x + v with Joseph-form covariance. The angle
/// innovation is wrapped. Throws FilterDivergence if the posterior is not PSD.
BeliefState ekf_update(const MotionModel& model, const BeliefState& b, const Vec& z,
                       const Mat& measurement_noise);

/// Beliefs at steps 0..L obtained by predicting along `controls` (the
/// previous solution). The planner treats these covariances as constants.
std::vector<BeliefState> propagate_horizon(const MotionModel& model, const BeliefState& b,
                                           std::span<const Vec> controls, double dt,
                                           const Mat& process_noise);

}  // namespace pcc
