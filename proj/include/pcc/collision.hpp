#pragma once

#include "pcc/gaussian.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace pcc {

/// Sphere (2-D disc or 3-D ball) whose center is uncertain.
struct Body {
  GaussianBelief center;
  double radius = 0.0;

  void validate() const;
};

/// A robot/obstacle pair together with the derived contact threshold
/// alpha = (r1 + s1)^2 and the relative belief w = x - s.
class CollisionQuery {
 public:
  CollisionQuery(Body robot, Body obstacle);

  const Body& robot() const { return robot_; }
  const Body& obstacle() const { return obstacle_; }
  const GaussianBelief& relative() const { return relative_; }
  double contact_radius() const { return robot_.radius + obstacle_.radius; }
  double alpha() const { return contact_radius() * contact_radius(); }
  int dim() const { return static_cast<int>(relative_.dim()); }

 private:
  Body robot_;
  Body obstacle_;
  GaussianBelief relative_;
};

struct ProbabilityEstimate {
  double value = 0.0;
  std::optional<double> half_width_95;  // sampling methods only
  double wall_time_s = 0.0;
};

/// Volume of a ball of the given radius in 2 or 3 dimensions.
double ball_volume(double radius, int dim);

/// Chi-squared bound F_chi(max(0, lambda_max(Sigma_w^{-1}) * (alpha - |mu_w|^2)), n).
/// Throws DegenerateCovariance for a singular relative covariance.
ProbabilityEstimate bound_collision_probability(const CollisionQuery& q);

struct ConstraintMargin {
  double value = 0.0;  // >= 0 means the chance constraint holds
  Vec gradient;        // d value / d x_rel
};

/// Chance constraint with its covariance-dependent constants resolved once.
/// The planner keeps one of these per (step, obstacle) because the horizon
/// covariances are fixed during an optimization.
class ChanceConstraint {
 public:
  ChanceConstraint(const Mat& sigma, double alpha, double eps);

  double lambda_max() const { return lambda_max_; }
  double threshold() const { return threshold_; }
  double alpha() const { return alpha_; }

  /// g = F^{-1}(eps) - lambda_max * (alpha - 2 x_rel^T mu + mu^T mu).
  ConstraintMargin evaluate(const Vec& x_rel, const Vec& mu) const;

 private:
  double lambda_max_;
  double threshold_;
  double alpha_;
};

ConstraintMargin constraint_margin(const Vec& x_rel, const Vec& mu, const Mat& sigma, double alpha,
                                   double eps);

struct SamplingOptions {
  std::size_t n_samples = 1'000'000;
  std::uint64_t seed = 0;
  unsigned threads = 1;  // 0 = hardware concurrency
};

/// Monte Carlo estimate of P(|x - s| <= r1 + s1) with a Wilson 95% interval.
/// Samples are drawn in fixed-size chunks, each from its own counter-based
/// substream, so the result depends only on (seed, n_samples).
ProbabilityEstimate mc_collision_probability(const CollisionQuery& q, const SamplingOptions& opts);

/// Single-summation approximation: mean over robot samples of the obstacle
/// density times the collision-ball volume.
ProbabilityEstimate lambert_single_sum(const CollisionQuery& q, const SamplingOptions& opts);

/// 1 if the bodies overlap after inflating each by k_sigma * sqrt(lambda_max(own cov)).
ProbabilityEstimate bounding_volume_check(const CollisionQuery& q, double k_sigma = 3.0);

/// Ball volume times the largest density of w over the closed collision ball.
ProbabilityEstimate max_density_approximation(const CollisionQuery& q);

/// Normal-cdf bound from linearizing along the line between the means.
ProbabilityEstimate linearized_chance_constraint(const CollisionQuery& q);

/// Probability that w lies in the box circumscribing the collision ball,
/// evaluated in the eigenframe of Sigma_w.
ProbabilityEstimate rectangular_box_probability(const CollisionQuery& q);

enum class Method { kBound, kMonteCarlo, kLambert, kBoundingVolume, kMaxDensity, kChanceLinear, kRectBox };

inline constexpr std::array<Method, 7> kAllMethods = {
    Method::kMonteCarlo, Method::kLambert,      Method::kBoundingVolume, Method::kMaxDensity,
    Method::kChanceLinear, Method::kRectBox, Method::kBound};

std::string_view method_id(Method m);
std::string_view method_label(Method m);
/// Throws std::invalid_argument for unknown ids.
Method parse_method(std::string_view id);

ProbabilityEstimate estimate(Method m, const CollisionQuery& q, const SamplingOptions& opts = {});

struct TimingStats {
  double mean_s = 0.0;
  double stddev_s = 0.0;
  int repetitions = 0;
};

/// Wall-time statistics over `repetitions` calls after one warm-up call.
TimingStats benchmark_method(Method m, const CollisionQuery& q, int repetitions,
                             const SamplingOptions& opts = {});

}  // namespace pcc
