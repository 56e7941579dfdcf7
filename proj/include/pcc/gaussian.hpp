#pragma once

#include "pcc/linalg.hpp"

namespace pcc {

/// Gaussian belief N(mean, cov) over a 2-D or 3-D position.
struct GaussianBelief {
  Vec mean;
  Mat cov;

  Eigen::Index dim() const { return mean.size(); }

  /// Zero-covariance belief at `mean`.
  static GaussianBelief point(const Vec& mean);

  /// Throws std::invalid_argument if sizes disagree, entries are not finite
  /// or the covariance is not symmetric PSD.
  void validate() const;
};

/// Distribution of a - b for independent a, b: N(a.mean - b.mean, a.cov + b.cov).
GaussianBelief relative_belief(const GaussianBelief& a, const GaussianBelief& b);

/// Density of N(mean, cov) at x. Requires a nonsingular covariance.
double gaussian_density(const GaussianBelief& g, const Vec& x);

}  // namespace pcc
