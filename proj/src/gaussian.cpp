#include "pcc/gaussian.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pcc {

GaussianBelief GaussianBelief::point(const Vec& mean) {
  return GaussianBelief{mean, Mat::Zero(mean.size(), mean.size())};
}

void GaussianBelief::validate() const {
  if (mean.size() == 0) throw std::invalid_argument("belief has empty mean");
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw std::invalid_argument("belief covariance size does not match mean");
  }
  if (!mean.allFinite()) throw std::invalid_argument("belief mean has non-finite entries");
  require_covariance(cov, "belief covariance");
}

GaussianBelief relative_belief(const GaussianBelief& a, const GaussianBelief& b) {
  if (a.dim() != b.dim() || a.cov.rows() != b.cov.rows()) {
    throw std::invalid_argument("relative_belief: dimension mismatch");
  }
  return GaussianBelief{a.mean - b.mean, a.cov + b.cov};
}

double gaussian_density(const GaussianBelief& g, const Vec& x) {
  const Eigen::LLT<Mat> llt(g.cov);
  if (llt.info() != Eigen::Success) throw DegenerateCovariance("density of singular Gaussian");
  const Vec diff = x - g.mean;
  const Vec white = llt.matrixL().solve(diff);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double n = static_cast<double>(g.dim());
  return std::exp(-0.5 * white.squaredNorm() - 0.5 * log_det -
                  0.5 * n * std::log(2.0 * std::numbers::pi));
}

}  // namespace pcc
