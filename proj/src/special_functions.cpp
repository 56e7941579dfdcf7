#include "pcc/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pcc {

namespace {

void require_supported_dof(int dof) {
  if (dof != 2 && dof != 3) {
    throw std::invalid_argument("chi-squared: unsupported degrees of freedom " +
                                std::to_string(dof) + " (only 2 and 3)");
  }
}

}  // namespace

double chi2_cdf(double x, int dof) {
  require_supported_dof(dof);
  if (!(x > 0.0)) return 0.0;
  if (dof == 2) return 1.0 - std::exp(-x / 2.0);
  const double value = std::erf(std::sqrt(x / 2.0)) -
                       std::sqrt(2.0 / std::numbers::pi) * std::sqrt(x) * std::exp(-x / 2.0);
  return std::clamp(value, 0.0, 1.0);
}

double chi2_pdf(double x, int dof) {
  require_supported_dof(dof);
  if (!(x > 0.0)) return dof == 2 && x == 0.0 ? 0.5 : 0.0;
  if (dof == 2) return 0.5 * std::exp(-x / 2.0);
  return std::sqrt(x) * std::exp(-x / 2.0) / std::sqrt(2.0 * std::numbers::pi);
}

double chi2_inv_cdf(double eps, int dof) {
  require_supported_dof(dof);
  if (!(eps >= 0.0 && eps < 1.0)) {
    throw std::invalid_argument("chi2_inv_cdf: probability must lie in [0, 1)");
  }
  if (eps == 0.0) return 0.0;

  double lo = 0.0;
  double hi = 1.0;
  while (chi2_cdf(hi, dof) < eps) {
    lo = hi;
    hi *= 2.0;
  }
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 400 && hi - lo > 1e-12; ++iter) {
    const double f = chi2_cdf(x, dof) - eps;
    if (f == 0.0) return x;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double slope = chi2_pdf(x, dof);
    double next = slope > 0.0 ? x - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) < 1e-15 * std::max(1.0, x)) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace pcc
