#pragma once

namespace pcc {

/// Chi-squared cdf with `dof` degrees of freedom. Only dof = 2 and dof = 3
/// are supported (std::invalid_argument otherwise). Returns 0 for x <= 0.
double chi2_cdf(double x, int dof);

/// Chi-squared density, same support rules as chi2_cdf.
double chi2_pdf(double x, int dof);

/// Inverse of chi2_cdf for eps in [0, 1). Bracketed bisection with Newton
/// refinement down to a 1e-12 bracket.
double chi2_inv_cdf(double eps, int dof);

/// Standard normal cdf.
double normal_cdf(double z);

}  // namespace pcc
