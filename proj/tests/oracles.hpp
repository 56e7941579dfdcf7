#pragma once

// Independent reference computations used only by the test suites. Nothing
// here calls into the library's probability code.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace pcc::oracle {

/// Chi-squared cdf by adaptive Gauss-Kronrod quadrature of the density,
/// integrated in t = sqrt(x) so the n = 3 integrand stays smooth at 0.
inline double chi2_cdf_quadrature(double x, int dof) {
  if (x <= 0.0) return 0.0;
  auto integrand = [dof](double t) {
    const double u = t * t;
    double pdf;
    if (dof == 2) {
      pdf = 0.5 * std::exp(-u / 2.0);
    } else {
      pdf = t * std::exp(-u / 2.0) / std::sqrt(2.0 * std::numbers::pi);
    }
    return pdf * 2.0 * t;
  };
  double error = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, std::sqrt(x),
                                                                       15, 1e-14, &error);
}

/// P(|w| <= radius) for w ~ N(mu, sigma^2 I) in 2 or 3 dimensions, by 1-D
/// quadrature over the radial density of |w| (noncentral chi distribution).
/// `offset` is |mu|.
inline double radial_collision_probability(double offset, double sigma, double radius, int dim) {
  const double s2 = sigma * sigma;
  auto density = [&](double r) -> double {
    if (r <= 0.0) return 0.0;
    if (offset == 0.0) {
      if (dim == 2) return r / s2 * std::exp(-r * r / (2.0 * s2));
      return std::sqrt(2.0 / std::numbers::pi) * r * r / (s2 * sigma) * std::exp(-r * r / (2.0 * s2));
    }
    if (dim == 2) {
      // r / s^2 exp(-(r^2 + m^2) / 2 s^2) I0(r m / s^2), with I0 scaled by exp(-x)
      const double x = r * offset / s2;
      const double scaled_i0 =
          x < 500.0 ? boost::math::cyl_bessel_i(0, x) * std::exp(-x)
                    : 1.0 / std::sqrt(2.0 * std::numbers::pi * x) * (1.0 + 1.0 / (8.0 * x));
      return r / s2 * std::exp(-(r - offset) * (r - offset) / (2.0 * s2)) * scaled_i0;
    }
    const double norm = r / (offset * sigma * std::sqrt(2.0 * std::numbers::pi));
    return norm * (std::exp(-(r - offset) * (r - offset) / (2.0 * s2)) -
                   std::exp(-(r + offset) * (r + offset) / (2.0 * s2)));
  };
  double error = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(density, 0.0, radius, 20, 1e-13,
                                                                       &error);
}

/// erf by its Maclaurin series in long double.
inline double erf_series(double x) {
  long double sum = 0.0L;
  long double term = x;  // x^(2n+1) (-1)^n / n!
  for (int n = 0; n < 200; ++n) {
    sum += term / (2 * n + 1);
    term *= -static_cast<long double>(x) * x / (n + 1);
    if (std::abs(term) < 1e-30L) break;
  }
  return static_cast<double>(2.0L / std::sqrt(std::numbers::pi_v<long double>) * sum);
}

inline double normal_cdf_series(double z) { return 0.5 * (1.0 + erf_series(z / std::numbers::sqrt2)); }

struct GridOptimum {
  double cost = std::numeric_limits<double>::infinity();
  std::array<double, 3> end{};  // final (x, y, theta)
};

/// Best constant unicycle control (v, omega) on a (nv + 1) x (nw + 1) grid
/// over [0, v_max] x [-w_max, w_max] for the tracking cost
/// sum_l w_p |p_l - g|^2 + w_u |u|^2 + w_T |p_L - g|^2, integrating the exact arcs.
inline GridOptimum unicycle_grid_search(std::array<double, 3> x0, std::array<double, 2> goal, double w_p,
                                        double w_u, double w_t, double dt, int steps, double v_max,
                                        double w_max, int nv = 100, int nw = 300) {
  GridOptimum best;
  for (int i = 0; i <= nv; ++i) {
    for (int j = 0; j <= nw; ++j) {
      const double v = v_max * i / nv;
      const double w = -w_max + 2.0 * w_max * j / nw;
      double x = x0[0], y = x0[1], th = x0[2];
      double cost = 0.0;
      for (int l = 0; l < steps; ++l) {
        cost += w_p * ((x - goal[0]) * (x - goal[0]) + (y - goal[1]) * (y - goal[1])) + w_u * (v * v + w * w);
        if (w == 0.0) {
          x += v * dt * std::cos(th);
          y += v * dt * std::sin(th);
        } else {
          x += v / w * (std::sin(th + w * dt) - std::sin(th));
          y += v / w * (std::cos(th) - std::cos(th + w * dt));
        }
        th += w * dt;
      }
      cost += w_t * ((x - goal[0]) * (x - goal[0]) + (y - goal[1]) * (y - goal[1]));
      if (cost < best.cost) best = {cost, {x, y, th}};
    }
  }
  return best;
}

}  // namespace pcc::oracle
