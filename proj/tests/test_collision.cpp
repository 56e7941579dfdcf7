#include "oracles.hpp"
#include "pcc/collision.hpp"
#include "pcc/special_functions.hpp"

#include <Eigen/QR>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace pcc {
namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Mat iso(int n, double var) { return Mat::Identity(n, n) * var; }

CollisionQuery table1() {
  return CollisionQuery(Body{{vec({0.38, 0.0}), iso(2, 0.04)}, 0.2},
                        Body{GaussianBelief::point(vec({0.0, 0.0})), 0.2});
}

CollisionQuery deterministic(double distance) {
  return CollisionQuery(Body{GaussianBelief::point(vec({distance, 0.0})), 0.2},
                        Body{GaussianBelief::point(vec({0.0, 0.0})), 0.2});
}

Mat random_cov(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> ev(lo, hi);
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = u(rng);
  const Eigen::HouseholderQR<Mat> qr(a);
  const Mat q = qr.householderQ();
  Vec d(n);
  for (int i = 0; i < n; ++i) d(i) = ev(rng);
  return symmetrized(q * d.asDiagonal() * q.transpose());
}

Vec random_vec(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

TEST(Bound, ReferenceQuery) {
  const CollisionQuery q = table1();
  EXPECT_DOUBLE_EQ(q.alpha(), 0.16);
  EXPECT_NEAR(bound_collision_probability(q).value, 0.1772, 5e-5);
  EXPECT_NEAR(bound_collision_probability(q).value, 1.0 - std::exp(-0.195), 1e-12);
}

TEST(Bound, ZeroBeyondContact) {
  const CollisionQuery q(Body{{vec({0.5, 0.1}), iso(2, 0.04)}, 0.2},
                         Body{GaussianBelief::point(vec({0.0, 0.0})), 0.2});
  EXPECT_EQ(bound_collision_probability(q).value, 0.0);
}

TEST(Bound, Concentric) {
  const CollisionQuery q(Body{{vec({0.0, 0.0}), iso(2, 0.02)}, 0.2},
                         Body{{vec({0.0, 0.0}), iso(2, 0.02)}, 0.2});
  EXPECT_NEAR(bound_collision_probability(q).value, 1.0 - std::exp(-2.0), 1e-12);
}

TEST(Bound, DegenerateCovariance) {
  try {
    bound_collision_probability(deterministic(0.3));
    FAIL();
  } catch (const DegenerateCovariance& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate covariance"), std::string::npos);
  }
}

TEST(Bound, MonotoneInSeparation) {
  double prev = 1.0;
  for (double d = 0.0; d <= 0.6; d += 0.001) {
    const CollisionQuery q(Body{{vec({d, 0.0, 0.0}), iso(3, 0.01)}, 0.2},
                           Body{{vec({0.0, 0.0, 0.0}), iso(3, 0.02)}, 0.15});
    const double v = bound_collision_probability(q).value;
    EXPECT_LE(v, prev);
    if (d * d >= q.alpha()) EXPECT_EQ(v, 0.0);
    prev = v;
  }
}

TEST(ConstraintMargin, ReferenceQueryBoundary) {
  const double eps = bound_collision_probability(table1()).value;
  const ConstraintMargin g = constraint_margin(vec({0.38, 0.0}), vec({0.38, 0.0}), iso(2, 0.04), 0.16, eps);
  EXPECT_NEAR(g.value, 0.0, 1e-10);
}

TEST(ConstraintMargin, ReferenceQueryAtReferenceEps) {
  // 0.1772 rounds the exact bound down, so the margin sits just below zero.
  const ConstraintMargin g =
      constraint_margin(vec({0.38, 0.0}), vec({0.38, 0.0}), iso(2, 0.04), 0.16, 0.1772);
  EXPECT_NEAR(g.value, 0.0, 1e-3);
}

TEST(ConstraintMargin, FarObstacle) {
  const Vec mu = vec({10.0, 3.0});
  EXPECT_GT(constraint_margin(mu, mu, iso(2, 0.04), 0.16, 0.1).value, 0.0);
}

TEST(ConstraintMargin, ViolatedAtEpsPointOne) {
  const Vec mu = vec({0.38, 0.0});
  const ConstraintMargin g = constraint_margin(mu, mu, iso(2, 0.04), 0.16, 0.1);
  EXPECT_NEAR(g.value, -2.0 * std::log(0.9) - 0.39, 1e-10);
  EXPECT_LT(g.value, 0.0);
}

TEST(ConstraintMargin, AffineWithExposedGradient) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 2;
    const Mat sigma = random_cov(rng, n, 0.01, 0.2);
    const Vec mu = random_vec(rng, n, 1.0);
    const Vec x = random_vec(rng, n, 1.0);
    const Vec dx = random_vec(rng, n, 0.5);
    const ConstraintMargin a = constraint_margin(x, mu, sigma, 0.2, 0.1);
    const ConstraintMargin b = constraint_margin(x + dx, mu, sigma, 0.2, 0.1);
    EXPECT_TRUE(a.gradient.isApprox(2.0 * max_eigenvalue_of_inverse(sigma) * mu, 1e-12));
    EXPECT_NEAR(b.value - a.value, a.gradient.dot(dx), 1e-9 * (1.0 + std::abs(a.value)));
  }
}

TEST(ConstraintMargin, EpsDomain) {
  const Vec mu = vec({0.38, 0.0});
  EXPECT_THROW(constraint_margin(mu, mu, iso(2, 0.04), 0.16, 0.0), std::invalid_argument);
  EXPECT_THROW(constraint_margin(mu, mu, iso(2, 0.04), 0.16, 1.0), std::invalid_argument);
}

TEST(ConstraintMargin, DualityWithBound) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> eps_dist(0.01, 0.95);
  std::uniform_real_distribution<double> rad(0.05, 0.4);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + trial % 2;
    const Body robot{{random_vec(rng, n, 0.6), random_cov(rng, n, 0.005, 0.1)}, rad(rng)};
    const Body obstacle{{random_vec(rng, n, 0.6), random_cov(rng, n, 0.0, 0.1)}, rad(rng)};
    const CollisionQuery q(robot, obstacle);
    const double eps = eps_dist(rng);
    const double p = bound_collision_probability(q).value;
    const Vec& mu = q.relative().mean;
    const double g = constraint_margin(mu, mu, q.relative().cov, q.alpha(), eps).value;
    if (std::abs(p - eps) < 1e-9) continue;
    EXPECT_EQ(g >= 0.0, p <= eps) << "p=" << p << " eps=" << eps << " g=" << g;
    ++checked;
  }
  EXPECT_GT(checked, 990);
}

TEST(MonteCarlo, DeterministicIndicator) {
  EXPECT_EQ(mc_collision_probability(deterministic(0.3), {1000, 1, 1}).value, 1.0);
  EXPECT_EQ(mc_collision_probability(deterministic(0.5), {1000, 1, 1}).value, 0.0);
  EXPECT_EQ(mc_collision_probability(deterministic(0.4), {10, 1, 1}).value, 1.0);
}

TEST(MonteCarlo, ReferenceQueryAgainstQuadrature) {
  const double exact = oracle::radial_collision_probability(0.38, 0.2, 0.4, 2);
  EXPECT_NEAR(exact, 0.43, 0.01);
  const ProbabilityEstimate e = mc_collision_probability(table1(), {1'000'000, 0, 0});
  ASSERT_TRUE(e.half_width_95.has_value());
  EXPECT_LE(std::abs(e.value - exact), 3.0 * *e.half_width_95);
}

TEST(MonteCarlo, ReproducibleAndThreadIndependent) {
  const CollisionQuery q = table1();
  const ProbabilityEstimate a = mc_collision_probability(q, {300'001, 42, 1});
  const ProbabilityEstimate b = mc_collision_probability(q, {300'001, 42, 1});
  const ProbabilityEstimate c = mc_collision_probability(q, {300'001, 42, 4});
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.value, c.value);
  EXPECT_EQ(*a.half_width_95, *c.half_width_95);
  EXPECT_NE(a.value, mc_collision_probability(q, {300'001, 43, 1}).value);
}

TEST(MonteCarlo, CoverageAcrossSeeds) {
  const double exact = oracle::radial_collision_probability(0.38, 0.2, 0.4, 2);
  const CollisionQuery q = table1();
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ProbabilityEstimate e = mc_collision_probability(q, {1'000'000, seed, 0});
    if (std::abs(e.value - exact) <= 3.0 * *e.half_width_95) ++inside;
  }
  EXPECT_GE(inside, 99);
}

TEST(MonteCarlo, RadialOracleSanity) {
  // Concentric 2-D case has the closed form 1 - exp(-b^2 / 2 s^2).
  EXPECT_NEAR(oracle::radial_collision_probability(0.0, 0.2, 0.4, 2), 1.0 - std::exp(-2.0), 1e-12);
  EXPECT_NEAR(oracle::radial_collision_probability(0.0, 0.2, 0.4, 3), chi2_cdf(4.0, 3), 1e-10);
  // Tiny offset approaches the concentric value.
  EXPECT_NEAR(oracle::radial_collision_probability(1e-4, 0.2, 0.4, 3), chi2_cdf(4.0, 3), 1e-6);
}

TEST(Lambert, ZeroVarianceRobot) {
  const Vec mu = vec({0.3, 0.1});
  const GaussianBelief obs{vec({0.0, 0.0}), iso(2, 0.04)};
  const CollisionQuery q(Body{GaussianBelief::point(mu), 0.2}, Body{obs, 0.2});
  const double expected = gaussian_density(obs, mu) * std::numbers::pi * 0.16;
  EXPECT_NEAR(lambert_single_sum(q, {1000, 0, 1}).value, expected, 1e-12);
}

TEST(Lambert, ClosedFormExpectation) {
  const CollisionQuery q(Body{{vec({0.38, 0.0}), iso(2, 0.04)}, 0.2},
                         Body{{vec({0.0, 0.0}), iso(2, 0.04)}, 0.2});
  // E[p_obs(x)] = N(0.38; 0, 0.08 I) density; times pi 0.16 gives exp(-0.9025).
  const double expected = std::exp(-0.9025);
  const ProbabilityEstimate e = lambert_single_sum(q, {1'000'000, 0, 0});
  ASSERT_TRUE(e.half_width_95.has_value());
  EXPECT_NEAR(e.value, expected, 3.0 * *e.half_width_95);
  EXPECT_NEAR(e.value, 0.406, 0.005);
}

TEST(Lambert, FarApart) {
  const CollisionQuery q(Body{{vec({5.0, 5.0}), iso(2, 0.04)}, 0.2},
                         Body{{vec({0.0, 0.0}), iso(2, 0.04)}, 0.2});
  EXPECT_LT(lambert_single_sum(q, {10000, 0, 1}).value, 1e-12);
}

TEST(Lambert, RequiresObstacleUncertainty) {
  try {
    lambert_single_sum(table1(), {1000, 0, 1});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("method requires obstacle uncertainty"), std::string::npos);
  }
}

TEST(BoundingVolume, Examples) {
  EXPECT_EQ(bounding_volume_check(table1()).value, 1.0);
  EXPECT_EQ(bounding_volume_check(deterministic(0.41)).value, 0.0);
  EXPECT_EQ(bounding_volume_check(deterministic(0.4)).value, 1.0);
}

TEST(BoundingVolume, MonotoneInK) {
  const CollisionQuery q(Body{{vec({0.9, 0.0}), iso(2, 0.01)}, 0.2},
                         Body{{vec({0.0, 0.0}), iso(2, 0.04)}, 0.2});
  double prev = 0.0;
  for (double k = 0.0; k <= 5.0; k += 0.1) {
    const double v = bounding_volume_check(q, k).value;
    EXPECT_TRUE(v == 0.0 || v == 1.0);
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_EQ(prev, 1.0);
}

double grid_max_density(const CollisionQuery& q) {
  const GaussianBelief& w = q.relative();
  const double b = q.contact_radius();
  double best = 0.0;
  if (q.dim() == 2) {
    for (int i = 0; i <= 400; ++i) {
      const double r = b * i / 400.0;
      for (int j = 0; j < 4000; ++j) {
        const double t = 2.0 * std::numbers::pi * j / 4000.0;
        best = std::max(best, gaussian_density(w, vec({r * std::cos(t), r * std::sin(t)})));
      }
    }
  } else {
    for (int i = 0; i <= 60; ++i) {
      const double r = b * i / 60.0;
      for (int j = 0; j <= 300; ++j) {
        const double ph = std::numbers::pi * j / 300.0;
        for (int k = 0; k < 600; ++k) {
          const double t = 2.0 * std::numbers::pi * k / 600.0;
          best = std::max(best, gaussian_density(w, vec({r * std::sin(ph) * std::cos(t),
                                                          r * std::sin(ph) * std::sin(t),
                                                          r * std::cos(ph)})));
        }
      }
    }
  }
  return best * ball_volume(b, q.dim());
}

TEST(MaxDensity, TableOneClamped) { EXPECT_EQ(max_density_approximation(table1()).value, 1.0); }

TEST(MaxDensity, FarApart) {
  const CollisionQuery q(Body{{vec({3.0, 0.0}), iso(2, 0.04)}, 0.2},
                         Body{GaussianBelief::point(vec({0.0, 0.0})), 0.2});
  EXPECT_LT(max_density_approximation(q).value, 1e-12);
}

TEST(MaxDensity, IsotropicOutsideMatchesGrid) {
  const CollisionQuery q(Body{{vec({0.7, 0.3}), iso(2, 0.04)}, 0.2},
                         Body{GaussianBelief::point(vec({0.0, 0.0})), 0.2});
  const double v = max_density_approximation(q).value;
  const double grid = grid_max_density(q);
  EXPECT_GE(v, grid * (1.0 - 1e-12));
  EXPECT_NEAR(v, grid, 1e-4 * grid);
  // Closed form: density at the boundary point on the segment to the origin.
  const double gap = std::hypot(0.7, 0.3) - 0.4;
  const double expected = std::exp(-gap * gap / 0.08) / (2.0 * std::numbers::pi * 0.04) * std::numbers::pi * 0.16;
  EXPECT_NEAR(v, expected, 1e-12);
}

TEST(MaxDensity, AnisotropicMatchesGrid) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = trial < 8 ? 2 : 3;
    const Vec mean = random_vec(rng, n, 1.0);
    const CollisionQuery q(Body{{mean, random_cov(rng, n, 0.01, 0.1)}, 0.15},
                           Body{GaussianBelief::point(Vec::Zero(n)), 0.15});
    const double v = max_density_approximation(q).value;
    if (v >= 1.0) continue;
    const double grid = grid_max_density(q);
    EXPECT_GE(v, grid * (1.0 - 1e-9)) << trial;
    EXPECT_NEAR(v, grid, (n == 2 ? 1e-3 : 2e-2) * grid) << trial;
  }
}

TEST(ChanceLinear, Examples) {
  EXPECT_NEAR(linearized_chance_constraint(table1()).value, 0.5398, 5e-5);
  const CollisionQuery at_contact(Body{{vec({0.4, 0.0}), iso(2, 0.04)}, 0.2},
                                  Body{GaussianBelief::point(vec({0.0, 0.0})), 0.2});
  EXPECT_NEAR(linearized_chance_constraint(at_contact).value, 0.5, 1e-12);
  const CollisionQuery far(Body{{vec({0.0, 1.0}), iso(2, 0.04)}, 0.2},
                           Body{GaussianBelief::point(vec({0.0, 0.0})), 0.2});
  EXPECT_NEAR(linearized_chance_constraint(far).value, normal_cdf(-3.0), 1e-12);
  EXPECT_NEAR(linearized_chance_constraint(far).value, 0.00135, 5e-6);
}

TEST(ChanceLinear, CoincidentMeans) {
  const CollisionQuery q(Body{{vec({0.0, 0.0}), iso(2, 0.04)}, 0.2},
                         Body{GaussianBelief::point(vec({0.0, 0.0})), 0.2});
  EXPECT_THROW(linearized_chance_constraint(q), std::domain_error);
}

TEST(RectBox, TableOne) {
  const double expected =
      (normal_cdf(0.1) - normal_cdf(-3.9)) * (normal_cdf(2.0) - normal_cdf(-2.0));
  EXPECT_NEAR(rectangular_box_probability(table1()).value, expected, 1e-12);
  EXPECT_NEAR(expected, 0.5153, 1e-4);
}

TEST(RectBox, DeterministicInside) {
  EXPECT_EQ(rectangular_box_probability(deterministic(0.3)).value, 1.0);
  EXPECT_EQ(rectangular_box_probability(deterministic(0.5)).value, 0.0);
}

TEST(RectBox, DominatesMonteCarlo) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 2;
    const CollisionQuery q(Body{{random_vec(rng, n, 0.5), random_cov(rng, n, 0.005, 0.08)}, 0.2},
                           Body{{random_vec(rng, n, 0.5), random_cov(rng, n, 0.0, 0.05)}, 0.2});
    const ProbabilityEstimate mc = mc_collision_probability(q, {100'000, std::uint64_t(trial), 0});
    EXPECT_GE(rectangular_box_probability(q).value, mc.value - 3.0 * *mc.half_width_95) << trial;
  }
}

TEST(Estimators, AllInUnitInterval) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 2;
    const CollisionQuery q(Body{{random_vec(rng, n, 0.8), random_cov(rng, n, 0.005, 0.1)}, 0.2},
                           Body{{random_vec(rng, n, 0.8), random_cov(rng, n, 0.005, 0.1)}, 0.25});
    for (Method m : kAllMethods) {
      const ProbabilityEstimate e = estimate(m, q, {20'000, 1, 1});
      EXPECT_GE(e.value, 0.0) << method_id(m);
      EXPECT_LE(e.value, 1.0) << method_id(m);
      if (e.half_width_95) EXPECT_GE(*e.half_width_95, 0.0);
    }
  }
}

TEST(Methods, IdsRoundTrip) {
  for (Method m : kAllMethods) EXPECT_EQ(parse_method(method_id(m)), m);
  EXPECT_EQ(parse_method("bound"), Method::kBound);
  EXPECT_EQ(parse_method("rect-box"), Method::kRectBox);
  EXPECT_THROW(parse_method("hardy"), std::invalid_argument);
}

TEST(Benchmark, Basics) {
  const TimingStats t = benchmark_method(Method::kBound, table1(), 2);
  EXPECT_EQ(t.repetitions, 2);
  EXPECT_TRUE(std::isfinite(t.stddev_s));
  EXPECT_GE(t.stddev_s, 0.0);
  EXPECT_LT(benchmark_method(Method::kBound, table1(), 200).mean_s, 1e-3);
  EXPECT_THROW(benchmark_method(Method::kBound, table1(), 1), std::invalid_argument);
}

TEST(Benchmark, MonteCarloScalesLinearly) {
  const CollisionQuery q = table1();
  // Best of a few trials absorbs scheduler noise on a shared machine.
  double best = 0.0;
  for (int attempt = 0; attempt < 5; ++attempt) {
    const double small = benchmark_method(Method::kMonteCarlo, q, 30, {10'000, 0, 1}).mean_s;
    const double large = benchmark_method(Method::kMonteCarlo, q, 10, {100'000, 0, 1}).mean_s;
    const double ratio = large / small;
    if (std::abs(ratio - 10.0) < std::abs(best - 10.0)) best = ratio;
    if (ratio >= 8.0 && ratio <= 12.0) break;
  }
  EXPECT_GE(best, 8.0);
  EXPECT_LE(best, 12.0);
}

}  // namespace
}  // namespace pcc
