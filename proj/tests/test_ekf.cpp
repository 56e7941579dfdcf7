#include "pcc/ekf.hpp"
#include "pcc/random.hpp"

#include <Eigen/Cholesky>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace pcc {
namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

const MotionModel kUni(ModelKind::kUnicycle);
const MotionModel kDi(ModelKind::kDoubleIntegrator3D);

TEST(EkfPredict, DeterministicPropagation) {
  const BeliefState b{vec({0.0, 0.0, 0.3}), Mat::Zero(3, 3)};
  const BeliefState out = ekf_predict(kUni, b, vec({0.4, 0.2}), 0.1, Mat::Zero(3, 3));
  EXPECT_EQ(out.mean, unicycle_step(b.mean, vec({0.4, 0.2}), 0.1));
  EXPECT_TRUE(out.cov.isZero(0.0));
}

TEST(EkfPredict, ProcessNoiseOnly) {
  const Mat r = vec({1e-4, 2e-4, 3e-4}).asDiagonal();
  const BeliefState out = ekf_predict(kUni, {vec({1.0, 1.0, 0.0}), Mat::Zero(3, 3)}, vec({0.4, 0.2}), 0.1, r);
  EXPECT_EQ(out.cov, r);
}

TEST(EkfPredict, MatchesMonteCarlo) {
  const Mat sigma{{0.004, 0.001, 0.0005}, {0.001, 0.003, -0.0004}, {0.0005, -0.0004, 0.002}};
  const Mat r = vec({1e-4, 1e-4, 1e-4}).asDiagonal();
  const BeliefState b{vec({0.5, -0.3, 0.8}), sigma};
  const Vec u = vec({0.5, 1.0});
  const double dt = 0.1;
  const BeliefState ekf = ekf_predict(kUni, b, u, dt, r);

  const Eigen::LLT<Mat> l_sigma(sigma);
  const Mat ls = l_sigma.matrixL();
  const Mat lr = r.cwiseSqrt();
  NormalSampler normal(stream_key(99, {}));
  constexpr int kN = 100'000;
  std::vector<Vec> samples;
  samples.reserve(kN);
  Vec mean = Vec::Zero(3);
  for (int i = 0; i < kN; ++i) {
    Vec z1(3), z2(3);
    for (int k = 0; k < 3; ++k) z1(k) = normal();
    for (int k = 0; k < 3; ++k) z2(k) = normal();
    Vec x = unicycle_step(b.mean + ls * z1, u, dt) + lr * z2;
    samples.push_back(x);
    mean += x;
  }
  mean /= kN;
  Mat cov = Mat::Zero(3, 3);
  for (const Vec& x : samples) cov += (x - mean) * (x - mean).transpose();
  cov /= (kN - 1);

  EXPECT_LE((mean - ekf.mean).norm(), 1e-3);
  // Standard error of a sample covariance entry is about sqrt(2/N) of its scale.
  const double scale = std::sqrt(ekf.cov.diagonal().maxCoeff() * ekf.cov.diagonal().maxCoeff());
  EXPECT_LE((cov - ekf.cov).cwiseAbs().maxCoeff(), 5.0 * std::sqrt(2.0 / kN) * scale + 1e-5);
}

TEST(EkfUpdate, UninformativeMeasurement) {
  const BeliefState b{vec({1.0, 2.0, 0.5}), vec({0.01, 0.02, 0.03}).asDiagonal()};
  const BeliefState out = ekf_update(kUni, b, vec({3.0, -1.0, 2.0}), Mat::Identity(3, 3) * 1e12);
  EXPECT_LE((out.mean - b.mean).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((out.cov - b.cov).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(EkfUpdate, PerfectPrior) {
  const BeliefState b{vec({1.0, 2.0, 0.5}), Mat::Zero(3, 3)};
  const BeliefState out = ekf_update(kUni, b, vec({1.3, 1.9, 0.4}), Mat::Identity(3, 3) * 0.02);
  EXPECT_LE((out.mean - b.mean).norm(), 1e-15);
  EXPECT_LE(out.cov.norm(), 1e-15);
}

TEST(EkfUpdate, EqualFusion) {
  const Mat sigma = vec({0.02, 0.02, 0.001}).asDiagonal();
  const BeliefState b{vec({0.0, 0.0, 0.0}), sigma};
  const BeliefState out = ekf_update(kUni, b, vec({1.0, -2.0, 0.2}), sigma);
  EXPECT_LE((out.mean - vec({0.5, -1.0, 0.1})).norm(), 1e-14);
  EXPECT_LE((out.cov - sigma / 2.0).norm(), 1e-15);
}

TEST(EkfUpdate, AngleInnovationWrapped) {
  const Mat sigma = Mat::Identity(3, 3) * 0.01;
  const BeliefState b{vec({0.0, 0.0, 3.1}), sigma};
  const BeliefState out = ekf_update(kUni, b, vec({0.0, 0.0, -3.1}), sigma);
  // Midpoint across the branch cut is pi, not 0.
  EXPECT_NEAR(std::abs(out.mean(2)), std::numbers::pi, 1e-12);
}

TEST(EkfUpdate, DivergenceDetected) {
  const BeliefState b{vec({0.0, 0.0, 0.0}), -Mat::Identity(3, 3)};
  try {
    ekf_update(kUni, b, vec({0.1, 0.1, 0.1}), Mat::Identity(3, 3) * 0.01);
    FAIL();
  } catch (const FilterDivergence& e) {
    EXPECT_STREQ(e.what(), "filter divergence");
  }
}

TEST(EkfUpdate, DoubleIntegratorMeasuresPosition) {
  const Mat p = Mat::Identity(6, 6) * 0.1;
  const BeliefState b{Vec::Zero(6), p};
  const BeliefState out = ekf_update(kDi, b, vec({1.0, 1.0, 1.0}), Mat::Identity(3, 3) * 0.1);
  EXPECT_LE((out.mean.head(3) - vec({0.5, 0.5, 0.5})).norm(), 1e-14);
  EXPECT_LE(out.mean.tail(3).norm(), 1e-15);
  EXPECT_NEAR(out.cov(0, 0), 0.05, 1e-15);
  EXPECT_NEAR(out.cov(5, 5), 0.1, 1e-15);
}

TEST(Ekf, RandomSequencesStayPsdAndUpdateShrinksTrace) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int run = 0; run < 50; ++run) {
    const bool uni = run % 2 == 0;
    const MotionModel& model = uni ? kUni : kDi;
    const int n = model.state_dim();
    BeliefState b{Vec::Zero(n), Mat::Identity(n, n) * 0.01};
    const Mat r = Mat::Identity(n, n) * 1e-4;
    const Mat q = vec({0.02, 0.02, uni ? 1.2 * std::pow(std::numbers::pi / 180.0, 2) : 0.02}).asDiagonal();
    for (int step = 0; step < 100; ++step) {
      Vec ctrl(model.control_dim());
      for (Eigen::Index i = 0; i < ctrl.size(); ++i) ctrl(i) = u(rng);
      b = ekf_predict(model, b, ctrl, 0.1, r);
      Vec z = model.measure(b.mean);
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) += 0.1 * u(rng);
      const double before = b.cov.trace();
      b = ekf_update(model, b, z, q);
      EXPECT_LE(b.cov.trace(), before + 1e-15);
      EXPECT_TRUE(is_symmetric(b.cov));
      EXPECT_GE(eigen_sym_jacobi(b.cov).values.minCoeff(), -1e-12);
    }
  }
}

TEST(PropagateHorizon, EmptyControls) {
  const BeliefState b{vec({0.0, 0.0, 0.0}), Mat::Identity(3, 3) * 0.01};
  const auto out = propagate_horizon(kUni, b, {}, 0.1, Mat::Identity(3, 3));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].mean, b.mean);
  EXPECT_EQ(out[0].cov, b.cov);
}

TEST(PropagateHorizon, NoNoiseNoGrowth) {
  const std::vector<Vec> controls(10, vec({0.5, 0.3}));
  const auto out = propagate_horizon(kUni, {vec({0.0, 0.0, 0.0}), Mat::Zero(3, 3)}, controls, 0.1,
                                     Mat::Zero(3, 3));
  ASSERT_EQ(out.size(), 11u);
  for (const BeliefState& b : out) EXPECT_TRUE(b.cov.isZero(0.0));
}

TEST(PropagateHorizon, TraceNondecreasing) {
  const std::vector<Vec> controls(10, vec({0.5, 0.8}));
  const auto out = propagate_horizon(kUni, {vec({0.0, 0.0, 0.2}), Mat::Identity(3, 3) * 0.001}, controls,
                                     0.1, Mat::Identity(3, 3) * 1e-4);
  for (std::size_t l = 1; l < out.size(); ++l) EXPECT_GE(out[l].cov.trace(), out[l - 1].cov.trace());
}

TEST(PropagateHorizon, DoubleIntegratorIsLinearKalman) {
  const double dt = 0.1;
  // Transition matrix written out independently of the library.
  Mat f = Mat::Identity(6, 6);
  for (int i = 0; i < 3; ++i) f(i, 3 + i) = dt;
  const Mat r = Mat::Identity(6, 6) * 1e-4;
  const Mat p0 = vec({0.01, 0.02, 0.03, 0.001, 0.002, 0.003}).asDiagonal();
  const std::vector<Vec> controls(20, vec({0.3, -0.1, 0.5}));
  const auto out = propagate_horizon(kDi, {Vec::Zero(6), p0}, controls, dt, r);
  Mat p = p0;
  Mat fk = Mat::Identity(6, 6);
  Mat noise = Mat::Zero(6, 6);
  for (int k = 1; k <= 20; ++k) {
    noise = f * noise * f.transpose() + r;
    fk = f * fk;
    p = fk * p0 * fk.transpose() + noise;
    EXPECT_LE((out[k].cov - p).cwiseAbs().maxCoeff(), 1e-14);
    const double t = k * dt;
    EXPECT_NEAR(out[k].mean(0), 0.5 * 0.3 * t * t, 1e-13);
    EXPECT_NEAR(out[k].mean(5), 0.5 * t, 1e-13);
  }
}

}  // namespace
}  // namespace pcc
