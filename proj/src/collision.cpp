#include "pcc/collision.hpp"

#include "pcc/random.hpp"
#include "pcc/special_functions.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <vector>

namespace pcc {

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
ProbabilityEstimate timed(F&& body) {
  const auto start = Clock::now();
  ProbabilityEstimate est = body();
  est.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
  est.value = std::clamp(est.value, 0.0, 1.0);
  return est;
}

constexpr std::size_t kChunkSize = std::size_t{1} << 16;
constexpr double kZ95 = 1.959963984540054;

double wilson_half_width(std::size_t hits, std::size_t n) {
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(hits) / nn;
  const double z2 = kZ95 * kZ95;
  return kZ95 / (1.0 + z2 / nn) * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
}

unsigned resolve_threads(unsigned requested, std::size_t chunks) {
  unsigned t = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(chunks, 1)));
}

// Runs chunk_fn(chunk_index, begin, end) for every chunk and returns the
// per-chunk results in chunk order.
template <typename R, typename F>
std::vector<R> for_each_chunk(std::size_t n, unsigned threads, F chunk_fn) {
  const std::size_t chunks = (n + kChunkSize - 1) / kChunkSize;
  std::vector<R> results(chunks);
  const unsigned workers = resolve_threads(threads, chunks);
  auto work = [&](unsigned worker) {
    for (std::size_t c = worker; c < chunks; c += workers) {
      const std::size_t begin = c * kChunkSize;
      results[c] = chunk_fn(c, begin, std::min(n, begin + kChunkSize));
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  return results;
}

Vec draw(NormalSampler& normal, const Vec& mean, const Mat& sqrt_factor) {
  Vec z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal();
  return mean + sqrt_factor * z;
}

}  // namespace

void Body::validate() const {
  center.validate();
  if (center.dim() != 2 && center.dim() != 3) {
    throw std::invalid_argument("body center must be 2-D or 3-D");
  }
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("body radius must be positive");
  }
}

CollisionQuery::CollisionQuery(Body robot, Body obstacle)
    : robot_(std::move(robot)), obstacle_(std::move(obstacle)) {
  robot_.validate();
  obstacle_.validate();
  relative_ = relative_belief(robot_.center, obstacle_.center);
}

double ball_volume(double radius, int dim) {
  if (dim == 2) return std::numbers::pi * radius * radius;
  if (dim == 3) return 4.0 / 3.0 * std::numbers::pi * radius * radius * radius;
  throw std::invalid_argument("ball_volume: dimension must be 2 or 3");
}

ProbabilityEstimate bound_collision_probability(const CollisionQuery& q) {
  return timed([&] {
    const GaussianBelief& w = q.relative();
    const double lambda = max_eigenvalue_of_inverse(w.cov);
    const double arg = std::max(0.0, lambda * (q.alpha() - w.mean.squaredNorm()));
    return ProbabilityEstimate{chi2_cdf(arg, q.dim()), std::nullopt, 0.0};
  });
}

ChanceConstraint::ChanceConstraint(const Mat& sigma, double alpha, double eps)
    : lambda_max_(0.0), threshold_(0.0), alpha_(alpha) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::invalid_argument("chance constraint: eps must lie in (0, 1)");
  }
  if (sigma.rows() != 2 && sigma.rows() != 3) {
    throw std::invalid_argument("chance constraint: covariance must be 2x2 or 3x3");
  }
  lambda_max_ = max_eigenvalue_of_inverse(sigma);
  threshold_ = chi2_inv_cdf(eps, static_cast<int>(sigma.rows()));
}

ConstraintMargin ChanceConstraint::evaluate(const Vec& x_rel, const Vec& mu) const {
  ConstraintMargin m;
  m.value = threshold_ - lambda_max_ * (alpha_ - 2.0 * x_rel.dot(mu) + mu.squaredNorm());
  m.gradient = 2.0 * lambda_max_ * mu;
  return m;
}

ConstraintMargin constraint_margin(const Vec& x_rel, const Vec& mu, const Mat& sigma, double alpha,
                                   double eps) {
  if (x_rel.size() != mu.size() || sigma.rows() != mu.size()) {
    throw std::invalid_argument("constraint_margin: dimension mismatch");
  }
  return ChanceConstraint(sigma, alpha, eps).evaluate(x_rel, mu);
}

ProbabilityEstimate mc_collision_probability(const CollisionQuery& q, const SamplingOptions& opts) {
  if (opts.n_samples < 1) throw std::invalid_argument("mc: n_samples must be >= 1");
  return timed([&] {
    const Body& r = q.robot();
    const Body& s = q.obstacle();
    const Mat lr = psd_sqrt_factor(r.center.cov);
    const Mat ls = psd_sqrt_factor(s.center.cov);
    const double alpha = q.alpha();
    const auto hits_per_chunk = for_each_chunk<std::size_t>(
        opts.n_samples, opts.threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
          NormalSampler normal(stream_key(opts.seed, {chunk}));
          std::size_t hits = 0;
          for (std::size_t i = begin; i < end; ++i) {
            const Vec x = draw(normal, r.center.mean, lr);
            const Vec o = draw(normal, s.center.mean, ls);
            if ((x - o).squaredNorm() <= alpha) ++hits;
          }
          return hits;
        });
    const std::size_t hits = std::accumulate(hits_per_chunk.begin(), hits_per_chunk.end(), std::size_t{0});
    ProbabilityEstimate est;
    est.value = static_cast<double>(hits) / static_cast<double>(opts.n_samples);
    est.half_width_95 = wilson_half_width(hits, opts.n_samples);
    return est;
  });
}

ProbabilityEstimate lambert_single_sum(const CollisionQuery& q, const SamplingOptions& opts) {
  if (opts.n_samples < 1) throw std::invalid_argument("lambert: n_samples must be >= 1");
  const Mat& obstacle_cov = q.obstacle().center.cov;
  const double tr = obstacle_cov.trace();
  if (!(tr > 0.0) || min_eigenvalue(obstacle_cov) <= 1e-12 * tr) {
    throw std::invalid_argument("lambert: method requires obstacle uncertainty");
  }
  return timed([&] {
    const Body& r = q.robot();
    const Body& s = q.obstacle();
    const Mat lr = psd_sqrt_factor(r.center.cov);
    const Eigen::LLT<Mat> llt(s.center.cov);
    const Mat l_obs = llt.matrixL();
    const double log_norm = -l_obs.diagonal().array().log().sum() -
                            0.5 * q.dim() * std::log(2.0 * std::numbers::pi);
    const double volume = ball_volume(q.contact_radius(), q.dim());

    struct Partial {
      double sum = 0.0;
      double sum_sq = 0.0;
    };
    const auto partials = for_each_chunk<Partial>(
        opts.n_samples, opts.threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
          NormalSampler normal(stream_key(opts.seed, {chunk}));
          Partial p;
          for (std::size_t i = begin; i < end; ++i) {
            const Vec x = draw(normal, r.center.mean, lr);
            const Vec white = l_obs.triangularView<Eigen::Lower>().solve(Vec(x - s.center.mean));
            const double term = volume * std::exp(log_norm - 0.5 * white.squaredNorm());
            p.sum += term;
            p.sum_sq += term * term;
          }
          return p;
        });
    Partial total;
    for (const Partial& p : partials) {
      total.sum += p.sum;
      total.sum_sq += p.sum_sq;
    }
    const double n = static_cast<double>(opts.n_samples);
    const double mean = total.sum / n;
    const double var = std::max(0.0, total.sum_sq / n - mean * mean);
    ProbabilityEstimate est;
    est.value = mean;
    est.half_width_95 = kZ95 * std::sqrt(var / n);
    return est;
  });
}

ProbabilityEstimate bounding_volume_check(const CollisionQuery& q, double k_sigma) {
  return timed([&] {
    const double sr = std::sqrt(std::max(0.0, max_eigenvalue(q.robot().center.cov)));
    const double ss = std::sqrt(std::max(0.0, max_eigenvalue(q.obstacle().center.cov)));
    const double reach = q.contact_radius() + k_sigma * (sr + ss);
    const double dist = q.relative().mean.norm();
    return ProbabilityEstimate{dist <= reach ? 1.0 : 0.0, std::nullopt, 0.0};
  });
}

ProbabilityEstimate max_density_approximation(const CollisionQuery& q) {
  return timed([&] {
    const GaussianBelief& w = q.relative();
    max_eigenvalue_of_inverse(w.cov);  // rejects singular Sigma_w
    const SymEigen eig = eigen_sym(w.cov);
    const int n = q.dim();
    const double b = q.contact_radius();
    const double log_peak = -0.5 * n * std::log(2.0 * std::numbers::pi) -
                            0.5 * eig.values.array().log().sum();

    double mahalanobis_sq = 0.0;
    const double dist = w.mean.norm();
    if (dist > b) {
      const Vec m = eig.vectors.transpose() * w.mean;
      const double lmax = eig.values(0);
      const double lmin = eig.values(n - 1);
      if (lmax - lmin <= 1e-12 * lmax) {
        // isotropic: nearest point is on the segment towards the origin
        mahalanobis_sq = (dist - b) * (dist - b) / lmax;
      } else {
        // Minimizer of (x - m)^T Lambda^{-1} (x - m) on |x| = b has the form
        // x_i = m_i / (1 + nu * lambda_i); |x(nu)| decreases monotonically in nu.
        auto point = [&](double nu) {
          Vec x(n);
          for (int i = 0; i < n; ++i) x(i) = m(i) / (1.0 + nu * eig.values(i));
          return x;
        };
        double lo = 0.0;
        double hi = (dist / b - 1.0) / lmin;
        for (int iter = 0; iter < 200 && hi - lo > 1e-15 * hi; ++iter) {
          const double mid = 0.5 * (lo + hi);
          if (point(mid).norm() > b) {
            lo = mid;
          } else {
            hi = mid;
          }
        }
        const Vec x = point(hi);
        for (int i = 0; i < n; ++i) {
          mahalanobis_sq += (x(i) - m(i)) * (x(i) - m(i)) / eig.values(i);
        }
      }
    }
    const double density = std::exp(log_peak - 0.5 * mahalanobis_sq);
    return ProbabilityEstimate{ball_volume(b, n) * density, std::nullopt, 0.0};
  });
}

ProbabilityEstimate linearized_chance_constraint(const CollisionQuery& q) {
  const GaussianBelief& w = q.relative();
  const double dist = w.mean.norm();
  if (dist == 0.0) {
    throw std::domain_error("chance-linear: linearization undefined at coincident means");
  }
  return timed([&] {
    const Vec a = w.mean / dist;
    const double var = a.dot(w.cov * a);
    if (!(var > 0.0)) throw DegenerateCovariance("zero variance along the line between means");
    return ProbabilityEstimate{normal_cdf((q.contact_radius() - dist) / std::sqrt(var)),
                               std::nullopt, 0.0};
  });
}

ProbabilityEstimate rectangular_box_probability(const CollisionQuery& q) {
  return timed([&] {
    const GaussianBelief& w = q.relative();
    const SymEigen eig = eigen_sym(w.cov);
    const Vec m = eig.vectors.transpose() * w.mean;
    const double b = q.contact_radius();
    const double tiny = 1e-12 * std::max(eig.values(0), 0.0);
    double mass = 1.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double var = eig.values(i);
      if (!(var > tiny) || var <= 0.0) {
        mass *= std::abs(m(i)) <= b ? 1.0 : 0.0;
      } else {
        const double sd = std::sqrt(var);
        mass *= normal_cdf((b - m(i)) / sd) - normal_cdf((-b - m(i)) / sd);
      }
    }
    return ProbabilityEstimate{mass, std::nullopt, 0.0};
  });
}

std::string_view method_id(Method m) {
  switch (m) {
    case Method::kBound: return "bound";
    case Method::kMonteCarlo: return "mc";
    case Method::kLambert: return "lambert";
    case Method::kBoundingVolume: return "bounding-volume";
    case Method::kMaxDensity: return "max-density";
    case Method::kChanceLinear: return "chance-linear";
    case Method::kRectBox: return "rect-box";
  }
  return "unknown";
}

std::string_view method_label(Method m) {
  switch (m) {
    case Method::kBound: return "Chi-squared bound";
    case Method::kMonteCarlo: return "Numerical integral (Monte Carlo)";
    case Method::kLambert: return "Approximate numerical integral";
    case Method::kBoundingVolume: return "Bounding volume";
    case Method::kMaxDensity: return "Maximum probability approximation";
    case Method::kChanceLinear: return "Chance constraint";
    case Method::kRectBox: return "Rectangular bounding box";
  }
  return "unknown";
}

Method parse_method(std::string_view id) {
  for (Method m : kAllMethods) {
    if (method_id(m) == id) return m;
  }
  throw std::invalid_argument("unknown method id '" + std::string(id) + "'");
}

ProbabilityEstimate estimate(Method m, const CollisionQuery& q, const SamplingOptions& opts) {
  switch (m) {
    case Method::kBound: return bound_collision_probability(q);
    case Method::kMonteCarlo: return mc_collision_probability(q, opts);
    case Method::kLambert: return lambert_single_sum(q, opts);
    case Method::kBoundingVolume: return bounding_volume_check(q);
    case Method::kMaxDensity: return max_density_approximation(q);
    case Method::kChanceLinear: return linearized_chance_constraint(q);
    case Method::kRectBox: return rectangular_box_probability(q);
  }
  throw std::invalid_argument("unknown method");
}

TimingStats benchmark_method(Method m, const CollisionQuery& q, int repetitions,
                             const SamplingOptions& opts) {
  if (repetitions < 2) throw std::invalid_argument("benchmark: repetitions must be >= 2");
  estimate(m, q, opts);  // warm-up
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(repetitions));
  for (int i = 0; i < repetitions; ++i) {
    const auto start = Clock::now();
    estimate(m, q, opts);
    times.push_back(std::chrono::duration<double>(Clock::now() - start).count());
  }
  const double mean = std::accumulate(times.begin(), times.end(), 0.0) / repetitions;
  double ss = 0.0;
  for (double t : times) ss += (t - mean) * (t - mean);
  return TimingStats{mean, std::sqrt(ss / (repetitions - 1)), repetitions};
}

}  // namespace pcc
