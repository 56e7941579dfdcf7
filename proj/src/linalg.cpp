#include "pcc/linalg.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace pcc {

namespace {

void sort_descending(SymEigen& e) {
  const auto n = e.values.size();
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    Eigen::Index best = i;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (e.values(j) > e.values(best)) best = j;
    }
    if (best != i) {
      std::swap(e.values(i), e.values(best));
      e.vectors.col(i).swap(e.vectors.col(best));
    }
  }
}

// Symmetric 2x2 [[a, b], [b, c]]. Eigenvector built from whichever row of
// (M - l1 I) has the larger norm so that the result stays accurate when b ~ 0.
SymEigen eigen_2x2(double a, double b, double c) {
  SymEigen e;
  e.values.resize(2);
  e.vectors.resize(2, 2);
  const double mean = 0.5 * (a + c);
  const double half_diff = 0.5 * (a - c);
  const double radius = std::hypot(half_diff, b);
  const double l1 = mean + radius;
  const double l2 = mean - radius;
  e.values << l1, l2;

  if (radius == 0.0) {
    e.vectors.setIdentity();
    return e;
  }
  double vx, vy;
  if (half_diff >= 0.0) {
    // row 0 of (M - l2 I) = (half_diff + radius, b) spans the l1 eigenvector
    vx = half_diff + radius;
    vy = b;
  } else {
    vx = b;
    vy = radius - half_diff;
  }
  const double norm = std::hypot(vx, vy);
  vx /= norm;
  vy /= norm;
  e.vectors << vx, -vy, vy, vx;
  return e;
}

Eigen::Vector3d any_unit_orthogonal(const Eigen::Vector3d& w) {
  // w is unit length; pick the better conditioned of the two axis crosses
  Eigen::Vector3d u;
  if (std::abs(w.x()) > std::abs(w.y())) {
    u = Eigen::Vector3d(-w.z(), 0.0, w.x()) / std::hypot(w.x(), w.z());
  } else {
    u = Eigen::Vector3d(0.0, w.z(), -w.y()) / std::hypot(w.y(), w.z());
  }
  return u;
}

// Unit eigenvector of symmetric `a` for an isolated eigenvalue `lambda`:
// the largest cross product of two rows of (a - lambda I).
Eigen::Vector3d isolated_eigenvector(const Eigen::Matrix3d& a, double lambda) {
  const Eigen::Matrix3d s = a - lambda * Eigen::Matrix3d::Identity();
  const std::array<Eigen::Vector3d, 3> cands = {
      Eigen::Vector3d(s.row(0).cross(s.row(1))), Eigen::Vector3d(s.row(0).cross(s.row(2))),
      Eigen::Vector3d(s.row(1).cross(s.row(2)))};
  std::size_t best = 0;
  for (std::size_t i = 1; i < cands.size(); ++i) {
    if (cands[i].squaredNorm() > cands[best].squaredNorm()) best = i;
  }
  return cands[best].normalized();
}

bool eigen_3x3_closed_form(const Mat& m, SymEigen& out) {
  const Eigen::Matrix3d a = m;
  const double scale = a.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    out.values = Vec::Zero(3);
    out.vectors = Mat::Identity(3, 3);
    return true;
  }
  const Eigen::Matrix3d b = a / scale;
  const double q = b.trace() / 3.0;
  const double p1 = b(0, 1) * b(0, 1) + b(0, 2) * b(0, 2) + b(1, 2) * b(1, 2);
  const double p2 = (b(0, 0) - q) * (b(0, 0) - q) + (b(1, 1) - q) * (b(1, 1) - q) +
                    (b(2, 2) - q) * (b(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  if (p < 1e-9) return false;  // scaled multiple of the identity

  const Eigen::Matrix3d c = (b - q * Eigen::Matrix3d::Identity()) / p;
  const double r = std::clamp(c.determinant() / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  constexpr double kTwoThirdsPi = 2.0 * std::numbers::pi / 3.0;
  double l1 = q + 2.0 * p * std::cos(phi);
  double l3 = q + 2.0 * p * std::cos(phi + kTwoThirdsPi);
  double l2 = 3.0 * q - l1 - l3;

  const double span = l1 - l3;
  if (span <= 0.0) return false;
  if ((l1 - l2) / span < 1e-9 || (l2 - l3) / span < 1e-9) return false;

  // Solve for the eigenvector of whichever extreme eigenvalue is better
  // isolated, then reduce to a 2x2 problem in its orthogonal complement.
  const bool top_isolated = (l1 - l2) >= (l2 - l3);
  const double isolated = top_isolated ? l1 : l3;
  const Eigen::Vector3d w = isolated_eigenvector(b, isolated);
  const Eigen::Vector3d u = any_unit_orthogonal(w);
  const Eigen::Vector3d v = w.cross(u);
  const double m00 = u.dot(b * u);
  const double m01 = u.dot(b * v);
  const double m11 = v.dot(b * v);
  const SymEigen sub = eigen_2x2(m00, m01, m11);

  out.values.resize(3);
  out.vectors.resize(3, 3);
  const Eigen::Vector3d e_hi = sub.vectors(0, 0) * u + sub.vectors(1, 0) * v;
  const Eigen::Vector3d e_lo = sub.vectors(0, 1) * u + sub.vectors(1, 1) * v;
  const double w_value = w.dot(b * w);
  if (top_isolated) {
    out.values << w_value, sub.values(0), sub.values(1);
    out.vectors.col(0) = w;
    out.vectors.col(1) = e_hi;
    out.vectors.col(2) = e_lo;
  } else {
    out.values << sub.values(0), sub.values(1), w_value;
    out.vectors.col(0) = e_hi;
    out.vectors.col(1) = e_lo;
    out.vectors.col(2) = w;
  }
  out.values *= scale;
  sort_descending(out);
  return true;
}

}  // namespace

bool is_symmetric(const Mat& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > rel_tol * scale) return false;
    }
  }
  return true;
}

void require_symmetric(const Mat& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(what) + " is not square");
  }
  if (!m.allFinite()) {
    throw std::invalid_argument(std::string(what) + " has non-finite entries");
  }
  if (!is_symmetric(m)) {
    throw std::invalid_argument(std::string(what) + " is not symmetric");
  }
}

void require_covariance(const Mat& m, const char* what) {
  require_symmetric(m, what);
  if (m.rows() == 0) return;
  const double lmin = min_eigenvalue(m);
  const double tr = m.trace();
  if (lmin < -1e-10 * std::max(tr, 0.0) || tr < 0.0) {
    throw std::invalid_argument(std::string(what) + " is not positive semidefinite");
  }
}

SymEigen eigen_sym_jacobi(const Mat& m) {
  require_symmetric(m, "eigen_sym input");
  const Eigen::Index n = m.rows();
  Mat a = symmetrized(m);
  Mat v = Mat::Identity(n, n);
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off <= 1e-300 || off <= 1e-32 * a.squaredNorm()) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  SymEigen e{a.diagonal(), v};
  sort_descending(e);
  return e;
}

SymEigen eigen_sym(const Mat& m) {
  require_symmetric(m, "eigen_sym input");
  switch (m.rows()) {
    case 1: {
      SymEigen e;
      e.values = m.diagonal();
      e.vectors = Mat::Identity(1, 1);
      return e;
    }
    case 2:
      return eigen_2x2(m(0, 0), 0.5 * (m(0, 1) + m(1, 0)), m(1, 1));
    case 3: {
      SymEigen e;
      if (eigen_3x3_closed_form(symmetrized(m), e)) return e;
      return eigen_sym_jacobi(m);
    }
    default:
      return eigen_sym_jacobi(m);
  }
}

double max_eigenvalue(const Mat& m) { return eigen_sym(m).values(0); }

double min_eigenvalue(const Mat& m) {
  const SymEigen e = eigen_sym(m);
  return e.values(e.values.size() - 1);
}

double max_eigenvalue_of_inverse(const Mat& cov) {
  require_symmetric(cov, "covariance");
  const double tr = cov.trace();
  if (!(tr > 0.0)) throw DegenerateCovariance("zero trace");
  const double lmin = min_eigenvalue(cov);
  if (lmin <= 1e-12 * tr) throw DegenerateCovariance("smallest eigenvalue below 1e-12 * trace");
  return 1.0 / lmin;
}

Mat psd_sqrt_factor(const Mat& cov) {
  const SymEigen e = eigen_sym(cov);
  Mat out = e.vectors;
  for (Eigen::Index i = 0; i < e.values.size(); ++i) {
    out.col(i) *= std::sqrt(std::max(e.values(i), 0.0));
  }
  return out;
}

}  // namespace pcc
