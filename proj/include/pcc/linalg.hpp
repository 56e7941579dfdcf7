#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace pcc {

// Every state, control and covariance in this library is at most 6-dimensional
// (3-D double integrator), so storage is bounded and never touches the heap.
inline constexpr int kMaxDim = 6;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Raised when a covariance is too close to singular to be inverted.
class DegenerateCovariance : public std::domain_error {
 public:
  DegenerateCovariance() : std::domain_error("degenerate covariance") {}
  explicit DegenerateCovariance(const std::string& what)
      : std::domain_error("degenerate covariance: " + what) {}
};

struct SymEigen {
  Vec values;   // descending
  Mat vectors;  // orthonormal columns, vectors.col(i) pairs with values(i)
};

bool is_symmetric(const Mat& m, double rel_tol = 1e-12);

/// Throws std::invalid_argument unless `m` is square, finite and symmetric.
void require_symmetric(const Mat& m, const char* what = "matrix");

/// Throws std::invalid_argument unless `m` is a symmetric PSD matrix
/// (eigenvalues >= -1e-10 * trace).
void require_covariance(const Mat& m, const char* what = "covariance");

/// Closed-form symmetric eigendecomposition for 1x1, 2x2 and 3x3 matrices.
/// 3x3 uses the trigonometric solution; near-degenerate spectra fall back to
/// cyclic Jacobi.
SymEigen eigen_sym(const Mat& m);

/// Cyclic Jacobi sweep, exposed for the 3x3 fallback and for tests.
SymEigen eigen_sym_jacobi(const Mat& m);

double max_eigenvalue(const Mat& m);
double min_eigenvalue(const Mat& m);

/// Largest eigenvalue of cov^{-1}, computed as 1 / lambda_min(cov).
/// Throws DegenerateCovariance when lambda_min(cov) <= 1e-12 * trace(cov).
double max_eigenvalue_of_inverse(const Mat& cov);

inline Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

/// Q * sqrt(max(Lambda, 0)): a square root that also works for singular PSD input.
Mat psd_sqrt_factor(const Mat& cov);

}  // namespace pcc
