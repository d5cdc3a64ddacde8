#pragma once

// Dense real/complex kernels used by every other module. Storage is Eigen;
// the factorizations below enforce the tolerances and error taxonomy the rest
// of the library relies on.

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

#include "romdb/errors.hpp"

namespace romdb {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using cplx = std::complex<double>;

enum class ScalarField { Real, Complex };

[[nodiscard]] const char* to_string(ScalarField field) noexcept;

/// A real or complex dense matrix held as separate real and imaginary planes.
/// For ScalarField::Real the imaginary plane is identically zero.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(Mat re);
  DenseMatrix(Mat re, Mat im);
  static DenseMatrix from_complex(const CMat& m);

  static DenseMatrix zeros(Eigen::Index rows, Eigen::Index cols, ScalarField field);

  [[nodiscard]] Eigen::Index rows() const noexcept { return re_.rows(); }
  [[nodiscard]] Eigen::Index cols() const noexcept { return re_.cols(); }
  [[nodiscard]] ScalarField field() const noexcept { return field_; }
  [[nodiscard]] bool is_complex() const noexcept { return field_ == ScalarField::Complex; }

  [[nodiscard]] const Mat& re() const noexcept { return re_; }
  [[nodiscard]] const Mat& im() const noexcept { return im_; }
  [[nodiscard]] CMat to_complex() const;

  /// Sum of squared moduli of all entries.
  [[nodiscard]] double squared_norm() const;
  [[nodiscard]] bool all_finite() const;

  /// Drops the imaginary plane; only legal when it is exactly zero or the caller asks to discard it.
  [[nodiscard]] DenseMatrix as_field(ScalarField field) const;

  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b);

 private:
  Mat re_;
  Mat im_;
  ScalarField field_ = ScalarField::Real;
};

struct SvdResult {
  Mat U;
  Vec sigma;  // descending, nonnegative
  Mat V;
};

struct SymEigResult {
  Vec values;  // descending
  Mat vectors;
};

/// Thin SVD m = U diag(sigma) V^T.
[[nodiscard]] SvdResult svd(const Mat& m);
[[nodiscard]] double spectral_norm(const Mat& m);

/// Polar (orthogonal) factor U V^T of a square matrix.
[[nodiscard]] Mat polar_factor(const Mat& m);

/// Lower-triangular S with S S^T = m. Throws NotSpd carrying the failing 1-based pivot.
[[nodiscard]] Mat cholesky(const Mat& m);

/// Eigen-decomposition of a symmetric matrix, eigenvalues descending.
[[nodiscard]] SymEigResult sym_eig(const Mat& m);

[[nodiscard]] Mat mat_log_spd(const Mat& m);
[[nodiscard]] Mat mat_exp_sym(const Mat& m);
/// Principal logarithm; LogUndefined when an eigenvalue sits on the closed negative real axis.
[[nodiscard]] Mat mat_log_general(const Mat& m);
[[nodiscard]] Mat mat_exp_general(const Mat& m);

/// Solves a x = b by partial-pivot LU. SingularMatrix carries a condition estimate.
[[nodiscard]] Mat solve(const Mat& a, const Mat& b);
[[nodiscard]] CMat solve(const CMat& a, const CMat& b);

/// Relative symmetry test ||m - m^T||_F <= tol * ||m||_F.
[[nodiscard]] bool is_symmetric(const Mat& m, double tol = 1e-10);
/// Symmetrizes after checking is_symmetric; throws InvalidInput otherwise.
[[nodiscard]] Mat checked_symmetric_part(const Mat& m, const char* what, double tol = 1e-10);

/// ||Q^T Q - I||_F
[[nodiscard]] double orthogonality_defect(const Mat& q);

}  // namespace romdb
