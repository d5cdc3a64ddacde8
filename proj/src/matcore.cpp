#include "romdb/matcore.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

namespace romdb {

namespace {

void require_finite(const Mat& m, const char* op) {
  if (!m.allFinite()) {
    throw Error(ErrorKind::InvalidInput, std::string(op) + ": non-finite input");
  }
}

void require_square(const Mat& m, const char* op) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << op << ": expected a square matrix, got " << m.rows() << "x" << m.cols();
    throw Error(ErrorKind::InvalidInput, os.str());
  }
}

bool is_diagonal(const Mat& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (i != j && m(i, j) != 0.0) return false;
    }
  }
  return true;
}

}  // namespace

const char* to_string(ScalarField field) noexcept {
  return field == ScalarField::Real ? "real" : "complex";
}

DenseMatrix::DenseMatrix(Mat re)
    : re_(std::move(re)), im_(Mat::Zero(re_.rows(), re_.cols())), field_(ScalarField::Real) {}

DenseMatrix::DenseMatrix(Mat re, Mat im)
    : re_(std::move(re)), im_(std::move(im)), field_(ScalarField::Complex) {
  if (re_.rows() != im_.rows() || re_.cols() != im_.cols()) {
    throw Error(ErrorKind::InvalidInput, "DenseMatrix: real and imaginary planes differ in shape");
  }
}

DenseMatrix DenseMatrix::from_complex(const CMat& m) { return DenseMatrix(m.real(), m.imag()); }

DenseMatrix DenseMatrix::zeros(Eigen::Index rows, Eigen::Index cols, ScalarField field) {
  if (field == ScalarField::Real) return DenseMatrix(Mat::Zero(rows, cols));
  return DenseMatrix(Mat::Zero(rows, cols), Mat::Zero(rows, cols));
}

CMat DenseMatrix::to_complex() const {
  CMat out(rows(), cols());
  out.real() = re_;
  out.imag() = im_;
  return out;
}

double DenseMatrix::squared_norm() const { return re_.squaredNorm() + im_.squaredNorm(); }

bool DenseMatrix::all_finite() const { return re_.allFinite() && im_.allFinite(); }

DenseMatrix DenseMatrix::as_field(ScalarField field) const {
  if (field == field_) return *this;
  if (field == ScalarField::Complex) return DenseMatrix(re_, im_);
  return DenseMatrix(re_);
}

bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
  return a.field_ == b.field_ && a.rows() == b.rows() && a.cols() == b.cols() && a.re_ == b.re_ &&
         a.im_ == b.im_;
}

SvdResult svd(const Mat& m) {
  require_finite(m, "svd");
  SvdResult out;
  if (m.size() == 0) {
    out.U = Mat::Zero(m.rows(), 0);
    out.V = Mat::Zero(m.cols(), 0);
    out.sigma = Vec::Zero(0);
    return out;
  }
  // One-sided Jacobi is accurate to working precision for the small reduced
  // matrices; snapshot matrices go through the divide-and-conquer driver.
  if (std::min(m.rows(), m.cols()) <= 64) {
    Eigen::JacobiSVD<Mat> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.U = solver.matrixU();
    out.sigma = solver.singularValues();
    out.V = solver.matrixV();
  } else {
    Eigen::BDCSVD<Mat> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.U = solver.matrixU();
    out.sigma = solver.singularValues();
    out.V = solver.matrixV();
  }
  return out;
}

double spectral_norm(const Mat& m) {
  if (m.size() == 0) return 0.0;
  require_finite(m, "spectral_norm");
  Eigen::JacobiSVD<Mat> solver(m);
  return solver.singularValues()(0);
}

Mat polar_factor(const Mat& m) {
  require_square(m, "polar_factor");
  const SvdResult f = svd(m);
  return f.U * f.V.transpose();
}

bool is_symmetric(const Mat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = m.norm();
  return (m - m.transpose()).norm() <= tol * std::max(scale, std::numeric_limits<double>::min());
}

Mat checked_symmetric_part(const Mat& m, const char* what, double tol) {
  require_square(m, what);
  require_finite(m, what);
  if (!is_symmetric(m, tol)) {
    throw Error(ErrorKind::InvalidInput, std::string(what) + ": matrix is not symmetric");
  }
  return 0.5 * (m + m.transpose());
}

Mat cholesky(const Mat& m) {
  const Mat a = checked_symmetric_part(m, "cholesky");
  const Eigen::Index n = a.rows();
  Mat s = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - s.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) {
      std::ostringstream os;
      os << "cholesky: matrix is not positive definite (pivot " << (j + 1) << ")";
      throw Error(ErrorKind::NotSpd, os.str(), {}, static_cast<double>(j + 1));
    }
    const double sjj = std::sqrt(d);
    s(j, j) = sjj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      s(i, j) = (a(i, j) - s.row(i).head(j).dot(s.row(j).head(j))) / sjj;
    }
  }
  return s;
}

SymEigResult sym_eig(const Mat& m) {
  const Mat a = checked_symmetric_part(m, "sym_eig");
  Eigen::SelfAdjointEigenSolver<Mat> solver(a);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::InvalidInput, "sym_eig: eigensolver did not converge");
  }
  SymEigResult out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

Mat mat_log_spd(const Mat& m) {
  (void)cholesky(m);  // membership check with pivot diagnostics
  if (is_diagonal(m)) {
    Mat out = Mat::Zero(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) out(i, i) = std::log(m(i, i));
    return out;
  }
  const SymEigResult e = sym_eig(m);
  if (e.values.minCoeff() <= 0.0) {
    throw Error(ErrorKind::NotSpd, "mat_log_spd: nonpositive eigenvalue");
  }
  const Vec logs = e.values.array().log();
  Mat out = e.vectors * logs.asDiagonal() * e.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

Mat mat_exp_sym(const Mat& m) {
  const Mat a = checked_symmetric_part(m, "mat_exp_sym");
  if (is_diagonal(a)) {
    Mat out = Mat::Zero(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) out(i, i) = std::exp(a(i, i));
    return out;
  }
  const SymEigResult e = sym_eig(a);
  const Vec exps = e.values.array().exp();
  Mat out = e.vectors * exps.asDiagonal() * e.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

Mat mat_log_general(const Mat& m) {
  require_square(m, "mat_log_general");
  require_finite(m, "mat_log_general");
  Eigen::EigenSolver<Mat> es(m, false);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::LogUndefined, "mat_log_general: eigenvalue computation failed");
  }
  const double scale = std::max(m.norm(), std::numeric_limits<double>::min());
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const cplx lam = es.eigenvalues()(i);
    const bool on_axis = std::abs(lam.imag()) <= 1e-12 * scale;
    if (on_axis && lam.real() <= 1e-14 * scale) {
      throw Error(ErrorKind::LogUndefined,
                  "mat_log_general: eigenvalue on the closed negative real axis");
    }
  }
  Mat out = m.log();
  if (!out.allFinite()) {
    throw Error(ErrorKind::LogUndefined, "mat_log_general: logarithm is not finite");
  }
  return out;
}

Mat mat_exp_general(const Mat& m) {
  require_square(m, "mat_exp_general");
  require_finite(m, "mat_exp_general");
  return m.exp();
}

namespace {

template <typename MatrixT>
MatrixT lu_solve(const MatrixT& a, const MatrixT& b) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorKind::InvalidInput, "solve: coefficient matrix must be square");
  }
  if (a.rows() != b.rows()) {
    throw Error(ErrorKind::InvalidInput, "solve: right-hand side row count mismatch");
  }
  if (!a.allFinite() || !b.allFinite()) {
    throw Error(ErrorKind::InvalidInput, "solve: non-finite input");
  }
  if (a.rows() == 0) return MatrixT::Zero(0, b.cols());
  Eigen::PartialPivLU<MatrixT> lu(a);
  const double rcond = lu.rcond();
  const double threshold = static_cast<double>(a.rows()) * std::numeric_limits<double>::epsilon();
  if (!(rcond > threshold)) {
    const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    std::ostringstream os;
    os << "solve: matrix is singular to working precision (condition estimate " << cond << ")";
    throw Error(ErrorKind::SingularMatrix, os.str(), {}, cond);
  }
  return lu.solve(b);
}

}  // namespace

Mat solve(const Mat& a, const Mat& b) { return lu_solve<Mat>(a, b); }

CMat solve(const CMat& a, const CMat& b) { return lu_solve<CMat>(a, b); }

double orthogonality_defect(const Mat& q) {
  return (q.transpose() * q - Mat::Identity(q.cols(), q.cols())).norm();
}

}  // namespace romdb
