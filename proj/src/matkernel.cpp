// SPDX-License-Identifier: Apache-2.0
#include "hylpv/matkernel.hpp"

#include <cmath>

namespace hylpv {

std::size_t SymMat::packed_index(Eigen::Index i, Eigen::Index j) const {
  if (i < 0 || j < 0 || i >= dim_ || j >= dim_) {
    throw std::out_of_range("SymMat index out of range");
  }
  if (i < j) std::swap(i, j);  // lower triangle canonical slot
  // column j starts after j full columns of decreasing length
  return static_cast<std::size_t>(j * dim_ - j * (j - 1) / 2 + (i - j));
}

SymMat SymMat::from_dense(const Mat& a) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("SymMat::from_dense: matrix not square");
  }
  SymMat s(a.rows());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = j; i < a.rows(); ++i) {
      s.set(i, j, 0.5 * (a(i, j) + a(j, i)));
    }
  }
  return s;
}

SymMat SymMat::from_lower(const Mat& a) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("SymMat::from_lower: matrix not square");
  }
  SymMat s(a.rows());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = j; i < a.rows(); ++i) {
      s.set(i, j, a(i, j));
    }
  }
  return s;
}

SymMat SymMat::identity(Eigen::Index dim) {
  SymMat s(dim);
  for (Eigen::Index i = 0; i < dim; ++i) s.set(i, i, 1.0);
  return s;
}

Mat SymMat::dense() const {
  Mat a(dim_, dim_);
  for (Eigen::Index j = 0; j < dim_; ++j) {
    for (Eigen::Index i = j; i < dim_; ++i) {
      const double v = (*this)(i, j);
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return a;
}

double SymMat::frobenius_norm() const {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < dim_; ++j) {
    for (Eigen::Index i = j; i < dim_; ++i) {
      const double v = (*this)(i, j);
      acc += (i == j) ? v * v : 2.0 * v * v;
    }
  }
  return std::sqrt(acc);
}

SymMat& SymMat::operator+=(const SymMat& o) {
  if (o.dim_ != dim_) throw std::invalid_argument("SymMat += dimension mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
  return *this;
}

SymMat& SymMat::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

EigResult sym_eig(const Mat& m_symmetric) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m_symmetric);
  if (es.info() != Eigen::Success) {
    throw SolverFailure("sym_eig: eigensolver did not converge");
  }
  return {es.eigenvalues(), es.eigenvectors()};
}

EigResult sym_eig(const SymMat& m) { return sym_eig(m.dense()); }

double min_eigenvalue(const Mat& m_symmetric) {
  return sym_eig(m_symmetric).eigenvalues.minCoeff();
}

Mat null_space_basis(const Mat& m, double tol) {
  if (tol <= 0.0) throw std::invalid_argument("null_space_basis: tol must be > 0");
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) > tol * smax) ++rank;
  }
  const Eigen::Index nullity = m.cols() - rank;
  return svd.matrixV().rightCols(nullity);
}

Eigen::Index numerical_rank(const Mat& m, double tol) {
  return m.cols() - null_space_basis(m, tol).cols();
}

CholResult chol(const Mat& m_symmetric) {
  const Eigen::Index n = m_symmetric.rows();
  CholResult r;
  r.L = Mat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = m_symmetric(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= r.L(j, k) * r.L(j, k);
    if (!(d > 0.0)) {  // also catches NaN
      r.ok = false;
      r.failed_pivot = j;
      return r;
    }
    const double ljj = std::sqrt(d);
    r.L(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = m_symmetric(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= r.L(i, k) * r.L(j, k);
      r.L(i, j) = s / ljj;
    }
  }
  r.ok = true;
  return r;
}

CholResult chol(const SymMat& m) { return chol(m.dense()); }

Eigen::Index svec_dim(Eigen::Index dim) { return dim * (dim + 1) / 2; }

Vec svec(const SymMat& m) {
  const Eigen::Index n = m.dim();
  Vec v(svec_dim(n));
  const double s2 = std::sqrt(2.0);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      v(k++) = (i == j) ? m(i, j) : s2 * m(i, j);
    }
  }
  return v;
}

Vec svec(const Mat& m_symmetric) { return svec(SymMat::from_dense(m_symmetric)); }

SymMat smat(const Vec& v) {
  // invert d(d+1)/2 = len
  const double dd = (std::sqrt(8.0 * static_cast<double>(v.size()) + 1.0) - 1.0) / 2.0;
  const Eigen::Index n = static_cast<Eigen::Index>(std::llround(dd));
  if (svec_dim(n) != v.size()) {
    throw std::invalid_argument("smat: length is not a triangular number");
  }
  SymMat m(n);
  const double inv_s2 = 1.0 / std::sqrt(2.0);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      m.set(i, j, (i == j) ? v(k) : inv_s2 * v(k));
      ++k;
    }
  }
  return m;
}

Vec solve_linear(const Mat& a, const Vec& b) {
  return a.colPivHouseholderQr().solve(b);
}

Mat solve_linear(const Mat& a, const Mat& b) {
  return a.colPivHouseholderQr().solve(b);
}

}  // namespace hylpv
