// SPDX-License-Identifier: Apache-2.0
#ifndef HYLPV_MATKERNEL_HPP
#define HYLPV_MATKERNEL_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace hylpv {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Thrown when an iterative kernel (eigensolver) fails to converge.
class SolverFailure : public std::runtime_error {
 public:
  explicit SolverFailure(const std::string& what) : std::runtime_error(what) {}
};

/// Dense real symmetric matrix held as the packed lower triangle, so the
/// represented matrix is M = M^T exactly no matter which triangle a caller
/// wrote through set().
class SymMat {
 public:
  SymMat() = default;
  explicit SymMat(Eigen::Index dim) : dim_(dim), data_(packed_size(dim), 0.0) {}

  /// Symmetrizes a general matrix: stores (A + A^T)/2.
  static SymMat from_dense(const Mat& a);
  /// Takes the lower triangle verbatim (no averaging).
  static SymMat from_lower(const Mat& a);
  static SymMat identity(Eigen::Index dim);

  Eigen::Index dim() const { return dim_; }

  double operator()(Eigen::Index i, Eigen::Index j) const {
    return data_[packed_index(i, j)];
  }
  void set(Eigen::Index i, Eigen::Index j, double v) {
    data_[packed_index(i, j)] = v;
  }

  Mat dense() const;
  double frobenius_norm() const;

  SymMat& operator+=(const SymMat& o);
  SymMat& operator*=(double s);

 private:
  static std::size_t packed_size(Eigen::Index dim) {
    return static_cast<std::size_t>(dim * (dim + 1) / 2);
  }
  // Lower triangle, column-major: (0,0),(1,0),...,(n-1,0),(1,1),...
  std::size_t packed_index(Eigen::Index i, Eigen::Index j) const;

  Eigen::Index dim_ = 0;
  std::vector<double> data_;
};

struct EigResult {
  Vec eigenvalues;   // ascending
  Mat eigenvectors;  // orthogonal, columns paired with eigenvalues
};

/// Symmetric eigendecomposition (tridiagonalization + implicit QL, via
/// Eigen's self-adjoint solver; deterministic). Throws SolverFailure on
/// non-convergence.
EigResult sym_eig(const SymMat& m);
EigResult sym_eig(const Mat& m_symmetric);

double min_eigenvalue(const Mat& m_symmetric);

/// Orthonormal basis of Ker M. Columns satisfy ||M N|| <= tol-scaled bound
/// and N^T N = I. Numerical rank cutoff: singular values below tol * sigma_max.
/// Full-rank input yields a matrix with zero columns.
Mat null_space_basis(const Mat& m, double tol = 1e-9);

/// Numerical rank by the same cutoff rule as null_space_basis.
Eigen::Index numerical_rank(const Mat& m, double tol = 1e-9);

struct CholResult {
  bool ok = false;
  Mat L;                  // lower triangular, L L^T = M (valid when ok)
  Eigen::Index failed_pivot = -1;  // index of the first non-positive pivot
};

/// Cholesky factorization; reports the failing pivot instead of throwing so
/// interior-point feasibility probes can use it as a definiteness test.
CholResult chol(const SymMat& m);
CholResult chol(const Mat& m_symmetric);

/// Isometric symmetric vectorization: lower triangle column-major with
/// off-diagonal entries scaled by sqrt(2), so <svec(A), svec(B)> = tr(A B).
Vec svec(const SymMat& m);
Vec svec(const Mat& m_symmetric);
SymMat smat(const Vec& v);
Eigen::Index svec_dim(Eigen::Index dim);

/// Solves A x = b by column-pivoted QR (works for any full-rank square A).
Vec solve_linear(const Mat& a, const Vec& b);
Mat solve_linear(const Mat& a, const Mat& b);

}  // namespace hylpv

#endif  // HYLPV_MATKERNEL_HPP
