#include <doctest.h>

#include <random>

#include "hylpv/matkernel.hpp"
#include "oracles.hpp"

using namespace hylpv;

TEST_CASE("sym_eig: diagonal and zero matrices") {
  Mat d = Mat::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  auto r = sym_eig(d);
  CHECK(r.eigenvalues(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.eigenvalues(1) == doctest::Approx(3.0).epsilon(1e-12));

  auto z = sym_eig(Mat::Zero(4, 4));
  for (int i = 0; i < 4; ++i) CHECK(z.eigenvalues(i) == doctest::Approx(0.0));
  CHECK((z.eigenvectors.transpose() * z.eigenvectors - Mat::Identity(4, 4)).norm() <
        1e-10 * 4);
}

TEST_CASE("sym_eig: random 6x6 reconstruction round trip") {
  std::mt19937 rng(42);
  for (int rep = 0; rep < 20; ++rep) {
    Mat m = oracles::random_sym(rng, 6, 2.0);
    auto r = sym_eig(m);
    Mat rec = r.eigenvectors * r.eigenvalues.asDiagonal() * r.eigenvectors.transpose();
    CHECK((rec - m).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((r.eigenvectors.transpose() * r.eigenvectors - Mat::Identity(6, 6)).norm() <
          1e-10 * 6.0 * std::max(1.0, m.norm()));
    for (int i = 0; i + 1 < 6; ++i) CHECK(r.eigenvalues(i) <= r.eigenvalues(i + 1));
  }
}

TEST_CASE("sym_eig: matches characteristic-polynomial roots for dim <= 3") {
  std::mt19937 rng(7);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = 1 + rep % 3;
    Mat m = oracles::random_sym(rng, n, 3.0);
    auto r = sym_eig(m);
    auto roots = oracles::charpoly_roots_sym(m);
    for (int i = 0; i < n; ++i) {
      CHECK(r.eigenvalues(i) ==
            doctest::Approx(roots[static_cast<std::size_t>(i)]).epsilon(1e-8).scale(
                std::max(1.0, m.norm())));
    }
  }
}

TEST_CASE("null_space_basis: structured examples") {
  Mat m(1, 3);
  m << 1, 0, 0;
  Mat n = null_space_basis(m);
  REQUIRE(n.cols() == 2);
  CHECK((m * n).norm() < 1e-12);
  CHECK((n.transpose() * n - Mat::Identity(2, 2)).norm() < 1e-12);

  Mat z = Mat::Zero(2, 3);
  Mat nz = null_space_basis(z);
  REQUIRE(nz.cols() == 3);  // kernel is everything
  CHECK((nz.transpose() * nz - Mat::Identity(3, 3)).norm() < 1e-12);

  // full-rank input -> zero columns
  Mat full = Mat::Identity(3, 3);
  CHECK(null_space_basis(full).cols() == 0);

  CHECK_THROWS_AS(null_space_basis(m, 0.0), std::invalid_argument);
}

TEST_CASE("null_space_basis: random rank-2 wide matrix, SVD rank oracle") {
  std::mt19937 rng(11);
  for (int rep = 0; rep < 30; ++rep) {
    Mat u = oracles::random_mat(rng, 2, 2);
    Mat v = oracles::random_mat(rng, 2, 5);
    Mat m = u * v;  // rank 2 generically
    Eigen::JacobiSVD<Mat> svd(m);
    int rank = 0;
    for (int k = 0; k < svd.singularValues().size(); ++k) {
      if (svd.singularValues()(k) > 1e-9 * svd.singularValues()(0)) ++rank;
    }
    if (rank != 2) continue;  // skip degenerate draws
    Mat n = null_space_basis(m);
    CHECK(n.cols() == 3);
    CHECK((m * n).norm() <= 10.0 * 1e-9 * m.norm() * std::sqrt(3.0));
    CHECK((n.transpose() * n - Mat::Identity(n.cols(), n.cols())).norm() < 1e-10);
  }
}

TEST_CASE("chol: examples and failure pivot") {
  auto id = chol(Mat::Identity(3, 3));
  REQUIRE(id.ok);
  CHECK((id.L - Mat::Identity(3, 3)).norm() < 1e-14);

  Mat d = Mat::Zero(2, 2);
  d(0, 0) = 4.0;
  d(1, 1) = 9.0;
  auto rd = chol(d);
  REQUIRE(rd.ok);
  CHECK(rd.L(0, 0) == doctest::Approx(2.0));
  CHECK(rd.L(1, 1) == doctest::Approx(3.0));

  Mat m(2, 2);
  m << 2, -1, -1, 2;
  auto rm = chol(m);
  REQUIRE(rm.ok);
  CHECK((rm.L * rm.L.transpose() - m).norm() < 1e-10 * m.norm());

  Mat bad(2, 2);
  bad << 1, 2, 2, 1;  // indefinite; pivot 1 fails
  auto rb = chol(bad);
  REQUIRE_FALSE(rb.ok);
  CHECK(rb.failed_pivot == 1);
}

TEST_CASE("chol agrees with minimum eigenvalue sign on 1000 random matrices") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> shift(-1.5, 1.5);
  int checked = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 1 + rep % 8;
    Mat m = oracles::random_sym(rng, n, 1.0) + shift(rng) * Mat::Identity(n, n);
    const double lmin = min_eigenvalue(m);
    if (std::abs(lmin) < 1e-9) continue;  // margin band excluded
    ++checked;
    CHECK(chol(m).ok == (lmin > 0.0));
  }
  CHECK(checked > 900);
}

TEST_CASE("svec/smat: ordering, isometry, inversion") {
  Vec vi = svec(Mat::Identity(2, 2).eval());
  REQUIRE(vi.size() == 3);
  CHECK(vi(0) == doctest::Approx(1.0));
  CHECK(vi(1) == doctest::Approx(0.0));
  CHECK(vi(2) == doctest::Approx(1.0));

  Mat x(2, 2);
  x << 0, 1, 1, 0;
  Vec vx = svec(x);
  CHECK(vx(0) == doctest::Approx(0.0));
  CHECK(vx(1) == doctest::Approx(std::sqrt(2.0)));
  CHECK(vx(2) == doctest::Approx(0.0));
  CHECK(vx.dot(vx) == doctest::Approx((x * x).trace()));

  std::mt19937 rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    Mat a = oracles::random_sym(rng, 5, 2.0);
    Mat b = oracles::random_sym(rng, 5, 2.0);
    CHECK(svec(a).dot(svec(b)) == doctest::Approx((a * b).trace()).epsilon(1e-12));
    // round trip exact to the last rounding of the sqrt(2) scaling
    CHECK((smat(svec(SymMat::from_dense(a))).dense() - a).cwiseAbs().maxCoeff() <=
          2.0 * std::numeric_limits<double>::epsilon() * a.cwiseAbs().maxCoeff());
  }

  Vec bad(4);  // 4 is not a triangular number
  bad.setZero();
  CHECK_THROWS_AS(smat(bad), std::invalid_argument);
}

TEST_CASE("SymMat stores one triangle bit-identically") {
  SymMat s(3);
  s.set(2, 0, 0.1);
  CHECK(s(0, 2) == 0.1);
  s.set(0, 2, 0.25);
  CHECK(s(2, 0) == 0.25);
  Mat d = s.dense();
  CHECK(d(0, 2) == d(2, 0));
}

TEST_CASE("solve_linear recovers known solutions") {
  std::mt19937 rng(21);
  Mat a = oracles::random_mat(rng, 6, 6) + 6.0 * Mat::Identity(6, 6);
  Vec xref = oracles::random_mat(rng, 6, 1).col(0);
  Vec x = solve_linear(a, (a * xref).eval());
  CHECK((x - xref).norm() < 1e-10 * xref.norm());
}
