// Shared test oracles. Everything here is deliberately independent of the
// implementation paths it cross-checks: closed-form root formulas, dense
// frequency sweeps, and Eigen's matrix exponential.
#ifndef HYLPV_TESTS_ORACLES_HPP
#define HYLPV_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "hylpv/sdpcore.hpp"

namespace oracles {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;

inline Mat random_mat(std::mt19937& rng, int r, int c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

inline Mat random_sym(std::mt19937& rng, int n, double scale = 1.0) {
  Mat a = random_mat(rng, n, n, scale);
  return 0.5 * (a + a.transpose());
}

/// Roots of the characteristic polynomial of a symmetric matrix, dim <= 3,
/// by closed-form quadratic/cubic formulas. Returned ascending.
inline std::vector<double> charpoly_roots_sym(const Mat& m) {
  const int n = static_cast<int>(m.rows());
  std::vector<double> roots;
  if (n == 1) {
    roots = {m(0, 0)};
  } else if (n == 2) {
    const double tr = m(0, 0) + m(1, 1);
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    roots = {tr / 2.0 - disc, tr / 2.0 + disc};
  } else if (n == 3) {
    // det(M - x I) = -x^3 + c2 x^2 + c1 x + c0; solve the depressed cubic
    // trigonometrically (all roots real for symmetric M).
    const double c2 = m.trace();
    const double c1 = -0.5 * (m.trace() * m.trace() - (m * m).trace());
    const double c0 = m.determinant();
    // x^3 - c2 x^2 - c1 x - c0 = 0  ->  t^3 + p t + q with x = t + c2/3
    const double p = -c1 - c2 * c2 / 3.0;
    const double q = -c0 - c2 * (2.0 * c2 * c2 + 9.0 * c1) / 27.0;
    const double s = std::sqrt(std::max(1e-300, -4.0 * p / 3.0));
    double arg = std::clamp(3.0 * q / (p * s), -1.0, 1.0);
    if (std::abs(p) < 1e-14 * (1.0 + c2 * c2)) {
      const double t = std::cbrt(-q);
      roots = {t + c2 / 3.0, t + c2 / 3.0, t + c2 / 3.0};
    } else {
      const double phi = std::acos(arg) / 3.0;
      roots.resize(3);
      for (int k = 0; k < 3; ++k) {
        roots[k] = s * std::cos(phi - 2.0 * M_PI * k / 3.0) + c2 / 3.0;
      }
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

inline double sigma_max_at(const Mat& a, const Mat& b, const Mat& c,
                           const Mat& d, double omega) {
  const int n = static_cast<int>(a.rows());
  CMat jw = std::complex<double>(0.0, omega) * CMat::Identity(n, n) - a;
  CMat g = c.cast<std::complex<double>>() * jw.lu().solve(b.cast<std::complex<double>>()) +
           d.cast<std::complex<double>>();
  Eigen::JacobiSVD<CMat> svd(g);
  return svd.singularValues()(0);
}

/// H-infinity norm by dense log-frequency sweep plus golden-section polish.
inline double hinf_norm_sweep(const Mat& a, const Mat& b, const Mat& c,
                              const Mat& d, double wlo = 1e-4, double whi = 1e7,
                              int grid = 800) {
  double best = sigma_max_at(a, b, c, d, 0.0);  // DC
  {
    Eigen::JacobiSVD<Mat> svd(d);
    if (d.size() > 0 && svd.singularValues().size() > 0) {
      best = std::max(best, svd.singularValues()(0));  // omega -> inf
    }
  }
  double best_w = 0.0;
  const double l0 = std::log(wlo), l1 = std::log(whi);
  for (int k = 0; k <= grid; ++k) {
    const double w = std::exp(l0 + (l1 - l0) * k / grid);
    const double s = sigma_max_at(a, b, c, d, w);
    if (s > best) {
      best = s;
      best_w = w;
    }
  }
  if (best_w > 0.0) {
    const double step = (l1 - l0) / grid;
    double lo = std::log(best_w) - step, hi = std::log(best_w) + step;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = sigma_max_at(a, b, c, d, std::exp(x1));
    double f2 = sigma_max_at(a, b, c, d, std::exp(x2));
    for (int it = 0; it < 80; ++it) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = sigma_max_at(a, b, c, d, std::exp(x2));
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = sigma_max_at(a, b, c, d, std::exp(x1));
      }
    }
    best = std::max(best, std::max(f1, f2));
  }
  return best;
}

inline Mat expm(const Mat& a) { return a.exp(); }

/// Random stable LTI system with a prescribed stability margin.
struct Lti {
  Mat a, b, c, d;
};

inline Lti random_stable_lti(std::mt19937& rng, int n, int nin, int nout) {
  Lti s;
  s.a = random_mat(rng, n, n, 1.0);
  const double shift = 0.5 + std::abs(Eigen::EigenSolver<Mat>(s.a).eigenvalues().real().maxCoeff());
  s.a -= shift * Mat::Identity(n, n);
  s.b = random_mat(rng, n, nin, 1.0);
  s.c = random_mat(rng, nout, n, 1.0);
  s.d = Mat::Zero(nout, nin);
  return s;
}

/// Bounded-real LMI for an LTI system: find X > 0 and minimal gamma with
/// [He(A^T X), X B, C^T; *, -g I, D^T; *, *, -g I] < 0. Used as the system
/// under test against the frequency-sweep oracle above.
inline hylpv::sdp::SdpProblem bounded_real_problem(const Lti& s, int* gamma_var_out,
                                                   int* x_var_out = nullptr) {
  using namespace hylpv::sdp;
  const Eigen::Index n = s.a.rows(), nd = s.b.cols(), ne = s.c.rows();
  const Eigen::Index N = n + nd + ne;
  SdpProblem p;
  const int x = p.add_symmetric(n, "X");
  const int g = p.add_scalar("gamma");
  p.objective = {{g, 1.0}};

  Mat e1 = Mat::Zero(N, n), e2 = Mat::Zero(N, nd), e3 = Mat::Zero(N, ne);
  e1.topRows(n).setIdentity();
  e2.middleRows(n, nd).setIdentity();
  e3.bottomRows(ne).setIdentity();

  AffineLmi& brl = p.add_constraint(N, Sense::NegSemidef, 1e-7, "brl");
  brl.constant = e3 * s.c * e1.transpose() + e1 * s.c.transpose() * e3.transpose() +
                 e3 * s.d * e2.transpose() + e2 * s.d.transpose() * e3.transpose();
  brl.mat_terms.push_back({x, e1, e1 * s.a.transpose() + e2 * s.b.transpose()});
  Mat gcoef = Mat::Zero(N, N);
  gcoef.block(n, n, nd, nd) = -Mat::Identity(nd, nd);
  gcoef.block(n + nd, n + nd, ne, ne) = -Mat::Identity(ne, ne);
  brl.scalar_terms.push_back({g, gcoef});

  AffineLmi& pos = p.add_constraint(n, Sense::PosSemidef, 1e-9, "X_pos");
  pos.mat_terms.push_back({x, 0.5 * Mat::Identity(n, n), Mat::Identity(n, n)});

  if (gamma_var_out) *gamma_var_out = g;
  if (x_var_out) *x_var_out = x;
  return p;
}

}  // namespace oracles

#endif  // HYLPV_TESTS_ORACLES_HPP
