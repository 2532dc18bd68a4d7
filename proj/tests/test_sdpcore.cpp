#include <doctest.h>

#include <random>
#include <sstream>

#include "hylpv/sdpcore.hpp"
#include "oracles.hpp"

using namespace hylpv;
using namespace hylpv::sdp;

namespace {

// min t s.t. t I - diag(1,3) >= 0; optimum t* = 3 (largest eigenvalue).
SdpProblem lambda_max_problem(int* t_out) {
  SdpProblem p;
  const int t = p.add_scalar("t");
  p.objective = {{t, 1.0}};
  AffineLmi& c = p.add_constraint(2, Sense::PosSemidef, 0.0, "lmax");
  c.constant = -Mat::Identity(2, 2);
  c.constant(1, 1) = -3.0;
  c.constant(0, 0) = -1.0;
  c.scalar_terms.push_back({t, Mat::Identity(2, 2)});
  *t_out = t;
  return p;
}

}  // namespace

TEST_CASE("assemble: constant-only and scalar-term examples") {
  AffineLmi c;
  c.dim = 2;
  c.constant = Mat::Identity(2, 2) * 5.0;
  c.sense = Sense::PosSemidef;
  CHECK((assemble(c, {}) - c.constant).norm() == 0.0);

  AffineLmi l;
  l.dim = 2;
  l.constant = Mat::Zero(2, 2);
  l.constant(0, 0) = -1.0;
  l.constant(1, 1) = -3.0;
  l.scalar_terms.push_back({0, Mat::Identity(2, 2)});
  std::vector<Mat> assign(1);
  assign[0] = Mat::Constant(1, 1, 3.0);
  Mat g = assemble(l, assign);
  CHECK(g(0, 0) == doctest::Approx(2.0));
  CHECK(g(1, 1) == doctest::Approx(0.0));
  CHECK(g(0, 1) == doctest::Approx(0.0));

  CHECK_THROWS_AS(assemble(l, {}), std::invalid_argument);
}

TEST_CASE("assemble: random 3-term LMI against naive summation oracle") {
  std::mt19937 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const int dim = 4;
    AffineLmi l;
    l.dim = dim;
    l.constant = oracles::random_sym(rng, dim);
    std::vector<Mat> assign;

    Mat l0 = oracles::random_mat(rng, dim, 3), r0 = oracles::random_mat(rng, dim, 3);
    Mat v0 = oracles::random_sym(rng, 3);
    l.mat_terms.push_back({0, l0, r0});
    assign.push_back(v0);

    Mat l1 = oracles::random_mat(rng, dim, 2), r1 = oracles::random_mat(rng, dim, 4);
    Mat v1 = oracles::random_mat(rng, 2, 4);
    l.mat_terms.push_back({1, l1, r1});
    assign.push_back(v1);

    Mat p2 = oracles::random_sym(rng, dim);
    const double y2 = 0.7;
    l.scalar_terms.push_back({2, p2});
    assign.push_back(Mat::Constant(1, 1, y2));

    Mat naive = l.constant + l0 * v0 * r0.transpose() + r0 * v0.transpose() * l0.transpose() +
                l1 * v1 * r1.transpose() + r1 * v1.transpose() * l1.transpose() + y2 * p2;
    Mat got = assemble(l, assign);
    CHECK((got - naive).cwiseAbs().maxCoeff() < 1e-13 * std::max(1.0, naive.norm()));
    CHECK((got - got.transpose()).norm() < 1e-13 * std::max(1.0, got.norm()));
  }
}

TEST_CASE("solve: lambda-max example to 1e-6") {
  int t;
  SdpProblem p = lambda_max_problem(&t);
  SdpSolution s = solve(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  CHECK(std::abs(s.objective - 3.0) <= 1e-6);
  CHECK(std::abs(s.scalar(t) - 3.0) <= 1e-6);
}

TEST_CASE("solve: determinant boundary, min x with [[x,1],[1,x]] >= 0") {
  SdpProblem p;
  const int x = p.add_scalar("x");
  p.objective = {{x, 1.0}};
  AffineLmi& c = p.add_constraint(2, Sense::PosSemidef, 0.0, "hankel");
  c.constant << 0, 1, 1, 0;
  c.scalar_terms.push_back({x, Mat::Identity(2, 2)});
  SdpSolution s = solve(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  CHECK(std::abs(s.objective - 1.0) <= 1e-6);
}

TEST_CASE("solve: bounded-real gamma matches frequency sweep within 1%") {
  std::mt19937 rng(2024);
  oracles::Lti sys = oracles::random_stable_lti(rng, 2, 1, 1);
  int g;
  SdpProblem p = oracles::bounded_real_problem(sys, &g);
  SdpSolution s = solve(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  const double hinf = oracles::hinf_norm_sweep(sys.a, sys.b, sys.c, sys.d);
  CHECK(s.objective == doctest::Approx(hinf).epsilon(0.01));
}

TEST_CASE("check_feasible: margins at and off the optimum") {
  int t;
  SdpProblem p = lambda_max_problem(&t);
  SdpSolution s = solve(p);
  REQUIRE(s.status == SolveStatus::Optimal);
  auto margins = check_feasible(p, s.values);
  for (double m : margins) CHECK(m >= -1e-7);

  std::vector<Mat> bad = s.values;
  bad[t](0, 0) = 2.9;
  auto bad_margins = check_feasible(p, bad);
  CHECK(bad_margins[0] < 0.0);
  CHECK(bad_margins[0] == doctest::Approx(-0.1).epsilon(1e-9));
}

TEST_CASE("check_feasible: margin decreases monotonically along a perturbation ray") {
  int t;
  SdpProblem p = lambda_max_problem(&t);
  std::vector<Mat> assign(1);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 10; ++k) {
    assign[0] = Mat::Constant(1, 1, 4.0 - 0.3 * k);  // walk toward infeasibility
    const double m = check_feasible(p, assign)[0];
    CHECK(m < prev);
    prev = m;
  }
}

TEST_CASE("scale invariance: feasibility sign pattern unchanged under c > 0") {
  SdpProblem p;
  const int x = p.add_symmetric(2, "X");
  AffineLmi& c = p.add_constraint(2, Sense::PosSemidef, 0.0, "hom");
  c.mat_terms.push_back({x, 0.5 * Mat::Identity(2, 2), Mat::Identity(2, 2)});

  std::mt19937 rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<Mat> assign = {oracles::random_sym(rng, 2)};
    auto m1 = check_feasible(p, assign);

    SdpProblem q = p;
    const double scale = 7.25;
    for (auto& con : q.constraints) {
      con.constant *= scale;
      for (auto& mt : con.mat_terms) mt.left *= scale;
      for (auto& st : con.scalar_terms) st.coeff *= scale;
    }
    auto m2 = check_feasible(q, assign);
    for (std::size_t j = 0; j < m1.size(); ++j) {
      CHECK(((m1[j] >= 0.0) == (m2[j] >= 0.0)));
    }
  }
}

TEST_CASE("solve is deterministic across repeated runs") {
  std::mt19937 rng(31);
  oracles::Lti sys = oracles::random_stable_lti(rng, 3, 2, 1);
  int g;
  SdpProblem p = oracles::bounded_real_problem(sys, &g);
  SdpSolution s1 = solve(p);
  SdpSolution s2 = solve(p);
  REQUIRE(s1.status == s2.status);
  CHECK(s1.objective == s2.objective);  // bit-identical path
  CHECK(std::abs(s1.objective - s2.objective) <= 1e-12);
}

TEST_CASE("bisection cross-check agrees with the interior-point path") {
  int t;
  SdpProblem p = lambda_max_problem(&t);
  SdpSolution ip = solve(p);
  SdpSolution bi = solve_bisection(p, t, 0.0, 10.0, 1e-5);
  REQUIRE(ip.status == SolveStatus::Optimal);
  REQUIRE(bi.status == SolveStatus::Optimal);
  CHECK(bi.objective == doctest::Approx(ip.objective).epsilon(1e-3));
}

TEST_CASE("infeasibility: -I - t*0 >= 0 reports infeasible with the index") {
  SdpProblem p;
  const int t = p.add_scalar("t");
  p.objective = {{t, 1.0}};
  AffineLmi& ok = p.add_constraint(1, Sense::PosSemidef, 0.0, "t_nonneg");
  ok.scalar_terms.push_back({t, Mat::Identity(1, 1)});
  AffineLmi& c = p.add_constraint(2, Sense::PosSemidef, 0.0, "dead");
  c.constant = -Mat::Identity(2, 2);
  c.scalar_terms.push_back({t, Mat::Zero(2, 2)});  // dead coefficient
  SdpSolution s = solve(p);
  CHECK(s.status == SolveStatus::Infeasible);
  CHECK(s.worst_constraint == 1);
}

TEST_CASE("infeasibility with live variables reports the most-violated constraint") {
  SdpProblem p;
  const int t = p.add_scalar("t");
  AffineLmi& a = p.add_constraint(1, Sense::PosSemidef, 0.0, "t_ge_2");
  a.constant = -2.0 * Mat::Identity(1, 1);
  a.scalar_terms.push_back({t, Mat::Identity(1, 1)});
  AffineLmi& b = p.add_constraint(1, Sense::NegSemidef, 0.0, "t_le_1");
  b.constant = -Mat::Identity(1, 1);
  b.scalar_terms.push_back({t, Mat::Identity(1, 1)});
  SdpSolution s = solve(p);
  CHECK(s.status == SolveStatus::Infeasible);
  CHECK(s.worst_constraint >= 0);
}

TEST_CASE("dump/load round trip preserves the problem") {
  std::mt19937 rng(77);
  oracles::Lti sys = oracles::random_stable_lti(rng, 2, 1, 2);
  int g;
  SdpProblem p = oracles::bounded_real_problem(sys, &g);
  std::stringstream ss;
  dump(p, ss);
  SdpProblem q = load(ss);
  REQUIRE(q.vars.size() == p.vars.size());
  REQUIRE(q.constraints.size() == p.constraints.size());
  SdpSolution s1 = solve(p);
  SdpSolution s2 = solve(q);
  CHECK(s1.objective == doctest::Approx(s2.objective).epsilon(1e-12));
}

TEST_CASE("validate rejects malformed problems") {
  SdpProblem p;
  const int x = p.add_symmetric(2, "X");
  AffineLmi& c = p.add_constraint(3, Sense::PosSemidef, 0.0, "bad");
  c.mat_terms.push_back({x, Mat::Zero(2, 2), Mat::Zero(3, 2)});  // left rows != dim
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
