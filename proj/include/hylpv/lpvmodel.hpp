// SPDX-License-Identifier: Apache-2.0
#ifndef HYLPV_LPVMODEL_HPP
#define HYLPV_LPVMODEL_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hylpv/matkernel.hpp"

namespace hylpv::lpv {

class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double x, double tol = 0.0) const {
    return x >= lo - tol && x <= hi + tol;
  }
};

/// Scheduling-parameter box P with admissible rate box V (which must contain
/// the origin so frozen parameters are always admissible).
struct ParameterDomain {
  std::vector<Interval> box;   // P
  std::vector<Interval> rate;  // V, rate[k] = [nu_lo_k, nu_hi_k]

  int dimension() const { return static_cast<int>(box.size()); }
  void validate() const;

  static ParameterDomain scalar(double lo, double hi, double rate_lo, double rate_hi);
};

/// All 2^s corner points of the rate box.
std::vector<Vec> rate_vertices(const ParameterDomain& d);

/// Directed switching surface S_{ij}: crossing it transfers authority from
/// region `from` to region `to`. For one scheduling parameter the facet is a
/// single point on axis 0.
struct Surface {
  int from = -1;
  int to = -1;
  int axis = 0;
  double value = 0.0;
};

struct Partition {
  std::vector<std::vector<Interval>> subsets;
  std::vector<Surface> surfaces;
  std::vector<std::vector<Vec>> grids;  // filled by build_grids

  int num_regions() const { return static_cast<int>(subsets.size()); }
  bool contains(int i, const Vec& rho, double tol = 0.0) const;
  /// First region containing rho (the supervisor's initialization rule);
  /// -1 when rho is outside every subset.
  int region_of(const Vec& rho, double tol = 0.0) const;
  bool adjacent(int i, int j) const;
  const Surface* find_surface(int from, int to) const;
};

/// Builds a 1-D partition from overlapping intervals. Validates the covering
/// (union equals the domain box) and that adjacent subsets overlap with
/// nonempty interior, then creates the two directed surfaces per adjacency.
Partition make_partition_1d(const ParameterDomain& dom,
                            const std::vector<Interval>& boxes);

/// Uniform inclusive per-axis grids (tensor product for s > 1); endpoints are
/// exactly the subset bounds.
void build_grids(const ParameterDomain& dom, Partition& part, int points_per_subset);

/// Grid refined by an integer density factor (used for a-posteriori checks).
std::vector<std::vector<Vec>> densified_grids(const Partition& part, int factor);

/// Sample points on the directed surface S_{ij}; throws for non-adjacent pairs.
std::vector<Vec> surface_points(const Partition& part, int i, int j);

/// Monomial basis function rho^e (componentwise exponents) with analytic
/// partial derivatives. exponents all zero => constant 1.
struct BasisFunction {
  std::vector<int> exponents;

  double eval(const Vec& rho) const;
  double deriv(const Vec& rho, int k) const;
  std::string name() const;
};

struct BasisSet {
  std::vector<BasisFunction> funcs;

  int size() const { return static_cast<int>(funcs.size()); }
  static BasisSet constant(int s);
  static BasisSet affine(int s);  // {1, rho_1, ..., rho_s}
};

struct PlantDims {
  Eigen::Index n = 0, nd = 0, ne = 0, ny = 0, nu = 0;
};

struct PlantMatrices {
  Mat A, B1, B2, C1, D11, D12, C2, D21, D22;
};

/// Gridded open-loop switched LPV plant: an analytic evaluator per region
/// (closure-based; grid evaluation is derived from it) plus the partition it
/// lives on.
struct LpvPlant {
  PlantDims dims;
  Partition partition;
  // evaluator(region, rho); regions may share one closure
  std::function<PlantMatrices(int, const Vec&)> eval;

  PlantMatrices evaluate(int region, const Vec& rho) const;  // domain-checked
};

/// Verifies A2 (D12 full column rank, D21 full row rank), A3 (zero D11/D22)
/// at every grid point, and optionally A1 (PBH stabilizability/detectability).
/// Violations are hard model errors naming region, grid index and condition.
void check_assumptions(const LpvPlant& plant, double rank_tol = 1e-8,
                       bool check_pbh = true);

enum class FactorizationKind { IdentityM, IdentityN, BalancedSvd };

struct Factors {
  Mat M, N;
};

/// Factorization M N^T = I - R S used by the controller construction.
/// IdentityM keeps M constant, so controller gains lose their explicit rate
/// dependence whenever R is constant over the region.
Factors factorize(const Mat& r, const Mat& s, FactorizationKind kind);

/// Parameter-dependent Lyapunov data for one region: coefficients of R and S
/// against their bases, evaluators, and the closed-loop storage X built from
/// the Z1/Z2 completion.
struct RegionCertificate {
  BasisSet r_basis, s_basis;
  std::vector<Mat> r_coef, s_coef;  // symmetric n x n per basis function
  double gamma = 0.0;

  Mat eval_R(const Vec& rho) const;
  Mat eval_S(const Vec& rho) const;
  Mat dR(const Vec& rho, int k) const;
  Mat dS(const Vec& rho, int k) const;

  Mat eval_X(const Vec& rho, FactorizationKind kind) const;
  /// dX/drho_k (analytic for the identity factorizations, central finite
  /// difference for the balanced one).
  Mat dX(const Vec& rho, int k, FactorizationKind kind) const;
};

struct LyapunovCertificate {
  std::vector<RegionCertificate> regions;
  FactorizationKind factorization = FactorizationKind::IdentityM;

  double V(int region, const Vec& rho, const Vec& x_cl) const;
};

}  // namespace hylpv::lpv

#endif  // HYLPV_LPVMODEL_HPP
