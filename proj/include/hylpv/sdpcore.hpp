// SPDX-License-Identifier: Apache-2.0
#ifndef HYLPV_SDPCORE_HPP
#define HYLPV_SDPCORE_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hylpv/matkernel.hpp"

namespace hylpv::sdp {

enum class VarKind { Scalar, Symmetric, Matrix };

struct VarDecl {
  VarKind kind = VarKind::Scalar;
  Eigen::Index rows = 1;
  Eigen::Index cols = 1;
  std::string name;
};

enum class Sense { PosSemidef, NegSemidef };

/// Contributes He{L V R^T} = L V R^T + R V^T L^T to the constraint block.
/// Symmetric for any V, so assembled blocks stay symmetric structurally.
struct MatTerm {
  int var = -1;
  Mat left;
  Mat right;
};

/// Contributes y * coeff for a scalar variable y (coeff symmetric).
struct ScalarTerm {
  int var = -1;
  Mat coeff;
};

struct AffineLmi {
  Eigen::Index dim = 0;
  Mat constant;  // symmetric dim x dim
  std::vector<MatTerm> mat_terms;
  std::vector<ScalarTerm> scalar_terms;
  Sense sense = Sense::PosSemidef;
  double margin = 0.0;  // strictness: enforced internally as sense*(G) - margin*I >= 0
  std::string label;
};

struct SdpProblem {
  std::vector<VarDecl> vars;
  std::vector<AffineLmi> constraints;
  std::vector<std::pair<int, double>> objective;  // minimize sum coef * scalar var

  int add_scalar(std::string name);
  int add_symmetric(Eigen::Index dim, std::string name);
  int add_matrix(Eigen::Index rows, Eigen::Index cols, std::string name);

  AffineLmi& add_constraint(Eigen::Index dim, Sense sense, double margin,
                            std::string label);

  /// Throws std::invalid_argument describing the first structural defect
  /// (bad variable reference, dimension mismatch, non-finite data).
  void validate() const;
};

enum class SolveStatus { Optimal, Infeasible, MaxIter, IllConditioned };

const char* to_string(SolveStatus s);

struct SdpSolution {
  SolveStatus status = SolveStatus::IllConditioned;
  std::vector<Mat> values;  // per variable; scalars are 1x1
  double objective = std::numeric_limits<double>::quiet_NaN();
  double worst_margin = std::numeric_limits<double>::quiet_NaN();
  int worst_constraint = -1;
  int newton_iters = 0;
  double gap = std::numeric_limits<double>::quiet_NaN();
  std::string message;

  double scalar(int var) const { return values.at(static_cast<std::size_t>(var))(0, 0); }
};

struct SolveOptions {
  int max_iter = 600;        // total Newton-step budget across both phases
  double tol = 1e-8;         // relative objective gap target
  double feas_margin = 1e-4; // phase-1 interiority target (relative to block scale)
  bool verbose = false;
};

/// Exact affine evaluation of one constraint at a full assignment (raw
/// orientation: constant + terms; sense and margin are not applied).
Mat assemble(const AffineLmi& lmi, const std::vector<Mat>& assignment);

/// Per-constraint minimum eigenvalue of the sense-normalized assembled value
/// (>= 0 means satisfied non-strictly; margins are not subtracted).
std::vector<double> check_feasible(const SdpProblem& p,
                                   const std::vector<Mat>& assignment);

SdpSolution solve(const SdpProblem& p, const SolveOptions& opts = {});

/// Cross-check mode for problems whose objective is a single scalar variable:
/// bisects on that variable with per-point feasibility solves. `hi` must be
/// feasible; `lo` infeasible (or zero).
SdpSolution solve_bisection(const SdpProblem& p, int gamma_var, double lo,
                            double hi, double rel_tol = 1e-4,
                            const SolveOptions& opts = {});

/// Feasibility probe with one scalar variable pinned to a constant.
bool feasible_with_fixed(const SdpProblem& p, int var, double value,
                         const SolveOptions& opts = {});

/// Line-oriented text dump/load for regression goldens (full precision).
void dump(const SdpProblem& p, std::ostream& os);
SdpProblem load(std::istream& is);

}  // namespace hylpv::sdp

#endif  // HYLPV_SDPCORE_HPP
