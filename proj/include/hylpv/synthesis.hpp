// SPDX-License-Identifier: Apache-2.0
#ifndef HYLPV_SYNTHESIS_HPP
#define HYLPV_SYNTHESIS_HPP

#include <optional>
#include <string>
#include <vector>

#include "hylpv/lpvmodel.hpp"
#include "hylpv/sdpcore.hpp"

namespace hylpv::syn {

class SynthesisError : public std::runtime_error {
 public:
  explicit SynthesisError(const std::string& what) : std::runtime_error(what) {}
};

struct SynthesisOptions {
  lpv::FactorizationKind factorization = lpv::FactorizationKind::IdentityM;
  double strictness_margin_rel = 1e-6;  // scales with the plant data norm
  bool include_boundary = true;         // false reproduces independent designs
  std::vector<double> weights;          // alpha_i; empty = all ones
  std::vector<double> fixed_gamma;      // nonempty = feasibility at pinned gammas
  // After minimizing, the deployed certificate is re-centered at
  // gamma * (1 + gamma_backoff): the optimizer drives the coupling LMI to the
  // boundary, and a touch of slack keeps I - R S (and with it controller
  // reconstruction) well conditioned. Reported gammas stay at the optimum.
  double gamma_backoff = 0.005;
  sdp::SolveOptions solver;
};

struct SynthesisProblem {
  lpv::LpvPlant plant;  // carries the partition and grids
  lpv::ParameterDomain domain;
  std::vector<lpv::BasisSet> r_bases, s_bases;  // one per region
  SynthesisOptions options;

  int num_regions() const { return plant.partition.num_regions(); }
  void validate() const;
};

enum class LmiFamily { RProjected, SProjected, Coupling, Boundary, GammaPositive };

const char* to_string(LmiFamily f);

struct ConstraintInfo {
  LmiFamily family = LmiFamily::Coupling;
  int region = -1;       // "from" region for Boundary
  int region_to = -1;    // Boundary only
  int grid_index = -1;
  int vertex = -1;       // rate vertex index; -1 when deduplicated/invariant
  Vec rho;
};

struct AssembledSynthesis {
  sdp::SdpProblem sdp;
  std::vector<std::vector<int>> r_vars, s_vars;  // [region][basis fn]
  std::vector<int> gamma_vars;                   // [region]; empty in fixed mode
  struct BoundaryVar {
    int from = -1, to = -1;
    Vec rho;
    int var = -1;
  };
  std::vector<BoundaryVar> boundary_vars;
  std::vector<ConstraintInfo> info;  // parallel to sdp.constraints
};

AssembledSynthesis assemble_synthesis_lmis(const SynthesisProblem& p);

struct BoundaryMatrix {
  int from = -1, to = -1;
  Vec rho;
  Mat delta_hat;
};

struct SynthesisSolution {
  lpv::LyapunovCertificate certificate;  // per-region R/S coefficients and the
                                         // deployed (backed-off) gammas
  std::vector<double> gamma;             // optimal values, as reported in tables
  std::vector<BoundaryMatrix> boundary;
  sdp::SdpSolution diagnostics;
};

/// Solves the weighted-sum program min sum_i alpha_i gamma_i over the
/// assembled LMIs. Infeasibility reports the violated family and location.
SynthesisSolution solve_synthesis(const SynthesisProblem& p);

/// Factor pair M N^T = I - R S under the chosen convention, with a
/// conditioning check. Throws SynthesisError when I - R S is numerically
/// singular (the coupling LMI margin is too small at this point).
lpv::Factors factorize_MN(const Mat& r, const Mat& s, lpv::FactorizationKind kind,
                          double cond_warn = 1e12, double* cond_out = nullptr);

struct ControllerGains {
  Mat Ak, Bk, Ck, Dk;
};

struct ResetMatrix {
  int from = -1, to = -1;
  Vec rho;
  Mat delta;
};

/// Gain-scheduled controller tables: reconstruction at the synthesis grid,
/// piecewise-linear interpolation in rho inside each region, constant reset
/// matrices per directed surface.
struct GainScheduledController {
  Eigen::Index n_k = 0;
  lpv::Partition partition;
  std::vector<std::vector<double>> grid;             // [region] ascending rho
  std::vector<std::vector<ControllerGains>> gains;   // [region][grid point]
  std::vector<ResetMatrix> resets;

  ControllerGains eval(int region, double rho) const;
  const ResetMatrix* find_reset(int from, int to) const;
};

/// Controller formulas at one point. rho_dot enters through dR/dt and dM^T/dt;
/// with the constant-M convention and constant R the result is rate free.
ControllerGains reconstruct_at(const lpv::PlantMatrices& pm, const Mat& r,
                               const Mat& s, const Mat& dr_dt, const Mat& ds_dt,
                               double gamma, lpv::FactorizationKind kind);

/// Tabulates gains at every synthesis grid point. rho_dot_rule supplies the
/// rate at which rate-dependent gains are frozen (zero by default; irrelevant
/// for constant-R bases under the default convention).
GainScheduledController reconstruct_controller(const SynthesisProblem& p,
                                               const SynthesisSolution& sol,
                                               const Vec& rho_dot_rule = Vec());

/// Reset recovery Delta_ij = N_j^{-1} (Delta_hat - S_j R_i) M_i^{-T} at a
/// surface sample.
Mat recover_reset(const SynthesisSolution& sol, int from, int to, const Vec& rho);

/// Closed-loop matrices for one region at a frozen parameter/rate.
struct ClosedLoop {
  Mat A, B, C, D;
};
ClosedLoop closed_loop_at(const lpv::PlantMatrices& pm, const ControllerGains& k);

/// The analysis LMI value (negative definite when the bounded-real condition
/// holds) for the closed loop at (rho, rate vertex nu).
Mat analysis_lmi_value(const lpv::PlantMatrices& pm, const ControllerGains& k,
                       const lpv::RegionCertificate& cert, const Vec& rho,
                       const Vec& nu, lpv::FactorizationKind kind);

struct ValidationEntry {
  LmiFamily family = LmiFamily::Coupling;
  int region = -1;
  int region_to = -1;
  Vec rho;
  int vertex = -1;
  bool interpolated = false;  // true on densified (off-grid) points
  double margin = 0.0;        // normalized; >= 0 means satisfied
};

struct ValidationReport {
  std::vector<ValidationEntry> entries;
  double worst_grid_margin = 0.0;     // over synthesis-grid entries
  double worst_dense_margin = 0.0;    // over interpolated entries (reported)
  std::string worst_description;

  bool pass(double tol) const { return worst_grid_margin >= -tol; }
};

/// A-posteriori certificate check: X > 0, the analysis LMI at every rate
/// vertex, and the jump condition at every surface sample. Margins on the
/// synthesis grid use exact reconstruction; densified points use the
/// controller's interpolation and are reported, not asserted.
ValidationReport validate_certificate(const SynthesisProblem& p,
                                      const SynthesisSolution& sol,
                                      const GainScheduledController& ctrl,
                                      int density_factor = 5);

}  // namespace hylpv::syn

#endif  // HYLPV_SYNTHESIS_HPP
