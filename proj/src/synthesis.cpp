// SPDX-License-Identifier: Apache-2.0
#include "hylpv/synthesis.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <sstream>

namespace hylpv::syn {

namespace {

Mat selector(Eigen::Index total, Eigen::Index offset, Eigen::Index width) {
  Mat e = Mat::Zero(total, width);
  e.block(offset, 0, width, width).setIdentity();
  return e;
}

std::string point_str(const Vec& rho) {
  std::ostringstream os;
  os << "rho = ";
  for (Eigen::Index k = 0; k < rho.size(); ++k) os << (k ? ", " : "") << rho(k);
  return os.str();
}

}  // namespace

const char* to_string(LmiFamily f) {
  switch (f) {
    case LmiFamily::RProjected: return "R-projected";
    case LmiFamily::SProjected: return "S-projected";
    case LmiFamily::Coupling: return "coupling";
    case LmiFamily::Boundary: return "boundary";
    case LmiFamily::GammaPositive: return "gamma-positive";
  }
  return "?";
}

void SynthesisProblem::validate() const {
  const int nr = num_regions();
  if (nr < 1) throw SynthesisError("synthesis problem has no regions");
  if (static_cast<int>(r_bases.size()) != nr || static_cast<int>(s_bases.size()) != nr) {
    throw SynthesisError("one R basis and one S basis required per region");
  }
  if (plant.partition.grids.size() != static_cast<std::size_t>(nr)) {
    throw SynthesisError("partition grids missing (call build_grids)");
  }
  if (!options.weights.empty() && static_cast<int>(options.weights.size()) != nr) {
    throw SynthesisError("region weight count mismatch");
  }
  for (double w : options.weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw SynthesisError("region weights must be finite and positive");
    }
  }
  if (!options.fixed_gamma.empty() &&
      static_cast<int>(options.fixed_gamma.size()) != nr) {
    throw SynthesisError("fixed gamma count mismatch");
  }
  domain.validate();
}

AssembledSynthesis assemble_synthesis_lmis(const SynthesisProblem& p) {
  p.validate();
  lpv::check_assumptions(p.plant);

  const auto& part = p.plant.partition;
  const auto& d = p.plant.dims;
  const Eigen::Index n = d.n, nd = d.nd, ne = d.ne, ny = d.ny, nu = d.nu;
  const int nr = p.num_regions();
  const bool fixed = !p.options.fixed_gamma.empty();

  AssembledSynthesis as;
  as.r_vars.resize(static_cast<std::size_t>(nr));
  as.s_vars.resize(static_cast<std::size_t>(nr));

  // A constant R over two adjacent regions is forced equal across them by the
  // pair of directed boundary LMIs (their [[R_i, R_i],[R_i, R_j]] principal
  // submatrices demand R_j >= R_i and R_i >= R_j). Sharing the variable and
  // using the exact Schur quotient of the boundary LMI keeps the feasible set
  // identical while restoring a nonempty interior for the solver.
  auto is_const_basis = [](const lpv::BasisSet& b) {
    if (b.size() != 1) return false;
    for (int e : b.funcs[0].exponents) {
      if (e != 0) return false;
    }
    return true;
  };
  std::vector<int> r_class(static_cast<std::size_t>(nr));
  for (int i = 0; i < nr; ++i) r_class[static_cast<std::size_t>(i)] = i;
  std::function<int(int)> find_class = [&](int i) {
    while (r_class[static_cast<std::size_t>(i)] != i) i = r_class[static_cast<std::size_t>(i)];
    return i;
  };
  for (const auto& surf : part.surfaces) {
    if (p.options.include_boundary &&
        is_const_basis(p.r_bases[static_cast<std::size_t>(surf.from)]) &&
        is_const_basis(p.r_bases[static_cast<std::size_t>(surf.to)]) &&
        part.find_surface(surf.to, surf.from) != nullptr) {
      const int a = find_class(surf.from), b = find_class(surf.to);
      if (a != b) r_class[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
  }
  auto shared_r = [&](int i, int j) { return find_class(i) == find_class(j); };

  for (int i = 0; i < nr; ++i) {
    const int rep = find_class(i);
    if (rep != i) {
      as.r_vars[static_cast<std::size_t>(i)] = as.r_vars[static_cast<std::size_t>(rep)];
    } else {
      for (int l = 0; l < p.r_bases[static_cast<std::size_t>(i)].size(); ++l) {
        as.r_vars[static_cast<std::size_t>(i)].push_back(as.sdp.add_symmetric(
            n, "R" + std::to_string(i) + "_" + std::to_string(l)));
      }
    }
    for (int l = 0; l < p.s_bases[static_cast<std::size_t>(i)].size(); ++l) {
      as.s_vars[static_cast<std::size_t>(i)].push_back(as.sdp.add_symmetric(
          n, "S" + std::to_string(i) + "_" + std::to_string(l)));
    }
    if (!fixed) {
      as.gamma_vars.push_back(as.sdp.add_scalar("gamma" + std::to_string(i)));
    }
  }

  const auto vertices = lpv::rate_vertices(p.domain);

  auto gamma_of = [&](int region) {
    return fixed ? p.options.fixed_gamma[static_cast<std::size_t>(region)] : 0.0;
  };

  for (int i = 0; i < nr; ++i) {
    const auto& grid = part.grids[static_cast<std::size_t>(i)];
    const auto& rb = p.r_bases[static_cast<std::size_t>(i)];
    const auto& sb = p.s_bases[static_cast<std::size_t>(i)];

    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Vec& rho = grid[g];
      const lpv::PlantMatrices pm = p.plant.evaluate(i, rho);
      const double scale = std::max(1.0, pm.A.norm());
      const double margin = p.options.strictness_margin_rel * scale;

      // ---- R inequality, projected by Ker [B2^T D12^T 0] ----
      {
        Mat kr(nu, n + ne + nd);
        kr << pm.B2.transpose(), pm.D12.transpose(), Mat::Zero(nu, nd);
        const Mat nker = null_space_basis(kr);
        if (nker.cols() > 0) {
          const Eigen::Index tot = n + ne + nd;
          const Mat e1 = selector(tot, 0, n);
          const Mat e3 = Mat(selector(tot, n + ne, nd));
          Mat gcoef = Mat::Zero(tot, tot);
          gcoef.block(n, n, ne, ne) = -Mat::Identity(ne, ne);
          gcoef.block(n + ne, n + ne, nd, nd) = -Mat::Identity(nd, nd);
          const Mat const_raw =
              e1 * pm.B1 * e3.transpose() + e3 * pm.B1.transpose() * e1.transpose();

          // vertex expansion with deduplication of identical derivative terms
          std::vector<std::pair<int, Vec>> instances;
          for (std::size_t v = 0; v < vertices.size(); ++v) {
            Vec kappa(rb.size());
            for (int l = 0; l < rb.size(); ++l) {
              double kl = 0.0;
              for (int k = 0; k < p.domain.dimension(); ++k) {
                kl += vertices[v](k) *
                      rb.funcs[static_cast<std::size_t>(l)].deriv(rho, k);
              }
              kappa(l) = kl;
            }
            bool dup = false;
            for (const auto& [vi, kv] : instances) {
              if ((kv - kappa).norm() == 0.0) dup = true;
            }
            if (!dup) instances.emplace_back(static_cast<int>(v), kappa);
          }
          for (const auto& [v, kappa] : instances) {
            auto& lmi = as.sdp.add_constraint(
                nker.cols(), sdp::Sense::NegSemidef, margin,
                "R[" + std::to_string(i) + "][" + std::to_string(g) + "]v" +
                    std::to_string(v));
            lmi.constant = nker.transpose() * const_raw * nker;
            for (int l = 0; l < rb.size(); ++l) {
              const double fl = rb.funcs[static_cast<std::size_t>(l)].eval(rho);
              Mat lcoef(tot, n);
              lcoef << fl * pm.A - 0.5 * kappa(l) * Mat::Identity(n, n), fl * pm.C1,
                  Mat::Zero(nd, n);
              lmi.mat_terms.push_back({as.r_vars[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)],
                                       nker.transpose() * lcoef,
                                       nker.transpose() * e1});
            }
            const Mat gproj = nker.transpose() * gcoef * nker;
            if (fixed) {
              lmi.constant += gamma_of(i) * gproj;
            } else {
              lmi.scalar_terms.push_back({as.gamma_vars[static_cast<std::size_t>(i)], gproj});
            }
            as.info.push_back({LmiFamily::RProjected, i, -1, static_cast<int>(g),
                               instances.size() > 1 ? v : -1, rho});
          }
        }
      }

      // ---- S inequality, projected by Ker [C2 D21 0] ----
      {
        Mat ks(ny, n + nd + ne);
        ks << pm.C2, pm.D21, Mat::Zero(ny, ne);
        const Mat nker = null_space_basis(ks);
        if (nker.cols() > 0) {
          const Eigen::Index tot = n + nd + ne;
          const Mat e1 = selector(tot, 0, n);
          const Mat e3 = Mat(selector(tot, n + nd, ne));
          Mat gcoef = Mat::Zero(tot, tot);
          gcoef.block(n, n, nd, nd) = -Mat::Identity(nd, nd);
          gcoef.block(n + nd, n + nd, ne, ne) = -Mat::Identity(ne, ne);
          const Mat const_raw =
              e3 * pm.C1 * e1.transpose() + e1 * pm.C1.transpose() * e3.transpose();

          std::vector<std::pair<int, Vec>> instances;
          for (std::size_t v = 0; v < vertices.size(); ++v) {
            Vec kappa(sb.size());
            for (int l = 0; l < sb.size(); ++l) {
              double kl = 0.0;
              for (int k = 0; k < p.domain.dimension(); ++k) {
                kl += vertices[v](k) *
                      sb.funcs[static_cast<std::size_t>(l)].deriv(rho, k);
              }
              kappa(l) = kl;
            }
            bool dup = false;
            for (const auto& [vi, kv] : instances) {
              if ((kv - kappa).norm() == 0.0) dup = true;
            }
            if (!dup) instances.emplace_back(static_cast<int>(v), kappa);
          }
          for (const auto& [v, kappa] : instances) {
            auto& lmi = as.sdp.add_constraint(
                nker.cols(), sdp::Sense::NegSemidef, margin,
                "S[" + std::to_string(i) + "][" + std::to_string(g) + "]v" +
                    std::to_string(v));
            lmi.constant = nker.transpose() * const_raw * nker;
            for (int l = 0; l < sb.size(); ++l) {
              const double gl = sb.funcs[static_cast<std::size_t>(l)].eval(rho);
              Mat lcoef(tot, n);
              lcoef << gl * pm.A.transpose() + 0.5 * kappa(l) * Mat::Identity(n, n),
                  gl * pm.B1.transpose(), Mat::Zero(ne, n);
              lmi.mat_terms.push_back({as.s_vars[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)],
                                       nker.transpose() * lcoef,
                                       nker.transpose() * e1});
            }
            const Mat gproj = nker.transpose() * gcoef * nker;
            if (fixed) {
              lmi.constant += gamma_of(i) * gproj;
            } else {
              lmi.scalar_terms.push_back({as.gamma_vars[static_cast<std::size_t>(i)], gproj});
            }
            as.info.push_back({LmiFamily::SProjected, i, -1, static_cast<int>(g),
                               instances.size() > 1 ? v : -1, rho});
          }
        }
      }

      // ---- coupling [R I; I S] > 0 ----
      {
        auto& lmi = as.sdp.add_constraint(
            2 * n, sdp::Sense::PosSemidef, p.options.strictness_margin_rel,
            "coupling[" + std::to_string(i) + "][" + std::to_string(g) + "]");
        lmi.constant = Mat::Zero(2 * n, 2 * n);
        lmi.constant.block(0, n, n, n).setIdentity();
        lmi.constant.block(n, 0, n, n).setIdentity();
        const Mat e1 = selector(2 * n, 0, n);
        const Mat e2 = selector(2 * n, n, n);
        for (int l = 0; l < rb.size(); ++l) {
          const double fl = rb.funcs[static_cast<std::size_t>(l)].eval(rho);
          lmi.mat_terms.push_back({as.r_vars[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)],
                                   0.5 * fl * e1, e1});
        }
        for (int l = 0; l < sb.size(); ++l) {
          const double gl = sb.funcs[static_cast<std::size_t>(l)].eval(rho);
          lmi.mat_terms.push_back({as.s_vars[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)],
                                   0.5 * gl * e2, e2});
        }
        as.info.push_back({LmiFamily::Coupling, i, -1, static_cast<int>(g), -1, rho});
      }
    }
  }

  // ---- boundary LMIs on the switching surfaces ----
  if (p.options.include_boundary) {
    for (const auto& surf : part.surfaces) {
      const auto samples = lpv::surface_points(part, surf.from, surf.to);
      for (std::size_t sidx = 0; sidx < samples.size(); ++sidx) {
        const Vec& rho = samples[sidx];
        if (shared_r(surf.from, surf.to)) {
          // R_i = R_j = R forces Delta_hat = I; the boundary LMI collapses to
          // [[R, I, I], [I, S_i, S_j], [I, S_j, S_j]] >= 0.
          as.boundary_vars.push_back({surf.from, surf.to, rho, -1});
          auto& lmi = as.sdp.add_constraint(
              3 * n, sdp::Sense::PosSemidef, 0.0,
              "boundary[" + std::to_string(surf.from) + "->" +
                  std::to_string(surf.to) + "]");
          const Mat e1 = selector(3 * n, 0, n);
          const Mat e2 = selector(3 * n, n, n);
          const Mat e3 = selector(3 * n, 2 * n, n);
          lmi.constant = e2 * e1.transpose() + e1 * e2.transpose() +
                         e3 * e1.transpose() + e1 * e3.transpose();
          const auto& rbi = p.r_bases[static_cast<std::size_t>(surf.from)];
          const auto& sbi = p.s_bases[static_cast<std::size_t>(surf.from)];
          const auto& sbj = p.s_bases[static_cast<std::size_t>(surf.to)];
          for (int l = 0; l < rbi.size(); ++l) {
            const double fl = rbi.funcs[static_cast<std::size_t>(l)].eval(rho);
            lmi.mat_terms.push_back(
                {as.r_vars[static_cast<std::size_t>(surf.from)][static_cast<std::size_t>(l)],
                 0.5 * fl * e1, e1});
          }
          for (int l = 0; l < sbi.size(); ++l) {
            const double gl = sbi.funcs[static_cast<std::size_t>(l)].eval(rho);
            lmi.mat_terms.push_back(
                {as.s_vars[static_cast<std::size_t>(surf.from)][static_cast<std::size_t>(l)],
                 0.5 * gl * e2, e2});
          }
          for (int l = 0; l < sbj.size(); ++l) {
            const double gl = sbj.funcs[static_cast<std::size_t>(l)].eval(rho);
            lmi.mat_terms.push_back(
                {as.s_vars[static_cast<std::size_t>(surf.to)][static_cast<std::size_t>(l)],
                 gl * e3, e2 + 0.5 * e3});
          }
          as.info.push_back({LmiFamily::Boundary, surf.from, surf.to,
                             static_cast<int>(sidx), -1, rho});
          continue;
        }
        const int dvar = as.sdp.add_matrix(
            n, n, "Dhat_" + std::to_string(surf.from) + std::to_string(surf.to));
        as.boundary_vars.push_back({surf.from, surf.to, rho, dvar});

        auto& lmi = as.sdp.add_constraint(
            4 * n, sdp::Sense::PosSemidef, 0.0,
            "boundary[" + std::to_string(surf.from) + "->" +
                std::to_string(surf.to) + "]");
        const Mat e1 = selector(4 * n, 0, n);
        const Mat e2 = selector(4 * n, n, n);
        const Mat e3 = selector(4 * n, 2 * n, n);
        const Mat e4 = selector(4 * n, 3 * n, n);
        lmi.constant = e2 * e1.transpose() + e1 * e2.transpose() +
                       e3 * e2.transpose() + e2 * e3.transpose() +
                       e4 * e3.transpose() + e3 * e4.transpose();
        const auto& rbi = p.r_bases[static_cast<std::size_t>(surf.from)];
        const auto& rbj = p.r_bases[static_cast<std::size_t>(surf.to)];
        const auto& sbi = p.s_bases[static_cast<std::size_t>(surf.from)];
        const auto& sbj = p.s_bases[static_cast<std::size_t>(surf.to)];
        for (int l = 0; l < rbi.size(); ++l) {
          const double fl = rbi.funcs[static_cast<std::size_t>(l)].eval(rho);
          lmi.mat_terms.push_back(
              {as.r_vars[static_cast<std::size_t>(surf.from)][static_cast<std::size_t>(l)],
               fl * (0.5 * e1 + e3), e1});
        }
        for (int l = 0; l < rbj.size(); ++l) {
          const double fl = rbj.funcs[static_cast<std::size_t>(l)].eval(rho);
          lmi.mat_terms.push_back(
              {as.r_vars[static_cast<std::size_t>(surf.to)][static_cast<std::size_t>(l)],
               0.5 * fl * e3, e3});
        }
        for (int l = 0; l < sbi.size(); ++l) {
          const double gl = sbi.funcs[static_cast<std::size_t>(l)].eval(rho);
          lmi.mat_terms.push_back(
              {as.s_vars[static_cast<std::size_t>(surf.from)][static_cast<std::size_t>(l)],
               0.5 * gl * e2, e2});
        }
        for (int l = 0; l < sbj.size(); ++l) {
          const double gl = sbj.funcs[static_cast<std::size_t>(l)].eval(rho);
          lmi.mat_terms.push_back(
              {as.s_vars[static_cast<std::size_t>(surf.to)][static_cast<std::size_t>(l)],
               gl * e4, e2 + 0.5 * e4});
        }
        lmi.mat_terms.push_back({dvar, e4, e1});
        as.info.push_back({LmiFamily::Boundary, surf.from, surf.to,
                           static_cast<int>(sidx), -1, rho});
      }
    }
  }

  // ---- gamma positivity and the weighted-sum objective ----
  if (!fixed) {
    for (int i = 0; i < nr; ++i) {
      auto& lmi = as.sdp.add_constraint(1, sdp::Sense::PosSemidef, 0.0,
                                        "gamma_pos[" + std::to_string(i) + "]");
      lmi.scalar_terms.push_back(
          {as.gamma_vars[static_cast<std::size_t>(i)], Mat::Identity(1, 1)});
      as.info.push_back({LmiFamily::GammaPositive, i, -1, -1, -1, Vec()});
    }
    for (int i = 0; i < nr; ++i) {
      const double alpha =
          p.options.weights.empty() ? 1.0 : p.options.weights[static_cast<std::size_t>(i)];
      as.sdp.objective.emplace_back(as.gamma_vars[static_cast<std::size_t>(i)], alpha);
    }
  }

  return as;
}

namespace {

SynthesisSolution extract_solution(const SynthesisProblem& p,
                                   const AssembledSynthesis& as,
                                   const sdp::SdpSolution& sdpsol) {
  SynthesisSolution sol;
  sol.diagnostics = sdpsol;
  sol.certificate.factorization = p.options.factorization;
  const int nr = p.num_regions();
  const bool fixed = !p.options.fixed_gamma.empty();
  for (int i = 0; i < nr; ++i) {
    lpv::RegionCertificate rc;
    rc.r_basis = p.r_bases[static_cast<std::size_t>(i)];
    rc.s_basis = p.s_bases[static_cast<std::size_t>(i)];
    for (int v : as.r_vars[static_cast<std::size_t>(i)]) {
      rc.r_coef.push_back(sdpsol.values[static_cast<std::size_t>(v)]);
    }
    for (int v : as.s_vars[static_cast<std::size_t>(i)]) {
      rc.s_coef.push_back(sdpsol.values[static_cast<std::size_t>(v)]);
    }
    rc.gamma = fixed ? p.options.fixed_gamma[static_cast<std::size_t>(i)]
                     : sdpsol.scalar(as.gamma_vars[static_cast<std::size_t>(i)]);
    sol.gamma.push_back(rc.gamma);
    sol.certificate.regions.push_back(std::move(rc));
  }
  const Eigen::Index n = p.plant.dims.n;
  for (const auto& bv : as.boundary_vars) {
    sol.boundary.push_back({bv.from, bv.to, bv.rho,
                            bv.var >= 0
                                ? sdpsol.values[static_cast<std::size_t>(bv.var)]
                                : Mat(Mat::Identity(n, n))});
  }
  return sol;
}

[[noreturn]] void throw_solve_failure(const AssembledSynthesis& as,
                                      const sdp::SdpSolution& sdpsol) {
  std::ostringstream os;
  os << "synthesis SDP " << sdp::to_string(sdpsol.status);
  if (sdpsol.worst_constraint >= 0 &&
      sdpsol.worst_constraint < static_cast<int>(as.info.size())) {
    const auto& ci = as.info[static_cast<std::size_t>(sdpsol.worst_constraint)];
    os << "; most violated: " << to_string(ci.family) << " LMI, region "
       << ci.region;
    if (ci.grid_index >= 0) os << ", grid point " << ci.grid_index;
    if (ci.rho.size() > 0) os << " (" << point_str(ci.rho) << ")";
    os << ", margin " << sdpsol.worst_margin;
  }
  if (!sdpsol.message.empty()) os << "; " << sdpsol.message;
  throw SynthesisError(os.str());
}

}  // namespace

SynthesisSolution solve_synthesis(const SynthesisProblem& p) {
  AssembledSynthesis as = assemble_synthesis_lmis(p);
  sdp::SdpSolution sdpsol = sdp::solve(as.sdp, p.options.solver);
  if (sdpsol.status != sdp::SolveStatus::Optimal) throw_solve_failure(as, sdpsol);
  SynthesisSolution sol = extract_solution(p, as, sdpsol);

  const bool fixed = !p.options.fixed_gamma.empty();
  if (fixed || !(p.options.gamma_backoff > 0.0)) return sol;

  // Re-center the certificate at slightly backed-off gammas: feasibility solve
  // that pushes all blocks uniformly interior, away from the coupling boundary
  // the minimization pressed against. Reported gammas remain the optima.
  SynthesisProblem centered = p;
  centered.options.fixed_gamma.clear();
  for (double g : sol.gamma) {
    centered.options.fixed_gamma.push_back(g * (1.0 + p.options.gamma_backoff));
  }
  centered.options.gamma_backoff = 0.0;
  centered.options.solver.feas_margin = 1e-3;
  AssembledSynthesis as2 = assemble_synthesis_lmis(centered);
  sdp::SdpSolution centered_sol = sdp::solve(as2.sdp, centered.options.solver);
  if (centered_sol.status != sdp::SolveStatus::Optimal) {
    // fall back to the raw optimum rather than failing the whole synthesis
    sol.diagnostics.message += "; re-centering failed: " + centered_sol.message;
    return sol;
  }
  SynthesisSolution out = extract_solution(centered, as2, centered_sol);
  out.gamma = sol.gamma;  // report the optimal values
  out.diagnostics = sol.diagnostics;
  out.diagnostics.message += "; certificate re-centered at backed-off gamma";
  return out;
}

lpv::Factors factorize_MN(const Mat& r, const Mat& s, lpv::FactorizationKind kind,
                          double cond_warn, double* cond_out) {
  const Eigen::Index n = r.rows();
  const Mat irs = Mat::Identity(n, n) - r * s;
  Eigen::JacobiSVD<Mat> svd(irs);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues().minCoeff();
  const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (cond_out) *cond_out = cond;
  if (!(smin > 1e-14 * smax) || !std::isfinite(cond) || cond > cond_warn) {
    std::ostringstream os;
    os << "factorize_MN: I - R S is numerically singular (cond " << cond
       << "); the coupling LMI margin is too small at this point";
    throw SynthesisError(os.str());
  }
  return lpv::factorize(r, s, kind);
}

namespace {

// d(M)/dt and d(N)/dt for the chosen convention, from dR/dt and dS/dt.
// The balanced factorization has no closed form here; a symmetric difference
// along the (R, S) path is used instead.
std::pair<Mat, Mat> factor_rates(const Mat& r, const Mat& s, const Mat& dr,
                                 const Mat& ds, lpv::FactorizationKind kind) {
  const Eigen::Index n = r.rows();
  switch (kind) {
    case lpv::FactorizationKind::IdentityM:
      // N^T = I - R S
      return {Mat::Zero(n, n), Mat(-(ds * r + s * dr))};
    case lpv::FactorizationKind::IdentityN:
      return {Mat(-(dr * s + r * ds)), Mat::Zero(n, n)};
    case lpv::FactorizationKind::BalancedSvd: {
      const double h = 1e-7;
      auto fp = lpv::factorize(r + h * dr, s + h * ds, kind);
      auto fm = lpv::factorize(r - h * dr, s - h * ds, kind);
      return {(fp.M - fm.M) / (2.0 * h), (fp.N - fm.N) / (2.0 * h)};
    }
  }
  return {Mat::Zero(n, n), Mat::Zero(n, n)};
}

}  // namespace

ControllerGains reconstruct_at(const lpv::PlantMatrices& pm, const Mat& r,
                               const Mat& s, const Mat& dr_dt, const Mat& ds_dt,
                               double gamma, lpv::FactorizationKind kind) {
  const Eigen::Index n = pm.A.rows();
  const Eigen::Index nu = pm.B2.cols();
  const Eigen::Index ny = pm.C2.rows();

  {
    Eigen::JacobiSVD<Mat> svr(r);
    if (svr.singularValues().minCoeff() <= 1e-14 * svr.singularValues()(0)) {
      throw SynthesisError("reconstruct: R is numerically singular");
    }
    Eigen::JacobiSVD<Mat> svs(s);
    if (svs.singularValues().minCoeff() <= 1e-14 * svs.singularValues()(0)) {
      throw SynthesisError("reconstruct: S is numerically singular");
    }
  }

  const Mat rinv = solve_linear(r, Mat(Mat::Identity(n, n)));
  const Mat sinv = solve_linear(s, Mat(Mat::Identity(n, n)));

  const Mat d12t_d12 = pm.D12.transpose() * pm.D12;
  const Mat f = -solve_linear(
      d12t_d12, Mat(gamma * pm.B2.transpose() * rinv + pm.D12.transpose() * pm.C1));
  const Mat d21_d21t = pm.D21 * pm.D21.transpose();
  // L = -(gamma S^{-1} C2^T + B1 D21^T) (D21 D21^T)^{-1}
  const Mat lt = solve_linear(
      d21_d21t,
      Mat((gamma * sinv * pm.C2.transpose() + pm.B1 * pm.D21.transpose()).transpose()));
  const Mat l = -lt.transpose();

  lpv::Factors fac = factorize_MN(r, s, kind);
  const auto [dm_dt, dn_dt] = factor_rates(r, s, dr_dt, ds_dt, kind);

  Mat braces = pm.A.transpose() - s * dr_dt - fac.N * dm_dt.transpose() +
               s * (pm.A + pm.B2 * f + l * pm.C2) * r +
               (1.0 / gamma) * s * (pm.B1 + l * pm.D21) * pm.B1.transpose() +
               (1.0 / gamma) * pm.C1.transpose() * (pm.C1 + pm.D12 * f) * r;

  ControllerGains k;
  // X M^{-T} = (M^{-1} X^T)^T
  auto right_minv_t = [&](const Mat& x) {
    return Mat(solve_linear(fac.M, Mat(x.transpose())).transpose());
  };
  k.Ak = -solve_linear(fac.N, right_minv_t(braces));
  k.Bk = solve_linear(fac.N, Mat(s * l));
  k.Ck = right_minv_t(Mat(f * r));
  k.Dk = Mat::Zero(nu, ny);
  return k;
}

GainScheduledController reconstruct_controller(const SynthesisProblem& p,
                                               const SynthesisSolution& sol,
                                               const Vec& rho_dot_rule) {
  const auto& part = p.plant.partition;
  const int nr = p.num_regions();
  Vec rate = rho_dot_rule;
  if (rate.size() == 0) rate = Vec::Zero(p.domain.dimension());

  GainScheduledController ctrl;
  ctrl.n_k = p.plant.dims.n;
  ctrl.partition = part;
  ctrl.grid.resize(static_cast<std::size_t>(nr));
  ctrl.gains.resize(static_cast<std::size_t>(nr));

  for (int i = 0; i < nr; ++i) {
    const auto& cert = sol.certificate.regions[static_cast<std::size_t>(i)];
    for (std::size_t g = 0; g < part.grids[static_cast<std::size_t>(i)].size(); ++g) {
      const Vec& rho = part.grids[static_cast<std::size_t>(i)][g];
      const lpv::PlantMatrices pm = p.plant.evaluate(i, rho);
      Mat dr_dt = Mat::Zero(p.plant.dims.n, p.plant.dims.n);
      Mat ds_dt = Mat::Zero(p.plant.dims.n, p.plant.dims.n);
      for (int k = 0; k < p.domain.dimension(); ++k) {
        dr_dt += rate(k) * cert.dR(rho, k);
        ds_dt += rate(k) * cert.dS(rho, k);
      }
      try {
        ctrl.gains[static_cast<std::size_t>(i)].push_back(
            reconstruct_at(pm, cert.eval_R(rho), cert.eval_S(rho), dr_dt, ds_dt,
                           cert.gamma, sol.certificate.factorization));
      } catch (const SynthesisError& e) {
        throw SynthesisError(std::string(e.what()) + " (region " +
                             std::to_string(i) + ", " + point_str(rho) + ")");
      }
      ctrl.grid[static_cast<std::size_t>(i)].push_back(rho(0));
    }
  }

  for (const auto& bm : sol.boundary) {
    ctrl.resets.push_back(
        {bm.from, bm.to, bm.rho, recover_reset(sol, bm.from, bm.to, bm.rho)});
  }
  return ctrl;
}

Mat recover_reset(const SynthesisSolution& sol, int from, int to, const Vec& rho) {
  const BoundaryMatrix* found = nullptr;
  for (const auto& bm : sol.boundary) {
    if (bm.from == from && bm.to == to && (bm.rho - rho).norm() <= 1e-9 * (1.0 + rho.norm())) {
      found = &bm;
    }
  }
  if (!found) {
    throw SynthesisError("recover_reset: no boundary matrix for surface " +
                         std::to_string(from) + "->" + std::to_string(to) + " at " +
                         point_str(rho));
  }
  const auto& ci = sol.certificate.regions[static_cast<std::size_t>(from)];
  const auto& cj = sol.certificate.regions[static_cast<std::size_t>(to)];
  const Mat ri = ci.eval_R(rho);
  const Mat si = ci.eval_S(rho);
  const Mat rj = cj.eval_R(rho);
  const Mat sj = cj.eval_S(rho);
  const auto kind = sol.certificate.factorization;
  lpv::Factors fi, fj;
  try {
    fi = factorize_MN(ri, si, kind);
  } catch (const SynthesisError&) {
    throw SynthesisError("recover_reset: M factor of region " + std::to_string(from) +
                         " is singular at " + point_str(rho));
  }
  try {
    fj = factorize_MN(rj, sj, kind);
  } catch (const SynthesisError&) {
    throw SynthesisError("recover_reset: N factor of region " + std::to_string(to) +
                         " is singular at " + point_str(rho));
  }
  // Delta = N_j^{-1} (Dhat - S_j R_i) M_i^{-T}
  const Mat lhs = solve_linear(fj.N, Mat(found->delta_hat - sj * ri));
  return Mat(solve_linear(fi.M, Mat(lhs.transpose())).transpose());
}

ClosedLoop closed_loop_at(const lpv::PlantMatrices& pm, const ControllerGains& k) {
  const Eigen::Index n = pm.A.rows();
  const Eigen::Index nk = k.Ak.rows();
  ClosedLoop cl;
  cl.A = Mat(n + nk, n + nk);
  cl.A << pm.A + pm.B2 * k.Dk * pm.C2, pm.B2 * k.Ck, k.Bk * pm.C2, k.Ak;
  cl.B = Mat(n + nk, pm.B1.cols());
  cl.B << pm.B1 + pm.B2 * k.Dk * pm.D21, k.Bk * pm.D21;
  cl.C = Mat(pm.C1.rows(), n + nk);
  cl.C << pm.C1 + pm.D12 * k.Dk * pm.C2, pm.D12 * k.Ck;
  cl.D = pm.D11 + pm.D12 * k.Dk * pm.D21;
  return cl;
}

Mat analysis_lmi_value(const lpv::PlantMatrices& pm, const ControllerGains& k,
                       const lpv::RegionCertificate& cert, const Vec& rho,
                       const Vec& nu, lpv::FactorizationKind kind) {
  const ClosedLoop cl = closed_loop_at(pm, k);
  const Eigen::Index n2 = cl.A.rows();
  const Eigen::Index nd = cl.B.cols();
  const Eigen::Index ne = cl.C.rows();
  const Mat x = cert.eval_X(rho, kind);
  Mat xdot = Mat::Zero(n2, n2);
  for (int kk = 0; kk < nu.size(); ++kk) {
    xdot += nu(kk) * cert.dX(rho, kk, kind);
  }
  const double gamma = cert.gamma;
  Mat psi(n2 + nd + ne, n2 + nd + ne);
  const Mat xa = x * cl.A;
  psi << xa + xa.transpose() + xdot, x * cl.B, cl.C.transpose(),
      cl.B.transpose() * x, -gamma * Mat::Identity(nd, nd), cl.D.transpose(),
      cl.C, cl.D, -gamma * Mat::Identity(ne, ne);
  return psi;
}

ControllerGains GainScheduledController::eval(int region, double rho) const {
  const auto& xs = grid.at(static_cast<std::size_t>(region));
  const auto& ks = gains.at(static_cast<std::size_t>(region));
  if (xs.empty()) throw SynthesisError("controller has no gains for region");
  if (rho <= xs.front()) return ks.front();
  if (rho >= xs.back()) return ks.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), rho);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double t = (rho - xs[lo]) / (xs[hi] - xs[lo]);
  ControllerGains out;
  out.Ak = (1.0 - t) * ks[lo].Ak + t * ks[hi].Ak;
  out.Bk = (1.0 - t) * ks[lo].Bk + t * ks[hi].Bk;
  out.Ck = (1.0 - t) * ks[lo].Ck + t * ks[hi].Ck;
  out.Dk = (1.0 - t) * ks[lo].Dk + t * ks[hi].Dk;
  return out;
}

const ResetMatrix* GainScheduledController::find_reset(int from, int to) const {
  for (const auto& r : resets) {
    if (r.from == from && r.to == to) return &r;
  }
  return nullptr;
}

ValidationReport validate_certificate(const SynthesisProblem& p,
                                      const SynthesisSolution& sol,
                                      const GainScheduledController& ctrl,
                                      int density_factor) {
  ValidationReport rep;
  rep.worst_grid_margin = std::numeric_limits<double>::infinity();
  rep.worst_dense_margin = std::numeric_limits<double>::infinity();
  const auto& part = p.plant.partition;
  const auto kind = sol.certificate.factorization;
  const auto vertices = lpv::rate_vertices(p.domain);

  auto note = [&](ValidationEntry e) {
    if (e.interpolated) {
      rep.worst_dense_margin = std::min(rep.worst_dense_margin, e.margin);
    } else if (e.margin < rep.worst_grid_margin) {
      rep.worst_grid_margin = e.margin;
      std::ostringstream os;
      os << to_string(e.family) << " LMI, region " << e.region;
      if (e.region_to >= 0) os << "->" << e.region_to;
      os << ", " << point_str(e.rho) << ", margin " << e.margin;
      rep.worst_description = os.str();
    }
    rep.entries.push_back(std::move(e));
  };

  // Gains may depend on the parameter rate (through dR/dt and dM^T/dt), so
  // grid points are checked with a rate-consistent reconstruction per vertex;
  // densified points use the deployed interpolated tables and are reported.
  auto gains_at_vertex = [&](int i, const Vec& rho, const Vec& nu) {
    const auto& cert = sol.certificate.regions[static_cast<std::size_t>(i)];
    const lpv::PlantMatrices pm = p.plant.evaluate(i, rho);
    Mat dr = Mat::Zero(p.plant.dims.n, p.plant.dims.n);
    Mat ds = Mat::Zero(p.plant.dims.n, p.plant.dims.n);
    for (int k = 0; k < nu.size(); ++k) {
      dr += nu(k) * cert.dR(rho, k);
      ds += nu(k) * cert.dS(rho, k);
    }
    return reconstruct_at(pm, cert.eval_R(rho), cert.eval_S(rho), dr, ds,
                          cert.gamma, kind);
  };

  auto check_point = [&](int i, const Vec& rho, const ControllerGains* deployed,
                         bool interpolated) {
    const auto& cert = sol.certificate.regions[static_cast<std::size_t>(i)];
    const lpv::PlantMatrices pm = p.plant.evaluate(i, rho);
    {
      const Mat x = cert.eval_X(rho, kind);
      const double m = min_eigenvalue(x) / std::max(1.0, x.norm());
      note({LmiFamily::Coupling, i, -1, rho, -1, interpolated, m});
    }
    for (std::size_t v = 0; v < vertices.size(); ++v) {
      const ControllerGains k =
          deployed ? *deployed : gains_at_vertex(i, rho, vertices[v]);
      const Mat psi = analysis_lmi_value(pm, k, cert, rho, vertices[v], kind);
      const double scale = std::max(1.0, psi.norm());
      const double m = -sym_eig(psi).eigenvalues.maxCoeff() / scale;
      note({LmiFamily::RProjected, i, -1, rho, static_cast<int>(v), interpolated, m});
    }
  };

  for (int i = 0; i < p.num_regions(); ++i) {
    const auto& grid = part.grids[static_cast<std::size_t>(i)];
    for (std::size_t g = 0; g < grid.size(); ++g) {
      check_point(i, grid[g], nullptr, false);
    }
    if (density_factor > 1) {
      const auto dense = lpv::densified_grids(part, density_factor);
      for (const Vec& rho : dense[static_cast<std::size_t>(i)]) {
        bool on_grid = false;
        for (const Vec& gr : grid) {
          if ((gr - rho).norm() <= 1e-12 * (1.0 + rho.norm())) on_grid = true;
        }
        if (on_grid) continue;
        const ControllerGains k = ctrl.eval(i, rho(0));
        check_point(i, rho, &k, true);
      }
    }
  }

  // jump condition at every surface sample
  for (const auto& bm : sol.boundary) {
    const auto* reset = ctrl.find_reset(bm.from, bm.to);
    if (reset == nullptr) continue;
    const auto& ci = sol.certificate.regions[static_cast<std::size_t>(bm.from)];
    const auto& cj = sol.certificate.regions[static_cast<std::size_t>(bm.to)];
    const Mat xi = ci.eval_X(bm.rho, kind);
    const Mat xj = cj.eval_X(bm.rho, kind);
    const Eigen::Index n = reset->delta.rows();
    Mat ar = Mat::Zero(2 * n, 2 * n);
    ar.topLeftCorner(n, n).setIdentity();
    ar.bottomRightCorner(n, n) = reset->delta;
    const Mat jump = xi - ar.transpose() * xj * ar;
    const double m = min_eigenvalue(jump) / std::max(1.0, xi.norm());
    note({LmiFamily::Boundary, bm.from, bm.to, bm.rho, -1, false, m});
  }

  if (rep.entries.empty()) rep.worst_grid_margin = 0.0;
  if (!std::isfinite(rep.worst_dense_margin)) rep.worst_dense_margin = 0.0;
  return rep;
}

}  // namespace hylpv::syn
