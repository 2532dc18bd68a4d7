// SPDX-License-Identifier: Apache-2.0
#include "hylpv/sdpcore.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace hylpv::sdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::Index coord_count(const VarDecl& v) {
  switch (v.kind) {
    case VarKind::Scalar: return 1;
    case VarKind::Symmetric: return svec_dim(v.rows);
    case VarKind::Matrix: return v.rows * v.cols;
  }
  return 0;
}

// One coordinate of a matrix variable maps to one or two entries (i, j, w)
// of the matrix it parameterizes. Symmetric variables use svec coordinates
// (lower triangle column-major, off-diagonals scaled by sqrt(2)).
struct CoordEntry {
  int a = 0, b = 0;
  double w = 0.0;
};
struct CoordExpansion {
  CoordEntry e[2];
  int n = 0;
};

std::vector<CoordExpansion> make_expansions(const VarDecl& v) {
  std::vector<CoordExpansion> out;
  if (v.kind == VarKind::Symmetric) {
    const double inv_s2 = 1.0 / std::sqrt(2.0);
    for (int j = 0; j < v.rows; ++j) {
      for (int i = j; i < v.rows; ++i) {
        CoordExpansion c;
        if (i == j) {
          c.e[0] = {i, j, 1.0};
          c.n = 1;
        } else {
          c.e[0] = {i, j, inv_s2};
          c.e[1] = {j, i, inv_s2};
          c.n = 2;
        }
        out.push_back(c);
      }
    }
  } else if (v.kind == VarKind::Matrix) {
    for (int b = 0; b < v.cols; ++b) {
      for (int a = 0; a < v.rows; ++a) {
        CoordExpansion c;
        c.e[0] = {a, b, 1.0};
        c.n = 1;
        out.push_back(c);
      }
    }
  } else {
    out.push_back(CoordExpansion{});  // unused for scalars
  }
  return out;
}

Mat unflatten(const VarDecl& v, const Eigen::Ref<const Vec>& y) {
  switch (v.kind) {
    case VarKind::Scalar: {
      Mat m(1, 1);
      m(0, 0) = y(0);
      return m;
    }
    case VarKind::Symmetric:
      return smat(y).dense();
    case VarKind::Matrix: {
      Mat m(v.rows, v.cols);
      Eigen::Index k = 0;
      for (Eigen::Index b = 0; b < v.cols; ++b)
        for (Eigen::Index a = 0; a < v.rows; ++a) m(a, b) = y(k++);
      return m;
    }
  }
  return {};
}

Vec flatten(const VarDecl& v, const Mat& m) {
  switch (v.kind) {
    case VarKind::Scalar: {
      Vec y(1);
      y(0) = m(0, 0);
      return y;
    }
    case VarKind::Symmetric:
      return svec(SymMat::from_dense(m));
    case VarKind::Matrix: {
      Vec y(v.rows * v.cols);
      Eigen::Index k = 0;
      for (Eigen::Index b = 0; b < v.cols; ++b)
        for (Eigen::Index a = 0; a < v.rows; ++a) y(k++) = m(a, b);
      return y;
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Internal solver representation: sense and per-variable scaling folded into
// the term data, trivially-satisfied constant blocks dropped.
// ---------------------------------------------------------------------------

struct ITerm {
  int var = -1;
  Mat L, R;
};
struct ISTerm {
  int var = -1;
  Mat P;
};
struct IBlock {
  Eigen::Index dim = 0;
  Mat C;
  std::vector<ITerm> terms;
  std::vector<ISTerm> sterms;
  int source = -1;  // constraint index in the user problem
};

struct Internal {
  const SdpProblem* p = nullptr;
  std::vector<Eigen::Index> offset, size;
  std::vector<std::vector<CoordExpansion>> expans;
  Eigen::Index m = 0;
  std::vector<IBlock> blocks;
  Vec c;           // objective in scaled coordinates
  Vec var_scale;   // original value = var_scale[v] * internal value
  double theta = 0.0;
  int infeasible_constant_block = -1;  // constant block with negative min-eig
};

bool term_is_dead(const MatTerm& t) {
  return t.left.norm() == 0.0 || t.right.norm() == 0.0;
}

Internal build_internal(const SdpProblem& p) {
  p.validate();
  Internal in;
  in.p = &p;
  const std::size_t nv = p.vars.size();
  in.offset.resize(nv);
  in.size.resize(nv);
  in.expans.resize(nv);
  Eigen::Index off = 0;
  for (std::size_t v = 0; v < nv; ++v) {
    in.offset[v] = off;
    in.size[v] = coord_count(p.vars[v]);
    in.expans[v] = make_expansions(p.vars[v]);
    off += in.size[v];
  }
  in.m = off;

  // Per-variable scale from the largest coefficient magnitude it sees.
  std::vector<double> coef_scale(nv, 0.0);
  for (const auto& con : p.constraints) {
    for (const auto& t : con.mat_terms) {
      if (term_is_dead(t)) continue;
      coef_scale[t.var] = std::max(coef_scale[t.var], 2.0 * t.left.norm() * t.right.norm());
    }
    for (const auto& t : con.scalar_terms) {
      coef_scale[t.var] = std::max(coef_scale[t.var], t.coeff.norm());
    }
  }
  in.var_scale = Vec::Ones(in.m);  // per-coordinate copy of per-var scale
  Vec vscale(nv);
  for (std::size_t v = 0; v < nv; ++v) {
    vscale(v) = coef_scale[v] > 0.0 ? 1.0 / coef_scale[v] : 1.0;
    in.var_scale.segment(in.offset[v], in.size[v]).setConstant(vscale(v));
  }

  in.c = Vec::Zero(in.m);
  for (const auto& [v, coef] : p.objective) {
    in.c(in.offset[v]) += coef * vscale(v);
  }

  for (std::size_t j = 0; j < p.constraints.size(); ++j) {
    const AffineLmi& con = p.constraints[j];
    const double sgn = con.sense == Sense::PosSemidef ? 1.0 : -1.0;
    IBlock b;
    b.dim = con.dim;
    b.C = sgn * 0.5 * (con.constant + con.constant.transpose());
    b.C -= con.margin * Mat::Identity(con.dim, con.dim);
    b.source = static_cast<int>(j);
    for (const auto& t : con.mat_terms) {
      if (term_is_dead(t)) continue;
      b.terms.push_back({t.var, sgn * vscale(t.var) * t.left, t.right});
    }
    for (const auto& t : con.scalar_terms) {
      if (t.coeff.norm() == 0.0) continue;
      Mat sym = 0.5 * (t.coeff + t.coeff.transpose());
      b.sterms.push_back({t.var, sgn * vscale(t.var) * sym});
    }
    if (b.terms.empty() && b.sterms.empty()) {
      // Constant block: either trivially satisfied or infeasible outright.
      const double lmin = min_eigenvalue(b.C);
      if (lmin < 0.0 && in.infeasible_constant_block < 0) {
        in.infeasible_constant_block = static_cast<int>(j);
      }
      continue;  // carries no barrier information either way
    }
    in.theta += static_cast<double>(b.dim);
    in.blocks.push_back(std::move(b));
  }
  return in;
}

Mat assemble_internal(const IBlock& b, const Vec& y, const Internal& in) {
  Mat g = b.C;
  for (const auto& t : b.terms) {
    const VarDecl& vd = in.p->vars[t.var];
    Mat v = unflatten(vd, y.segment(in.offset[t.var], in.size[t.var]));
    Mat lvr = t.L * v * t.R.transpose();
    g += lvr + lvr.transpose();
  }
  for (const auto& t : b.sterms) {
    g += y(in.offset[t.var]) * t.P;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Barrier path following
// ---------------------------------------------------------------------------

struct BarrierState {
  Vec y;
  std::vector<Mat> G;          // current block values
  std::vector<Eigen::LLT<Mat>> llt;  // factors of G
  double logdet = 0.0;
};

bool refresh(BarrierState& st, const Internal& in) {
  st.G.resize(in.blocks.size());
  st.llt.resize(in.blocks.size());
  st.logdet = 0.0;
  for (std::size_t j = 0; j < in.blocks.size(); ++j) {
    st.G[j] = assemble_internal(in.blocks[j], st.y, in);
    st.llt[j].compute(st.G[j]);
    if (st.llt[j].info() != Eigen::Success) return false;
    double ld = 0.0;
    const Mat& L = st.llt[j].matrixLLT();
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
      if (!(L(i, i) > 0.0)) return false;
      ld += std::log(L(i, i));
    }
    st.logdet += 2.0 * ld;
  }
  return true;
}

struct PathResult {
  Vec y;
  bool interior = false;
  int newton_steps = 0;
  double mu_final = 0.0;
  double objective = 0.0;
  bool hit_iter_cap = false;
  bool ill_conditioned = false;
  std::string message;
};

// Minimizes c^T y subject to the internal blocks being PSD, by log-barrier
// path following. early_stop(obj) can end the run prematurely (phase 1 uses
// it to stop once strictly feasible).
template <typename StopFn>
PathResult path_follow(const Internal& in, const Vec& c, BarrierState st,
                       const SolveOptions& opts, int newton_budget,
                       double tol_abs_floor, StopFn early_stop) {
  PathResult res;
  const Eigen::Index m = in.m;
  // Implicit box |y_k| < Ybox keeps the analytic center well defined even
  // when the LMI feasible set is unbounded (coordinates are coefficient
  // scaled, so this is a very loose bound).
  const double Ybox = 1e8;
  const double theta = in.theta + 2.0 * static_cast<double>(m);

  auto box_logbarrier = [&](const Vec& y) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      s += std::log(Ybox - y(k)) + std::log(Ybox + y(k));
    }
    return s;
  };

  double obj = c.dot(st.y);
  double mu = std::max((1.0 + std::abs(obj)) / std::max(theta, 1.0), 1e-12);
  const double sigma = 20.0;
  const double center_tol = 0.05;

  Vec grad(m), dy(m);
  Mat H(m, m);
  std::vector<Mat> dG(in.blocks.size());

  int steps = 0;
  bool stopped_early = false;
  while (true) {
    // ---- center at current mu ----
    for (int inner = 0; inner < 60; ++inner) {
      if (steps >= newton_budget) {
        res.hit_iter_cap = true;
        break;
      }
      if (early_stop(c.dot(st.y))) {
        stopped_early = true;
        break;
      }
      grad = c / mu;
      H.setZero();
      for (std::size_t j = 0; j < in.blocks.size(); ++j) {
        const IBlock& b = in.blocks[j];
        const Eigen::Index d = b.dim;
        Mat W = st.llt[j].solve(Mat::Identity(d, d));

        // gradient
        for (const auto& t : b.terms) {
          Mat Y = t.L.transpose() * W * t.R;
          const auto& exp = in.expans[t.var];
          const Eigen::Index o = in.offset[t.var];
          for (Eigen::Index k = 0; k < in.size[t.var]; ++k) {
            double g = 0.0;
            for (int e = 0; e < exp[k].n; ++e) {
              g += exp[k].e[e].w * Y(exp[k].e[e].a, exp[k].e[e].b);
            }
            grad(o + k) -= 2.0 * g;
          }
        }
        std::vector<Mat> WPW(b.sterms.size());
        for (std::size_t u = 0; u < b.sterms.size(); ++u) {
          grad(in.offset[b.sterms[u].var]) -= (W * b.sterms[u].P).trace();
          WPW[u] = W * b.sterms[u].P * W;
        }

        // Hessian: matrix-term x matrix-term via compressed products
        for (std::size_t s = 0; s < b.terms.size(); ++s) {
          for (std::size_t t2 = s; t2 < b.terms.size(); ++t2) {
            const ITerm& ts = b.terms[s];
            const ITerm& tt = b.terms[t2];
            Mat P = ts.R.transpose() * W * tt.L;
            Mat Q = ts.R.transpose() * W * tt.R;
            Mat U = ts.L.transpose() * W * tt.L;
            Mat T = ts.L.transpose() * W * tt.R;
            const auto& es = in.expans[ts.var];
            const auto& et = in.expans[tt.var];
            const Eigen::Index os = in.offset[ts.var];
            const Eigen::Index ot = in.offset[tt.var];
            for (Eigen::Index k1 = 0; k1 < in.size[ts.var]; ++k1) {
              const Eigen::Index lo =
                  (s == t2 && ts.var == tt.var) ? k1 : Eigen::Index(0);
              for (Eigen::Index k2 = lo; k2 < in.size[tt.var]; ++k2) {
                double h = 0.0;
                for (int e1 = 0; e1 < es[k1].n; ++e1) {
                  const auto& E1 = es[k1].e[e1];
                  for (int e2 = 0; e2 < et[k2].n; ++e2) {
                    const auto& E2 = et[k2].e[e2];
                    h += E1.w * E2.w *
                         (T(E1.a, E2.b) * P(E1.b, E2.a) +
                          U(E1.a, E2.a) * Q(E1.b, E2.b));
                  }
                }
                h *= 2.0;
                const Eigen::Index g1 = os + k1, g2 = ot + k2;
                H(g1, g2) += h;
                if (g1 != g2) H(g2, g1) += h;
              }
            }
          }
        }
        // scalar x scalar and scalar x matrix-term
        for (std::size_t u = 0; u < b.sterms.size(); ++u) {
          const Eigen::Index gu = in.offset[b.sterms[u].var];
          for (std::size_t v = u; v < b.sterms.size(); ++v) {
            const double h = (WPW[u] * b.sterms[v].P).trace();
            const Eigen::Index gv = in.offset[b.sterms[v].var];
            H(gu, gv) += h;
            if (gu != gv) H(gv, gu) += h;
          }
          for (const auto& t : b.terms) {
            Mat Z = t.L.transpose() * WPW[u] * t.R;
            const auto& exp = in.expans[t.var];
            const Eigen::Index o = in.offset[t.var];
            for (Eigen::Index k = 0; k < in.size[t.var]; ++k) {
              double h = 0.0;
              for (int e = 0; e < exp[k].n; ++e) {
                h += exp[k].e[e].w * Z(exp[k].e[e].a, exp[k].e[e].b);
              }
              h *= 2.0;
              H(o + k, gu) += h;
              if (o + k != gu) H(gu, o + k) += h;
            }
          }
        }
      }

      for (Eigen::Index k = 0; k < m; ++k) {
        const double lo = Ybox + st.y(k), hi = Ybox - st.y(k);
        grad(k) += 1.0 / hi - 1.0 / lo;
        H(k, k) += 1.0 / (lo * lo) + 1.0 / (hi * hi);
      }

      const double ridge = 1e-13 * std::max(H.diagonal().maxCoeff(), 1.0);
      H.diagonal().array() += ridge;
      Eigen::LLT<Mat> hllt(H);
      if (hllt.info() != Eigen::Success) {
        H.diagonal().array() += 1e6 * ridge;
        hllt.compute(H);
        if (hllt.info() != Eigen::Success) {
          res.ill_conditioned = true;
          res.message = "Newton system not positive definite";
          break;
        }
      }
      dy = -hllt.solve(grad);
      const double lambda2 = -grad.dot(dy);
      if (!std::isfinite(lambda2)) {
        res.ill_conditioned = true;
        res.message = "non-finite Newton decrement";
        break;
      }
      if (lambda2 <= 2.0 * center_tol) break;  // centered

      // precompute the step's effect on each block (affine)
      for (std::size_t j = 0; j < in.blocks.size(); ++j) {
        const IBlock& b = in.blocks[j];
        Mat d = Mat::Zero(b.dim, b.dim);
        for (const auto& t : b.terms) {
          Mat v = unflatten(in.p->vars[t.var],
                            dy.segment(in.offset[t.var], in.size[t.var]));
          Mat lvr = t.L * v * t.R.transpose();
          d += lvr + lvr.transpose();
        }
        for (const auto& t : b.sterms) d += dy(in.offset[t.var]) * t.P;
        dG[j] = std::move(d);
      }

      const double f0 = c.dot(st.y) / mu - st.logdet - box_logbarrier(st.y);
      const double slope = grad.dot(dy);
      double alpha = 1.0;
      for (Eigen::Index k = 0; k < m; ++k) {  // stay strictly inside the box
        if (dy(k) > 0.0) alpha = std::min(alpha, 0.99 * (Ybox - st.y(k)) / dy(k));
        if (dy(k) < 0.0) alpha = std::min(alpha, 0.99 * (Ybox + st.y(k)) / -dy(k));
      }
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        bool pd = true;
        double logdet_trial = 0.0;
        std::vector<Eigen::LLT<Mat>> llt_trial(in.blocks.size());
        std::vector<Mat> g_trial(in.blocks.size());
        for (std::size_t j = 0; j < in.blocks.size() && pd; ++j) {
          g_trial[j] = st.G[j] + alpha * dG[j];
          llt_trial[j].compute(g_trial[j]);
          if (llt_trial[j].info() != Eigen::Success) {
            pd = false;
            break;
          }
          const Mat& L = llt_trial[j].matrixLLT();
          for (Eigen::Index i = 0; i < L.rows(); ++i) {
            if (!(L(i, i) > 0.0)) {
              pd = false;
              break;
            }
            logdet_trial += 2.0 * std::log(L(i, i));
          }
        }
        if (pd) {
          const double f_trial = c.dot(st.y + alpha * dy) / mu - logdet_trial -
                                 box_logbarrier(st.y + alpha * dy);
          if (f_trial <= f0 + 1e-4 * alpha * slope) {
            st.y += alpha * dy;
            st.G = std::move(g_trial);
            st.llt = std::move(llt_trial);
            st.logdet = logdet_trial;
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
      }
      ++steps;
      if (!accepted) {
        res.ill_conditioned = true;
        res.message = "line search failed to make progress";
        break;
      }
    }

    obj = c.dot(st.y);
    if (stopped_early || early_stop(obj)) break;
    if (res.hit_iter_cap || res.ill_conditioned) break;
    const double gap_target =
        std::max(opts.tol * (1.0 + std::abs(obj)), tol_abs_floor);
    if (2.0 * mu * theta <= gap_target) break;
    mu = std::max(mu / sigma, gap_target / (8.0 * theta));
  }

  res.y = st.y;
  res.interior = true;
  res.newton_steps = steps;
  res.mu_final = mu;
  res.objective = obj;
  return res;
}

std::vector<Mat> extract_values(const Internal& in, const Vec& y) {
  std::vector<Mat> vals(in.p->vars.size());
  for (std::size_t v = 0; v < in.p->vars.size(); ++v) {
    vals[v] = in.var_scale(in.offset[v]) *
              unflatten(in.p->vars[v], y.segment(in.offset[v], in.size[v]));
  }
  return vals;
}

}  // namespace

// ---------------------------------------------------------------------------

int SdpProblem::add_scalar(std::string name) {
  vars.push_back({VarKind::Scalar, 1, 1, std::move(name)});
  return static_cast<int>(vars.size()) - 1;
}

int SdpProblem::add_symmetric(Eigen::Index dim, std::string name) {
  vars.push_back({VarKind::Symmetric, dim, dim, std::move(name)});
  return static_cast<int>(vars.size()) - 1;
}

int SdpProblem::add_matrix(Eigen::Index rows, Eigen::Index cols, std::string name) {
  vars.push_back({VarKind::Matrix, rows, cols, std::move(name)});
  return static_cast<int>(vars.size()) - 1;
}

AffineLmi& SdpProblem::add_constraint(Eigen::Index dim, Sense sense,
                                      double margin, std::string label) {
  AffineLmi lmi;
  lmi.dim = dim;
  lmi.constant = Mat::Zero(dim, dim);
  lmi.sense = sense;
  lmi.margin = margin;
  lmi.label = std::move(label);
  constraints.push_back(std::move(lmi));
  return constraints.back();
}

void SdpProblem::validate() const {
  const int nv = static_cast<int>(vars.size());
  for (const auto& v : vars) {
    if (v.kind == VarKind::Symmetric && v.rows != v.cols) {
      throw std::invalid_argument("symmetric variable '" + v.name + "' not square");
    }
    if (v.rows < 1 || v.cols < 1) {
      throw std::invalid_argument("variable '" + v.name + "' has empty shape");
    }
  }
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    const auto& con = constraints[j];
    const std::string where = "constraint " + std::to_string(j) +
                              (con.label.empty() ? "" : " (" + con.label + ")");
    if (con.constant.rows() != con.dim || con.constant.cols() != con.dim) {
      throw std::invalid_argument(where + ": constant block not dim x dim");
    }
    if (!con.constant.allFinite()) {
      throw std::invalid_argument(where + ": constant block not finite");
    }
    if (con.margin < 0.0) throw std::invalid_argument(where + ": negative margin");
    for (const auto& t : con.mat_terms) {
      if (t.var < 0 || t.var >= nv) {
        throw std::invalid_argument(where + ": term references unknown variable");
      }
      const VarDecl& v = vars[t.var];
      if (v.kind == VarKind::Scalar) {
        throw std::invalid_argument(where + ": matrix term on scalar variable");
      }
      if (t.left.rows() != con.dim || t.right.rows() != con.dim ||
          t.left.cols() != v.rows || t.right.cols() != v.cols) {
        throw std::invalid_argument(where + ": term coefficient shape mismatch");
      }
      if (!t.left.allFinite() || !t.right.allFinite()) {
        throw std::invalid_argument(where + ": term coefficients not finite");
      }
    }
    for (const auto& t : con.scalar_terms) {
      if (t.var < 0 || t.var >= nv) {
        throw std::invalid_argument(where + ": term references unknown variable");
      }
      if (vars[t.var].kind != VarKind::Scalar) {
        throw std::invalid_argument(where + ": scalar term on matrix variable");
      }
      if (t.coeff.rows() != con.dim || t.coeff.cols() != con.dim) {
        throw std::invalid_argument(where + ": scalar coefficient shape mismatch");
      }
      if (!t.coeff.allFinite()) {
        throw std::invalid_argument(where + ": scalar coefficient not finite");
      }
    }
  }
  for (const auto& [v, coef] : objective) {
    if (v < 0 || v >= nv || vars[v].kind != VarKind::Scalar) {
      throw std::invalid_argument("objective references a non-scalar variable");
    }
    if (!std::isfinite(coef)) throw std::invalid_argument("objective coefficient not finite");
  }
}

Mat assemble(const AffineLmi& lmi, const std::vector<Mat>& assignment) {
  Mat g = 0.5 * (lmi.constant + lmi.constant.transpose());
  for (const auto& t : lmi.mat_terms) {
    if (t.var < 0 || static_cast<std::size_t>(t.var) >= assignment.size()) {
      throw std::invalid_argument("assemble: assignment missing variable " +
                                  std::to_string(t.var));
    }
    Mat lvr = t.left * assignment[t.var] * t.right.transpose();
    g += lvr + lvr.transpose();
  }
  for (const auto& t : lmi.scalar_terms) {
    if (t.var < 0 || static_cast<std::size_t>(t.var) >= assignment.size()) {
      throw std::invalid_argument("assemble: assignment missing variable " +
                                  std::to_string(t.var));
    }
    g += assignment[t.var](0, 0) * 0.5 * (t.coeff + t.coeff.transpose());
  }
  return g;
}

std::vector<double> check_feasible(const SdpProblem& p,
                                   const std::vector<Mat>& assignment) {
  std::vector<double> margins;
  margins.reserve(p.constraints.size());
  for (const auto& con : p.constraints) {
    Mat g = assemble(con, assignment);
    if (con.sense == Sense::NegSemidef) g = -g;
    margins.push_back(min_eigenvalue(g));
  }
  return margins;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::MaxIter: return "max-iter";
    case SolveStatus::IllConditioned: return "ill-conditioned";
  }
  return "?";
}

SdpSolution solve(const SdpProblem& p, const SolveOptions& opts) {
  Internal in = build_internal(p);
  SdpSolution sol;

  auto finish = [&](const Vec& y, SolveStatus status, int steps, double gap,
                    std::string msg) {
    sol.status = status;
    sol.values = extract_values(in, y);
    sol.objective = 0.0;
    for (const auto& [v, coef] : p.objective) sol.objective += coef * sol.values[v](0, 0);
    sol.newton_iters = steps;
    sol.gap = gap;
    sol.message = std::move(msg);
    auto margins = check_feasible(p, sol.values);
    sol.worst_margin = kInf;
    for (std::size_t j = 0; j < margins.size(); ++j) {
      if (margins[j] < sol.worst_margin) {
        sol.worst_margin = margins[j];
        sol.worst_constraint = static_cast<int>(j);
      }
    }
    return sol;
  };

  if (in.infeasible_constant_block >= 0) {
    Vec y0 = Vec::Zero(in.m);
    auto s = finish(y0, SolveStatus::Infeasible, 0, kInf,
                    "constant constraint block is not positive semidefinite");
    s.worst_constraint = in.infeasible_constant_block;
    sol = s;
    return sol;
  }
  if (in.blocks.empty()) {
    // Nothing constrains the variables; the zero point is as good as any
    // unless the objective is nonzero (then the problem is unbounded).
    Vec y0 = Vec::Zero(in.m);
    const bool unbounded = in.c.norm() > 0.0;
    return finish(y0, unbounded ? SolveStatus::IllConditioned : SolveStatus::Optimal,
                  0, 0.0, unbounded ? "objective unbounded (no constraints)" : "");
  }

  // If the origin is already comfortably interior, phase 1 is unnecessary.
  bool origin_interior = true;
  for (const auto& b : in.blocks) {
    if (min_eigenvalue(b.C) <= 1e-9 * std::max(1.0, b.C.norm())) {
      origin_interior = false;
      break;
    }
  }
  if (origin_interior) {
    if (p.objective.empty()) {
      return finish(Vec::Zero(in.m), SolveStatus::Optimal, 0, 0.0,
                    "feasibility problem (origin interior)");
    }
    BarrierState st0;
    st0.y = Vec::Zero(in.m);
    if (refresh(st0, in)) {
      PathResult r = path_follow(in, in.c, std::move(st0), opts, opts.max_iter,
                                 1e-14, [](double) { return false; });
      const double gap = 2.0 * r.mu_final * in.theta;
      if (r.ill_conditioned) {
        return finish(r.y, SolveStatus::IllConditioned, r.newton_steps, gap,
                      "phase 2: " + r.message);
      }
      if (r.hit_iter_cap) {
        return finish(r.y, SolveStatus::MaxIter, r.newton_steps, gap,
                      "Newton budget exhausted; best iterate returned");
      }
      return finish(r.y, SolveStatus::Optimal, r.newton_steps, gap, "");
    }
  }

  // ---- Phase 1: min t with blocks + t * sigma_j I ----
  Internal ph1 = in;
  Vec sigma(ph1.blocks.size());
  for (std::size_t j = 0; j < ph1.blocks.size(); ++j) {
    const IBlock& b = ph1.blocks[j];
    sigma(j) = std::max(1.0, b.C.norm() / std::sqrt(static_cast<double>(b.dim)));
  }
  // Append the auxiliary variable t at the end of the coordinate space.
  SdpProblem p1_vars = p;  // shallow helper: we only need the extra VarDecl
  const int t_var = p1_vars.add_scalar("__feas_t");
  ph1.p = &p1_vars;
  ph1.offset.push_back(ph1.m);
  ph1.size.push_back(1);
  ph1.expans.push_back(make_expansions(p1_vars.vars.back()));
  ph1.m += 1;
  Vec vs = ph1.var_scale;
  ph1.var_scale = Vec::Ones(ph1.m);
  ph1.var_scale.head(in.m) = vs;
  for (std::size_t j = 0; j < ph1.blocks.size(); ++j) {
    ph1.blocks[j].sterms.push_back(
        {t_var, sigma(j) * Mat::Identity(ph1.blocks[j].dim, ph1.blocks[j].dim)});
  }
  Vec c1 = Vec::Zero(ph1.m);
  c1(ph1.m - 1) = 1.0;

  BarrierState st1;
  st1.y = Vec::Zero(ph1.m);
  double t0 = 0.0;
  for (std::size_t j = 0; j < in.blocks.size(); ++j) {
    t0 = std::max(t0, -min_eigenvalue(in.blocks[j].C) / sigma(j));
  }
  st1.y(ph1.m - 1) = t0 + 1.0;
  if (!refresh(st1, ph1)) {
    sol.status = SolveStatus::IllConditioned;
    sol.message = "phase 1 initialization failed";
    sol.values = extract_values(in, Vec::Zero(in.m));
    return sol;
  }

  const double feas_target = -opts.feas_margin;
  PathResult r1 = path_follow(
      ph1, c1, std::move(st1), opts, opts.max_iter, 1e-12,
      [&](double obj) { return obj < feas_target; });

  if (r1.ill_conditioned) {
    auto s = finish(r1.y.head(in.m), SolveStatus::IllConditioned,
                    r1.newton_steps, kInf, "phase 1: " + r1.message);
    return s;
  }
  if (r1.objective >= feas_target) {
    if (p.objective.empty() && r1.objective < 0.0) {
      // Strictly feasible, just shy of the interiority target: good enough
      // for a pure feasibility problem.
      return finish(r1.y.head(in.m), SolveStatus::Optimal, r1.newton_steps, 0.0,
                    "feasibility problem (uniform margin " +
                        std::to_string(-r1.objective) + ")");
    }
    // Could not reach strict feasibility. Distinguish genuine infeasibility
    // (certified-ish: the barrier converged with t* clearly positive) from an
    // exhausted budget.
    const SolveStatus status = r1.hit_iter_cap && r1.objective < 0.0
                                   ? SolveStatus::MaxIter
                                   : SolveStatus::Infeasible;
    auto margins = check_feasible(p, extract_values(in, r1.y.head(in.m)));
    auto s = finish(r1.y.head(in.m), status, r1.newton_steps, kInf,
                    "phase 1 terminated with t = " + std::to_string(r1.objective));
    (void)margins;
    return s;
  }

  if (p.objective.empty()) {
    return finish(r1.y.head(in.m), SolveStatus::Optimal, r1.newton_steps, 0.0,
                  "feasibility problem");
  }

  // ---- Phase 2: minimize the real objective from the interior point ----
  BarrierState st2;
  st2.y = r1.y.head(in.m);
  if (!refresh(st2, in)) {
    return finish(st2.y, SolveStatus::IllConditioned, r1.newton_steps, kInf,
                  "phase 2 start not interior");
  }
  const int budget = std::max(10, opts.max_iter - r1.newton_steps);
  PathResult r2 = path_follow(in, in.c, std::move(st2), opts, budget, 1e-14,
                              [](double) { return false; });
  const int total = r1.newton_steps + r2.newton_steps;
  const double gap = 2.0 * r2.mu_final * in.theta;
  if (r2.ill_conditioned) {
    return finish(r2.y, SolveStatus::IllConditioned, total, gap,
                  "phase 2: " + r2.message);
  }
  if (r2.hit_iter_cap) {
    return finish(r2.y, SolveStatus::MaxIter, total, gap,
                  "Newton budget exhausted; best iterate returned");
  }
  return finish(r2.y, SolveStatus::Optimal, total, gap, "");
}

bool feasible_with_fixed(const SdpProblem& p, int var, double value,
                         const SolveOptions& opts) {
  SdpProblem q = p;
  q.objective.clear();
  // Pin the variable by folding value*coeff into constants and dropping terms.
  for (auto& con : q.constraints) {
    std::vector<ScalarTerm> kept;
    for (auto& t : con.scalar_terms) {
      if (t.var == var) {
        con.constant += value * 0.5 * (t.coeff + t.coeff.transpose());
      } else {
        kept.push_back(t);
      }
    }
    con.scalar_terms = std::move(kept);
  }
  SdpSolution s = solve(q, opts);
  return s.status == SolveStatus::Optimal;
}

SdpSolution solve_bisection(const SdpProblem& p, int gamma_var, double lo,
                            double hi, double rel_tol, const SolveOptions& opts) {
  if (!(hi > lo)) throw std::invalid_argument("solve_bisection: need hi > lo");
  if (!feasible_with_fixed(p, gamma_var, hi, opts)) {
    SdpSolution s;
    s.status = SolveStatus::Infeasible;
    s.message = "bisection: upper bracket infeasible";
    return s;
  }
  double a = lo, b = hi;
  while (b - a > rel_tol * (1.0 + std::abs(b))) {
    const double mid = 0.5 * (a + b);
    if (feasible_with_fixed(p, gamma_var, mid, opts)) {
      b = mid;
    } else {
      a = mid;
    }
  }
  SdpSolution s;
  s.status = SolveStatus::Optimal;
  s.objective = b;
  s.values.resize(p.vars.size());
  Mat g(1, 1);
  g(0, 0) = b;
  s.values[gamma_var] = g;
  s.message = "bisection bracket [" + std::to_string(a) + ", " + std::to_string(b) + "]";
  s.gap = b - a;
  return s;
}

// ---------------------------------------------------------------------------
// Text dump / load
// ---------------------------------------------------------------------------

namespace {

void write_mat(std::ostream& os, const Mat& m) {
  os << m.rows() << " " << m.cols() << "\n";
  os.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      os << m(i, j) << (j + 1 == m.cols() ? "" : " ");
    }
    os << "\n";
  }
}

Mat read_mat(std::istream& is) {
  Eigen::Index r = 0, c = 0;
  if (!(is >> r >> c)) throw std::runtime_error("sdp load: expected matrix header");
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      if (!(is >> m(i, j))) throw std::runtime_error("sdp load: truncated matrix");
    }
  }
  return m;
}

}  // namespace

void dump(const SdpProblem& p, std::ostream& os) {
  os << "hylpv-sdp v1\n";
  os << "vars " << p.vars.size() << "\n";
  for (const auto& v : p.vars) {
    switch (v.kind) {
      case VarKind::Scalar: os << "scalar"; break;
      case VarKind::Symmetric: os << "symmetric " << v.rows; break;
      case VarKind::Matrix: os << "matrix " << v.rows << " " << v.cols; break;
    }
    os << " " << (v.name.empty() ? "_" : v.name) << "\n";
  }
  os << "objective " << p.objective.size();
  os.precision(17);
  for (const auto& [v, coef] : p.objective) os << " " << v << " " << coef;
  os << "\n";
  os << "constraints " << p.constraints.size() << "\n";
  for (const auto& con : p.constraints) {
    os << "constraint " << con.dim << " "
       << (con.sense == Sense::PosSemidef ? "geq" : "leq") << " " << con.margin
       << " " << (con.label.empty() ? "_" : con.label) << "\n";
    os << "const\n";
    write_mat(os, con.constant);
    for (const auto& t : con.mat_terms) {
      os << "matterm " << t.var << "\n";
      write_mat(os, t.left);
      write_mat(os, t.right);
    }
    for (const auto& t : con.scalar_terms) {
      os << "scalarterm " << t.var << "\n";
      write_mat(os, t.coeff);
    }
    os << "end\n";
  }
}

SdpProblem load(std::istream& is) {
  std::string tok;
  if (!(is >> tok) || tok != "hylpv-sdp") throw std::runtime_error("sdp load: bad magic");
  is >> tok;  // version
  SdpProblem p;
  std::size_t nv = 0;
  is >> tok >> nv;
  if (tok != "vars") throw std::runtime_error("sdp load: expected vars");
  for (std::size_t i = 0; i < nv; ++i) {
    is >> tok;
    VarDecl v;
    if (tok == "scalar") {
      v.kind = VarKind::Scalar;
    } else if (tok == "symmetric") {
      v.kind = VarKind::Symmetric;
      is >> v.rows;
      v.cols = v.rows;
    } else if (tok == "matrix") {
      v.kind = VarKind::Matrix;
      is >> v.rows >> v.cols;
    } else {
      throw std::runtime_error("sdp load: unknown variable kind '" + tok + "'");
    }
    is >> v.name;
    if (v.name == "_") v.name.clear();
    p.vars.push_back(v);
  }
  std::size_t nobj = 0;
  is >> tok >> nobj;
  if (tok != "objective") throw std::runtime_error("sdp load: expected objective");
  for (std::size_t i = 0; i < nobj; ++i) {
    int v = 0;
    double coef = 0.0;
    is >> v >> coef;
    p.objective.emplace_back(v, coef);
  }
  std::size_t nc = 0;
  is >> tok >> nc;
  if (tok != "constraints") throw std::runtime_error("sdp load: expected constraints");
  for (std::size_t i = 0; i < nc; ++i) {
    is >> tok;
    if (tok != "constraint") throw std::runtime_error("sdp load: expected constraint");
    AffineLmi con;
    std::string sense;
    is >> con.dim >> sense >> con.margin >> con.label;
    if (con.label == "_") con.label.clear();
    con.sense = sense == "geq" ? Sense::PosSemidef : Sense::NegSemidef;
    is >> tok;
    if (tok != "const") throw std::runtime_error("sdp load: expected const block");
    con.constant = read_mat(is);
    while (is >> tok && tok != "end") {
      if (tok == "matterm") {
        MatTerm t;
        is >> t.var;
        t.left = read_mat(is);
        t.right = read_mat(is);
        con.mat_terms.push_back(std::move(t));
      } else if (tok == "scalarterm") {
        ScalarTerm t;
        is >> t.var;
        t.coeff = read_mat(is);
        con.scalar_terms.push_back(std::move(t));
      } else {
        throw std::runtime_error("sdp load: unknown token '" + tok + "'");
      }
    }
    p.constraints.push_back(std::move(con));
  }
  p.validate();
  return p;
}

}  // namespace hylpv::sdp
