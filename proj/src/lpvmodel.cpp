// SPDX-License-Identifier: Apache-2.0
#include "hylpv/lpvmodel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

namespace hylpv::lpv {

void ParameterDomain::validate() const {
  if (box.empty()) throw ModelError("parameter domain is empty");
  if (rate.size() != box.size()) {
    throw ModelError("rate box dimension differs from parameter box dimension");
  }
  for (std::size_t k = 0; k < box.size(); ++k) {
    if (!(box[k].lo < box[k].hi)) {
      throw ModelError("parameter box coordinate " + std::to_string(k) +
                       " has lo >= hi");
    }
    if (!(rate[k].lo <= 0.0 && 0.0 <= rate[k].hi)) {
      throw ModelError("rate box coordinate " + std::to_string(k) +
                       " does not contain the origin");
    }
  }
}

ParameterDomain ParameterDomain::scalar(double lo, double hi, double rate_lo,
                                        double rate_hi) {
  ParameterDomain d;
  d.box = {{lo, hi}};
  d.rate = {{rate_lo, rate_hi}};
  d.validate();
  return d;
}

std::vector<Vec> rate_vertices(const ParameterDomain& d) {
  const int s = d.dimension();
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(1) << s);
  for (std::size_t mask = 0; mask < (std::size_t(1) << s); ++mask) {
    Vec v(s);
    for (int k = 0; k < s; ++k) {
      v(k) = (mask >> k) & 1 ? d.rate[k].hi : d.rate[k].lo;
    }
    out.push_back(v);
  }
  return out;
}

bool Partition::contains(int i, const Vec& rho, double tol) const {
  const auto& b = subsets.at(static_cast<std::size_t>(i));
  for (std::size_t k = 0; k < b.size(); ++k) {
    if (!b[k].contains(rho(static_cast<Eigen::Index>(k)), tol)) return false;
  }
  return true;
}

int Partition::region_of(const Vec& rho, double tol) const {
  for (int i = 0; i < num_regions(); ++i) {
    if (contains(i, rho, tol)) return i;
  }
  return -1;
}

bool Partition::adjacent(int i, int j) const {
  return find_surface(i, j) != nullptr;
}

const Surface* Partition::find_surface(int from, int to) const {
  for (const auto& s : surfaces) {
    if (s.from == from && s.to == to) return &s;
  }
  return nullptr;
}

Partition make_partition_1d(const ParameterDomain& dom,
                            const std::vector<Interval>& boxes) {
  dom.validate();
  if (dom.dimension() != 1) {
    throw ModelError("make_partition_1d requires one scheduling parameter");
  }
  if (boxes.empty()) throw ModelError("partition needs at least one subset");

  std::vector<Interval> sorted = boxes;
  std::sort(sorted.begin(), sorted.end(), [](const Interval& a, const Interval& b) {
    return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi);
  });

  const Interval& p = dom.box[0];
  const double tol = 1e-12 * p.width();
  if (std::abs(sorted.front().lo - p.lo) > tol ||
      std::abs(sorted.back().hi - p.hi) > tol) {
    throw ModelError("partition subsets do not cover the parameter box endpoints");
  }
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!(sorted[i].lo < sorted[i].hi)) {
      throw ModelError("subset " + std::to_string(i) + " is degenerate");
    }
    if (sorted[i].lo < p.lo - tol || sorted[i].hi > p.hi + tol) {
      throw ModelError("subset " + std::to_string(i) + " leaves the parameter box");
    }
  }
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    if (!(sorted[i + 1].lo < sorted[i].hi)) {
      throw ModelError("adjacent subsets " + std::to_string(i) + "," +
                       std::to_string(i + 1) + " do not overlap with interior");
    }
    if (!(sorted[i + 1].hi > sorted[i].hi)) {
      throw ModelError("subset " + std::to_string(i + 1) +
                       " is contained in its predecessor");
    }
  }
  for (std::size_t i = 0; i + 2 < sorted.size(); ++i) {
    if (sorted[i + 2].lo < sorted[i].hi) {
      throw ModelError("three subsets overlap around subset " + std::to_string(i + 1));
    }
  }

  Partition part;
  for (const auto& b : sorted) part.subsets.push_back({b});
  for (int i = 0; i + 1 < part.num_regions(); ++i) {
    // Exiting region i upward happens at its own upper bound (inside i+1);
    // the reverse transition fires at region i+1's lower bound.
    part.surfaces.push_back({i, i + 1, 0, sorted[static_cast<std::size_t>(i)].hi});
    part.surfaces.push_back({i + 1, i, 0, sorted[static_cast<std::size_t>(i) + 1].lo});
  }
  return part;
}

namespace {

std::vector<double> linspace(const Interval& iv, int g) {
  std::vector<double> xs(static_cast<std::size_t>(g));
  for (int k = 0; k < g; ++k) {
    xs[static_cast<std::size_t>(k)] =
        (k == 0) ? iv.lo
                 : (k == g - 1 ? iv.hi : iv.lo + iv.width() * k / (g - 1));
  }
  return xs;
}

std::vector<Vec> tensor_grid(const std::vector<Interval>& box, int g) {
  const int s = static_cast<int>(box.size());
  std::vector<std::vector<double>> axes;
  for (const auto& iv : box) axes.push_back(linspace(iv, g));
  std::vector<Vec> pts;
  std::vector<int> idx(static_cast<std::size_t>(s), 0);
  while (true) {
    Vec v(s);
    for (int k = 0; k < s; ++k) {
      v(k) = axes[static_cast<std::size_t>(k)][static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
    }
    pts.push_back(v);
    int k = 0;
    for (; k < s; ++k) {
      if (++idx[static_cast<std::size_t>(k)] < g) break;
      idx[static_cast<std::size_t>(k)] = 0;
    }
    if (k == s) break;
  }
  return pts;
}

}  // namespace

void build_grids(const ParameterDomain& dom, Partition& part, int points_per_subset) {
  if (points_per_subset < 2) {
    throw std::invalid_argument("build_grids: need at least 2 points per subset");
  }
  (void)dom;
  part.grids.clear();
  for (std::size_t i = 0; i < part.subsets.size(); ++i) {
    for (const auto& iv : part.subsets[i]) {
      if (!(iv.width() > 0.0)) {
        throw ModelError("subset " + std::to_string(i) + " is degenerate");
      }
    }
    part.grids.push_back(tensor_grid(part.subsets[i], points_per_subset));
  }
}

std::vector<std::vector<Vec>> densified_grids(const Partition& part, int factor) {
  if (factor < 1) throw std::invalid_argument("densified_grids: factor >= 1");
  std::vector<std::vector<Vec>> out;
  for (std::size_t i = 0; i < part.subsets.size(); ++i) {
    const double axis_pts = std::pow(static_cast<double>(part.grids[i].size()),
                                     1.0 / static_cast<double>(part.subsets[i].size()));
    const int g0 = std::max(2, static_cast<int>(std::llround(axis_pts)));
    const int g = (g0 - 1) * factor + 1;
    out.push_back(tensor_grid(part.subsets[i], g));
  }
  return out;
}

std::vector<Vec> surface_points(const Partition& part, int i, int j) {
  const Surface* s = part.find_surface(i, j);
  if (s == nullptr) {
    throw ModelError("regions " + std::to_string(i) + " and " + std::to_string(j) +
                     " are not adjacent (no directed surface)");
  }
  if (part.subsets[static_cast<std::size_t>(i)].size() != 1) {
    throw ModelError("surface sampling is implemented for one scheduling parameter");
  }
  Vec v(1);
  v(0) = s->value;
  return {v};
}

double BasisFunction::eval(const Vec& rho) const {
  double v = 1.0;
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    for (int e = 0; e < exponents[k]; ++e) v *= rho(static_cast<Eigen::Index>(k));
  }
  return v;
}

double BasisFunction::deriv(const Vec& rho, int k) const {
  const std::size_t ku = static_cast<std::size_t>(k);
  if (ku >= exponents.size() || exponents[ku] == 0) return 0.0;
  double v = static_cast<double>(exponents[ku]);
  for (std::size_t l = 0; l < exponents.size(); ++l) {
    const int e = (l == ku) ? exponents[l] - 1 : exponents[l];
    for (int q = 0; q < e; ++q) v *= rho(static_cast<Eigen::Index>(l));
  }
  return v;
}

std::string BasisFunction::name() const {
  std::ostringstream os;
  bool any = false;
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    if (exponents[k] == 0) continue;
    if (any) os << "*";
    os << "rho" << (exponents.size() > 1 ? std::to_string(k + 1) : "");
    if (exponents[k] > 1) os << "^" << exponents[k];
    any = true;
  }
  if (!any) os << "1";
  return os.str();
}

BasisSet BasisSet::constant(int s) {
  BasisSet b;
  b.funcs.push_back({std::vector<int>(static_cast<std::size_t>(s), 0)});
  return b;
}

BasisSet BasisSet::affine(int s) {
  BasisSet b = constant(s);
  for (int k = 0; k < s; ++k) {
    std::vector<int> e(static_cast<std::size_t>(s), 0);
    e[static_cast<std::size_t>(k)] = 1;
    b.funcs.push_back({e});
  }
  return b;
}

PlantMatrices LpvPlant::evaluate(int region, const Vec& rho) const {
  if (region < 0 || region >= partition.num_regions()) {
    throw ModelError("plant evaluation: region index " + std::to_string(region) +
                     " out of range");
  }
  double span = 0.0;
  for (const auto& iv : partition.subsets[static_cast<std::size_t>(region)]) {
    span = std::max(span, iv.width());
  }
  if (!partition.contains(region, rho, 1e-9 * span)) {
    std::ostringstream os;
    os << "plant evaluation: rho = " << rho.transpose() << " outside subset "
       << region;
    throw ModelError(os.str());
  }
  PlantMatrices pm = eval(region, rho);
  const auto& d = dims;
  auto expect = [&](const Mat& m, Eigen::Index r, Eigen::Index c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      throw ModelError(std::string("plant evaluation: ") + name +
                       " has inconsistent dimensions");
    }
    if (!m.allFinite()) {
      throw ModelError(std::string("plant evaluation: ") + name + " not finite");
    }
  };
  expect(pm.A, d.n, d.n, "A");
  expect(pm.B1, d.n, d.nd, "B1");
  expect(pm.B2, d.n, d.nu, "B2");
  expect(pm.C1, d.ne, d.n, "C1");
  expect(pm.D11, d.ne, d.nd, "D11");
  expect(pm.D12, d.ne, d.nu, "D12");
  expect(pm.C2, d.ny, d.n, "C2");
  expect(pm.D21, d.ny, d.nd, "D21");
  expect(pm.D22, d.ny, d.nu, "D22");
  return pm;
}

namespace {

double min_singular_value_c(const Eigen::MatrixXcd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues().size() > 0 ? svd.singularValues().minCoeff() : 0.0;
}

}  // namespace

void check_assumptions(const LpvPlant& plant, double rank_tol, bool check_pbh) {
  if (plant.partition.grids.empty()) {
    throw ModelError("check_assumptions: partition has no grids");
  }
  for (int i = 0; i < plant.partition.num_regions(); ++i) {
    const auto& grid = plant.partition.grids[static_cast<std::size_t>(i)];
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const PlantMatrices pm = plant.evaluate(i, grid[g]);
      const std::string at =
          " at region " + std::to_string(i) + ", grid point " + std::to_string(g);
      if (pm.D11.norm() != 0.0) throw ModelError("A3 violated: D11 nonzero" + at);
      if (pm.D22.norm() != 0.0) throw ModelError("A3 violated: D22 nonzero" + at);
      {
        Eigen::JacobiSVD<Mat> svd(pm.D12);
        const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
        if (smax == 0.0 || svd.singularValues().minCoeff() <= rank_tol * smax ||
            svd.singularValues().size() < pm.D12.cols()) {
          throw ModelError("A2 violated: D12 rank deficient" + at);
        }
      }
      {
        Eigen::JacobiSVD<Mat> svd(pm.D21.transpose().eval());
        const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
        if (smax == 0.0 || svd.singularValues().minCoeff() <= rank_tol * smax ||
            svd.singularValues().size() < pm.D21.rows()) {
          throw ModelError("A2 violated: D21 rank deficient" + at);
        }
      }
      if (check_pbh) {
        const double scale = std::max(1.0, pm.A.norm());
        Eigen::EigenSolver<Mat> es(pm.A);
        for (Eigen::Index e = 0; e < es.eigenvalues().size(); ++e) {
          const std::complex<double> lam = es.eigenvalues()(e);
          if (lam.real() < -1e-9 * scale) continue;
          Eigen::MatrixXcd pbh_s(plant.dims.n, plant.dims.n + plant.dims.nu);
          pbh_s << pm.A.cast<std::complex<double>>() -
                       lam * Eigen::MatrixXcd::Identity(plant.dims.n, plant.dims.n),
              pm.B2.cast<std::complex<double>>();
          if (min_singular_value_c(pbh_s) <= 1e-8 * scale) {
            throw ModelError("A1 violated: not stabilizable" + at);
          }
          Eigen::MatrixXcd pbh_d(plant.dims.n + plant.dims.ny, plant.dims.n);
          pbh_d << pm.A.cast<std::complex<double>>() -
                       lam * Eigen::MatrixXcd::Identity(plant.dims.n, plant.dims.n),
              pm.C2.cast<std::complex<double>>();
          if (min_singular_value_c(pbh_d) <= 1e-8 * scale) {
            throw ModelError("A1 violated: not detectable" + at);
          }
        }
      }
    }
  }
}

Factors factorize(const Mat& r, const Mat& s, FactorizationKind kind) {
  const Eigen::Index n = r.rows();
  const Mat irs = Mat::Identity(n, n) - r * s;
  Factors f;
  switch (kind) {
    case FactorizationKind::IdentityM:
      f.M = Mat::Identity(n, n);
      f.N = irs.transpose();
      break;
    case FactorizationKind::IdentityN:
      f.N = Mat::Identity(n, n);
      f.M = irs;
      break;
    case FactorizationKind::BalancedSvd: {
      Eigen::JacobiSVD<Mat> svd(irs, Eigen::ComputeFullU | Eigen::ComputeFullV);
      Vec sq = svd.singularValues().cwiseSqrt();
      f.M = svd.matrixU() * sq.asDiagonal();
      f.N = svd.matrixV() * sq.asDiagonal();
      break;
    }
  }
  return f;
}

Mat RegionCertificate::eval_R(const Vec& rho) const {
  Mat r = Mat::Zero(r_coef[0].rows(), r_coef[0].cols());
  for (int j = 0; j < r_basis.size(); ++j) {
    r += r_basis.funcs[static_cast<std::size_t>(j)].eval(rho) *
         r_coef[static_cast<std::size_t>(j)];
  }
  return r;
}

Mat RegionCertificate::eval_S(const Vec& rho) const {
  Mat s = Mat::Zero(s_coef[0].rows(), s_coef[0].cols());
  for (int j = 0; j < s_basis.size(); ++j) {
    s += s_basis.funcs[static_cast<std::size_t>(j)].eval(rho) *
         s_coef[static_cast<std::size_t>(j)];
  }
  return s;
}

Mat RegionCertificate::dR(const Vec& rho, int k) const {
  Mat r = Mat::Zero(r_coef[0].rows(), r_coef[0].cols());
  for (int j = 0; j < r_basis.size(); ++j) {
    r += r_basis.funcs[static_cast<std::size_t>(j)].deriv(rho, k) *
         r_coef[static_cast<std::size_t>(j)];
  }
  return r;
}

Mat RegionCertificate::dS(const Vec& rho, int k) const {
  Mat s = Mat::Zero(s_coef[0].rows(), s_coef[0].cols());
  for (int j = 0; j < s_basis.size(); ++j) {
    s += s_basis.funcs[static_cast<std::size_t>(j)].deriv(rho, k) *
         s_coef[static_cast<std::size_t>(j)];
  }
  return s;
}

Mat RegionCertificate::eval_X(const Vec& rho, FactorizationKind kind) const {
  const Mat r = eval_R(rho);
  const Mat s = eval_S(rho);
  const Eigen::Index n = r.rows();
  Factors f = factorize(r, s, kind);
  // X Z1 = Z2 with Z1 = [R I; M^T 0], Z2 = [I S; 0 N^T] fixes
  // X = [S N; N^T  -N^T R M^{-T}].
  Mat x22 = -f.N.transpose() * r *
            solve_linear(Mat(f.M.transpose()), Mat(Mat::Identity(n, n)));
  x22 = 0.5 * (x22 + x22.transpose());
  Mat x(2 * n, 2 * n);
  x << s, f.N, f.N.transpose(), x22;
  return x;
}

Mat RegionCertificate::dX(const Vec& rho, int k, FactorizationKind kind) const {
  const Eigen::Index n = r_coef[0].rows();
  const Mat r = eval_R(rho);
  const Mat s = eval_S(rho);
  const Mat dr = dR(rho, k);
  const Mat ds = dS(rho, k);
  Mat x(2 * n, 2 * n);
  switch (kind) {
    case FactorizationKind::IdentityM: {
      // N = I - S R, X22 = R S R - R
      Mat dn = -(ds * r + s * dr);
      Mat dx22 = dr * s * r + r * ds * r + r * s * dr - dr;
      x << ds, dn, dn.transpose(), 0.5 * (dx22 + dx22.transpose());
      return x;
    }
    case FactorizationKind::IdentityN: {
      // X22 = -R W with W = (I - S R)^{-1}
      Mat w = solve_linear(Mat(Mat::Identity(n, n) - s * r),
                           Mat(Mat::Identity(n, n)));
      Mat dw = w * (ds * r + s * dr) * w;
      Mat dx22 = -(dr * w + r * dw);
      x << ds, Mat::Zero(n, n), Mat::Zero(n, n),
          0.5 * (dx22 + dx22.transpose());
      return x;
    }
    case FactorizationKind::BalancedSvd: {
      const double h = 1e-6 * std::max(1.0, std::abs(rho(k)));
      Vec rp = rho, rm = rho;
      rp(k) += h;
      rm(k) -= h;
      return (eval_X(rp, kind) - eval_X(rm, kind)) / (2.0 * h);
    }
  }
  return x;
}

double LyapunovCertificate::V(int region, const Vec& rho, const Vec& x_cl) const {
  const Mat x = regions.at(static_cast<std::size_t>(region)).eval_X(rho, factorization);
  return x_cl.dot(x * x_cl);
}

}  // namespace hylpv::lpv
