// SPDX-License-Identifier: Apache-2.0
#include "hylpv/ambcase.hpp"

#include <cmath>
#include <stdexcept>

namespace hylpv::amb {

namespace {
constexpr double kVacuumPermeability = 4.0e-7 * M_PI;
}

AmbParameters AmbParameters::from_si(double area_m2, double width_m, double gap_m,
                                     double j_r, double j_a, double half_length_m,
                                     double k, double n_turns, double r_coil,
                                     double phi0_wb) {
  AmbParameters p;
  p.pole_area = area_m2;
  p.pole_width = width_m;
  p.nominal_gap = gap_m;
  p.inertia_radial = j_r;
  p.inertia_axial = j_a;
  p.half_length = half_length_m;
  p.actuator_k = k;
  p.coil_turns = n_turns;
  p.coil_resistance = r_coil;
  p.nominal_flux = phi0_wb;
  p.permeability = kVacuumPermeability;
  p.m_eff = j_r / (half_length_m * half_length_m);
  p.imbalance_damping = 1.0;
  p.validate();
  return p;
}

AmbParameters AmbParameters::from_table_units(double area_mm2, double width_mm,
                                              double gap_mm, double j_r, double j_a,
                                              double half_length_m, double k,
                                              double n_turns, double r_coil,
                                              double phi0_wb) {
  return from_si(area_mm2 * 1e-6, width_mm * 1e-3, gap_mm * 1e-3, j_r, j_a,
                 half_length_m, k, n_turns, r_coil, phi0_wb);
}

AmbParameters AmbParameters::table_defaults() {
  return from_table_units(1531.79, 40.00, 0.55, 0.333, 0.0136, 0.13,
                          4.6755576e8, 400.0, 14.6, 2.09e-4);
}

void AmbParameters::validate() const {
  const double vals[] = {pole_area,   pole_width,      nominal_gap, inertia_radial,
                         inertia_axial, half_length,   actuator_k,  coil_turns,
                         coil_resistance, nominal_flux, permeability, m_eff};
  for (double v : vals) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("AmbParameters: all parameters must be positive");
    }
  }
  if (!(imbalance_damping >= 0.0) || !std::isfinite(imbalance_damping)) {
    throw std::invalid_argument("AmbParameters: imbalance damping must be >= 0");
  }
}

DerivedConstants derive_constants(const AmbParameters& p) {
  DerivedConstants c;
  const double pih = M_PI * p.pole_width;
  c.c1 = 2.0 * p.actuator_k * p.nominal_flux * (1.0 + 2.0 * p.nominal_gap / pih);
  c.c2 = 2.0 * p.actuator_k * p.nominal_flux * p.nominal_flux / pih;
  const double den = p.permeability * p.pole_area * p.coil_turns;
  c.d1 = 2.0 * p.coil_resistance * p.nominal_gap / den;
  c.d2 = 2.0 * p.coil_resistance * p.nominal_flux / den;
  return c;
}

Mat amb_A(const AmbParameters& p, const DerivedConstants& c, double rho) {
  Mat a = Mat::Zero(8, 8);
  const double gyro = rho * p.inertia_axial / p.inertia_radial;
  a(0, 2) = 1.0;
  a(1, 3) = 1.0;
  a(2, 0) = -4.0 * c.c2 / p.m_eff;
  a(2, 3) = -gyro;
  a(2, 4) = 2.0 * c.c1 / p.m_eff;
  a(3, 1) = -4.0 * c.c2 / p.m_eff;
  a(3, 2) = gyro;
  a(3, 5) = 2.0 * c.c1 / p.m_eff;
  a(4, 0) = 2.0 * c.d2 / p.coil_turns;
  a(4, 4) = -c.d1 / p.coil_turns;
  a(5, 1) = 2.0 * c.d2 / p.coil_turns;
  a(5, 5) = -c.d1 / p.coil_turns;
  a(6, 6) = -p.imbalance_damping;
  a(7, 7) = -p.imbalance_damping;
  a(6, 7) = -rho;
  a(7, 6) = rho;
  return a;
}

lpv::PlantMatrices amb_rigid_matrices(const AmbParameters& p,
                                      const DerivedConstants& c, double rho) {
  lpv::PlantMatrices pm;
  pm.A = amb_A(p, c, rho);
  pm.B1 = Mat::Zero(8, 1);
  pm.B1(6, 0) = 1.0;
  pm.B2 = Mat::Zero(8, 2);
  pm.B2(4, 0) = 1.0 / p.coil_turns;
  pm.B2(5, 1) = 1.0 / p.coil_turns;
  pm.C1 = Mat::Zero(4, 8);
  pm.C1(0, 0) = 1.0;
  pm.C1(1, 1) = 1.0;
  pm.D11 = Mat::Zero(4, 1);
  pm.D12 = Mat::Zero(4, 2);
  pm.D12(2, 0) = 1.0;
  pm.D12(3, 1) = 1.0;
  pm.C2 = Mat::Zero(2, 8);
  pm.C2(0, 0) = 1.0;
  pm.C2(1, 1) = 1.0;
  pm.C2(0, 6) = 1.0;
  pm.C2(1, 7) = 1.0;
  pm.D21 = Mat::Zero(2, 1);
  pm.D22 = Mat::Zero(2, 2);
  return pm;
}

lpv::LpvPlant amb_plant(const AmbParameters& p, const DerivedConstants& c,
                        const lpv::Partition& partition) {
  lpv::LpvPlant plant;
  plant.dims = {8, 1, 4, 2, 2};
  plant.partition = partition;
  plant.eval = [p, c](int, const Vec& rho) {
    return amb_rigid_matrices(p, c, rho(0));
  };
  return plant;
}

WeightSet weight_filters() {
  WeightSet w;
  // We(s) = 30 (s + 8) / (s + 0.001) = 30 + 239.97 / (s + 0.001), balanced.
  w.we.a = -0.001;
  w.we.d = 30.0;
  w.we.b = std::sqrt(30.0 * 8.0 - 30.0 * 0.001);
  w.we.c = w.we.b;
  // Wu(s) = 0.01 (s + 100) / (s + 100000) = 0.01 - 999 / (s + 100000).
  w.wu.a = -100000.0;
  w.wu.d = 0.01;
  w.wu.b = std::sqrt(999.0);
  w.wu.c = -w.wu.b;
  w.wn = 0.001;
  return w;
}

lpv::LpvPlant weighted_interconnection(const AmbParameters& p,
                                       const DerivedConstants& c,
                                       const lpv::Partition& partition) {
  const WeightSet w = weight_filters();
  lpv::LpvPlant plant;
  plant.dims = {12, 3, 4, 2, 2};
  plant.partition = partition;
  plant.eval = [p, c, w](int, const Vec& rhov) {
    const double rho = rhov(0);
    lpv::PlantMatrices pm;
    // state: [amb(8); x_We(2); x_Wu(2)]
    pm.A = Mat::Zero(12, 12);
    pm.A.topLeftCorner(8, 8) = amb_A(p, c, rho);
    pm.A(8, 0) = w.we.b;
    pm.A(9, 1) = w.we.b;
    pm.A(8, 8) = w.we.a;
    pm.A(9, 9) = w.we.a;
    pm.A(10, 10) = w.wu.a;
    pm.A(11, 11) = w.wu.a;
    pm.B1 = Mat::Zero(12, 3);
    pm.B1(6, 0) = 1.0;  // d_tilde drives the imbalance model
    pm.B2 = Mat::Zero(12, 2);
    pm.B2(4, 0) = 1.0 / p.coil_turns;
    pm.B2(5, 1) = 1.0 / p.coil_turns;
    pm.B2(10, 0) = w.wu.b;
    pm.B2(11, 1) = w.wu.b;
    pm.C1 = Mat::Zero(4, 12);
    pm.C1(0, 0) = w.we.d;
    pm.C1(1, 1) = w.we.d;
    pm.C1(0, 8) = w.we.c;
    pm.C1(1, 9) = w.we.c;
    pm.C1(2, 10) = w.wu.c;
    pm.C1(3, 11) = w.wu.c;
    pm.D11 = Mat::Zero(4, 3);
    pm.D12 = Mat::Zero(4, 2);
    pm.D12(2, 0) = w.wu.d;
    pm.D12(3, 1) = w.wu.d;
    pm.C2 = Mat::Zero(2, 12);
    pm.C2(0, 0) = 1.0;
    pm.C2(1, 1) = 1.0;
    pm.C2(0, 6) = 1.0;  // synchronous runout corrupts the measurement
    pm.C2(1, 7) = 1.0;
    pm.D21 = Mat::Zero(2, 3);
    pm.D21(0, 1) = w.wn;
    pm.D21(1, 2) = w.wn;
    pm.D22 = Mat::Zero(2, 2);
    return pm;
  };
  return plant;
}

Eigen::MatrixXcd frozen_transfer_wz(const lpv::LpvPlant& plant, int region,
                                    double rho, double omega) {
  Vec rv(1);
  rv(0) = rho;
  const lpv::PlantMatrices pm = plant.evaluate(region, rv);
  const Eigen::Index n = pm.A.rows();
  Eigen::MatrixXcd jw =
      std::complex<double>(0.0, omega) * Eigen::MatrixXcd::Identity(n, n) -
      pm.A.cast<std::complex<double>>();
  return pm.C1.cast<std::complex<double>>() *
             jw.lu().solve(pm.B1.cast<std::complex<double>>()) +
         pm.D11.cast<std::complex<double>>();
}

double SpeedProfile::eval(double t) const {
  if (t < 0.0) throw std::domain_error("speed profile: t < 0");
  for (const auto& s : segments) {
    if (t >= s.t_start && (t < s.t_end || !std::isfinite(s.t_end))) {
      return s.kind == SpeedSegment::Kind::Hold ? s.value
                                                : s.value + s.slope * (t - s.t_start);
    }
  }
  const auto& last = segments.back();
  return last.kind == SpeedSegment::Kind::Hold
             ? last.value
             : last.value + last.slope * (t - last.t_start);
}

double SpeedProfile::rate(double t) const {
  if (t < 0.0) throw std::domain_error("speed profile: t < 0");
  for (const auto& s : segments) {
    if (t >= s.t_start && (t < s.t_end || !std::isfinite(s.t_end))) {
      return s.kind == SpeedSegment::Kind::Hold ? 0.0 : s.slope;
    }
  }
  return 0.0;
}

void SpeedProfile::validate(double lo, double hi) const {
  if (segments.empty()) throw std::invalid_argument("speed profile: empty");
  double t = segments.front().t_start;
  if (t != 0.0) throw std::invalid_argument("speed profile: must start at t = 0");
  double v = segments.front().value;
  for (const auto& s : segments) {
    if (s.t_start != t) throw std::invalid_argument("speed profile: time gap");
    const double v_start =
        s.kind == SpeedSegment::Kind::Hold ? s.value : s.value;
    if (std::abs(v_start - v) > 1e-9 * std::max(1.0, std::abs(v))) {
      throw std::invalid_argument("speed profile: discontinuous value");
    }
    const double t_next = std::isfinite(s.t_end) ? s.t_end : s.t_start;
    const double v_end = s.kind == SpeedSegment::Kind::Hold
                             ? s.value
                             : s.value + s.slope * (t_next - s.t_start);
    if (v_start < lo || v_start > hi || v_end < lo || v_end > hi) {
      throw std::invalid_argument("speed profile: leaves the speed range");
    }
    t = t_next;
    v = v_end;
    if (!std::isfinite(s.t_end)) break;
  }
}

SpeedProfile speed_profile_paper() {
  SpeedProfile p;
  const double inf = std::numeric_limits<double>::infinity();
  using K = SpeedSegment::Kind;
  p.segments = {
      {0.0, 0.5, K::Hold, 650.0, 0.0},
      {0.5, 13.5, K::Ramp, 650.0, 50.0},
      {13.5, 16.0, K::Hold, 1300.0, 0.0},
      {16.0, 22.0, K::Ramp, 1300.0, -50.0},
      {22.0, inf, K::Hold, 1000.0, 0.0},
  };
  return p;
}

Mat ImbalanceModel::A(double rho) const {
  Mat a(2, 2);
  a << 0.0, -rho, rho, 0.0;
  return a;
}

Vec ImbalanceModel::B() const {
  Vec b(2);
  b << 1.0, 0.0;
  return b;
}

lpv::Partition amb_partition_two(const lpv::ParameterDomain& dom, int points) {
  auto part = lpv::make_partition_1d(dom, {{300.0, 1200.0}, {1100.0, 2000.0}});
  lpv::build_grids(dom, part, points);
  return part;
}

lpv::Partition amb_partition_four(const lpv::ParameterDomain& dom, int points) {
  auto part = lpv::make_partition_1d(
      dom, {{300.0, 800.0}, {700.0, 1200.0}, {1100.0, 1600.0}, {1500.0, 2000.0}});
  lpv::build_grids(dom, part, points);
  return part;
}

lpv::Partition amb_partition_single(const lpv::ParameterDomain& dom, int points) {
  auto part = lpv::make_partition_1d(dom, {{kAmbSpeedLo, kAmbSpeedHi}});
  lpv::build_grids(dom, part, points);
  return part;
}

}  // namespace hylpv::amb
