// SPDX-License-Identifier: Apache-2.0
#ifndef HYLPV_AMBCASE_HPP
#define HYLPV_AMBCASE_HPP

#include <complex>
#include <vector>

#include "hylpv/lpvmodel.hpp"

namespace hylpv::amb {

/// Rigid-rotor AMB parameters. All geometric quantities are stored in SI;
/// the mm-unit table values are converted exactly once, in from_table_units.
struct AmbParameters {
  double pole_area = 0.0;        // A (m^2)
  double pole_width = 0.0;       // h (m)
  double nominal_gap = 0.0;      // G0 (m)
  double inertia_radial = 0.0;   // J_r (kg m^2)
  double inertia_axial = 0.0;    // J_a (kg m^2)
  double half_length = 0.0;      // l (m)
  double actuator_k = 0.0;       // k
  double coil_turns = 0.0;       // N
  double coil_resistance = 0.0;  // R (Ohm)
  double nominal_flux = 0.0;     // Phi0 (Wb)
  double permeability = 0.0;     // nu0; vacuum permeability unless overridden
  double m_eff = 0.0;            // inertia divisor of A(rho); J_r/l^2 unless overridden

  // Damping added to the imbalance rotation block. The ideal model (0) has
  // uncontrollable poles at +-j*rho, which breaks stabilizability (A1) and
  // with it strict feasibility of the synthesis LMIs; a small damping keeps
  // the model physical and the optimization well posed.
  double imbalance_damping = 1.0;

  /// Table values with areas/lengths given in mm^2/mm.
  static AmbParameters from_table_units(double area_mm2, double width_mm,
                                        double gap_mm, double j_r, double j_a,
                                        double half_length_m, double k,
                                        double n_turns, double r_coil,
                                        double phi0_wb);
  static AmbParameters from_si(double area_m2, double width_m, double gap_m,
                               double j_r, double j_a, double half_length_m,
                               double k, double n_turns, double r_coil,
                               double phi0_wb);
  /// The study's parameter set.
  static AmbParameters table_defaults();

  void validate() const;
};

struct DerivedConstants {
  double c1 = 0.0, c2 = 0.0, d1 = 0.0, d2 = 0.0;
};

/// c1 = 2 k Phi0 (1 + 2 G0 / (pi h)), c2 = 2 k Phi0^2 / (pi h),
/// d1 = 2 R G0 / (nu0 A N), d2 = 2 R Phi0 / (nu0 A N).
DerivedConstants derive_constants(const AmbParameters& p);

/// The 8x8 rigid-rotor state matrix, affine in rotor speed rho. State order:
/// [l*theta, l*psi, l*theta', l*psi', phi_theta, phi_psi, xd1, xd2].
Mat amb_A(const AmbParameters& p, const DerivedConstants& c, double rho);

/// The unweighted 8-state plant matrices at rho (z = [displacements; u]).
lpv::PlantMatrices amb_rigid_matrices(const AmbParameters& p,
                                      const DerivedConstants& c, double rho);

lpv::LpvPlant amb_plant(const AmbParameters& p, const DerivedConstants& c,
                        const lpv::Partition& partition);

/// First-order scalar weighting filter replicated on two channels:
/// per channel xdot = a x + b in, out = c x + d in.
struct WeightFilter {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
  std::complex<double> tf(std::complex<double> s) const { return c * b / (s - a) + d; }
};

struct WeightSet {
  WeightFilter we;  // 30 (s + 8) / (s + 0.001)
  WeightFilter wu;  // 0.01 (s + 100) / (s + 100000)
  double wn = 0.0;  // 0.001 static
};

WeightSet weight_filters();

/// Augmented 12-state generalized plant: z = [We * displacement; Wu * u],
/// y = displacement + runout states + Wn * sensor-noise channel, and
/// w = [d_tilde; n1; n2], so D21 = [0  Wn*I] has full row rank (A2).
lpv::LpvPlant weighted_interconnection(const AmbParameters& p,
                                       const DerivedConstants& c,
                                       const lpv::Partition& partition);

/// Frequency response of the weighted interconnection's w -> z channel with
/// the loop open (u = 0) at frozen rho; used for cross-checks.
Eigen::MatrixXcd frozen_transfer_wz(const lpv::LpvPlant& plant, int region,
                                    double rho, double omega);

struct SpeedSegment {
  double t_start = 0.0;
  double t_end = 0.0;  // +inf for the trailing hold
  enum class Kind { Hold, Ramp } kind = Kind::Hold;
  double value = 0.0;  // value at t_start
  double slope = 0.0;  // rad/s^2 for ramps
};

struct SpeedProfile {
  std::vector<SpeedSegment> segments;

  double eval(double t) const;   // throws std::domain_error for t < 0
  double rate(double t) const;   // right-sided slope
  void validate(double lo = 300.0, double hi = 2000.0) const;
};

/// rho(t) = 650 on [0, 0.5), 650 + 50 (t - 0.5) on [0.5, 13.5),
/// 1300 on [13.5, 16), 1300 - 50 (t - 16) on [16, 22), then 1000.
SpeedProfile speed_profile_paper();

/// The two-state imbalance (automatic balancing) model embedded in plant
/// states 7-8: xdot = [0 -rho; rho 0] x + [1; 0] d.
struct ImbalanceModel {
  Mat A(double rho) const;
  Vec B() const;
};

/// Paper partitions: two regions [300,1200],[1100,2000] (10-point grids) and
/// four regions [300,800],[700,1200],[1100,1600],[1500,2000] (6-point grids).
lpv::Partition amb_partition_two(const lpv::ParameterDomain& dom, int points = 10);
lpv::Partition amb_partition_four(const lpv::ParameterDomain& dom, int points = 6);
lpv::Partition amb_partition_single(const lpv::ParameterDomain& dom, int points = 10);

constexpr double kAmbSpeedLo = 300.0;
constexpr double kAmbSpeedHi = 2000.0;
constexpr double kAmbDisturbance = 1.3e-4;

}  // namespace hylpv::amb

#endif  // HYLPV_AMBCASE_HPP
