// Shared fixtures: a small synthetic switched LPV plant cheap enough to run
// full synthesis in unit tests, plus cached AMB designs (synthesized once per
// process).
#ifndef HYLPV_TESTS_FIXTURES_HPP
#define HYLPV_TESTS_FIXTURES_HPP

#include "hylpv/ambcase.hpp"
#include "hylpv/lpvmodel.hpp"

namespace fixtures {

using hylpv::Mat;
using hylpv::Vec;
namespace lpv = hylpv::lpv;

/// Two-state open-loop-stable LPV plant on rho in [0, 1] with two overlapping
/// regions [0, 0.6], [0.4, 1]. n=2, nd=2, ne=2, ny=1, nu=1; A2/A3 hold.
inline lpv::PlantMatrices synthetic_matrices(double rho) {
  lpv::PlantMatrices pm;
  pm.A = Mat(2, 2);
  pm.A << 0.0, 1.0 + 0.2 * rho, -2.0 - rho, -1.0;
  pm.B1 = Mat(2, 2);
  pm.B1 << 0.1, 0.0, 1.0, 0.3;
  pm.B2 = Mat(2, 1);
  pm.B2 << 0.0, 1.0;
  pm.C1 = Mat(2, 2);
  pm.C1 << 1.0, 0.0, 0.0, 0.0;
  pm.D11 = Mat::Zero(2, 2);
  pm.D12 = Mat(2, 1);
  pm.D12 << 0.0, 1.0;
  pm.C2 = Mat(1, 2);
  pm.C2 << 1.0, 0.0;
  pm.D21 = Mat(1, 2);
  pm.D21 << 0.0, 0.5;
  pm.D22 = Mat::Zero(1, 1);
  return pm;
}

inline lpv::ParameterDomain synthetic_domain(double rate = 0.5) {
  return lpv::ParameterDomain::scalar(0.0, 1.0, -rate, rate);
}

inline lpv::LpvPlant synthetic_plant(const lpv::ParameterDomain& dom,
                                     int points = 5) {
  auto part = lpv::make_partition_1d(dom, {{0.0, 0.6}, {0.4, 1.0}});
  lpv::build_grids(dom, part, points);
  lpv::LpvPlant plant;
  plant.dims = {2, 2, 2, 1, 1};
  plant.partition = part;
  plant.eval = [](int, const Vec& rho) { return synthetic_matrices(rho(0)); };
  return plant;
}

inline lpv::LpvPlant synthetic_plant_single(const lpv::ParameterDomain& dom,
                                            int points = 6) {
  auto part = lpv::make_partition_1d(dom, {{0.0, 1.0}});
  lpv::build_grids(dom, part, points);
  lpv::LpvPlant plant;
  plant.dims = {2, 2, 2, 1, 1};
  plant.partition = part;
  plant.eval = [](int, const Vec& rho) { return synthetic_matrices(rho(0)); };
  return plant;
}

}  // namespace fixtures

#endif  // HYLPV_TESTS_FIXTURES_HPP
