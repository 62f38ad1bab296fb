// Small model generators and comparison helpers shared by the tests.
#pragma once

#include "sso/fixtures.hpp"
#include "sso/sso.hpp"

#include "models.hpp"

#include <gtest/gtest.h>

namespace sso::test {

inline double rel_diff(double a, double b, double floor = 0.0) {
  const double m = std::max({std::abs(a), std::abs(b), floor});
  return m == 0.0 ? 0.0 : std::abs(a - b) / m;
}

inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
}

/// Cantilever of one beam along X, fixed at node 0, tip load on node 1.
inline StructuralModel cantilever(double L, double E, double Iz, const Values6& tip_load) {
  ModelBuilder b;
  b.add_node(0, 0, 0, 0).add_node(1, L, 0, 0);
  b.add_beamcol({1, 0, 1, E, E / 2.6, 2.0 * Iz, Iz, 3.0 * Iz, 1e-2});
  b.add_support(0, fixtures::kFixed);
  b.add_nodal_load(1, tip_load);
  return b.finalize();
}

}  // namespace sso::test
