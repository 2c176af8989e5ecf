#pragma once

#include <Eigen/Core>
#include <complex>

#include "lf/solvers.hpp"

namespace lf {

using CMat = Eigen::MatrixXcd;

/// Polar-coordinate solution over all nodes (index 0 = slack).
struct PolarSolution {
  Vec Vm;  // voltage magnitudes, p.u., size J+1
  Vec Va;  // voltage angles, rad, size J+1, Va[0] = 0
  Vec P, Q, l;  // per-branch sending-end flows and squared currents, size J
};

/// Backward-forward sweep (power-summation variant). The forward sweep is the
/// BFM forward-sweep retraction; stopping uses max power mismatch and the
/// voltage-change criterion.
SolveReport bfs_solve(const RadialNetwork& net, const TopoOrder& order, const SolverConfig& cfg);

/// Dense complex bus admittance matrix, (J+1)x(J+1), tap on the upstream side.
CMat ybus_build(const RadialNetwork& net);

struct NewtonRaphsonResult {
  SolveReport report;
  PolarSolution polar;
};

/// Polar full-Newton power flow over the PQ nodes.
NewtonRaphsonResult newton_raphson(const RadialNetwork& net, InitKind init,
                                   const SolverConfig& cfg);

/// Voltage-angle recovery for a radial BFM state, root-to-leaf sweep.
/// Returns angles for all nodes (index 0 = slack, angle 0).
Vec recover_angles(const RadialNetwork& net, const QePoint& u);

struct CompareMetrics {
  Vec node_abs;  // |sqrt(v_a) - sqrt(v_b)| per node, size J
  double max;
  double mean;
};

/// Node-wise voltage-magnitude comparison of two squared-voltage vectors.
CompareMetrics solution_compare(const Vec& v_a, const Vec& v_b);

/// Branch flows (P, Q, l) recomputed from a polar solution, matching the BFM
/// sending-end conventions.
void polar_branch_flows(const RadialNetwork& net, PolarSolution& sol);

}  // namespace lf
