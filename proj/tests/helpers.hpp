#pragma once

#include <random>
#include <string>

#include "lf/baselines.hpp"
#include "lf/solvers.hpp"

namespace lfh {

inline std::string data_path(const std::string& name) {
  return std::string(LF_DATA_DIR) + "/" + name;
}

/// 2-bus reference network: one line r = x = 0.1, load 0.1 + j0.05.
inline lf::RadialNetwork twobus() {
  lf::RadialNetwork net;
  net.node_count = 1;
  net.v0 = 1.0;
  net.lines = {{0, 0.1, 0.1, 1.0}};
  net.g_shunt = {0.0};
  net.b_shunt = {0.0};
  net.p_inj = {-0.1};
  net.q_inj = {-0.05};
  return net;
}

/// Exact 2-bus squared current via bisection on l = (0.1+0.1l)^2 + (0.05+0.1l)^2.
inline double twobus_exact_l() {
  auto g = [](double l) {
    const double P = 0.1 + 0.1 * l, Q = 0.05 + 0.1 * l;
    return P * P + Q * Q - l;
  };
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Converged QE solution of `net` (high-accuracy PAN reference).
inline lf::Vec solve_exact_qe(const lf::RadialNetwork& net) {
  lf::SolverConfig cfg;
  cfg.eps_grad = 1e-12;
  cfg.eps_volt = 1e-12;
  return lf::solve_pan(lf::Manifold::QE, net, cfg).final_point;
}

/// Random tangent vector at an on-manifold point (seeded, projected gaussian).
inline lf::Vec random_tangent(const lf::ProjectionContext& ctx, int dim, std::mt19937& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  lf::Vec y(dim);
  for (int i = 0; i < dim; ++i) y[i] = gauss(rng);
  return ctx.project(y);
}

/// Random near-feasible on-manifold point: converged solution nudged by a
/// small random tangent and retracted.
inline lf::Vec near_feasible_qe(const lf::RadialNetwork& net, std::mt19937& rng,
                                double scale = 1e-2) {
  const lf::Vec u = solve_exact_qe(net);
  lf::ProjectionContext ctx(lf::qe_differential(net, u));
  const lf::Vec xi = random_tangent(ctx, (int)u.size(), rng);
  return lf::retract_qe_current(net, lf::Vec(u + scale * xi)).u;
}

inline lf::Vec near_feasible_bfm(const lf::RadialNetwork& net, std::mt19937& rng,
                                 double scale = 1e-2) {
  const int J = net.J();
  const lf::TopoOrder order = lf::topo_order(net);
  const lf::Vec u = solve_exact_qe(net);
  lf::Vec x = lf::Vec::Zero(6 * J);
  x.head(4 * J) = u;
  x = lf::retract_bfm(net, order, x).x;
  lf::ProjectionContext ctx(lf::bfm_differential(net, x));
  const lf::Vec xi = random_tangent(ctx, 6 * J, rng);
  return lf::retract_bfm(net, order, lf::Vec(x + scale * xi)).x;
}

}  // namespace lfh
