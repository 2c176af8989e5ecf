#include "lf/retraction.hpp"

#include <cmath>

namespace lf {

BfmPoint retract_bfm(const RadialNetwork& net, const TopoOrder& order, const Vec& x_tilde) {
  const int J = net.J();
  if ((int)x_tilde.size() != 6 * J) throw DimensionMismatch("retract_bfm: expected 6J vector");
  Vec x = x_tilde;
  auto P = x.segment(0, J);
  auto Q = x.segment(J, J);
  auto l = x.segment(2 * J, J);
  auto v = x.segment(3 * J, J);
  for (int b : order.forward) {
    const Line& ln = net.lines[b];
    const double a2 = ln.tap * ln.tap;
    const double vi = ln.up == 0 ? net.v0 : v[ln.up - 1];
    if (vi <= 0)
      throw NonPositiveVoltage("retract_bfm: non-positive upstream voltage at branch " +
                               std::to_string(b + 1));
    l[b] = (P[b] * P[b] + Q[b] * Q[b]) / vi;
    v[b] = vi / a2 - 2.0 * (ln.r * P[b] + ln.x * Q[b]) + a2 * (ln.r * ln.r + ln.x * ln.x) * l[b];
  }
  // p, q from the rhs of the balance equations
  auto p = x.segment(4 * J, J);
  auto q = x.segment(5 * J, J);
  for (int b = 0; b < J; ++b) {
    const Line& ln = net.lines[b];
    const double a2 = ln.tap * ln.tap;
    double sp = 0, sq = 0;
    for (int c : order.children[b + 1]) {
      sp += P[c];
      sq += Q[c];
    }
    p[b] = sp - P[b] + a2 * ln.r * l[b] + net.g_shunt[b] * v[b];
    q[b] = sq - Q[b] + a2 * ln.x * l[b] - net.b_shunt[b] * v[b];
  }
  return {std::move(x)};
}

QePoint retract_qe_sphere(const RadialNetwork& net, const Vec& u_tilde) {
  const int J = net.J();
  if ((int)u_tilde.size() != 4 * J) throw DimensionMismatch("retract_qe_sphere: expected 4J vector");
  Vec u = u_tilde;  // v is the identity map
  for (int b = 0; b < J; ++b) {
    const int up = net.lines[b].up;
    const double vi = up == 0 ? net.v0 : u_tilde[3 * J + up - 1];
    const double Pt = u_tilde[b], Qt = u_tilde[J + b], lt = u_tilde[2 * J + b];
    const double D = std::sqrt(4 * Pt * Pt + 4 * Qt * Qt + (lt - vi) * (lt - vi));
    const double den = D - lt + vi;
    if (den <= 1e-12)
      throw DegenerateCone("retract_qe_sphere: degenerate denominator at branch " +
                           std::to_string(b + 1));
    u[b] = 2.0 * Pt * vi / den;
    u[J + b] = 2.0 * Qt * vi / den;
    u[2 * J + b] = (D + lt - vi) / den * vi;
  }
  return {std::move(u)};
}

QePoint retract_qe_current(const RadialNetwork& net, const Vec& u_tilde) {
  const int J = net.J();
  if ((int)u_tilde.size() != 4 * J) throw DimensionMismatch("retract_qe_current: expected 4J vector");
  Vec u = u_tilde;
  for (int b = 0; b < J; ++b) {
    const int up = net.lines[b].up;
    const double vi = up == 0 ? net.v0 : u_tilde[3 * J + up - 1];
    if (vi <= 0)
      throw NonPositiveVoltage("retract_qe_current: non-positive upstream voltage at branch " +
                               std::to_string(b + 1));
    u[2 * J + b] = (u[b] * u[b] + u[J + b] * u[J + b]) / vi;
  }
  return {std::move(u)};
}

Vec retract(RetractionKind kind, const RadialNetwork& net, const TopoOrder& order,
            const Vec& point_tilde) {
  switch (kind) {
    case RetractionKind::BfmSweep:
      return retract_bfm(net, order, point_tilde).x;
    case RetractionKind::QeSphere:
      return retract_qe_sphere(net, point_tilde).u;
    case RetractionKind::QeCurrent:
      return retract_qe_current(net, point_tilde).u;
  }
  throw Error("unknown retraction kind");
}

RetractionCheck check_retraction(RetractionKind kind, const RadialNetwork& net,
                                 const TopoOrder& order, const Vec& x, const Vec& xi,
                                 const std::vector<double>& steps) {
  RetractionCheck rep;
  rep.centering_error = (retract(kind, net, order, x) - x).lpNorm<Eigen::Infinity>();
  for (double h : steps) {
    Vec moved = retract(kind, net, order, x + h * xi);
    rep.steps.push_back(h);
    rep.rigidity_defect.push_back(((moved - x) / h - xi).lpNorm<Eigen::Infinity>());
  }
  return rep;
}

}  // namespace lf
