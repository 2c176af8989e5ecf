#include "lf/manifold.hpp"

#include <vector>

namespace lf {

namespace {
using Triplet = Eigen::Triplet<double>;
}

Vec known_injections(const RadialNetwork& net) {
  const int J = net.J();
  Vec w(2 * J);
  for (int j = 0; j < J; ++j) {
    w[j] = net.p_inj[j];
    w[J + j] = net.q_inj[j];
  }
  return w;
}

FlowLinearSystem linear_part(const RadialNetwork& net) {
  const int J = net.J();
  std::vector<Triplet> trip;
  trip.reserve(10 * J);
  Vec b = Vec::Zero(3 * J);
  for (int bidx = 0; bidx < J; ++bidx) {
    const Line& ln = net.lines[bidx];
    const double a2 = ln.tap * ln.tap;
    // real balance row bidx: -P_b + sum children P + a^2 r l + G v = p_bar
    trip.emplace_back(bidx, bidx, -1.0);
    trip.emplace_back(bidx, 2 * J + bidx, a2 * ln.r);
    if (net.g_shunt[bidx] != 0.0) trip.emplace_back(bidx, 3 * J + bidx, net.g_shunt[bidx]);
    b[bidx] = net.p_inj[bidx];
    // reactive balance row J+bidx
    trip.emplace_back(J + bidx, J + bidx, -1.0);
    trip.emplace_back(J + bidx, 2 * J + bidx, a2 * ln.x);
    if (net.b_shunt[bidx] != 0.0) trip.emplace_back(J + bidx, 3 * J + bidx, -net.b_shunt[bidx]);
    b[J + bidx] = net.q_inj[bidx];
    // child flow terms land in the parent's balance rows
    if (ln.up >= 1) {
      trip.emplace_back(ln.up - 1, bidx, 1.0);
      trip.emplace_back(J + ln.up - 1, J + bidx, 1.0);
    }
    // voltage drop row 2J+bidx: v_b + 2rP + 2xQ - a^2(r^2+x^2) l - v_up/a^2 = 0
    trip.emplace_back(2 * J + bidx, 3 * J + bidx, 1.0);
    trip.emplace_back(2 * J + bidx, bidx, 2.0 * ln.r);
    trip.emplace_back(2 * J + bidx, J + bidx, 2.0 * ln.x);
    trip.emplace_back(2 * J + bidx, 2 * J + bidx, -a2 * (ln.r * ln.r + ln.x * ln.x));
    if (ln.up >= 1)
      trip.emplace_back(2 * J + bidx, 3 * J + ln.up - 1, -1.0 / a2);
    else
      b[2 * J + bidx] = net.v0 / a2;
  }
  FlowLinearSystem sys;
  sys.A.resize(3 * J, 4 * J);
  sys.A.setFromTriplets(trip.begin(), trip.end());
  sys.b = std::move(b);
  return sys;
}

Vec qe_residual(const RadialNetwork& net, const Vec& u) {
  const int J = net.J();
  Vec r(J);
  for (int b = 0; b < J; ++b) {
    const int up = net.lines[b].up;
    const double vi = up == 0 ? net.v0 : u[3 * J + up - 1];
    r[b] = u[b] * u[b] + u[J + b] * u[J + b] - vi * u[2 * J + b];
  }
  return r;
}

Vec bfm_residual(const RadialNetwork& net, const Vec& x) {
  const int J = net.J();
  const Vec u = x.segment(0, 4 * J);
  FlowLinearSystem sys = linear_part(net);
  Vec res(4 * J);
  // the linear families carry (p, q) as variables: move the known-injection
  // part of b back and subtract the variables instead
  Vec lin = sys.A * u - sys.b;
  for (int b = 0; b < J; ++b) {
    lin[b] += net.p_inj[b] - x[4 * J + b];
    lin[J + b] += net.q_inj[b] - x[5 * J + b];
  }
  res.segment(0, 3 * J) = lin;
  res.segment(3 * J, J) = qe_residual(net, u);
  return res;
}

SpMat qe_differential(const RadialNetwork& net, const Vec& u) {
  const int J = net.J();
  std::vector<Triplet> trip;
  trip.reserve(4 * J);
  for (int b = 0; b < J; ++b) {
    const int up = net.lines[b].up;
    const double vi = up == 0 ? net.v0 : u[3 * J + up - 1];
    trip.emplace_back(b, b, 2.0 * u[b]);
    trip.emplace_back(b, J + b, 2.0 * u[J + b]);
    trip.emplace_back(b, 2 * J + b, -vi);
    if (up >= 1) trip.emplace_back(b, 3 * J + up - 1, -u[2 * J + b]);
  }
  SpMat m(J, 4 * J);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SpMat qe_differential_derivative(const RadialNetwork& net, const Vec& zeta) {
  const int J = net.J();
  std::vector<Triplet> trip;
  trip.reserve(4 * J);
  for (int b = 0; b < J; ++b) {
    const int up = net.lines[b].up;
    trip.emplace_back(b, b, 2.0 * zeta[b]);
    trip.emplace_back(b, J + b, 2.0 * zeta[J + b]);
    if (up >= 1) {
      trip.emplace_back(b, 2 * J + b, -zeta[3 * J + up - 1]);
      trip.emplace_back(b, 3 * J + up - 1, -zeta[2 * J + b]);
    }
  }
  SpMat m(J, 4 * J);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SpMat bfm_differential(const RadialNetwork& net, const Vec& x) {
  const int J = net.J();
  FlowLinearSystem sys = linear_part(net);
  SpMat dh_qe = qe_differential(net, x.segment(0, 4 * J));
  std::vector<Triplet> trip;
  trip.reserve(sys.A.nonZeros() + dh_qe.nonZeros() + 2 * J);
  for (int k = 0; k < sys.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(sys.A, k); it; ++it)
      trip.emplace_back((int)it.row(), (int)it.col(), it.value());
  for (int b = 0; b < J; ++b) {
    trip.emplace_back(b, 4 * J + b, -1.0);          // d(real balance)/dp
    trip.emplace_back(J + b, 5 * J + b, -1.0);      // d(reactive balance)/dq
  }
  for (int k = 0; k < dh_qe.outerSize(); ++k)
    for (SpMat::InnerIterator it(dh_qe, k); it; ++it)
      trip.emplace_back(3 * J + (int)it.row(), (int)it.col(), it.value());
  SpMat m(4 * J, 6 * J);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SpMat bfm_differential_derivative(const RadialNetwork& net, const Vec& xi) {
  const int J = net.J();
  SpMat dq = qe_differential_derivative(net, xi.segment(0, 4 * J));
  std::vector<Triplet> trip;
  for (int k = 0; k < dq.outerSize(); ++k)
    for (SpMat::InnerIterator it(dq, k); it; ++it)
      trip.emplace_back(3 * J + (int)it.row(), (int)it.col(), it.value());
  SpMat m(4 * J, 6 * J);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

ProjectionContext::ProjectionContext(SpMat differential) : dh_(std::move(differential)) {
  SpMat gram = (dh_ * SpMat(dh_.transpose())).pruned();
  gram_.compute(gram);
  if (gram_.info() != Eigen::Success)
    throw RankDeficient("Gram matrix factorization failed (differential rank deficient)");
  const Vec d = gram_.vectorD();
  const double dmax = d.maxCoeff();
  if (dmax <= 0 || d.minCoeff() < 1e-14 * dmax)
    throw RankDeficient("Gram matrix numerically singular");
}

Vec ProjectionContext::gram_solve(const Vec& rhs) const { return gram_.solve(rhs); }

Vec ProjectionContext::project(const Vec& y) const {
  if (y.size() != dh_.cols()) throw DimensionMismatch("project: vector length mismatch");
  return y - dh_.transpose() * gram_.solve(dh_ * y);
}

double objective_bfm(const Vec& x, const Vec& w_bar) {
  const int twoJ = (int)w_bar.size();
  return (x.tail(twoJ) - w_bar).squaredNorm();
}

double objective_qe(const FlowLinearSystem& sys, const Vec& u) {
  return (sys.A * u - sys.b).squaredNorm();
}

TangentVector grad_bfm(const RadialNetwork& net, const ProjectionContext& ctx, const Vec& x,
                       const Vec& w_bar) {
  const int J = net.J();
  Vec e = Vec::Zero(6 * J);
  e.tail(2 * J) = 2.0 * (x.tail(2 * J) - w_bar);
  return {Manifold::BFM, ctx.project(e)};
}

TangentVector grad_qe(const FlowLinearSystem& sys, const ProjectionContext& ctx, const Vec& u) {
  Vec e = 2.0 * (sys.A.transpose() * (sys.A * u - sys.b));
  return {Manifold::QE, ctx.project(e)};
}

namespace {

// Action of the projector derivative on a fixed vector g:
// DPi[zeta] g = -(Pi J'^T G^-1 J g + J^T G^-1 J' Pi g), J = Dh, J' = DDh[zeta]
Vec projector_derivative_apply(const ProjectionContext& ctx, const SpMat& dprime, const Vec& g) {
  const SpMat& dh = ctx.differential();
  Vec term1 = ctx.project(dprime.transpose() * ctx.gram_solve(dh * g));
  Vec term2 = dh.transpose() * ctx.gram_solve(dprime * ctx.project(g));
  return -(term1 + term2);
}

}  // namespace

TangentVector hess_qe_apply(const FlowLinearSystem& sys, const RadialNetwork& net,
                            const ProjectionContext& ctx, const Vec& u,
                            const TangentVector& zeta) {
  if (zeta.manifold != Manifold::QE) throw DimensionMismatch("hess_qe_apply: tangent not on QE");
  const Vec grad_euclid = 2.0 * (sys.A.transpose() * (sys.A * u - sys.b));
  const SpMat dprime = qe_differential_derivative(net, zeta.data);
  Vec inner = 2.0 * ctx.project(sys.A.transpose() * (sys.A * zeta.data)) +
              projector_derivative_apply(ctx, dprime, grad_euclid);
  return {Manifold::QE, ctx.project(inner)};
}

TangentVector hess_bfm_apply(const RadialNetwork& net, const ProjectionContext& ctx, const Vec& x,
                             const Vec& w_bar, const TangentVector& xi) {
  if (xi.manifold != Manifold::BFM) throw DimensionMismatch("hess_bfm_apply: tangent not on BFM");
  const int J = net.J();
  Vec grad_euclid = Vec::Zero(6 * J);
  grad_euclid.tail(2 * J) = 2.0 * (x.tail(2 * J) - w_bar);
  Vec ew = Vec::Zero(6 * J);
  ew.tail(2 * J) = 2.0 * xi.data.tail(2 * J);
  const SpMat dprime = bfm_differential_derivative(net, xi.data);
  Vec inner = ctx.project(ew) + projector_derivative_apply(ctx, dprime, grad_euclid);
  return {Manifold::BFM, ctx.project(inner)};
}

}  // namespace lf
