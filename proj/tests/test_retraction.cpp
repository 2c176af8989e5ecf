#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

using namespace lf;

namespace {

RadialNetwork case33() { return load_network(lfh::data_path("case33bw.m")); }

}  // namespace

TEST_CASE("retract_bfm: 2-bus flat-target hand values") {
  RadialNetwork net = lfh::twobus();
  Vec xt = Vec::Zero(6);
  xt[0] = 0.1;
  xt[1] = 0.05;
  BfmPoint p = retract_bfm(net, topo_order(net), xt);
  CHECK(p.l()[0] == doctest::Approx(0.0125));
  CHECK(p.v()[0] == doctest::Approx(0.97025));
  CHECK(p.p()[0] == doctest::Approx(-0.09875));
  CHECK(p.q()[0] == doctest::Approx(-0.04875));
  CHECK(bfm_residual(net, p.x).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("retract_bfm: centering on an on-manifold point") {
  RadialNetwork net = case33();
  std::mt19937 rng(3);
  const Vec x = lfh::near_feasible_bfm(net, rng);
  const Vec back = retract_bfm(net, topo_order(net), x).x;
  CHECK((back - x).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("non-positive upstream voltage rejected") {
  RadialNetwork net = case33();
  std::mt19937 rng(5);
  Vec u = lfh::near_feasible_qe(net, rng);
  u.segment(3 * net.J(), net.J()).setConstant(-0.5);  // tangent step drove v negative
  CHECK_THROWS_AS(retract_qe_current(net, u), NonPositiveVoltage);
  // the BFM sweep hits the guard when an upstream voltage collapses to zero:
  // choose the flow target that zeroes v exactly, P* = r v_i/(r^2+x^2), Q* likewise
  RadialNetwork chain;  // 0 - 1 - 2 path
  chain.node_count = 2;
  chain.v0 = 1.0;
  chain.lines = {{0, 0.5, 0.5, 1.0}, {1, 0.5, 0.5, 1.0}};
  chain.g_shunt = chain.b_shunt = chain.p_inj = chain.q_inj = {0.0, 0.0};
  Vec xt = Vec::Zero(12);
  xt[0] = 1.0;  // P*_1 = r v0 / (r^2 + x^2)
  xt[2] = 1.0;  // Q*_1 -> v_1 = 0 exactly (binary-exact arithmetic)
  CHECK_THROWS_AS(retract_bfm(chain, topo_order(chain), xt), NonPositiveVoltage);
}

TEST_CASE("retract_qe_sphere: 2-bus evaluation lands on the cone") {
  RadialNetwork net = lfh::twobus();
  Vec ut(4);
  ut << 0.1, 0.05, 0.0, 0.97;
  QePoint p = retract_qe_sphere(net, ut);
  const double D = std::sqrt(0.04 + 0.01 + 1.0);
  const double den = D + 1.0;
  CHECK(p.P()[0] == doctest::Approx(0.2 / den));
  CHECK(p.Q()[0] == doctest::Approx(0.1 / den));
  CHECK(p.l()[0] == doctest::Approx((D - 1.0) / den));
  CHECK(p.v()[0] == doctest::Approx(0.97));  // identity on v
  CHECK(qe_residual(net, p.u).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("retract_qe_sphere: degenerate apex raises") {
  RadialNetwork net = lfh::twobus();
  RadialNetwork bad = net;
  bad.v0 = 1.0;
  Vec ut(4);
  ut << 0.0, 0.0, 2.0, 1.0;  // l - v_i = 1 > 0 with P = Q = 0 -> D = l - v_i
  // denominator D - l + v_i = 0 exactly
  CHECK_THROWS_AS(retract_qe_sphere(bad, ut), DegenerateCone);
}

TEST_CASE("retract_qe_current: 2-bus warm target and centering") {
  RadialNetwork net = lfh::twobus();
  Vec ut(4);
  ut << 0.1, 0.05, 0.0, 0.97;
  QePoint p = retract_qe_current(net, ut);
  CHECK(p.l()[0] == doctest::Approx(0.0125));
  CHECK(p.P()[0] == doctest::Approx(0.1));
  CHECK(p.v()[0] == doctest::Approx(0.97));
  const Vec back = retract_qe_current(net, p.u).u;
  CHECK((back - p.u).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("QE_CURRENT and BFM_SWEEP agree on (P,Q,l) for a single line") {
  RadialNetwork net = lfh::twobus();
  Vec ut(4);
  ut << 0.07, -0.02, 0.3, 0.9;
  QePoint q = retract_qe_current(net, ut);
  Vec xt = Vec::Zero(6);
  xt.head(4) = ut;
  BfmPoint b = retract_bfm(net, topo_order(net), xt);
  CHECK(q.P()[0] == doctest::Approx(b.P()[0]));
  CHECK(q.Q()[0] == doctest::Approx(b.Q()[0]));
  CHECK(q.l()[0] == doctest::Approx(b.l()[0]));
}

TEST_CASE("post-retraction residuals on every test network") {
  std::mt19937 rng(7);
  for (const char* name : {"case18.m", "case22.m", "case33bw.m", "case69.m", "case85.m",
                           "case141.m"}) {
    RadialNetwork net = load_network(lfh::data_path(name));
    const TopoOrder order = topo_order(net);
    const int J = net.J();
    const Vec u = lfh::near_feasible_qe(net, rng);
    std::normal_distribution<double> gauss;
    Vec pert(4 * J);
    for (int i = 0; i < 4 * J; ++i) pert[i] = 1e-2 * gauss(rng);
    const Vec ut = u + pert;
    CHECK(qe_residual(net, retract_qe_current(net, ut).u).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(qe_residual(net, retract_qe_sphere(net, ut).u).lpNorm<Eigen::Infinity>() <= 1e-12);
    Vec xt = Vec::Zero(6 * J);
    xt.head(4 * J) = ut;
    CHECK(bfm_residual(net, retract_bfm(net, order, xt).x).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("check_retraction: centering and rigidity on case33bw random tangents") {
  RadialNetwork net = case33();
  const TopoOrder order = topo_order(net);
  const int J = net.J();
  std::mt19937 rng(11);
  const std::vector<double> steps = {1e-3, 1e-4, 1e-5};

  for (int t = 0; t < 5; ++t) {
    const Vec u = lfh::near_feasible_qe(net, rng);
    ProjectionContext ctx(qe_differential(net, u));
    const Vec zeta = lfh::random_tangent(ctx, 4 * J, rng);
    for (auto kind : {RetractionKind::QeSphere, RetractionKind::QeCurrent}) {
      RetractionCheck rc = check_retraction(kind, net, order, u, zeta, steps);
      CHECK(rc.centering_error <= 1e-12);
      CHECK(rc.rigidity_defect[1] <= 1e-3 * zeta.norm());
      // defect shrinks at least linearly over three decades of h
      CHECK(rc.rigidity_defect[2] <= rc.rigidity_defect[0]);
    }
    const Vec x = lfh::near_feasible_bfm(net, rng);
    ProjectionContext bctx(bfm_differential(net, x));
    const Vec xi = lfh::random_tangent(bctx, 6 * J, rng);
    RetractionCheck rc = check_retraction(RetractionKind::BfmSweep, net, order, x, xi, steps);
    CHECK(rc.centering_error <= 1e-12);
    CHECK(rc.rigidity_defect[1] <= 1e-3 * xi.norm());
    CHECK(rc.rigidity_defect[2] <= rc.rigidity_defect[0]);
  }
}

TEST_CASE("BFM sweep locality: a leaf-only perturbation changes nothing upstream") {
  RadialNetwork net = case33();
  const TopoOrder order = topo_order(net);
  const int J = net.J();
  std::mt19937 rng(13);
  const Vec x = lfh::near_feasible_bfm(net, rng);
  // find a leaf branch
  int leaf = -1;
  for (int b = 0; b < J; ++b)
    if (order.children[b + 1].empty()) leaf = b;
  REQUIRE(leaf >= 0);
  Vec xt = x;
  xt[leaf] += 1e-3;  // perturb the leaf's P target
  const Vec r0 = retract_bfm(net, order, x).x;
  const Vec r1 = retract_bfm(net, order, xt).x;
  for (int b = 0; b < J; ++b) {
    if (b == leaf) continue;
    CHECK(r1[2 * J + b] == doctest::Approx(r0[2 * J + b]));  // l unchanged off-leaf
    CHECK(r1[3 * J + b] == doctest::Approx(r0[3 * J + b]));  // v unchanged off-leaf
  }
}
