#include "lf/baselines.hpp"

#include <Eigen/Dense>
#include <chrono>
#include <cmath>

namespace lf {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

SolveReport bfs_solve(const RadialNetwork& net, const TopoOrder& order, const SolverConfig& cfg) {
  const auto t0 = Clock::now();
  const int J = net.J();
  const Vec w_bar = known_injections(net);

  Vec x = cfg.init == InitKind::Flat ? init_flat(net, order, Manifold::BFM)
                                     : init_warm(net, order, Manifold::BFM);

  SolveReport rep;
  auto mismatch_inf = [&](const Vec& pt) {
    return (pt.tail(2 * J) - w_bar).lpNorm<Eigen::Infinity>();
  };
  double f_prev = objective_bfm(x, w_bar);
  int growth_streak = 0;
  for (long k = 1; k <= cfg.max_iter; ++k) {
    // backward sweep: aggregate powers leaf-to-root with voltages frozen
    Vec Pt(J), Qt(J), sum_p = Vec::Zero(J), sum_q = Vec::Zero(J);
    for (auto it = order.forward.rbegin(); it != order.forward.rend(); ++it) {
      const int b = *it;
      const Line& ln = net.lines[b];
      const double vt = x[3 * J + b];
      const double pr = sum_p[b] + net.g_shunt[b] * vt - net.p_inj[b];
      const double qr = sum_q[b] - net.b_shunt[b] * vt - net.q_inj[b];
      const double lt = (pr * pr + qr * qr) / (ln.tap * ln.tap * vt);
      Pt[b] = pr + ln.tap * ln.tap * ln.r * lt;
      Qt[b] = qr + ln.tap * ln.tap * ln.x * lt;
      if (ln.up >= 1) {
        sum_p[ln.up - 1] += Pt[b];
        sum_q[ln.up - 1] += Qt[b];
      }
    }
    // forward sweep: exactly the BFM forward-sweep retraction
    Vec x_tilde = Vec::Zero(6 * J);
    x_tilde.segment(0, J) = Pt;
    x_tilde.segment(J, J) = Qt;
    Vec x_next = retract_bfm(net, order, x_tilde).x;

    const double f = objective_bfm(x_next, w_bar);
    const double mis = mismatch_inf(x_next);
    double max_dv = 0;
    for (int j = 0; j < J; ++j)
      max_dv = std::max(max_dv, std::abs(std::sqrt(std::max(x_next[3 * J + j], 0.0)) -
                                         std::sqrt(std::max(x[3 * J + j], 0.0))));
    rep.trajectory.push_back({k, f, mis, max_dv, 1.0, elapsed_ms(t0)});
    x = std::move(x_next);

    if (mis <= cfg.eps_grad && max_dv <= cfg.eps_volt) {
      rep.converged = true;
      rep.iterations = k;
      break;
    }
    growth_streak = f > f_prev ? growth_streak + 1 : 0;
    f_prev = f;
    if (growth_streak >= 50) {
      rep.iterations = k;
      rep.failure = "diverged: mismatch objective grew for 50 consecutive sweeps";
      break;
    }
    if (k == cfg.max_iter) {
      rep.iterations = k;
      rep.failure = "max_iter exceeded";
    }
  }
  rep.final_point = x;
  rep.final_v = x.segment(3 * J, J);
  return rep;
}

CMat ybus_build(const RadialNetwork& net) {
  const int J = net.J();
  CMat Y = CMat::Zero(J + 1, J + 1);
  const std::complex<double> I(0.0, 1.0);
  for (int b = 0; b < J; ++b) {
    const Line& ln = net.lines[b];
    const std::complex<double> y = 1.0 / std::complex<double>(ln.r, ln.x);
    const double a = ln.tap;
    const int i = ln.up, j = b + 1;
    Y(i, i) += y / (a * a);
    Y(i, j) += -y / a;
    Y(j, i) += -y / a;
    Y(j, j) += y;
    Y(j, j) += net.g_shunt[b] + I * net.b_shunt[b];
  }
  return Y;
}

Vec recover_angles(const RadialNetwork& net, const QePoint& u) {
  const int J = net.J();
  const TopoOrder order = topo_order(net);
  Vec theta = Vec::Zero(J + 1);
  for (int b : order.forward) {
    const Line& ln = net.lines[b];
    const double vi = ln.up == 0 ? net.v0 : u.u[3 * J + ln.up - 1];
    if (vi <= 0)
      throw NonPositiveVoltage("recover_angles: non-positive upstream voltage at branch " +
                               std::to_string(b + 1));
    const std::complex<double> z(ln.r, -ln.x);
    const std::complex<double> s(u.u[b], u.u[J + b]);
    theta[b + 1] = theta[ln.up] - std::arg(vi / (ln.tap * ln.tap) - z * s);
  }
  return theta;
}

void polar_branch_flows(const RadialNetwork& net, PolarSolution& sol) {
  const int J = net.J();
  sol.P.resize(J);
  sol.Q.resize(J);
  sol.l.resize(J);
  const std::complex<double> I1(0.0, 1.0);
  for (int b = 0; b < J; ++b) {
    const Line& ln = net.lines[b];
    const std::complex<double> Vi = sol.Vm[ln.up] * std::exp(I1 * sol.Va[ln.up]);
    const std::complex<double> Vj = sol.Vm[b + 1] * std::exp(I1 * sol.Va[b + 1]);
    const std::complex<double> y = 1.0 / std::complex<double>(ln.r, ln.x);
    const std::complex<double> Iser = (Vi / ln.tap - Vj) * y;
    const std::complex<double> S = Vi * std::conj(Iser) / ln.tap;
    sol.P[b] = S.real();
    sol.Q[b] = S.imag();
    sol.l[b] = std::norm(Iser) / (ln.tap * ln.tap);
  }
}

NewtonRaphsonResult newton_raphson(const RadialNetwork& net, InitKind init,
                                   const SolverConfig& cfg) {
  const auto t0 = Clock::now();
  const int J = net.J();
  const CMat Y = ybus_build(net);
  const Eigen::MatrixXd G = Y.real(), B = Y.imag();

  Vec Vm(J + 1), Va = Vec::Zero(J + 1);
  Vm[0] = std::sqrt(net.v0);
  Va[0] = 0.0;
  if (init == InitKind::Flat) {
    Vm.tail(J).setConstant(std::sqrt(net.v0));
  } else {
    const Vec u = lindistflow_solve(net);
    for (int j = 0; j < J; ++j) Vm[j + 1] = std::sqrt(u[3 * J + j]);
    Va = recover_angles(net, QePoint{u});
  }

  auto calc = [&](Vec& Pc, Vec& Qc) {
    Pc.setZero(J + 1);
    Qc.setZero(J + 1);
    for (int j = 0; j <= J; ++j)
      for (int k = 0; k <= J; ++k) {
        if (G(j, k) == 0.0 && B(j, k) == 0.0) continue;
        const double th = Va[j] - Va[k];
        Pc[j] += Vm[j] * Vm[k] * (G(j, k) * std::cos(th) + B(j, k) * std::sin(th));
        Qc[j] += Vm[j] * Vm[k] * (G(j, k) * std::sin(th) - B(j, k) * std::cos(th));
      }
  };

  SolveReport rep;
  double max_dvm = 0;
  for (long k = 0; k <= cfg.max_iter; ++k) {
    Vec Pc, Qc;
    calc(Pc, Qc);
    Vec mis(2 * J);
    for (int j = 0; j < J; ++j) {
      mis[j] = net.p_inj[j] - Pc[j + 1];
      mis[J + j] = net.q_inj[j] - Qc[j + 1];
    }
    const double mnorm = mis.norm();
    const bool done = mnorm <= cfg.eps_grad && (k == 0 || max_dvm <= cfg.eps_volt);
    if (k > 0)
      rep.trajectory.push_back({k, mis.squaredNorm(), mnorm, max_dvm, 1.0, elapsed_ms(t0)});
    if (done || k == cfg.max_iter) {
      rep.converged = done;
      rep.iterations = k;
      if (!done) rep.failure = "max_iter exceeded";
      break;
    }

    // full polar Jacobian over PQ nodes (rows/cols 1..J)
    Eigen::MatrixXd Jac(2 * J, 2 * J);
    for (int r = 1; r <= J; ++r) {
      for (int c = 1; c <= J; ++c) {
        const double th = Va[r] - Va[c];
        const double gc = G(r, c) * std::cos(th), gs = G(r, c) * std::sin(th);
        const double bc = B(r, c) * std::cos(th), bs = B(r, c) * std::sin(th);
        if (r == c) {
          Jac(r - 1, c - 1) = -Qc[r] - B(r, r) * Vm[r] * Vm[r];
          Jac(r - 1, J + c - 1) = Pc[r] / Vm[r] + G(r, r) * Vm[r];
          Jac(J + r - 1, c - 1) = Pc[r] - G(r, r) * Vm[r] * Vm[r];
          Jac(J + r - 1, J + c - 1) = Qc[r] / Vm[r] - B(r, r) * Vm[r];
        } else {
          Jac(r - 1, c - 1) = Vm[r] * Vm[c] * (gs - bc);
          Jac(r - 1, J + c - 1) = Vm[r] * (gc + bs);
          Jac(J + r - 1, c - 1) = -Vm[r] * Vm[c] * (gc + bs);
          Jac(J + r - 1, J + c - 1) = Vm[r] * (gs - bc);
        }
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Jac);
    Vec dx = lu.solve(mis);
    if (!dx.allFinite() || (Jac * dx - mis).norm() > 1e-8 * (1.0 + mis.norm()))
      throw SingularJacobian("Newton-Raphson Jacobian is singular");
    max_dvm = 0;
    for (int j = 0; j < J; ++j) {
      Va[j + 1] += dx[j];
      Vm[j + 1] += dx[J + j];
      max_dvm = std::max(max_dvm, std::abs(dx[J + j]));
    }
  }

  NewtonRaphsonResult out;
  out.polar.Vm = Vm;
  out.polar.Va = Va;
  polar_branch_flows(net, out.polar);
  rep.final_v = Vm.tail(J).array().square();
  Vec fp(2 * J);
  fp.head(J) = Va.tail(J);
  fp.tail(J) = Vm.tail(J);
  rep.final_point = std::move(fp);
  out.report = std::move(rep);
  return out;
}

CompareMetrics solution_compare(const Vec& v_a, const Vec& v_b) {
  if (v_a.size() != v_b.size())
    throw DimensionMismatch("solution_compare: voltage vectors differ in length");
  CompareMetrics m;
  m.node_abs = (v_a.array().max(0.0).sqrt() - v_b.array().max(0.0).sqrt()).abs();
  m.max = m.node_abs.size() ? m.node_abs.maxCoeff() : 0.0;
  m.mean = m.node_abs.size() ? m.node_abs.mean() : 0.0;
  return m;
}

}  // namespace lf
