#include "lf/solvers.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <chrono>
#include <cmath>

namespace lf {

namespace {

using Triplet = Eigen::Triplet<double>;
using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double max_sqrt_dv(const Vec& v_new, const Vec& v_old) {
  double m = 0;
  for (int j = 0; j < v_new.size(); ++j) {
    const double a = std::sqrt(std::max(v_new[j], 0.0));
    const double b = std::sqrt(std::max(v_old[j], 0.0));
    m = std::max(m, std::abs(a - b));
  }
  return m;
}

RetractionKind default_retraction(Manifold m, RetractionKind requested) {
  if (m == Manifold::BFM) {
    if (requested != RetractionKind::BfmSweep)
      throw Error("BFM solvers require the forward-sweep retraction");
    return requested;
  }
  if (requested == RetractionKind::BfmSweep)
    throw Error("QE solvers require a QE retraction");
  return requested;
}

}  // namespace

Vec lindistflow_solve(const RadialNetwork& net) {
  const int J = net.J();
  FlowLinearSystem sys = linear_part(net);
  // drop the l column block: variables are (P, Q, v) with l identically 0
  std::vector<Triplet> trip;
  trip.reserve(sys.A.nonZeros());
  for (int k = 0; k < sys.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(sys.A, k); it; ++it) {
      const int c = (int)it.col();
      if (c >= 2 * J && c < 3 * J) continue;
      trip.emplace_back((int)it.row(), c < 2 * J ? c : c - J, it.value());
    }
  SpMat M(3 * J, 3 * J);
  M.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<SpMat> lu(M);
  if (lu.info() != Eigen::Success) throw SingularSystem("LinDistFlow system is singular");
  Vec sol = lu.solve(sys.b);
  Vec u = Vec::Zero(4 * J);
  u.segment(0, 2 * J) = sol.segment(0, 2 * J);
  u.segment(3 * J, J) = sol.segment(2 * J, J);
  return u;
}

Vec init_flat(const RadialNetwork& net, const TopoOrder& order, Manifold m) {
  const int J = net.J();
  Vec u = Vec::Zero(4 * J);
  u.segment(3 * J, J).setConstant(net.v0);
  if (m == Manifold::QE) return retract_qe_current(net, u).u;
  Vec x = Vec::Zero(6 * J);
  x.segment(0, 4 * J) = u;
  return retract_bfm(net, order, x).x;
}

Vec init_warm(const RadialNetwork& net, const TopoOrder& order, Manifold m) {
  const int J = net.J();
  Vec u = lindistflow_solve(net);
  if (m == Manifold::QE) return retract_qe_current(net, u).u;
  Vec x = Vec::Zero(6 * J);
  x.segment(0, 4 * J) = u;
  return retract_bfm(net, order, x).x;
}

bool stop_check(double grad_norm, double max_dv, const SolverConfig& cfg) {
  return grad_norm <= cfg.eps_grad && max_dv <= cfg.eps_volt;
}

namespace {

// Shared descent loop for gradient descent and PAN; `direction` returns the
// search direction at the current point given its projection context.
template <typename DirectionFn>
SolveReport descent_loop(Manifold m, const RadialNetwork& net, const SolverConfig& cfg,
                         DirectionFn&& direction) {
  const auto t0 = Clock::now();
  const int J = net.J();
  const TopoOrder order = topo_order(net);
  const FlowLinearSystem sys = linear_part(net);
  const Vec w_bar = known_injections(net);
  const RetractionKind rk = default_retraction(m, cfg.retraction);

  auto f_eval = [&](const Vec& pt) {
    return m == Manifold::QE ? objective_qe(sys, pt) : objective_bfm(pt, w_bar);
  };
  auto retractor = [&](const Vec& pt) { return retract(rk, net, order, pt); };
  auto diff = [&](const Vec& pt) {
    return m == Manifold::QE ? qe_differential(net, pt) : bfm_differential(net, pt);
  };

  Vec x = cfg.init == InitKind::Flat ? init_flat(net, order, m) : init_warm(net, order, m);

  SolveReport rep;
  double max_dv = 0, last_step = 0, f_cur = f_eval(x);
  for (long k = 0; k <= cfg.max_iter; ++k) {
    ProjectionContext ctx(diff(x));
    const TangentVector grad = m == Manifold::QE ? grad_qe(sys, ctx, x)
                                                 : grad_bfm(net, ctx, x, w_bar);
    const double gnorm = grad.data.norm();
    // one trajectory row per completed iteration, evaluated at its result
    if (k > 0) rep.trajectory.push_back({k, f_cur, gnorm, max_dv, last_step, elapsed_ms(t0)});
    const bool done = gnorm <= cfg.eps_grad && (k == 0 || max_dv <= cfg.eps_volt);
    if (done || k == cfg.max_iter) {
      rep.converged = done;
      rep.iterations = k;
      if (!done) rep.failure = "max_iter exceeded";
      break;
    }
    Vec xi = direction(ctx, x, grad);
    double slope = grad.data.dot(xi);
    try {
      ArmijoResult ls = armijo(f_eval, retractor, x, xi, f_cur, slope, cfg.armijo);
      max_dv = max_sqrt_dv(ls.point.segment(3 * J, J), x.segment(3 * J, J));
      last_step = ls.step;
      f_cur = ls.f;
      x = std::move(ls.point);
    } catch (const LineSearchFailed& e) {
      rep.iterations = k;
      rep.failure = e.what();
      break;
    }
  }
  rep.final_point = x;
  rep.final_v = x.segment(3 * J, J);
  return rep;
}

}  // namespace

SolveReport solve_gd(Manifold m, const RadialNetwork& net, const SolverConfig& cfg) {
  return descent_loop(m, net, cfg,
                      [](const ProjectionContext&, const Vec&, const TangentVector& grad) {
                        return Vec(-grad.data);
                      });
}

TangentVector pan_direction_bfm(const RadialNetwork& net, const Vec& x) {
  const int J = net.J();
  SpMat dh = bfm_differential(net, x);
  std::vector<Triplet> trip;
  trip.reserve(dh.nonZeros() + 2 * J);
  for (int k = 0; k < dh.outerSize(); ++k)
    for (SpMat::InnerIterator it(dh, k); it; ++it)
      trip.emplace_back((int)it.row(), (int)it.col(), it.value());
  for (int j = 0; j < 2 * J; ++j) trip.emplace_back(4 * J + j, 4 * J + j, 1.0);
  SpMat M(6 * J, 6 * J);
  M.setFromTriplets(trip.begin(), trip.end());
  Vec rhs = Vec::Zero(6 * J);
  const Vec w_bar = known_injections(net);
  rhs.tail(2 * J) = w_bar - x.tail(2 * J);
  Eigen::SparseLU<SpMat> lu(M);
  if (lu.info() != Eigen::Success)
    throw SingularDirectionSystem("BFM direction system is singular");
  return {Manifold::BFM, lu.solve(rhs)};
}

TangentVector pan_direction_qe(const RadialNetwork& net, const FlowLinearSystem& sys,
                               const Vec& u) {
  const int J = net.J();
  SpMat dh = qe_differential(net, u);
  std::vector<Triplet> trip;
  trip.reserve(dh.nonZeros() + sys.A.nonZeros());
  for (int k = 0; k < dh.outerSize(); ++k)
    for (SpMat::InnerIterator it(dh, k); it; ++it)
      trip.emplace_back((int)it.row(), (int)it.col(), it.value());
  for (int k = 0; k < sys.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(sys.A, k); it; ++it)
      trip.emplace_back(J + (int)it.row(), (int)it.col(), it.value());
  SpMat M(4 * J, 4 * J);
  M.setFromTriplets(trip.begin(), trip.end());
  Vec rhs(4 * J);
  rhs.segment(0, J).setZero();
  rhs.segment(J, 3 * J) = sys.b - sys.A * u;
  Eigen::SparseLU<SpMat> lu(M);
  if (lu.info() != Eigen::Success)
    throw SingularDirectionSystem("QE direction system is singular");
  return {Manifold::QE, lu.solve(rhs)};
}

SolveReport solve_pan(Manifold m, const RadialNetwork& net, const SolverConfig& cfg) {
  const FlowLinearSystem sys = linear_part(net);
  return descent_loop(m, net, cfg,
                      [&](const ProjectionContext&, const Vec& x, const TangentVector&) {
                        return m == Manifold::QE ? pan_direction_qe(net, sys, x).data
                                                 : pan_direction_bfm(net, x).data;
                      });
}

QePoint pan_first_iteration(const RadialNetwork& net, const SolverConfig& cfg) {
  const TopoOrder order = topo_order(net);
  const FlowLinearSystem sys = linear_part(net);
  Vec u = cfg.init == InitKind::Flat ? init_flat(net, order, Manifold::QE)
                                     : init_warm(net, order, Manifold::QE);
  const TangentVector zeta = pan_direction_qe(net, sys, u);
  const RetractionKind rk = default_retraction(Manifold::QE, cfg.retraction);
  return {retract(rk, net, order, Vec(u + zeta.data))};
}

TangentVector newton_direction_qe(const FlowLinearSystem& sys, const RadialNetwork& net,
                                  const ProjectionContext& ctx, const Vec& u) {
  const int J = net.J();
  const int n = 4 * J;
  // Hessian as a dense operator on R^n: column i is hess f[Pi e_i]
  Eigen::MatrixXd H(n, n);
  for (int i = 0; i < n; ++i) {
    Vec e = Vec::Zero(n);
    e[i] = 1.0;
    H.col(i) = hess_qe_apply(sys, net, ctx, u, {Manifold::QE, ctx.project(e)}).data;
  }
  Eigen::MatrixXd Jd = Eigen::MatrixXd(qe_differential(net, u));
  // Saddle-point system pins the solution to the tangent space
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + J, n + J);
  K.topLeftCorner(n, n) = H;
  K.topRightCorner(n, J) = Jd.transpose();
  K.bottomLeftCorner(J, n) = Jd;
  Vec rhs = Vec::Zero(n + J);
  rhs.head(n) = -grad_qe(sys, ctx, u).data;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
  Vec sol = lu.solve(rhs);
  if (!sol.allFinite() || (K * sol - rhs).norm() > 1e-8 * (1.0 + rhs.norm()))
    throw SingularHessian("Newton saddle-point system is singular");
  return {Manifold::QE, ctx.project(sol.head(n))};
}

SolveReport solve_newton_qe(const RadialNetwork& net, const SolverConfig& cfg) {
  const auto t0 = Clock::now();
  const int J = net.J();
  const TopoOrder order = topo_order(net);
  const FlowLinearSystem sys = linear_part(net);
  const RetractionKind rk = default_retraction(Manifold::QE, cfg.retraction);

  Vec u = cfg.init == InitKind::Flat ? init_flat(net, order, Manifold::QE)
                                     : init_warm(net, order, Manifold::QE);
  SolveReport rep;
  double max_dv = 0;
  double f_prev = objective_qe(sys, u);
  int growth_streak = 0;
  for (long k = 0; k <= cfg.max_iter; ++k) {
    ProjectionContext ctx(qe_differential(net, u));
    const TangentVector grad = grad_qe(sys, ctx, u);
    const double gnorm = grad.data.norm();
    const double f0 = objective_qe(sys, u);
    if (k > 0) rep.trajectory.push_back({k, f0, gnorm, max_dv, 1.0, elapsed_ms(t0)});
    const bool done = gnorm <= cfg.eps_grad && (k == 0 || max_dv <= cfg.eps_volt);
    if (done || k == cfg.max_iter) {
      rep.converged = done;
      rep.iterations = k;
      if (!done) rep.failure = "max_iter exceeded";
      break;
    }
    if (k > 0) {
      growth_streak = f0 > f_prev ? growth_streak + 1 : 0;
      if (growth_streak >= 10) {
        rep.iterations = k;
        rep.failure = "diverged: objective grew for 10 consecutive iterations";
        break;
      }
    }
    f_prev = f0;
    const TangentVector zeta = newton_direction_qe(sys, net, ctx, u);
    Vec next = retract(rk, net, order, Vec(u + zeta.data));
    max_dv = max_sqrt_dv(next.segment(3 * J, J), u.segment(3 * J, J));
    u = std::move(next);
  }
  rep.final_point = u;
  rep.final_v = u.segment(3 * J, J);
  return rep;
}

}  // namespace lf
