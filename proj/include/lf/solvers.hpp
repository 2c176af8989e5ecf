#pragma once

#include <string>
#include <vector>

#include "lf/manifold.hpp"
#include "lf/retraction.hpp"

namespace lf {

enum class InitKind { Flat, Warm };

struct ArmijoParams {
  double alpha_bar = 1.0;
  double beta = 0.3;
  double sigma = 0.05;
  int max_backtracks = 50;
};

struct SolverConfig {
  double eps_grad = 1e-6;
  double eps_volt = 1e-6;
  ArmijoParams armijo;
  long max_iter = 100000;
  RetractionKind retraction = RetractionKind::QeCurrent;
  InitKind init = InitKind::Warm;
};

struct IterRecord {
  long iter;
  double f;
  double grad_norm;
  double max_dv;   // max_j |sqrt(v_k+1) - sqrt(v_k)|
  double step;     // accepted beta^m * alpha_bar
  double time_ms;
};

struct SolveReport {
  bool converged = false;
  long iterations = 0;
  std::vector<IterRecord> trajectory;
  Vec final_point;  // 4J (QE), 6J (BFM) or Vm/Va interleaved for NR
  Vec final_v;      // squared voltage magnitudes, size J
  std::string failure;
};

/// Flat start: zero flows and currents, v = v0, retracted onto the manifold.
Vec init_flat(const RadialNetwork& net, const TopoOrder& order, Manifold m);

/// Warm start: LinDistFlow solution retracted onto the manifold.
Vec init_warm(const RadialNetwork& net, const TopoOrder& order, Manifold m);

/// Solves the 3J x 3J LinDistFlow system in (P, Q, v); returned as a 4J
/// vector with l = 0.
Vec lindistflow_solve(const RadialNetwork& net);

struct ArmijoResult {
  int m;        // accepted backtracking exponent
  double step;  // beta^m * alpha_bar
  Vec point;    // retracted accepted point
  double f;     // objective at the accepted point
};

/// Backtracking line search per the Armijo rule; retraction failures at a
/// trial step count as rejection.
template <typename FEval, typename Retractor>
ArmijoResult armijo(FEval&& f_eval, Retractor&& retractor, const Vec& x, const Vec& xi,
                    double f0, double slope, const ArmijoParams& prm) {
  if (!(slope < 0)) throw LineSearchFailed("armijo: direction is not a descent direction");
  double step = prm.alpha_bar;
  for (int m = 0; m <= prm.max_backtracks; ++m, step *= prm.beta) {
    try {
      Vec cand = retractor(Vec(x + step * xi));
      double f1 = f_eval(cand);
      if (f0 - f1 >= -prm.sigma * step * slope) return {m, step, std::move(cand), f1};
    } catch (const NonPositiveVoltage&) {
    } catch (const DegenerateCone&) {
    }
  }
  throw LineSearchFailed("armijo: no acceptable step within max_backtracks");
}

/// True iff both the gradient and the voltage-change criteria are met.
bool stop_check(double grad_norm, double max_dv, const SolverConfig& cfg);

SolveReport solve_gd(Manifold m, const RadialNetwork& net, const SolverConfig& cfg);

TangentVector newton_direction_qe(const FlowLinearSystem& sys, const RadialNetwork& net,
                                  const ProjectionContext& ctx, const Vec& u);
SolveReport solve_newton_qe(const RadialNetwork& net, const SolverConfig& cfg);

TangentVector pan_direction_bfm(const RadialNetwork& net, const Vec& x);
TangentVector pan_direction_qe(const RadialNetwork& net, const FlowLinearSystem& sys,
                               const Vec& u);
SolveReport solve_pan(Manifold m, const RadialNetwork& net, const SolverConfig& cfg);

/// The point after exactly one full PAN(QE) step from the configured
/// initialization (the one-iteration approximant).
QePoint pan_first_iteration(const RadialNetwork& net, const SolverConfig& cfg);

}  // namespace lf
