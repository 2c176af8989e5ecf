#pragma once

#include <Eigen/Core>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "lf/network.hpp"

namespace lf {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

enum class Manifold { BFM, QE };

/// Solver state on the QE manifold, u = (P, Q, l, v) stacked in R^{4J}.
struct QePoint {
  Vec u;
  int J() const { return (int)u.size() / 4; }
  auto P() const { return u.segment(0, J()); }
  auto Q() const { return u.segment(J(), J()); }
  auto l() const { return u.segment(2 * J(), J()); }
  auto v() const { return u.segment(3 * J(), J()); }
};

/// Solver state on the BFM manifold, x = (u, w) with w = (p, q), R^{6J}.
struct BfmPoint {
  Vec x;
  int J() const { return (int)x.size() / 6; }
  Vec u() const { return x.segment(0, 4 * J()); }
  auto P() const { return x.segment(0, J()); }
  auto Q() const { return x.segment(J(), J()); }
  auto l() const { return x.segment(2 * J(), J()); }
  auto v() const { return x.segment(3 * J(), J()); }
  auto w() const { return x.segment(4 * J(), 2 * J()); }
  auto p() const { return x.segment(4 * J(), J()); }
  auto q() const { return x.segment(5 * J(), J()); }
};

/// Candidate direction annotated with the manifold it is tangent to.
struct TangentVector {
  Manifold manifold;
  Vec data;  // 4J (QE) or 6J (BFM)
};

/// Compact form A u = b of the linear BFM equation families; A is 3J x 4J
/// with row blocks [real balance; reactive balance; voltage drop].
struct FlowLinearSystem {
  SpMat A;
  Vec b;
};

FlowLinearSystem linear_part(const RadialNetwork& net);

Vec qe_residual(const RadialNetwork& net, const Vec& u);
Vec bfm_residual(const RadialNetwork& net, const Vec& x);

SpMat qe_differential(const RadialNetwork& net, const Vec& u);
SpMat bfm_differential(const RadialNetwork& net, const Vec& x);

/// Differential of the QE defining map along a direction zeta (the map is
/// linear in u, so this is exact).
SpMat qe_differential_derivative(const RadialNetwork& net, const Vec& zeta);
SpMat bfm_differential_derivative(const RadialNetwork& net, const Vec& xi);

/// Orthogonal projector onto the tangent space at one base point, applied
/// through a sparse factorization of the Gram matrix Dh Dh^T (the projector
/// itself is never formed).
class ProjectionContext {
 public:
  explicit ProjectionContext(SpMat differential);
  Vec project(const Vec& y) const;
  Vec gram_solve(const Vec& rhs) const;
  const SpMat& differential() const { return dh_; }

 private:
  SpMat dh_;
  Eigen::SimplicialLDLT<SpMat> gram_;
};

double objective_bfm(const Vec& x, const Vec& w_bar);
double objective_qe(const FlowLinearSystem& sys, const Vec& u);

TangentVector grad_bfm(const RadialNetwork& net, const ProjectionContext& ctx, const Vec& x,
                       const Vec& w_bar);
TangentVector grad_qe(const FlowLinearSystem& sys, const ProjectionContext& ctx, const Vec& u);

/// Riemannian Hessian-vector product on the QE manifold,
/// hess f(u)[zeta] = Pi (2 Pi A^T A + L_u) zeta.
TangentVector hess_qe_apply(const FlowLinearSystem& sys, const RadialNetwork& net,
                            const ProjectionContext& ctx, const Vec& u,
                            const TangentVector& zeta);

/// BFM counterpart via the same projector-derivative formula; used by tests
/// only, no solver consumes it.
TangentVector hess_bfm_apply(const RadialNetwork& net, const ProjectionContext& ctx, const Vec& x,
                             const Vec& w_bar, const TangentVector& xi);

Vec known_injections(const RadialNetwork& net);  // w_bar = (p_bar, q_bar)

}  // namespace lf
