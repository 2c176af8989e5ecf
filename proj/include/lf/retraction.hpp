#pragma once

#include "lf/manifold.hpp"

namespace lf {

enum class RetractionKind { BfmSweep, QeSphere, QeCurrent };

/// Forward-sweep retraction onto the BFM manifold. Input is the tangent-space
/// point x~ = x + alpha*xi (6J); p and q components of the input are ignored
/// and recomputed from the balance equations.
BfmPoint retract_bfm(const RadialNetwork& net, const TopoOrder& order, const Vec& x_tilde);

/// Sphere-normalization retraction onto the QE manifold (per line).
QePoint retract_qe_sphere(const RadialNetwork& net, const Vec& u_tilde);

/// Current-update retraction onto the QE manifold (per line).
QePoint retract_qe_current(const RadialNetwork& net, const Vec& u_tilde);

/// Applies the retraction selected by `kind`; for QE kinds the input must be
/// 4J, for the BFM sweep 6J.
Vec retract(RetractionKind kind, const RadialNetwork& net, const TopoOrder& order,
            const Vec& point_tilde);

struct RetractionCheck {
  double centering_error;             // ||R(0) - x||_inf
  std::vector<double> steps;          // h values
  std::vector<double> rigidity_defect;  // ||(R(h xi) - x)/h - xi||_inf per h
};

RetractionCheck check_retraction(RetractionKind kind, const RadialNetwork& net,
                                 const TopoOrder& order, const Vec& x, const Vec& xi,
                                 const std::vector<double>& steps);

}  // namespace lf
