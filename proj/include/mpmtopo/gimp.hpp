#pragma once

#include "mpmtopo/common.hpp"

#include <cmath>

namespace mpmtopo {

// One-dimensional generalized-interpolation basis for a particle with
// influence-domain length l on a grid of spacing h, evaluated at the
// relative coordinate delta = X_p - X_v. Five branches:
//   [A]  -h-l/2 < delta <= -h+l/2   quadratic ramp-in
//   [B]  -h+l/2 < delta <= -l/2     linear (matches the FE hat function)
//   [C]    -l/2 < delta <=  l/2     quadratic cap
//   [D]     l/2 < delta <=  h-l/2   linear (matches the FE hat function)
//   [E]   h-l/2 < delta <=  h+l/2   quadratic ramp-out
// Zero outside |delta| <= h + l/2. C^1 in delta throughout.
//
// All five partial derivatives used by the solver and the adjoint chain are
// provided; the second derivative in delta is piecewise constant (the basis
// is C^1, not C^2, so d2_dd is discontinuous at the branch points).
struct GimpValue1d {
  double s = 0.0;     // S
  double d_dd = 0.0;  // dS/d(delta)
  double d_dl = 0.0;  // dS/dl
  double d2_dd = 0.0; // d2S/d(delta)^2
  double d2_ddl = 0.0; // d2S/d(delta)dl
};

inline GimpValue1d gimp_eval_1d(double delta, double h, double l) {
  GimpValue1d r;
  const double hl = h * l;
  if (delta <= -h - 0.5 * l || delta > h + 0.5 * l) {
    return r;
  }
  if (delta <= -h + 0.5 * l) {  // [A]
    const double a = h + 0.5 * l + delta;
    r.s = a * a / (2.0 * hl);
    r.d_dd = a / hl;
    r.d_dl = a / (2.0 * hl) - a * a / (2.0 * h * l * l);
    r.d2_dd = 1.0 / hl;
    r.d2_ddl = 0.5 / hl - a / (h * l * l);
  } else if (delta <= -0.5 * l) {  // [B]
    r.s = 1.0 + delta / h;
    r.d_dd = 1.0 / h;
  } else if (delta <= 0.5 * l) {  // [C]
    r.s = 1.0 - (delta * delta + 0.25 * l * l) / hl;
    r.d_dd = -2.0 * delta / hl;
    r.d_dl = delta * delta / (h * l * l) - 0.25 / h;
    r.d2_dd = -2.0 / hl;
    r.d2_ddl = 2.0 * delta / (h * l * l);
  } else if (delta <= h - 0.5 * l) {  // [D]
    r.s = 1.0 - delta / h;
    r.d_dd = -1.0 / h;
  } else {  // [E]
    const double e = h + 0.5 * l - delta;
    r.s = e * e / (2.0 * hl);
    r.d_dd = -e / hl;
    r.d_dl = e / (2.0 * hl) - e * e / (2.0 * h * l * l);
    r.d2_dd = 1.0 / hl;
    r.d2_ddl = -0.5 / hl + e / (h * l * l);
  }
  return r;
}

inline double gimp_basis_1d(double delta, double h, double l) {
  return gimp_eval_1d(delta, h, l).s;
}

inline double gimp_grad_1d(double delta, double h, double l) {
  return gimp_eval_1d(delta, h, l).d_dd;
}

// Product-form 2D shape value and gradient for a particle at `pos` with
// domain lengths `len` relative to a node at `node`.
struct GimpShape2d {
  double S = 0.0;
  Vec2 grad = Vec2::Zero();
};

inline GimpShape2d gimp_shape_and_grad(const Vec2& pos, const Vec2& node, double h, const Vec2& len) {
  const GimpValue1d sx = gimp_eval_1d(pos.x() - node.x(), h, len.x());
  const GimpValue1d sy = gimp_eval_1d(pos.y() - node.y(), h, len.y());
  GimpShape2d out;
  out.S = sx.s * sy.s;
  out.grad = Vec2(sx.d_dd * sy.s, sx.s * sy.d_dd);
  return out;
}

}  // namespace mpmtopo
