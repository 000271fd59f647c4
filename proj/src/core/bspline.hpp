// Quadratic B-spline interpolation stencil used by the particle <-> grid
// transfers. A particle at position x touches the 3x3x3 block of grid nodes
// starting at base = floor(x / dx - 0.5).
#pragma once

#include "vec.hpp"

namespace plastisim {

template <class T>
struct Interp {
  int base[3];  // lowest node index of the 3x3x3 stencil, per axis
  T fx[3];      // x * inv_dx - base, in [0.5, 1.5]
  T w[3][3];    // w[axis][offset]: per-axis weights, sum to 1
  T dw[3][3];   // d w / d fx (chain with inv_dx for d/dx)
};

template <class T>
inline Interp<T> make_interp(const Vec3<T>& x, T inv_dx) {
  Interp<T> it;
  for (int d = 0; d < 3; d++) {
    T xd = x[d] * inv_dx;
    T b = std::floor(xd - T(0.5));
    it.base[d] = int(b);
    T f = xd - b;
    it.fx[d] = f;
    // w0 = (1.5 - f)^2 / 2, w1 = 3/4 - (f - 1)^2, w2 = (f - 0.5)^2 / 2
    it.w[d][0] = T(0.5) * (T(1.5) - f) * (T(1.5) - f);
    it.w[d][1] = T(0.75) - (f - 1) * (f - 1);
    it.w[d][2] = T(0.5) * (f - T(0.5)) * (f - T(0.5));
    it.dw[d][0] = f - T(1.5);
    it.dw[d][1] = -2 * (f - 1);
    it.dw[d][2] = f - T(0.5);
  }
  return it;
}

}  // namespace plastisim
