// Simulation parameters and the particle / grid state containers.
#pragma once

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "collider.hpp"
#include "common.hpp"
#include "vec.hpp"

namespace plastisim {

template <class T>
struct SimParams {
  int n = 32;          // grid nodes per axis over the unit cube
  T dt = T(1e-4);      // substep length (s)
  int n_substeps = 19; // substeps per env step
  Vec3<T> gravity{0, T(-9.8), 0};
  T E = 5000, nu = T(0.2);
  T yield_stress = 50;
  T density = 1;
  T ppc = 8;           // particles per cell when sampling volumes
  T alpha = T(666.7);  // soft contact sharpness (1/length)
  T floor_friction = T(0.9);

  // Derived.
  T dx = 0, inv_dx = 0, mu = 0, lambda = 0, p_vol = 0, p_mass = 0, m_eps = 0;

  void finalize() {
    if (n < 8) fail(ErrorCode::Config, "grid resolution must be >= 8");
    if (!(nu > 0 && nu < T(0.5)))
      fail(ErrorCode::Config, "poisson ratio must be in (0, 0.5)");
    if (!(E > 0 && yield_stress > 0 && dt > 0 && n_substeps >= 1 && ppc > 0 &&
          density > 0 && alpha > 0))
      fail(ErrorCode::Config, "material/time parameters must be positive");
    dx = T(1) / T(n);
    inv_dx = T(n);
    mu = E / (2 * (1 + nu));
    lambda = E * nu / ((1 + nu) * (1 - 2 * nu));
    T spacing = dx / std::cbrt(ppc);
    p_vol = spacing * spacing * spacing;
    p_mass = density * p_vol;
    // Grid mass regularizer: a stencil-corner weight can underflow, leaving a
    // node with subnormal mass whose 1/m^2 adjoint term overflows in float.
    // The additive bias is below roundoff for any node carrying real mass;
    // the absolute floor keeps m_eps^2 inside the normal range.
    m_eps = std::max(T(1e-12) * p_mass,
                     4 * std::sqrt(std::numeric_limits<T>::min()));
  }

  // Particles always stay this far from the domain faces.
  T margin() const { return 2 * dx; }
};

template <class T>
struct Particles {
  std::vector<Vec3<T>> x, v;
  std::vector<Mat3<T>> F, C;

  size_t size() const { return x.size(); }
  void resize(size_t n) {
    x.resize(n);
    v.assign(n, Vec3<T>{});
    F.assign(n, Mat3<T>::identity());
    C.assign(n, Mat3<T>{});
  }
};

template <class T>
struct Grid {
  int n = 0;
  std::vector<Vec3<T>> v;  // momentum after p2g, velocity after grid_op
  std::vector<T> m;

  void resize(int n_) {
    n = n_;
    v.assign(size_t(n) * n * n, Vec3<T>{});
    m.assign(size_t(n) * n * n, T(0));
  }
  void clear() {
    std::memset(v.data(), 0, v.size() * sizeof(Vec3<T>));
    std::memset(m.data(), 0, m.size() * sizeof(T));
  }
  size_t idx(int i, int j, int k) const {
    return (size_t(i) * n + j) * n + k;
  }
};

}  // namespace plastisim
