// Rigid kinematic manipulators: signed distance fields in a posed local
// frame, Coulomb friction projection of grid velocities, and the softened
// contact blending used for gradient computation.
#pragma once

#include <cstdint>

#include "vec.hpp"

namespace plastisim {

enum class ShapeKind { Sphere, Capsule, Box, Torus };
enum class ContactMode { Hard, Soft };

// Soft contact acts on nodes with sdf < kSoftCutoff / alpha (beyond that the
// blend factor is below exp(-3) ~ 0.05 and is dropped to bound work).
inline constexpr double kSoftCutoff = 3.0;

template <class T>
struct Manipulator {
  ShapeKind kind = ShapeKind::Sphere;
  // sphere: (r, -, -); capsule: (r, half_len, -) axis along local y;
  // box: half extents; torus: (ring_radius, tube_radius, -) axis along local y.
  Vec3<T> size{};
  T friction = T(0.9);
  int dof = 3;              // 0 static, 3 translation, 6 translation+rotation
  uint32_t dof_mask = 0x7;  // which of the dof slots the action vector exposes
  Vec3<T> pos{};
  Quat<T> rot{};
  Vec3<T> lin_vel{};  // commanded velocities, held fixed within an env step
  Vec3<T> ang_vel{};

  int action_dim() const {
    int c = 0;
    for (int i = 0; i < dof; i++) c += (dof_mask >> i) & 1;
    return c;
  }
};

// ---------------------------------------------------------------------------
// Local-frame SDFs. All are exact distances; gradients are unit vectors away
// from the measure-zero medial axis. The Hessian (gradient of the normal) is
// needed by the contact adjoint: node positions are fixed, but the normal
// moves when the manipulator does.

template <class T>
inline T sdf_local(ShapeKind kind, const Vec3<T>& size, const Vec3<T>& p) {
  switch (kind) {
    case ShapeKind::Sphere:
      return norm(p) - size.x;
    case ShapeKind::Capsule: {
      T y = std::clamp(p.y, -size.y, size.y);
      return norm(Vec3<T>{p.x, p.y - y, p.z}) - size.x;
    }
    case ShapeKind::Box: {
      Vec3<T> q{std::abs(p.x) - size.x, std::abs(p.y) - size.y,
                std::abs(p.z) - size.z};
      Vec3<T> qp{std::max(q.x, T(0)), std::max(q.y, T(0)), std::max(q.z, T(0))};
      return norm(qp) + std::min(std::max({q.x, q.y, q.z}), T(0));
    }
    case ShapeKind::Torus: {
      T rho = std::sqrt(p.x * p.x + p.z * p.z);
      T qx = rho - size.x;
      return std::sqrt(qx * qx + p.y * p.y) - size.y;
    }
  }
  return 0;
}

// Unit gradient of sdf_local. Falls back to +y at degenerate points (shape
// centers / axes) so downstream code always sees a unit vector.
template <class T>
inline Vec3<T> sdf_grad_local(ShapeKind kind, const Vec3<T>& size, const Vec3<T>& p) {
  const T tiny = T(1e-12);
  switch (kind) {
    case ShapeKind::Sphere: {
      T r = norm(p);
      if (r < tiny) return {0, 1, 0};
      return p / r;
    }
    case ShapeKind::Capsule: {
      T y = std::clamp(p.y, -size.y, size.y);
      Vec3<T> q{p.x, p.y - y, p.z};
      T r = norm(q);
      if (r < tiny) return {0, 1, 0};
      return q / r;
    }
    case ShapeKind::Box: {
      Vec3<T> a{std::abs(p.x), std::abs(p.y), std::abs(p.z)};
      Vec3<T> q = a - size;
      Vec3<T> s{p.x < 0 ? T(-1) : T(1), p.y < 0 ? T(-1) : T(1),
                p.z < 0 ? T(-1) : T(1)};
      if (q.x > 0 || q.y > 0 || q.z > 0) {
        Vec3<T> qp{std::max(q.x, T(0)), std::max(q.y, T(0)), std::max(q.z, T(0))};
        T r = norm(qp);
        if (r < tiny) return {0, 1, 0};
        return cwise_mul(s, qp / r);
      }
      // Inside: normal of the nearest face.
      int k = 0;
      if (q.y > q[k]) k = 1;
      if (q.z > q[k]) k = 2;
      Vec3<T> n{};
      n[k] = s[k];
      return n;
    }
    case ShapeKind::Torus: {
      T rho = std::sqrt(p.x * p.x + p.z * p.z);
      if (rho < tiny) return {0, p.y >= 0 ? T(1) : T(-1), 0};
      T qx = rho - size.x;
      T qn = std::sqrt(qx * qx + p.y * p.y);
      if (qn < tiny) return {0, 1, 0};
      T gx = qx / qn, gy = p.y / qn;
      return {gx * p.x / rho, gy, gx * p.z / rho};
    }
  }
  return {0, 1, 0};
}

// Second derivative of sdf_local (the Jacobian of the unit normal). Piecewise
// smooth; returns the branch-consistent value away from degenerate loci.
template <class T>
inline Mat3<T> sdf_hess_local(ShapeKind kind, const Vec3<T>& size, const Vec3<T>& p) {
  const T tiny = T(1e-9);
  switch (kind) {
    case ShapeKind::Sphere: {
      T r = norm(p);
      if (r < tiny) return Mat3<T>();
      Vec3<T> n = p / r;
      return (T(1) / r) * (Mat3<T>::identity() - outer(n, n));
    }
    case ShapeKind::Capsule: {
      T y = std::clamp(p.y, -size.y, size.y);
      bool cap = std::abs(p.y) > size.y;
      Vec3<T> q{p.x, p.y - y, p.z};
      T r = norm(q);
      if (r < tiny) return Mat3<T>();
      Vec3<T> n = q / r;
      Mat3<T> P = Mat3<T>::identity();
      if (!cap) P(1, 1) = 0;  // cylinder region: distance ignores y
      return (T(1) / r) * (P - outer(n, n));
    }
    case ShapeKind::Box: {
      Vec3<T> q{std::abs(p.x) - size.x, std::abs(p.y) - size.y,
                std::abs(p.z) - size.z};
      if (q.x <= 0 && q.y <= 0 && q.z <= 0) return Mat3<T>();  // face region
      Vec3<T> qp{std::max(q.x, T(0)), std::max(q.y, T(0)), std::max(q.z, T(0))};
      T r = norm(qp);
      if (r < tiny) return Mat3<T>();
      Vec3<T> s{p.x < 0 ? T(-1) : T(1), p.y < 0 ? T(-1) : T(1),
                p.z < 0 ? T(-1) : T(1)};
      Mat3<T> P;  // projector onto the active (outside) axes
      for (int i = 0; i < 3; i++) P(i, i) = q[i] > 0 ? T(1) : T(0);
      Vec3<T> u = qp / r;
      Mat3<T> H2 = (T(1) / r) * (P - outer(u, u));
      // Conjugate by the reflection diag(s): H = S H2 S.
      Mat3<T> H;
      for (int i = 0; i < 3; i++)
        for (int j = 0; j < 3; j++) H(i, j) = s[i] * H2(i, j) * s[j];
      return H;
    }
    case ShapeKind::Torus: {
      T rho = std::sqrt(p.x * p.x + p.z * p.z);
      if (rho < tiny) return Mat3<T>();
      T qx = rho - size.x;
      T qn = std::sqrt(qx * qx + p.y * p.y);
      if (qn < tiny) return Mat3<T>();
      Vec3<T> c{p.x / rho, 0, p.z / rho};  // radial direction in the xz plane
      T nx = qx / qn, ny = p.y / qn;       // 2D unit normal in (rho, y)
      // 2D Hessian of |q| conjugated into 3D, plus the curvature of rho.
      T h00 = (1 - nx * nx) / qn, h01 = -nx * ny / qn, h11 = (1 - ny * ny) / qn;
      Vec3<T> ey{0, 1, 0};
      Mat3<T> H = h00 * outer(c, c) + h01 * (outer(c, ey) + outer(ey, c)) +
                  h11 * outer(ey, ey);
      Mat3<T> Pxz;
      Pxz(0, 0) = 1;
      Pxz(2, 2) = 1;
      H += (nx / rho) * (Pxz - outer(c, c));
      return H;
    }
  }
  return Mat3<T>();
}

// ---------------------------------------------------------------------------
// World-frame queries through the pose.

template <class T>
inline Vec3<T> to_local(const Manipulator<T>& m, const Vec3<T>& x) {
  return rotate_inv(m.rot, x - m.pos);
}

template <class T>
inline T sdf(const Manipulator<T>& m, const Vec3<T>& x) {
  return sdf_local(m.kind, m.size, to_local(m, x));
}

template <class T>
inline Vec3<T> sdf_normal(const Manipulator<T>& m, const Vec3<T>& x) {
  return rotate(m.rot, sdf_grad_local(m.kind, m.size, to_local(m, x)));
}

// Velocity of the rigid body at world point x: v + omega x (x - pos).
template <class T>
inline Vec3<T> collider_point_velocity(const Manipulator<T>& m, const Vec3<T>& x) {
  return m.lin_vel + cross(m.ang_vel, x - m.pos);
}

// ---------------------------------------------------------------------------
// Coulomb friction projection of a grid velocity against a collider moving
// at v_col with surface normal n. In the collider frame u = v - v_col:
// separating nodes (u.n >= 0) pass through; approaching nodes lose the
// normal component and the tangential part shrinks by the friction cone,
// sticking completely when friction * |u_n| >= |u_t|.
template <class T>
inline Vec3<T> project_coulomb(const Vec3<T>& v, const Vec3<T>& v_col,
                               const Vec3<T>& n, T friction) {
  Vec3<T> u = v - v_col;
  T un = dot(u, n);
  if (un >= 0) return v;
  Vec3<T> ut = u - un * n;
  T nt = norm(ut);
  if (nt <= friction * (-un) || nt < T(1e-30)) return v_col;  // sticking
  T scale = 1 + friction * un / nt;  // un < 0, so this is 1 - friction|un|/nt
  return v_col + scale * ut;
}

// Blend factor for softened contact: s = min(exp(-alpha d), 1).
template <class T>
inline T soft_blend_weight(T d, T alpha) {
  return d <= 0 ? T(1) : std::exp(-alpha * d);
}

// Velocity of a grid node at x after contact with manipulator m.
// Hard mode: full projection for nodes within `hard_margin` of the surface.
// Soft mode: v <- s * v_proj + (1 - s) * v for nodes within the cutoff.
template <class T>
inline Vec3<T> apply_contact(const Manipulator<T>& m, const Vec3<T>& x,
                             const Vec3<T>& v, ContactMode mode, T alpha,
                             T hard_margin) {
  T d = sdf(m, x);
  if (mode == ContactMode::Hard) {
    if (d >= hard_margin) return v;
    Vec3<T> n = sdf_normal(m, x);
    return project_coulomb(v, collider_point_velocity(m, x), n, m.friction);
  }
  if (d >= T(kSoftCutoff) / alpha) return v;
  Vec3<T> n = sdf_normal(m, x);
  Vec3<T> vp = project_coulomb(v, collider_point_velocity(m, x), n, m.friction);
  T s = soft_blend_weight(d, alpha);
  return s * vp + (1 - s) * v;
}

}  // namespace plastisim
