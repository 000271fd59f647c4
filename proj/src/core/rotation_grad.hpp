// Pullbacks (vector-Jacobian products) for the quaternion / rotation
// operations in vec.hpp. Used by the reward gradients and the simulation
// adjoint wherever manipulator poses enter the computation.
#pragma once

#include "vec.hpp"

namespace plastisim {

template <class T>
inline Quat<T> qconj(const Quat<T>& q) { return {q.w, -q.x, -q.y, -q.z}; }

template <class T>
inline Quat<T> qadd(const Quat<T>& a, const Quat<T>& b) {
  return {a.w + b.w, a.x + b.x, a.y + b.y, a.z + b.z};
}

template <class T>
inline Quat<T> qscale(T s, const Quat<T>& q) {
  return {s * q.w, s * q.x, s * q.y, s * q.z};
}

template <class T>
inline T qdot(const Quat<T>& a, const Quat<T>& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

// c = a*b is bilinear; the exact pullbacks are quaternion products with one
// factor conjugated.
template <class T>
inline Quat<T> qmul_vjp_a(const Quat<T>& b, const Quat<T>& cbar) {
  return qmul(cbar, qconj(b));
}

template <class T>
inline Quat<T> qmul_vjp_b(const Quat<T>& a, const Quat<T>& cbar) {
  return qmul(qconj(a), cbar);
}

// y = q/|q|:  qbar = (ybar - y<y,ybar>)/|q|  (tangent-space projection).
template <class T>
inline Quat<T> qnormalized_vjp(const Quat<T>& q, const Quat<T>& ybar) {
  T n = qnorm(q);
  Quat<T> y = qscale(T(1) / n, q);
  return qscale(T(1) / n, qadd(ybar, qscale(-qdot(y, ybar), y)));
}

// qbar from Rbar for R = quat_to_mat(q): contract Rbar with dR/dq_k.
template <class T>
inline Quat<T> quat_to_mat_vjp(const Quat<T>& q, const Mat3<T>& rb) {
  T w = q.w, x = q.x, y = q.y, z = q.z;
  Quat<T> g;
  g.w = 2 * (-z * (rb(0, 1) - rb(1, 0)) + y * (rb(0, 2) - rb(2, 0)) -
             x * (rb(1, 2) - rb(2, 1)));
  g.x = 2 * (y * (rb(0, 1) + rb(1, 0)) + z * (rb(0, 2) + rb(2, 0)) -
             2 * x * (rb(1, 1) + rb(2, 2)) - w * (rb(1, 2) - rb(2, 1)));
  g.y = 2 * (x * (rb(0, 1) + rb(1, 0)) + z * (rb(1, 2) + rb(2, 1)) -
             2 * y * (rb(0, 0) + rb(2, 2)) + w * (rb(0, 2) - rb(2, 0)));
  g.z = 2 * (x * (rb(0, 2) + rb(2, 0)) + y * (rb(1, 2) + rb(2, 1)) -
             2 * z * (rb(0, 0) + rb(1, 1)) - w * (rb(0, 1) - rb(1, 0)));
  return g;
}

// y = R(q) v: vbar = R^T ybar, qbar via Rbar = ybar v^T.
template <class T>
inline void rotate_vjp(const Quat<T>& q, const Vec3<T>& v, const Vec3<T>& ybar,
                       Quat<T>& qbar, Vec3<T>& vbar) {
  vbar = rotate_inv(q, ybar);
  qbar = quat_to_mat_vjp(q, outer(ybar, v));
}

// y = R(q)^T v: vbar = R ybar, qbar via Rbar = v ybar^T.
template <class T>
inline void rotate_inv_vjp(const Quat<T>& q, const Vec3<T>& v,
                           const Vec3<T>& ybar, Quat<T>& qbar, Vec3<T>& vbar) {
  vbar = rotate(q, ybar);
  qbar = quat_to_mat_vjp(q, outer(v, ybar));
}

// Pullback of quat_integrate. The forward's omega = 0 early-return is a
// value-level shortcut; the map itself is smooth, so the backward always
// includes the normalization pullback (radial components of gbar must be
// annihilated to match finite differences of composed steps).
template <class T>
inline void quat_integrate_vjp(const Quat<T>& q, const Vec3<T>& omega, T dt,
                               const Quat<T>& gnew, Quat<T>& qbar,
                               Vec3<T>& omegabar) {
  T theta = norm(omega) * dt;
  T half = theta / 2;
  T k = (theta < T(1e-4)) ? (T(0.5) - theta * theta / 48) : std::sin(half) / theta;
  Quat<T> dq{std::cos(half), omega.x * dt * k, omega.y * dt * k, omega.z * dt * k};
  Quat<T> qq = qmul(dq, q);
  Quat<T> gqq = qnormalized_vjp(qq, gnew);
  Quat<T> gdq = qmul_vjp_a(q, gqq);
  qbar = qmul_vjp_b(dq, gqq);
  Vec3<T> gvec{gdq.x, gdq.y, gdq.z};
  if (theta == T(0)) {
    // lim: dcos/dtheta = 0, dk/dtheta = 0, so only the k*dt*omega term acts.
    omegabar = (k * dt) * gvec;
    return;
  }
  T dkdtheta = (theta < T(1e-4))
                   ? -theta / 24
                   : (half * std::cos(half) - std::sin(half)) / (theta * theta);
  T gtheta = gdq.w * (-std::sin(half) / 2) + dot(gvec, omega) * dt * dkdtheta;
  omegabar = (k * dt) * gvec + (gtheta * dt / norm(omega)) * omega;
}

}  // namespace plastisim
