// Hencky (logarithmic strain) elasticity with von Mises perfect plasticity.
// All the interesting work happens on the three singular values of the
// deformation gradient; the rotations U, V pass through unchanged.
#pragma once

#include "svd3.hpp"
#include "vec.hpp"

namespace plastisim {

// Log-strain from singular values.
template <class T>
inline Vec3<T> log_strain(const Vec3<T>& sigma) {
  return {std::log(sigma.x), std::log(sigma.y), std::log(sigma.z)};
}

// Project log strains onto the von Mises yield surface. The deviatoric part
// eps_hat = eps - mean(eps) is shrunk to norm yield_stress / (2 mu) if it
// exceeds it; the volumetric part (the trace) is untouched.
template <class T>
inline Vec3<T> von_mises_project(const Vec3<T>& eps, T yield_stress, T mu) {
  T mean = sum(eps) / 3;
  Vec3<T> eps_hat = eps - Vec3<T>(mean);
  T n = norm(eps_hat);
  T delta_gamma = n - yield_stress / (2 * mu);
  if (delta_gamma <= 0) return eps;
  return eps - (delta_gamma / n) * eps_hat;
}

// Pullback of von_mises_project: d_eps from d_eps_proj. The Jacobian is
// symmetric, so this is just J * d_eps_proj with
//   J = (1/3) 1 1^T + (k/n) (D - eps_hat eps_hat^T / n^2),  D = I - (1/3) 1 1^T
// on the plastic branch and the identity on the elastic branch.
template <class T>
inline Vec3<T> von_mises_project_vjp(const Vec3<T>& eps, T yield_stress, T mu,
                                     const Vec3<T>& d_eps_proj) {
  T mean = sum(eps) / 3;
  Vec3<T> eps_hat = eps - Vec3<T>(mean);
  T n = norm(eps_hat);
  T k = yield_stress / (2 * mu);
  if (n - k <= 0) return d_eps_proj;
  T g_mean = sum(d_eps_proj) / 3;
  Vec3<T> g_hat = d_eps_proj - Vec3<T>(g_mean);
  Vec3<T> dev = (k / n) * (g_hat - (dot(eps_hat, g_hat) / (n * n)) * eps_hat);
  return Vec3<T>(g_mean) + dev;
}

// Diagonal of the Kirchhoff stress in the U-basis: tau_i = 2 mu eps_i +
// lambda * tr(eps).
template <class T>
inline Vec3<T> kirchhoff_diag(const Vec3<T>& eps, T mu, T lambda) {
  T tr = sum(eps);
  return 2 * mu * eps + Vec3<T>(lambda * tr);
}

// Pullback of kirchhoff_diag (linear, symmetric coefficient matrix).
template <class T>
inline Vec3<T> kirchhoff_diag_vjp(T mu, T lambda, const Vec3<T>& d_tau) {
  T tr = sum(d_tau);
  return 2 * mu * d_tau + Vec3<T>(lambda * tr);
}

template <class T>
inline Mat3<T> reconstruct(const Mat3<T>& U, const Vec3<T>& diag, const Mat3<T>& V) {
  return U * Mat3<T>::diag(diag) * transpose(V);
}

// Full-tensor return map: F -> U exp(project(log sigma)) V^T.
template <class T>
inline Mat3<T> von_mises_return_map(const Mat3<T>& F, T yield_stress, T mu) {
  auto s = svd3(F);
  Vec3<T> eps = von_mises_project(log_strain(s.sigma), yield_stress, mu);
  Vec3<T> sig{std::exp(eps.x), std::exp(eps.y), std::exp(eps.z)};
  return reconstruct(s.U, sig, s.V);
}

// Full Kirchhoff stress tensor tau = U diag(tau_i) U^T for an (already
// projected) deformation gradient.
template <class T>
inline Mat3<T> kirchhoff_stress(const Mat3<T>& F, T mu, T lambda) {
  auto s = svd3(F);
  Vec3<T> tau = kirchhoff_diag(log_strain(s.sigma), mu, lambda);
  return reconstruct(s.U, tau, s.U);
}

}  // namespace plastisim
