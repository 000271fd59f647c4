// 3x3 singular value decomposition (one-sided Jacobi) and its reverse-mode
// gradient. M = U * diag(sigma) * V^T with sigma sorted descending, sigma >= 0,
// det(V) = +1. U may have det -1 when det(M) < 0.
#pragma once

#include <limits>

#include "vec.hpp"

namespace plastisim {

template <class T>
struct Svd3 {
  Mat3<T> U;
  Vec3<T> sigma;
  Mat3<T> V;
};

namespace detail {

// Pick any unit vector orthogonal to u.
template <class T>
inline Vec3<T> any_orthonormal(const Vec3<T>& u) {
  Vec3<T> a = std::abs(u.x) < T(0.5) ? Vec3<T>{1, 0, 0} : Vec3<T>{0, 1, 0};
  return normalized(cross(u, a));
}

}  // namespace detail

template <class T>
inline Svd3<T> svd3(const Mat3<T>& M) {
  // One-sided Jacobi: orthogonalize the columns of B = M * V by Givens
  // rotations accumulated into V. Then B's column norms are the singular
  // values and its normalized columns form U.
  Mat3<T> B = M;
  Mat3<T> V = Mat3<T>::identity();
  const T eps = T(16) * std::numeric_limits<T>::epsilon();

  for (int sweep = 0; sweep < 30; sweep++) {
    T off = 0;
    for (int p = 0; p < 2; p++) {
      for (int q = p + 1; q < 3; q++) {
        Vec3<T> bp = B.col(p), bq = B.col(q);
        T app = norm_sq(bp), aqq = norm_sq(bq), apq = dot(bp, bq);
        if (apq * apq <= eps * eps * app * aqq) continue;
        off = std::max(off, std::abs(apq));
        // Givens rotation zeroing the (p, q) inner product.
        T zeta = (aqq - app) / (2 * apq);
        T t = (zeta >= 0 ? T(1) : T(-1)) /
              (std::abs(zeta) + std::sqrt(1 + zeta * zeta));
        T c = T(1) / std::sqrt(1 + t * t);
        T s = c * t;
        B.set_col(p, c * bp - s * bq);
        B.set_col(q, s * bp + c * bq);
        Vec3<T> vp = V.col(p), vq = V.col(q);
        V.set_col(p, c * vp - s * vq);
        V.set_col(q, s * vp + c * vq);
      }
    }
    if (off == T(0)) break;
  }

  Vec3<T> sigma{norm(B.col(0)), norm(B.col(1)), norm(B.col(2))};

  // Sort descending; swap columns of B and V in tandem so M = B V^T holds.
  // Each swap flips det(V); compensate at the end by negating the last pair.
  int swaps = 0;
  auto swap_cols = [&](int i, int j) {
    Vec3<T> bi = B.col(i), vi = V.col(i);
    B.set_col(i, B.col(j)); V.set_col(i, V.col(j));
    B.set_col(j, bi); V.set_col(j, vi);
    std::swap(sigma[i], sigma[j]);
    swaps++;
  };
  if (sigma[0] < sigma[1]) swap_cols(0, 1);
  if (sigma[1] < sigma[2]) swap_cols(1, 2);
  if (sigma[0] < sigma[1]) swap_cols(0, 1);
  if (swaps % 2 == 1) {
    B.set_col(2, -B.col(2));
    V.set_col(2, -V.col(2));
  }

  // U from normalized columns; rebuild degenerate directions orthogonally.
  Mat3<T> U;
  const T tiny = std::numeric_limits<T>::min() * T(16);
  Vec3<T> u0, u1, u2;
  if (sigma[0] > tiny) {
    u0 = B.col(0) / sigma[0];
  } else {
    u0 = {1, 0, 0};
  }
  if (sigma[1] > tiny * std::max(T(1), sigma[0])) {
    u1 = B.col(1) / sigma[1];
  } else {
    u1 = detail::any_orthonormal(u0);
  }
  if (sigma[2] > tiny * std::max(T(1), sigma[0])) {
    u2 = B.col(2) / sigma[2];
  } else {
    u2 = cross(u0, u1);
  }
  U.set_col(0, u0);
  U.set_col(1, u1);
  U.set_col(2, u2);
  return {U, sigma, V};
}

// Reverse-mode gradient of svd3. Given upstream gradients (dU, dsigma, dV)
// with respect to the outputs, returns the gradient with respect to M:
//
//   dM = U * Q * V^T
//   Q_ii = dsigma_i
//   Q_ij = (gu * s_j + gv * s_i) / d_ij    (i < j)
//   Q_ji = (gu * s_i + gv * s_j) / d_ij
//
// where gu/gv are the antisymmetric parts of U^T dU and V^T dV and
// d_ij = (s_j - s_i)(s_j + s_i). Each factor of d_ij is pushed away from
// zero to magnitude >= 1e-6 (preserving its sign) so nearly repeated
// singular values give a large-but-finite gradient instead of infinity.
template <class T>
inline Mat3<T> svd3_vjp(const Mat3<T>& U, const Vec3<T>& sigma, const Mat3<T>& V,
                        const Mat3<T>& dU, const Vec3<T>& dsigma, const Mat3<T>& dV) {
  auto clamp_away = [](T x) {
    const T lo = T(1e-6);
    if (x >= 0) return std::max(x, lo);
    return std::min(x, -lo);
  };
  Mat3<T> GU = transpose(U) * dU;
  Mat3<T> GV = transpose(V) * dV;
  Mat3<T> Q = Mat3<T>::diag(dsigma);
  for (int i = 0; i < 2; i++) {
    for (int j = i + 1; j < 3; j++) {
      T gu = GU(i, j) - GU(j, i);
      T gv = GV(i, j) - GV(j, i);
      T denom = clamp_away(sigma[j] - sigma[i]) * clamp_away(sigma[j] + sigma[i]);
      Q(i, j) = (gu * sigma[j] + gv * sigma[i]) / denom;
      Q(j, i) = (gu * sigma[i] + gv * sigma[j]) / denom;
    }
  }
  return U * Q * transpose(V);
}

}  // namespace plastisim
