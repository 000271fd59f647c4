// Small fixed-size linear algebra for the simulator: 3-vectors, 3x3 matrices,
// quaternions. Everything is templated on the scalar type so the whole engine
// can be instantiated in float32 (speed) or float64 (gradient checks).
#pragma once

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <array>

namespace plastisim {

template <class T>
struct Vec3 {
  T x = 0, y = 0, z = 0;

  Vec3() = default;
  Vec3(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}
  explicit Vec3(T s) : x(s), y(s), z(s) {}

  T& operator[](int i) { return (&x)[i]; }
  T operator[](int i) const { return (&x)[i]; }

  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(T s) { x *= s; y *= s; z *= s; return *this; }
};

template <class T> inline Vec3<T> operator+(Vec3<T> a, const Vec3<T>& b) { return a += b; }
template <class T> inline Vec3<T> operator-(Vec3<T> a, const Vec3<T>& b) { return a -= b; }
template <class T> inline Vec3<T> operator-(const Vec3<T>& a) { return {-a.x, -a.y, -a.z}; }
template <class T> inline Vec3<T> operator*(Vec3<T> a, T s) { return a *= s; }
template <class T> inline Vec3<T> operator*(T s, Vec3<T> a) { return a *= s; }
template <class T> inline Vec3<T> operator/(Vec3<T> a, T s) { return a *= T(1) / s; }

template <class T> inline T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
template <class T> inline Vec3<T> cross(const Vec3<T>& a, const Vec3<T>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
template <class T> inline T norm_sq(const Vec3<T>& a) { return dot(a, a); }
template <class T> inline T norm(const Vec3<T>& a) { return std::sqrt(norm_sq(a)); }
template <class T> inline Vec3<T> normalized(const Vec3<T>& a) { return a / norm(a); }
template <class T> inline Vec3<T> cwise_mul(const Vec3<T>& a, const Vec3<T>& b) {
  return {a.x * b.x, a.y * b.y, a.z * b.z};
}
template <class T> inline T sum(const Vec3<T>& a) { return a.x + a.y + a.z; }
template <class T> inline T max_abs(const Vec3<T>& a) {
  return std::max({std::abs(a.x), std::abs(a.y), std::abs(a.z)});
}
template <class T> inline bool all_finite(const Vec3<T>& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

// Row-major 3x3 matrix; m(r, c).
template <class T>
struct Mat3 {
  T m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

  Mat3() = default;
  explicit Mat3(T diag) {
    m[0][0] = m[1][1] = m[2][2] = diag;
  }
  Mat3(T a00, T a01, T a02, T a10, T a11, T a12, T a20, T a21, T a22) {
    m[0][0] = a00; m[0][1] = a01; m[0][2] = a02;
    m[1][0] = a10; m[1][1] = a11; m[1][2] = a12;
    m[2][0] = a20; m[2][1] = a21; m[2][2] = a22;
  }

  static Mat3 identity() { return Mat3(T(1)); }
  static Mat3 diag(const Vec3<T>& d) {
    Mat3 r;
    r.m[0][0] = d.x; r.m[1][1] = d.y; r.m[2][2] = d.z;
    return r;
  }

  T& operator()(int r, int c) { return m[r][c]; }
  T operator()(int r, int c) const { return m[r][c]; }

  Vec3<T> row(int r) const { return {m[r][0], m[r][1], m[r][2]}; }
  Vec3<T> col(int c) const { return {m[0][c], m[1][c], m[2][c]}; }
  void set_col(int c, const Vec3<T>& v) { m[0][c] = v.x; m[1][c] = v.y; m[2][c] = v.z; }

  Mat3& operator+=(const Mat3& o) {
    for (int r = 0; r < 3; r++)
      for (int c = 0; c < 3; c++) m[r][c] += o.m[r][c];
    return *this;
  }
  Mat3& operator-=(const Mat3& o) {
    for (int r = 0; r < 3; r++)
      for (int c = 0; c < 3; c++) m[r][c] -= o.m[r][c];
    return *this;
  }
  Mat3& operator*=(T s) {
    for (int r = 0; r < 3; r++)
      for (int c = 0; c < 3; c++) m[r][c] *= s;
    return *this;
  }
};

template <class T> inline Mat3<T> operator+(Mat3<T> a, const Mat3<T>& b) { return a += b; }
template <class T> inline Mat3<T> operator-(Mat3<T> a, const Mat3<T>& b) { return a -= b; }
template <class T> inline Mat3<T> operator*(Mat3<T> a, T s) { return a *= s; }
template <class T> inline Mat3<T> operator*(T s, Mat3<T> a) { return a *= s; }

template <class T>
inline Vec3<T> operator*(const Mat3<T>& a, const Vec3<T>& v) {
  return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
          a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
          a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}

template <class T>
inline Mat3<T> operator*(const Mat3<T>& a, const Mat3<T>& b) {
  Mat3<T> r;
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++)
      r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
  return r;
}

template <class T>
inline Mat3<T> transpose(const Mat3<T>& a) {
  Mat3<T> r;
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++) r(i, j) = a(j, i);
  return r;
}

template <class T>
inline T det(const Mat3<T>& a) {
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

template <class T>
inline T trace(const Mat3<T>& a) { return a(0, 0) + a(1, 1) + a(2, 2); }

// a b^T
template <class T>
inline Mat3<T> outer(const Vec3<T>& a, const Vec3<T>& b) {
  Mat3<T> r;
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++) r(i, j) = a[i] * b[j];
  return r;
}

// tr(a^T b), the Frobenius inner product
template <class T>
inline T ddot(const Mat3<T>& a, const Mat3<T>& b) {
  T s = 0;
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++) s += a(i, j) * b(i, j);
  return s;
}

template <class T>
inline T max_abs(const Mat3<T>& a) {
  T s = 0;
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++) s = std::max(s, std::abs(a(i, j)));
  return s;
}

template <class T>
inline bool all_finite(const Mat3<T>& a) {
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++)
      if (!std::isfinite(a(i, j))) return false;
  return true;
}

// Unit quaternion (w, x, y, z); identity is (1, 0, 0, 0).
template <class T>
struct Quat {
  T w = 1, x = 0, y = 0, z = 0;

  Quat() = default;
  Quat(T w_, T x_, T y_, T z_) : w(w_), x(x_), y(y_), z(z_) {}

  T& operator[](int i) { return (&w)[i]; }
  T operator[](int i) const { return (&w)[i]; }
};

template <class T>
inline Quat<T> qmul(const Quat<T>& a, const Quat<T>& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

template <class T>
inline T qnorm(const Quat<T>& q) {
  return std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
}

template <class T>
inline Quat<T> qnormalized(const Quat<T>& q) {
  T inv = T(1) / qnorm(q);
  return {q.w * inv, q.x * inv, q.y * inv, q.z * inv};
}

template <class T>
inline Mat3<T> quat_to_mat(const Quat<T>& q) {
  T w = q.w, x = q.x, y = q.y, z = q.z;
  return Mat3<T>(1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                 2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                 2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y));
}

// R(q) v without building the matrix.
template <class T>
inline Vec3<T> rotate(const Quat<T>& q, const Vec3<T>& v) {
  Vec3<T> u{q.x, q.y, q.z};
  Vec3<T> t = T(2) * cross(u, v);
  return v + q.w * t + cross(u, t);
}

// R(q)^T v
template <class T>
inline Vec3<T> rotate_inv(const Quat<T>& q, const Vec3<T>& v) {
  return rotate(Quat<T>{q.w, -q.x, -q.y, -q.z}, v);
}

// Exponential-map integration: q' = exp(omega * dt / 2) * q, renormalized.
// omega = 0 returns q unchanged.
template <class T>
inline Quat<T> quat_integrate(const Quat<T>& q, const Vec3<T>& omega, T dt) {
  T theta = norm(omega) * dt;
  if (theta == T(0)) return q;
  T half = theta / 2;
  // sin(half)/theta, series for small angles
  T k = (theta < T(1e-4)) ? (T(0.5) - theta * theta / 48) : std::sin(half) / theta;
  Quat<T> dq{std::cos(half), omega.x * dt * k, omega.y * dt * k, omega.z * dt * k};
  return qnormalized(qmul(dq, q));
}

using Vec3f = Vec3<float>;
using Vec3d = Vec3<double>;
using Mat3f = Mat3<float>;
using Mat3d = Mat3<double>;

}  // namespace plastisim
