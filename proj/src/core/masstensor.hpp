// Mass tensors (density fields splatted onto a regular grid), the soft IoU
// metrics defined on them, and the signed distance transform of a target
// tensor.
#pragma once

#include <vector>

#include "bspline.hpp"
#include "common.hpp"
#include "vec.hpp"

namespace plastisim {

template <class T>
struct MassTensor {
  int n = 0;
  std::vector<T> m;

  void resize(int n_) {
    n = n_;
    m.assign(size_t(n) * n * n, T(0));
  }
  size_t idx(int i, int j, int k) const { return (size_t(i) * n + j) * n + k; }
  T total() const {
    T s = 0;
    for (T v : m) s += v;
    return s;
  }
  T max_value() const {
    T s = 0;
    for (T v : m) s = std::max(s, v);
    return s;
  }
};

// Quadratic B-spline splat of equal-mass particles. Stencil cells are
// clamped into the tensor so no mass is ever lost at the border.
template <class T>
void splat_mass(const std::vector<Vec3<T>>& xs, T p_mass, MassTensor<T>& out) {
  const T inv_h = T(out.n);
  for (const auto& x : xs) {
    Interp<T> it = make_interp(x, inv_h);
    for (int i = 0; i < 3; i++) {
      int ci = std::clamp(it.base[0] + i, 0, out.n - 1);
      for (int j = 0; j < 3; j++) {
        int cj = std::clamp(it.base[1] + j, 0, out.n - 1);
        T wij = it.w[0][i] * it.w[1][j];
        for (int k = 0; k < 3; k++) {
          int ck = std::clamp(it.base[2] + k, 0, out.n - 1);
          out.m[out.idx(ci, cj, ck)] += p_mass * wij * it.w[2][k];
        }
      }
    }
  }
}

// Pullback of splat_mass composed with a per-cell gradient field g:
// given dL/dS = g, accumulates dL/dx_p for every particle.
template <class T>
void splat_mass_vjp(const std::vector<Vec3<T>>& xs, T p_mass,
                    const MassTensor<T>& grad_cells, std::vector<Vec3<T>>& dx) {
  const T inv_h = T(grad_cells.n);
  const int n = grad_cells.n;
  for (size_t p = 0; p < xs.size(); p++) {
    Interp<T> it = make_interp(xs[p], inv_h);
    Vec3<T> acc{};
    for (int i = 0; i < 3; i++) {
      int ci = std::clamp(it.base[0] + i, 0, n - 1);
      for (int j = 0; j < 3; j++) {
        int cj = std::clamp(it.base[1] + j, 0, n - 1);
        for (int k = 0; k < 3; k++) {
          int ck = std::clamp(it.base[2] + k, 0, n - 1);
          T g = grad_cells.m[grad_cells.idx(ci, cj, ck)];
          if (g == 0) continue;
          // d(w_i w_j w_k)/dx, chained with inv_h per axis.
          acc.x += g * it.dw[0][i] * it.w[1][j] * it.w[2][k];
          acc.y += g * it.w[0][i] * it.dw[1][j] * it.w[2][k];
          acc.z += g * it.w[0][i] * it.w[1][j] * it.dw[2][k];
        }
      }
    }
    dx[p] += (p_mass * inv_h) * acc;
  }
}

// Soft IoU of two nonnegative tensors: each is normalized by its own maximum,
// then sum(a*b) / sum(a + b - a*b). Equals classical IoU on binary tensors.
template <class T>
T soft_iou(const MassTensor<T>& s1, const MassTensor<T>& s2) {
  T m1 = s1.max_value(), m2 = s2.max_value();
  if (m1 <= 0 || m2 <= 0)
    fail(ErrorCode::Invalid, "soft_iou of an all-zero mass tensor is undefined");
  if (s1.m.size() != s2.m.size())
    fail(ErrorCode::Invalid, "soft_iou tensor size mismatch");
  T inter = 0, uni = 0;
  for (size_t i = 0; i < s1.m.size(); i++) {
    T a = s1.m[i] / m1, b = s2.m[i] / m2;
    inter += a * b;
    uni += a + b - a * b;
  }
  return inter / uni;
}

// (IoU(St, Sg) - IoU(S0, Sg)) / (1 - IoU(S0, Sg)); 1 when the target is
// reached, 0 when nothing moved, negative when things got worse.
template <class T>
T normalized_incremental_iou(const MassTensor<T>& s0, const MassTensor<T>& st,
                             const MassTensor<T>& sg) {
  T base = soft_iou(s0, sg);
  if (base >= 1)
    fail(ErrorCode::Invalid, "initial shape already matches the target");
  return (soft_iou(st, sg) - base) / (1 - base);
}

namespace detail {

// 1D squared Euclidean distance transform (lower envelope of parabolas).
template <class T>
void edt_1d(const std::vector<T>& f, std::vector<T>& d, std::vector<int>& v,
            std::vector<T>& z) {
  const int n = int(f.size());
  const T inf = std::numeric_limits<T>::max() / 4;
  int k = 0;
  v[0] = 0;
  z[0] = -inf;
  z[1] = inf;
  for (int q = 1; q < n; q++) {
    T s;
    while (true) {
      int p = v[k];
      s = ((f[q] + q * T(q)) - (f[p] + p * T(p))) / (2 * q - 2 * p);
      if (s > z[k]) break;
      k--;
    }
    k++;
    v[k] = q;
    z[k] = s;
    z[k + 1] = inf;
  }
  k = 0;
  for (int q = 0; q < n; q++) {
    while (z[k + 1] < q) k++;
    T dq = q - T(v[k]);
    d[q] = dq * dq + f[v[k]];
  }
}

// Squared distance (in cells) from every cell to the nearest seed cell.
template <class T>
void edt_3d(int n, std::vector<T>& field) {
  std::vector<T> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  // z-axis, then y, then x.
  for (int i = 0; i < n; i++)
    for (int j = 0; j < n; j++) {
      for (int k = 0; k < n; k++) f[k] = field[(size_t(i) * n + j) * n + k];
      edt_1d(f, d, v, z);
      for (int k = 0; k < n; k++) field[(size_t(i) * n + j) * n + k] = d[k];
    }
  for (int i = 0; i < n; i++)
    for (int k = 0; k < n; k++) {
      for (int j = 0; j < n; j++) f[j] = field[(size_t(i) * n + j) * n + k];
      edt_1d(f, d, v, z);
      for (int j = 0; j < n; j++) field[(size_t(i) * n + j) * n + k] = d[j];
    }
  for (int j = 0; j < n; j++)
    for (int k = 0; k < n; k++) {
      for (int i = 0; i < n; i++) f[i] = field[(size_t(i) * n + j) * n + k];
      edt_1d(f, d, v, z);
      for (int i = 0; i < n; i++) field[(size_t(i) * n + j) * n + k] = d[i];
    }
}

}  // namespace detail

// Signed distance field of a target mass tensor, in scene units (cells are
// 1/n wide). Occupancy threshold: half the maximum entry. Negative inside.
template <class T>
MassTensor<T> target_sdf(const MassTensor<T>& sg) {
  T mx = sg.max_value();
  if (mx <= 0) fail(ErrorCode::Config, "target mass tensor is empty");
  const T thresh = T(0.5) * mx;
  const T inf = std::numeric_limits<T>::max() / 4;
  const size_t total = sg.m.size();
  std::vector<T> dist_out(total), dist_in(total);
  for (size_t i = 0; i < total; i++) {
    bool inside = sg.m[i] >= thresh;
    dist_out[i] = inside ? T(0) : inf;  // seeds = occupied cells
    dist_in[i] = inside ? inf : T(0);   // seeds = empty cells
  }
  detail::edt_3d(sg.n, dist_out);
  detail::edt_3d(sg.n, dist_in);
  MassTensor<T> out;
  out.resize(sg.n);
  const T cell = T(1) / T(sg.n);
  for (size_t i = 0; i < total; i++) {
    bool inside = sg.m[i] >= thresh;
    out.m[i] = inside ? -std::sqrt(dist_in[i]) * cell : std::sqrt(dist_out[i]) * cell;
  }
  return out;
}

}  // namespace plastisim
