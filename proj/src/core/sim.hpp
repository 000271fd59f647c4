// Forward MLS-MPM: particle-to-grid scatter with fused elasticity update,
// grid forces + contact, grid-to-particle gather with APIC transfer.
#pragma once

#include <vector>

#include "bspline.hpp"
#include "collider.hpp"
#include "plasticity.hpp"
#include "state.hpp"

namespace plastisim {

// Everything computed per particle between reading (F, C) and scattering:
// trial update, SVD, plastic projection, new deformation gradient, stress.
// The adjoint pass recomputes this struct instead of storing it on a tape.
template <class T>
struct ElasticForward {
  Mat3<T> F_tr;
  Svd3<T> svd;
  Vec3<T> eps, eps_p, sig_new;
  Mat3<T> F_new;
  Vec3<T> tau_diag;
  Mat3<T> tau;
};

template <class T>
inline ElasticForward<T> elastic_forward(const SimParams<T>& prm, const Mat3<T>& F,
                                         const Mat3<T>& C) {
  ElasticForward<T> e;
  e.F_tr = (Mat3<T>::identity() + prm.dt * C) * F;
  e.svd = svd3(e.F_tr);
  if (e.svd.sigma[2] < T(1e-9))
    fail(ErrorCode::Diverged, "degenerate deformation gradient");
  e.eps = log_strain(e.svd.sigma);
  e.eps_p = von_mises_project(e.eps, prm.yield_stress, prm.mu);
  e.sig_new = {std::exp(e.eps_p.x), std::exp(e.eps_p.y), std::exp(e.eps_p.z)};
  e.F_new = reconstruct(e.svd.U, e.sig_new, e.svd.V);
  e.tau_diag = kirchhoff_diag(e.eps_p, prm.mu, prm.lambda);
  e.tau = reconstruct(e.svd.U, e.tau_diag, e.svd.U);
  return e;
}

namespace detail {

template <class T>
inline void check_in_margin(const SimParams<T>& prm, const Vec3<T>& x, size_t p) {
  T lo = prm.margin() - T(1e-6), hi = 1 - prm.margin() + T(1e-6);
  if (!(x.x >= lo && x.x <= hi && x.y >= lo && x.y <= hi && x.z >= lo && x.z <= hi))
    fail(ErrorCode::Diverged,
         "particle " + std::to_string(p) + " left the domain margin");
}

// Scatter one particle into a grid buffer.
template <class T>
inline void p2g_one(const SimParams<T>& prm, const Vec3<T>& x, const Vec3<T>& v,
                    const Mat3<T>& C, const Mat3<T>& tau, Grid<T>& grid) {
  Interp<T> it = make_interp(x, prm.inv_dx);
  // Stress impulse: -(4 dt / dx^2) * V0 * tau applied over the stencil.
  Mat3<T> G = (-4 * prm.dt * prm.inv_dx * prm.inv_dx * prm.p_vol) * tau;
  Mat3<T> A = G + prm.p_mass * C;
  Vec3<T> mv = prm.p_mass * v;
  for (int i = 0; i < 3; i++) {
    for (int j = 0; j < 3; j++) {
      T wij = it.w[0][i] * it.w[1][j];
      for (int k = 0; k < 3; k++) {
        T w = wij * it.w[2][k];
        // Node offset from the particle, physical units: ((base+i) dx - x).
        Vec3<T> dpos{(i - it.fx[0]) * prm.dx, (j - it.fx[1]) * prm.dx,
                     (k - it.fx[2]) * prm.dx};
        size_t id = grid.idx(it.base[0] + i, it.base[1] + j, it.base[2] + k);
        grid.v[id] += w * (mv + A * dpos);
        grid.m[id] += w * prm.p_mass;
      }
    }
  }
}

}  // namespace detail

// Particle-to-grid transfer. Updates each particle's F in place:
// F <- return_map((I + dt C) F), then scatters mass, momentum and the
// stress impulse of the mapped state. Grid v holds momentum afterwards.
template <class T>
void p2g(const SimParams<T>& prm, Particles<T>& ps, Grid<T>& grid) {
  grid.clear();
  const size_t np = ps.size();
  int nt = thread_count();
  if (nt <= 1) {
    for (size_t p = 0; p < np; p++) {
      detail::check_in_margin(prm, ps.x[p], p);
      ElasticForward<T> e = elastic_forward(prm, ps.F[p], ps.C[p]);
      ps.F[p] = e.F_new;
      detail::p2g_one(prm, ps.x[p], ps.v[p], ps.C[p], e.tau, grid);
    }
    return;
  }
  // Parallel path: per-thread grids merged in thread order, so results are
  // deterministic for a fixed thread count.
  static thread_local std::vector<Grid<T>> buffers;
  std::vector<Grid<T>>& bufs = buffers;
  bufs.resize(nt);
#pragma omp parallel num_threads(nt)
  {
#ifdef _OPENMP
    int tid = omp_get_thread_num();
#else
    int tid = 0;
#endif
    Grid<T>& g = bufs[tid];
    if (g.n != grid.n)
      g.resize(grid.n);
    else
      g.clear();
#pragma omp for schedule(static)
    for (long p = 0; p < long(np); p++) {
      detail::check_in_margin(prm, ps.x[p], size_t(p));
      ElasticForward<T> e = elastic_forward(prm, ps.F[p], ps.C[p]);
      ps.F[p] = e.F_new;
      detail::p2g_one(prm, ps.x[p], ps.v[p], ps.C[p], e.tau, g);
    }
  }
  for (int t = 0; t < nt; t++) {
    const Grid<T>& g = bufs[t];
    for (size_t i = 0; i < grid.v.size(); i++) {
      grid.v[i] += g.v[i];
      grid.m[i] += g.m[i];
    }
  }
}

// Contact + boundary treatment of one node's velocity. Manipulators follow
// the configured mode; the floor (y = 0 half-space) is always a hard Coulomb
// projection — at alpha = 666.7 a softened floor would act only within a
// fraction of a cell, below the particle margin, and the body would fall
// through. The other five faces just block outward motion near the walls.
template <class T>
inline Vec3<T> grid_bc(const SimParams<T>& prm, const Grid<T>& grid,
                       const std::vector<Manipulator<T>>& manips,
                       ContactMode mode, int i, int j, int k, Vec3<T> v) {
  Vec3<T> x{i * prm.dx, j * prm.dx, k * prm.dx};
  for (const auto& m : manips)
    v = apply_contact(m, x, v, mode, prm.alpha, prm.dx);
  if (j < 3)
    v = project_coulomb(v, Vec3<T>{}, Vec3<T>{0, 1, 0}, prm.floor_friction);
  const int n = grid.n;
  if (i < 3 && v.x < 0) v.x = 0;
  if (i > n - 4 && v.x > 0) v.x = 0;
  if (j > n - 4 && v.y > 0) v.y = 0;
  if (k < 3 && v.z < 0) v.z = 0;
  if (k > n - 4 && v.z > 0) v.z = 0;
  return v;
}

// Momentum -> velocity, gravity, contact, domain boundaries.
template <class T>
void grid_op(const SimParams<T>& prm, Grid<T>& grid,
             const std::vector<Manipulator<T>>& manips, ContactMode mode) {
  const int n = grid.n;
  const Vec3<T> gdt = prm.dt * prm.gravity;
  int nt = thread_count();
#pragma omp parallel for schedule(static) num_threads(nt)
  for (int i = 0; i < n; i++) {
    for (int j = 0; j < n; j++) {
      for (int k = 0; k < n; k++) {
        size_t id = grid.idx(i, j, k);
        T m = grid.m[id];
        if (m <= 0) continue;
        Vec3<T> v = grid.v[id] / (m + prm.m_eps) + gdt;
        grid.v[id] = grid_bc(prm, grid, manips, mode, i, j, k, v);
      }
    }
  }
}

// Grid-to-particle gather: APIC velocity + affine matrix, then advection.
// Positions are clamped to the domain margin.
template <class T>
void g2p(const SimParams<T>& prm, Particles<T>& ps, const Grid<T>& grid) {
  const size_t np = ps.size();
  const T lo = prm.margin(), hi = 1 - prm.margin();
  int nt = thread_count();
#pragma omp parallel for schedule(static) num_threads(nt)
  for (long p = 0; p < long(np); p++) {
    Interp<T> it = make_interp(ps.x[p], prm.inv_dx);
    Vec3<T> v{};
    Mat3<T> B{};
    for (int i = 0; i < 3; i++) {
      for (int j = 0; j < 3; j++) {
        T wij = it.w[0][i] * it.w[1][j];
        for (int k = 0; k < 3; k++) {
          T w = wij * it.w[2][k];
          Vec3<T> dpos{(i - it.fx[0]) * prm.dx, (j - it.fx[1]) * prm.dx,
                       (k - it.fx[2]) * prm.dx};
          const Vec3<T>& gv = grid.v[grid.idx(it.base[0] + i, it.base[1] + j,
                                              it.base[2] + k)];
          v += w * gv;
          B += w * outer(gv, dpos);
        }
      }
    }
    ps.v[p] = v;
    ps.C[p] = (4 * prm.inv_dx * prm.inv_dx) * B;
    Vec3<T> x = ps.x[p] + prm.dt * v;
    x.x = std::clamp(x.x, lo, hi);
    x.y = std::clamp(x.y, lo, hi);
    x.z = std::clamp(x.z, lo, hi);
    ps.x[p] = x;
  }
}

template <class T>
void advance_poses(const SimParams<T>& prm, std::vector<Manipulator<T>>& manips) {
  for (auto& m : manips) {
    m.pos += prm.dt * m.lin_vel;
    m.rot = quat_integrate(m.rot, m.ang_vel, prm.dt);
  }
}

// One full MPM substep.
template <class T>
void substep(const SimParams<T>& prm, Particles<T>& ps, Grid<T>& grid,
             std::vector<Manipulator<T>>& manips, ContactMode mode) {
  p2g(prm, ps, grid);
  grid_op(prm, grid, manips, mode);
  g2p(prm, ps, grid);
  advance_poses(prm, manips);
}

}  // namespace plastisim
