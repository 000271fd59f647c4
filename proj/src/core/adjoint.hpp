// Reverse-mode differentiation of episode reward with respect to the action
// sequence. A rollout records a checkpoint of the particle state and
// manipulator poses before every substep; the backward pass replays each
// substep's grid from its checkpoint and runs hand-written adjoints of
// p2g / grid contact / g2p in reverse substep order, injecting reward
// gradients at every env-step boundary.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rotation_grad.hpp"
#include "task.hpp"

namespace plastisim {

template <class T>
struct Checkpoint {
  std::vector<Vec3<T>> x, v;
  std::vector<Mat3<T>> F, C;
  std::vector<Vec3<T>> mpos;
  std::vector<Quat<T>> mrot;
};

// ck[t * n_substeps + s] is the state entering substep s of env step t;
// ck.back() is the final state, so ck.size() = T * n_substeps + 1.
template <class T>
struct Tape {
  ContactMode mode = ContactMode::Soft;
  int n_substeps = 0;
  std::vector<std::vector<T>> actions;  // raw commands, before clamping
  std::vector<T> rewards;               // one per env step
  T total_reward = 0;
  std::vector<Checkpoint<T>> ck;
};

namespace detail {

template <class T>
inline void capture(const Env<T>& env, Checkpoint<T>& k) {
  k.x = env.ps.x;
  k.v = env.ps.v;
  k.F = env.ps.F;
  k.C = env.ps.C;
  k.mpos.resize(env.manips.size());
  k.mrot.resize(env.manips.size());
  for (size_t i = 0; i < env.manips.size(); i++) {
    k.mpos[i] = env.manips[i].pos;
    k.mrot[i] = env.manips[i].rot;
  }
}

// M * diag(d): scale column j by d[j].
template <class T>
inline Mat3<T> col_scale(const Mat3<T>& m, const Vec3<T>& d) {
  Mat3<T> r;
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++) r(i, j) = m(i, j) * d[j];
  return r;
}

template <class T>
inline Vec3<T> diag_of(const Mat3<T>& m) {
  return {m(0, 0), m(1, 1), m(2, 2)};
}

// Adjoint of project_coulomb. Accumulates into vbar / vcbar / nbar, mirroring
// the forward branches: separating nodes pass v through, sticking nodes pass
// v_col through, sliding nodes differentiate the friction-cone scaling.
template <class T>
inline void project_coulomb_vjp(const Vec3<T>& v, const Vec3<T>& v_col,
                                const Vec3<T>& n, T friction,
                                const Vec3<T>& gout, Vec3<T>& vbar,
                                Vec3<T>& vcbar, Vec3<T>& nbar) {
  Vec3<T> u = v - v_col;
  T un = dot(u, n);
  if (un >= 0) {
    vbar += gout;
    return;
  }
  Vec3<T> ut = u - un * n;
  T nt = norm(ut);
  if (nt <= friction * (-un) || nt < T(1e-30)) {
    vcbar += gout;
    return;
  }
  T scale = 1 + friction * un / nt;
  // out = v_col + scale * ut
  vcbar += gout;
  Vec3<T> utbar = scale * gout;
  T scalebar = dot(gout, ut);
  T unbar = friction / nt * scalebar;
  T ntbar = -friction * un / (nt * nt) * scalebar;
  utbar += (ntbar / nt) * ut;
  // ut = u - un n
  Vec3<T> ubar = utbar;
  unbar -= dot(utbar, n);
  nbar += (-un) * utbar;
  // un = dot(u, n)
  ubar += unbar * n;
  nbar += unbar * u;
  // u = v - v_col
  vbar += ubar;
  vcbar -= ubar;
}

// Adjoint of apply_contact in soft mode for one node. Accumulates the node
// velocity adjoint into vbar and the pose / commanded-velocity adjoints of
// the manipulator. Beyond the blend cutoff the contact is the identity.
template <class T>
inline void apply_contact_vjp(const Manipulator<T>& m, const Vec3<T>& x,
                              const Vec3<T>& v, T alpha, const Vec3<T>& gout,
                              Vec3<T>& vbar, Vec3<T>& posbar, Quat<T>& rotbar,
                              Vec3<T>& linbar, Vec3<T>& angbar) {
  Vec3<T> r = x - m.pos;
  Vec3<T> pl = rotate_inv(m.rot, r);
  T d = sdf_local(m.kind, m.size, pl);
  if (d >= T(kSoftCutoff) / alpha) {
    vbar += gout;
    return;
  }
  Vec3<T> gl = sdf_grad_local(m.kind, m.size, pl);
  Vec3<T> n = rotate(m.rot, gl);
  Vec3<T> vc = collider_point_velocity(m, x);
  Vec3<T> vp = project_coulomb(v, vc, n, m.friction);
  T s = soft_blend_weight(d, alpha);
  // out = s vp + (1 - s) v
  T sbar = dot(gout, vp - v);
  vbar += (1 - s) * gout;
  Vec3<T> vcbar{}, nbar{};
  project_coulomb_vjp(v, vc, n, m.friction, s * gout, vbar, vcbar, nbar);
  // vc = lin_vel + ang_vel x (x - pos)
  linbar += vcbar;
  angbar += cross(r, vcbar);
  Vec3<T> rbar = cross(vcbar, m.ang_vel);
  // n = rotate(rot, grad_local(pl)); d feeds only the blend weight.
  Quat<T> qb;
  Vec3<T> glbar;
  rotate_vjp(m.rot, gl, nbar, qb, glbar);
  rotbar = qadd(rotbar, qb);
  Vec3<T> plbar = sdf_hess_local(m.kind, m.size, pl) * glbar;
  T dbar = d <= 0 ? T(0) : -alpha * s * sbar;
  plbar += dbar * gl;
  // pl = rotate_inv(rot, x - pos)
  Vec3<T> rb2;
  rotate_inv_vjp(m.rot, r, plbar, qb, rb2);
  rotbar = qadd(rotbar, qb);
  rbar += rb2;
  posbar -= rbar;
}

// Scratch buffers reused across the substeps of one backward pass.
template <class T>
struct BackwardScratch {
  Grid<T> fg;                      // replayed grid: momentum, then velocity
  std::vector<Vec3<T>> gmom;       // node momentum before grid_op
  std::vector<Vec3<T>> agv;        // node adjoint: velocity in, momentum out
  std::vector<T> amass;            // node mass adjoint
  std::vector<ElasticForward<T>> ef;
  std::vector<Manipulator<T>> ms;  // posed manipulators for this substep
};

// Adjoint of one substep. On entry the a* arrays hold gradients with respect
// to the post-substep state; on exit, with respect to the checkpoint state.
// alin / aang accumulate gradients of the commanded velocities.
template <class T>
void backward_substep(const SimParams<T>& prm, const Checkpoint<T>& K,
                      const std::vector<Vec3<T>>& cmd_lin,
                      const std::vector<Vec3<T>>& cmd_ang,
                      BackwardScratch<T>& w, std::vector<Vec3<T>>& ax,
                      std::vector<Vec3<T>>& av, std::vector<Mat3<T>>& aF,
                      std::vector<Mat3<T>>& aC, std::vector<Vec3<T>>& apos,
                      std::vector<Quat<T>>& arot, std::vector<Vec3<T>>& alin,
                      std::vector<Vec3<T>>& aang) {
  const size_t np = K.x.size(), nm = K.mpos.size();
  const size_t ncell = size_t(prm.n) * prm.n * prm.n;
  const int n = prm.n;
  const T pm = prm.p_mass;
  const T ctau = 4 * prm.dt * prm.inv_dx * prm.inv_dx * prm.p_vol;
  const T cB = 4 * prm.inv_dx * prm.inv_dx;

  // Replay the forward grid: p2g from the checkpoint, then grid_op.
  if (w.fg.n != n) w.fg.resize(n);
  w.fg.clear();
  w.ef.resize(np);
  for (size_t p = 0; p < np; p++) {
    w.ef[p] = elastic_forward(prm, K.F[p], K.C[p]);
    p2g_one(prm, K.x[p], K.v[p], K.C[p], w.ef[p].tau, w.fg);
  }
  w.gmom = w.fg.v;
  for (size_t mi = 0; mi < nm; mi++) {
    w.ms[mi].pos = K.mpos[mi];
    w.ms[mi].rot = K.mrot[mi];
    w.ms[mi].lin_vel = cmd_lin[mi];
    w.ms[mi].ang_vel = cmd_ang[mi];
  }
  grid_op(prm, w.fg, w.ms, ContactMode::Soft);

  // Pose advance: pos += dt u; rot = integrate(rot, omega, dt).
  for (size_t mi = 0; mi < nm; mi++) {
    alin[mi] += prm.dt * apos[mi];
    Quat<T> qb;
    Vec3<T> ob;
    quat_integrate_vjp(K.mrot[mi], cmd_ang[mi], prm.dt, arot[mi], qb, ob);
    arot[mi] = qb;
    aang[mi] += ob;
  }

  // g2p adjoint: consume (ax, av, aC) as gradients of the gathered state,
  // scatter node-velocity adjoints, leave the position dependence in ax.
  w.agv.assign(ncell, Vec3<T>{});
  const T lo = prm.margin(), hi = 1 - prm.margin();
  for (size_t p = 0; p < np; p++) {
    Interp<T> it = make_interp(K.x[p], prm.inv_dx);
    Vec3<T> vnew{};
    for (int i = 0; i < 3; i++)
      for (int j = 0; j < 3; j++) {
        T wij = it.w[0][i] * it.w[1][j];
        for (int k = 0; k < 3; k++)
          vnew += wij * it.w[2][k] *
                  w.fg.v[w.fg.idx(it.base[0] + i, it.base[1] + j,
                                  it.base[2] + k)];
      }
    Vec3<T> xc = K.x[p] + prm.dt * vnew;
    Vec3<T> g{xc.x > lo && xc.x < hi ? ax[p].x : T(0),
              xc.y > lo && xc.y < hi ? ax[p].y : T(0),
              xc.z > lo && xc.z < hi ? ax[p].z : T(0)};
    Vec3<T> vbar_new = av[p] + prm.dt * g;
    Mat3<T> Bbar = cB * aC[p];
    Vec3<T> xbar = g;
    for (int i = 0; i < 3; i++)
      for (int j = 0; j < 3; j++) {
        T wi = it.w[0][i], wj = it.w[1][j];
        for (int k = 0; k < 3; k++) {
          T wk = it.w[2][k];
          T wgt = wi * wj * wk;
          Vec3<T> dpos{(i - it.fx[0]) * prm.dx, (j - it.fx[1]) * prm.dx,
                       (k - it.fx[2]) * prm.dx};
          Vec3<T> gw{it.dw[0][i] * wj * wk, wi * it.dw[1][j] * wk,
                     wi * wj * it.dw[2][k]};
          size_t id =
              w.fg.idx(it.base[0] + i, it.base[1] + j, it.base[2] + k);
          const Vec3<T>& gv = w.fg.v[id];
          Vec3<T> Bdp = Bbar * dpos;
          w.agv[id] += wgt * (vbar_new + Bdp);
          xbar += prm.inv_dx * (dot(gv, vbar_new) + dot(gv, Bdp)) * gw;
          xbar -= wgt * (transpose(Bbar) * gv);
        }
      }
    ax[p] = xbar;
    av[p] = Vec3<T>{};
    aC[p] = Mat3<T>{};
  }

  // Grid adjoint: per node, recompute the contact chain from the stored
  // momentum, then reverse wall clamps, floor, manipulators (last applied,
  // first reversed), and finally velocity = momentum / mass + dt gravity.
  w.amass.assign(ncell, T(0));
  const Vec3<T> gdt = prm.dt * prm.gravity;
  std::vector<Vec3<T>> stage(nm + 1);
  for (int i = 0; i < n; i++)
    for (int j = 0; j < n; j++)
      for (int k = 0; k < n; k++) {
        size_t id = w.fg.idx(i, j, k);
        T m = w.fg.m[id];
        if (m <= 0) continue;
        const T me = m + prm.m_eps;
        Vec3<T> gout = w.agv[id];
        if (gout.x == 0 && gout.y == 0 && gout.z == 0) continue;
        Vec3<T> x{i * prm.dx, j * prm.dx, k * prm.dx};
        stage[0] = w.gmom[id] / me + gdt;
        for (size_t mi = 0; mi < nm; mi++)
          stage[mi + 1] = apply_contact(w.ms[mi], x, stage[mi],
                                        ContactMode::Soft, prm.alpha, prm.dx);
        // The wall clamps saw the post-floor value.
        Vec3<T> vfloor = stage[nm];
        if (j < 3)
          vfloor = project_coulomb(stage[nm], Vec3<T>{}, Vec3<T>{0, 1, 0},
                                   prm.floor_friction);
        Vec3<T> gcur = gout;
        if (i < 3 && vfloor.x < 0) gcur.x = 0;
        if (i > n - 4 && vfloor.x > 0) gcur.x = 0;
        if (j > n - 4 && vfloor.y > 0) gcur.y = 0;
        if (k < 3 && vfloor.z < 0) gcur.z = 0;
        if (k > n - 4 && vfloor.z > 0) gcur.z = 0;
        if (j < 3) {
          Vec3<T> vb{}, vcb{}, nb{};  // floor pose is constant
          project_coulomb_vjp(stage[nm], Vec3<T>{}, Vec3<T>{0, 1, 0},
                              prm.floor_friction, gcur, vb, vcb, nb);
          gcur = vb;
        }
        for (size_t mi = nm; mi-- > 0;) {
          Vec3<T> vb{};
          apply_contact_vjp(w.ms[mi], x, stage[mi], prm.alpha, gcur, vb,
                            apos[mi], arot[mi], alin[mi], aang[mi]);
          gcur = vb;
        }
        w.agv[id] = gcur / me;
        w.amass[id] = -dot(w.gmom[id], gcur) / (me * me);
      }

  // p2g adjoint: gather momentum / mass adjoints back onto particles and
  // pull the stress impulse through the elastic update.
  for (size_t p = 0; p < np; p++) {
    const ElasticForward<T>& e = w.ef[p];
    Interp<T> it = make_interp(K.x[p], prm.inv_dx);
    Mat3<T> A = (-ctau) * e.tau + pm * K.C[p];
    Vec3<T> mv = pm * K.v[p];
    Vec3<T> vbar{};
    Mat3<T> Abar{};
    Vec3<T> xbar = ax[p];
    for (int i = 0; i < 3; i++)
      for (int j = 0; j < 3; j++) {
        T wi = it.w[0][i], wj = it.w[1][j];
        for (int k = 0; k < 3; k++) {
          T wk = it.w[2][k];
          T wgt = wi * wj * wk;
          Vec3<T> dpos{(i - it.fx[0]) * prm.dx, (j - it.fx[1]) * prm.dx,
                       (k - it.fx[2]) * prm.dx};
          Vec3<T> gw{it.dw[0][i] * wj * wk, wi * it.dw[1][j] * wk,
                     wi * wj * it.dw[2][k]};
          size_t id =
              w.fg.idx(it.base[0] + i, it.base[1] + j, it.base[2] + k);
          const Vec3<T>& mombar = w.agv[id];
          T mbar = w.amass[id];
          vbar += (wgt * pm) * mombar;
          Abar += wgt * outer(mombar, dpos);
          xbar += prm.inv_dx * (dot(mombar, mv + A * dpos) + pm * mbar) * gw;
          xbar -= wgt * (transpose(A) * mombar);
        }
      }
    av[p] = vbar;
    // tau = U diag(tau_diag) U^T; F_new = U diag(sig_new) V^T.
    Mat3<T> taubar = (-ctau) * Abar;
    const Mat3<T>& U = e.svd.U;
    const Mat3<T>& V = e.svd.V;
    const Mat3<T>& gF = aF[p];
    Mat3<T> Ubar = (taubar + transpose(taubar)) * col_scale(U, e.tau_diag);
    Vec3<T> taud_bar = diag_of(transpose(U) * taubar * U);
    Ubar += gF * col_scale(V, e.sig_new);
    Mat3<T> Vbar = transpose(gF) * col_scale(U, e.sig_new);
    Vec3<T> signew_bar = diag_of(transpose(U) * gF * V);
    // sig_new = exp(eps_p); tau_diag = kirchhoff(eps_p); eps_p = project(eps).
    Vec3<T> epsp_bar = kirchhoff_diag_vjp(prm.mu, prm.lambda, taud_bar) +
                       cwise_mul(signew_bar, e.sig_new);
    Vec3<T> eps_bar =
        von_mises_project_vjp(e.eps, prm.yield_stress, prm.mu, epsp_bar);
    // eps = log(sigma)
    Vec3<T> sig_bar{eps_bar.x / e.svd.sigma.x, eps_bar.y / e.svd.sigma.y,
                    eps_bar.z / e.svd.sigma.z};
    Mat3<T> Ftr_bar = svd3_vjp(U, e.svd.sigma, V, Ubar, sig_bar, Vbar);
    // F_tr = (I + dt C) F
    Mat3<T> IC = Mat3<T>::identity() + prm.dt * K.C[p];
    aF[p] = transpose(IC) * Ftr_bar;
    aC[p] = pm * Abar + prm.dt * (Ftr_bar * transpose(K.F[p]));
    ax[p] = xbar;
  }
}

}  // namespace detail

// Run one episode from reset, recording a checkpoint before every substep.
// Returns the undiscounted reward sum; the environment is left at the final
// state. Divergence is reported with the env step and substep indices.
template <class T>
T rollout(Env<T>& env, const std::vector<std::vector<T>>& actions,
          Tape<T>& tape) {
  if (int(actions.size()) != env.cfg.env_steps)
    fail(ErrorCode::Invalid, "action sequence length must equal env_steps");
  const int S = env.prm.n_substeps;
  const int Ts = int(actions.size());
  tape.mode = env.mode;
  tape.n_substeps = S;
  tape.actions = actions;
  tape.rewards.assign(size_t(Ts), T(0));
  tape.ck.resize(size_t(Ts) * S + 1);
  env.reset();
  detail::capture(env, tape.ck[0]);
  T total = 0;
  for (int t = 0; t < Ts; t++) {
    env.apply_action(actions[t]);
    for (int s = 0; s < S; s++) {
      try {
        env.substep_once();
      } catch (const Error& e) {
        if (e.code == ErrorCode::Diverged)
          fail(ErrorCode::Diverged,
               "rollout diverged at env step " + std::to_string(t) +
                   ", substep " + std::to_string(s) + ": " + e.what());
        throw;
      }
      detail::capture(env, tape.ck[size_t(t) * S + s + 1]);
    }
    env.t = t + 1;
    T r = env.reward().total;
    tape.rewards[t] = r;
    total += r;
  }
  tape.total_reward = total;
  return total;
}

// Gradient of the recorded episode's total reward with respect to every raw
// action entry. Entries whose clamp was active get 0 (subgradient of the
// projection). The environment is left at the tape's final state.
template <class T>
std::vector<std::vector<T>> backward(Env<T>& env, const Tape<T>& tape) {
  if (tape.mode != ContactMode::Soft)
    fail(ErrorCode::Invalid,
         "gradients require a soft-contact tape; rerun the rollout in soft "
         "mode");
  const SimParams<T>& prm = env.prm;
  const int S = tape.n_substeps;
  const int Ts = int(tape.actions.size());
  const size_t np = env.ps.size(), nm = env.manips.size();
  if (S != prm.n_substeps || tape.ck.size() != size_t(Ts) * S + 1 ||
      tape.ck[0].x.size() != np || tape.ck[0].mpos.size() != nm)
    fail(ErrorCode::Invalid, "tape does not match this environment");

  std::vector<Vec3<T>> ax(np, Vec3<T>{}), av(np, Vec3<T>{});
  std::vector<Mat3<T>> aF(np, Mat3<T>{}), aC(np, Mat3<T>{});
  std::vector<Vec3<T>> apos(nm, Vec3<T>{}), alin(nm), aang(nm);
  std::vector<Quat<T>> arot(nm, Quat<T>{0, 0, 0, 0});
  std::vector<Vec3<T>> cmd_lin(nm), cmd_ang(nm);
  std::vector<Vec3<T>> rdx, rdpos;
  std::vector<Quat<T>> rdrot;
  detail::BackwardScratch<T> w;
  w.ms = env.manips;
  std::vector<std::vector<T>> grads(size_t(Ts),
                                    std::vector<T>(env.action_dim(), T(0)));

  for (int t = Ts - 1; t >= 0; t--) {
    env.apply_action(tape.actions[t]);
    for (size_t mi = 0; mi < nm; mi++) {
      cmd_lin[mi] = env.manips[mi].lin_vel;
      cmd_ang[mi] = env.manips[mi].ang_vel;
      alin[mi] = Vec3<T>{};
      aang[mi] = Vec3<T>{};
    }
    // Reward of step t is evaluated at checkpoint (t + 1) S.
    const Checkpoint<T>& end = tape.ck[size_t(t + 1) * S];
    env.ps.x = end.x;
    for (size_t mi = 0; mi < nm; mi++) {
      env.manips[mi].pos = end.mpos[mi];
      env.manips[mi].rot = end.mrot[mi];
    }
    env.reward_grad(T(1), rdx, rdpos, rdrot);
    for (size_t p = 0; p < np; p++) ax[p] += rdx[p];
    for (size_t mi = 0; mi < nm; mi++) {
      apos[mi] += rdpos[mi];
      arot[mi] = qadd(arot[mi], rdrot[mi]);
    }
    for (int s = S - 1; s >= 0; s--)
      detail::backward_substep(prm, tape.ck[size_t(t) * S + s], cmd_lin,
                               cmd_ang, w, ax, av, aF, aC, apos, arot, alin,
                               aang);
    // Commanded-velocity adjoints back to action entries.
    int idx = 0;
    for (size_t mi = 0; mi < nm; mi++) {
      const Manipulator<T>& m = env.manips[mi];
      for (int b = 0; b < m.dof; b++) {
        if (!((m.dof_mask >> b) & 1)) continue;
        T raw = tape.actions[t][idx];
        T g = b < 3 ? alin[mi][b] : aang[mi][b - 3];
        grads[t][idx] =
            (raw < env.cfg.a_min[idx] || raw > env.cfg.a_max[idx]) ? T(0) : g;
        idx++;
      }
    }
  }

  // Leave the environment at its end-of-rollout state.
  if (Ts > 0) env.apply_action(tape.actions[Ts - 1]);
  const Checkpoint<T>& last = tape.ck.back();
  env.ps.x = last.x;
  env.ps.v = last.v;
  env.ps.F = last.F;
  env.ps.C = last.C;
  for (size_t mi = 0; mi < nm; mi++) {
    env.manips[mi].pos = last.mpos[mi];
    env.manips[mi].rot = last.mrot[mi];
  }
  env.t = Ts;
  return grads;
}

template <class T>
struct GradcheckReport {
  T max_rel_err = 0;
  int worst_step = -1, worst_dim = -1;
  T analytic_at_worst = 0, numeric_at_worst = 0;
  T h = 0;
  std::vector<std::vector<T>> grad, fd;
};

// Central-difference check of backward() over every action entry. The
// relative error at an entry uses the larger of the two magnitudes, floored
// at 1e-6 of the largest finite-difference entry so near-zero entries do not
// dominate the report.
template <class T>
GradcheckReport<T> gradcheck(Env<T>& env,
                             const std::vector<std::vector<T>>& actions, T h) {
  GradcheckReport<T> rep;
  rep.h = h;
  Tape<T> tape;
  rollout(env, actions, tape);
  rep.grad = backward(env, tape);
  const int Ts = int(actions.size());
  const int da = env.action_dim();
  rep.fd.assign(size_t(Ts), std::vector<T>(da, T(0)));
  std::vector<std::vector<T>> a = actions;
  T gmax = 0;
  for (int t = 0; t < Ts; t++)
    for (int i = 0; i < da; i++) {
      T keep = a[t][i];
      a[t][i] = keep + h;
      T rp = rollout(env, a, tape);
      a[t][i] = keep - h;
      T rm = rollout(env, a, tape);
      a[t][i] = keep;
      rep.fd[t][i] = (rp - rm) / (2 * h);
      gmax = std::max(gmax, std::abs(rep.fd[t][i]));
    }
  for (int t = 0; t < Ts; t++)
    for (int i = 0; i < da; i++) {
      T an = rep.grad[t][i], fd = rep.fd[t][i];
      T denom =
          std::max({std::abs(an), std::abs(fd), T(1e-6) * gmax, T(1e-12)});
      T rel = std::abs(an - fd) / denom;
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_step = t;
        rep.worst_dim = i;
        rep.analytic_at_worst = an;
        rep.numeric_at_worst = fd;
      }
    }
  rollout(env, actions, tape);  // leave env at the unperturbed final state
  return rep;
}

}  // namespace plastisim
