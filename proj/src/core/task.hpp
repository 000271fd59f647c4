// MDP layer on top of the simulator: scene construction, action application,
// observations, the three-term reward and its gradient, IoU metrics, and the
// builtin task generators.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "masstensor.hpp"
#include "rotation_grad.hpp"
#include "scene.hpp"
#include "sim.hpp"

namespace plastisim {

template <class T>
struct RewardTerms {
  T mass = 0, dist = 0, grasp = 0, total = 0;
};

// How the target particle cloud is produced at reset time:
//   Translate - initial particles shifted by a fixed offset
//   Script    - a scripted reference motion / analytic placement (by name)
//   Cloud     - explicit positions
enum class TargetKind { Translate, Script, Cloud };

template <class T>
struct TargetSpec {
  TargetKind kind = TargetKind::Translate;
  Vec3<T> offset{};
  std::string script;
  std::vector<T> params;
  std::vector<Vec3<T>> cloud;
};

template <class T>
struct TaskConfig {
  std::string name = "custom";
  int variant = 1;
  SimParams<T> prm{};
  std::vector<Volume<T>> volumes;
  std::vector<Manipulator<T>> manips;
  TargetSpec<T> target;
  int env_steps = 50;
  int n_mass_grid = 64;
  int n_landmarks = 200;
  T c1 = 10, c2 = 10, c3 = 1;  // reward weights; c4 is built at reset
  T softmin_tau = T(1e-3);
  std::vector<T> a_min, a_max;  // action bounds, one entry per action dim

  int action_dim() const {
    int d = 0;
    for (const auto& m : manips) d += m.action_dim();
    return d;
  }
};

namespace detail {

// Hard-mode scripted rollouts used for target generation.
template <class T>
void script_steps(const SimParams<T>& prm, Particles<T>& ps, Grid<T>& grid,
                  std::vector<Manipulator<T>>& manips, int env_steps) {
  for (int s = 0; s < env_steps; s++)
    for (int k = 0; k < prm.n_substeps; k++)
      substep(prm, ps, grid, manips, ContactMode::Hard);
}

template <class T>
int steps_for(const SimParams<T>& prm, T dist, T speed) {
  return std::max(1, int(std::ceil(dist / (speed * prm.n_substeps * prm.dt))));
}

// Press manipulator 0 straight down to pos.y = press_y at (px, pz), then
// retract. params = {px, pz, press_y, speed}.
template <class T>
void script_press(const SimParams<T>& prm, const std::vector<T>& pp,
                  Particles<T>& ps, std::vector<Manipulator<T>> manips) {
  Grid<T> grid;
  grid.resize(prm.n);
  Manipulator<T>& m = manips[0];
  m.pos = {pp[0], m.pos.y, pp[1]};
  T speed = pp[3];
  int down = steps_for(prm, m.pos.y - pp[2], speed);
  m.lin_vel = {0, -speed, 0};
  script_steps(prm, ps, grid, manips, down);
  m.lin_vel = {0, speed, 0};
  script_steps(prm, ps, grid, manips, down);
}

// Drag manipulator 0's lowest point along a polyline carved into the body.
// params = {carve_y, hover_y, speed, x1, z1, ..., xk, zk}.
template <class T>
void script_scribble(const SimParams<T>& prm, const std::vector<T>& pp,
                     Particles<T>& ps, std::vector<Manipulator<T>> manips) {
  Grid<T> grid;
  grid.resize(prm.n);
  Manipulator<T>& m = manips[0];
  T carve_y = pp[0], hover_y = pp[1], speed = pp[2];
  m.pos = {pp[3], hover_y, pp[4]};
  int down = steps_for(prm, hover_y - carve_y, speed);
  m.lin_vel = {0, -speed, 0};
  script_steps(prm, ps, grid, manips, down);
  Vec3<T> cur{pp[3], 0, pp[4]};
  for (size_t i = 5; i + 1 < pp.size(); i += 2) {
    Vec3<T> nxt{pp[i], 0, pp[i + 1]};
    T len = norm(nxt - cur);
    if (len <= 0) continue;
    int steps = steps_for(prm, len, speed);
    Vec3<T> dir = (nxt - cur) / len;
    m.lin_vel = (len / (steps * prm.n_substeps * prm.dt)) * dir;
    script_steps(prm, ps, grid, manips, steps);
    cur = nxt;
  }
  m.lin_vel = {0, speed, 0};
  script_steps(prm, ps, grid, manips, down);
}

// Volume-preserving vertical squash about (cx, ybase, cz).
// params = {ky, cx, cz, ybase}.
template <class T>
void map_squash(const std::vector<T>& pp, std::vector<Vec3<T>>& xs) {
  T ky = pp[0], cx = pp[1], cz = pp[2], yb = pp[3];
  T kxz = 1 / std::sqrt(ky);
  for (auto& p : xs)
    p = {cx + (p.x - cx) * kxz, yb + (p.y - yb) * ky, cz + (p.z - cz) * kxz};
}

// Bend a rope lying along x around a vertical circle of radius R centered at
// (pcx, *, pcz_wrap). params = {pcx, pcz_wrap, R, phi_max, cy, cz}.
template <class T>
void map_rope_wrap(const std::vector<T>& pp, std::vector<Vec3<T>>& xs) {
  T pcx = pp[0], pcz = pp[1], R = pp[2], phim = pp[3], cy = pp[4], cz = pp[5];
  for (auto& p : xs) {
    T s = p.x - pcx, oy = p.y - cy, oz = p.z - cz;
    T phi = std::clamp(s / R, -phim, phim);
    Vec3<T> g{pcx + R * std::sin(phi), cy, pcz - R * std::cos(phi)};
    Vec3<T> tang{std::cos(phi), 0, std::sin(phi)};
    Vec3<T> nrm{-std::sin(phi), 0, std::cos(phi)};
    T extra = s - phi * R;  // straight continuation past the wrapped arc
    Vec3<T> q = g + extra * tang + oz * nrm;
    p = {q.x, cy + oy, q.z};
  }
}

}  // namespace detail

// Materialize the target particle cloud for a config, given the finalized
// params and the sampled initial particles.
template <class T>
std::vector<Vec3<T>> build_target(const TaskConfig<T>& cfg, const SimParams<T>& prm,
                                  const Particles<T>& ps0) {
  switch (cfg.target.kind) {
    case TargetKind::Translate: {
      std::vector<Vec3<T>> xs = ps0.x;
      for (auto& p : xs) p += cfg.target.offset;
      return xs;
    }
    case TargetKind::Cloud:
      if (cfg.target.cloud.empty())
        fail(ErrorCode::Config, "explicit target cloud is empty");
      return cfg.target.cloud;
    case TargetKind::Script: {
      const auto& pp = cfg.target.params;
      if (cfg.target.script == "press") {
        if (pp.size() != 4 || cfg.manips.empty())
          fail(ErrorCode::Config, "press script needs {px, pz, press_y, speed}");
        Particles<T> ps = ps0;
        detail::script_press(prm, pp, ps, cfg.manips);
        return ps.x;
      }
      if (cfg.target.script == "scribble") {
        if (pp.size() < 7 || cfg.manips.empty())
          fail(ErrorCode::Config,
               "scribble script needs {carve_y, hover_y, speed, pts...}");
        Particles<T> ps = ps0;
        detail::script_scribble(prm, pp, ps, cfg.manips);
        return ps.x;
      }
      if (cfg.target.script == "squash") {
        if (pp.size() != 4)
          fail(ErrorCode::Config, "squash script needs {ky, cx, cz, ybase}");
        std::vector<Vec3<T>> xs = ps0.x;
        detail::map_squash(pp, xs);
        return xs;
      }
      if (cfg.target.script == "rope_wrap") {
        if (pp.size() != 6)
          fail(ErrorCode::Config,
               "rope_wrap script needs {pcx, pcz, R, phi_max, cy, cz}");
        std::vector<Vec3<T>> xs = ps0.x;
        detail::map_rope_wrap(pp, xs);
        return xs;
      }
      fail(ErrorCode::Config, "unknown target script: " + cfg.target.script);
    }
  }
  fail(ErrorCode::Config, "invalid target kind");
}

template <class T>
class Env {
 public:
  TaskConfig<T> cfg;
  SimParams<T> prm;
  Particles<T> ps;
  std::vector<Manipulator<T>> manips;
  Grid<T> grid;
  ContactMode mode = ContactMode::Soft;
  MassTensor<T> s0, sg, sdfg;
  T total_mass = 0, c4 = 0, base_iou = 0;
  int t = 0;
  std::vector<int> landmarks;

  explicit Env(const TaskConfig<T>& c) : cfg(c) { build(); }

  int action_dim() const { return action_dim_; }
  int obs_dim() const { return cfg.n_landmarks * 6 + int(manips.size()) * 7; }

  void reset() {
    ps = ps0_;
    manips = manips0_;
    t = 0;
  }

  // Clamp and unpack an action into commanded manipulator velocities.
  // Disabled dof slots are held at zero.
  void apply_action(const std::vector<T>& a) {
    if (int(a.size()) != action_dim_)
      fail(ErrorCode::Invalid, "action length does not match task action dim");
    int idx = 0;
    for (auto& m : manips) {
      m.lin_vel = {};
      m.ang_vel = {};
      for (int b = 0; b < m.dof; b++) {
        if (!((m.dof_mask >> b) & 1)) continue;
        T v = std::clamp(a[idx], cfg.a_min[idx], cfg.a_max[idx]);
        if (b < 3)
          m.lin_vel[b] = v;
        else
          m.ang_vel[b - 3] = v;
        idx++;
      }
    }
  }

  void substep_once() { substep(prm, ps, grid, manips, mode); }

  T step(const std::vector<T>& a) {
    if (t >= cfg.env_steps)
      fail(ErrorCode::Invalid, "episode is over; reset the environment");
    apply_action(a);
    for (int k = 0; k < prm.n_substeps; k++) substep_once();
    t++;
    return reward().total;
  }

  std::vector<T> observe() const {
    std::vector<T> o;
    o.reserve(obs_dim());
    for (int id : landmarks) {
      const Vec3<T>&x = ps.x[id], &v = ps.v[id];
      o.insert(o.end(), {x.x, x.y, x.z, v.x, v.y, v.z});
    }
    for (const auto& m : manips)
      o.insert(o.end(),
               {m.pos.x, m.pos.y, m.pos.z, m.rot.w, m.rot.x, m.rot.y, m.rot.z});
    return o;
  }

  RewardTerms<T> reward() const { return terms_with(c4); }

  T iou() const {
    splat_current();
    return soft_iou(scratch_, sg);
  }
  T normalized_iou() const { return (iou() - base_iou) / (1 - base_iou); }

  // dL/dx_p, dL/d(manip pos), dL/d(manip rot) for L = gscale * reward at the
  // current state. Gradients use the soft-min grasp term; sign(0) and the
  // max(0,.) boundary take the zero subgradient.
  void reward_grad(T gscale, std::vector<Vec3<T>>& dx,
                   std::vector<Vec3<T>>& dmpos, std::vector<Quat<T>>& dmrot) const {
    const size_t np = ps.size();
    dx.assign(np, Vec3<T>{});
    dmpos.assign(manips.size(), Vec3<T>{});
    dmrot.assign(manips.size(), Quat<T>{0, 0, 0, 0});
    // Mass + distance terms act through the splatted tensor.
    splat_current();
    MassTensor<T> gcell;
    gcell.resize(sg.n);
    const T inv_m = 1 / total_mass;
    for (size_t i = 0; i < gcell.m.size(); i++) {
      T diff = (scratch_.m[i] - sg.m[i]) * inv_m;
      T sgn = diff > 0 ? T(1) : (diff < 0 ? T(-1) : T(0));
      gcell.m[i] = gscale * (-cfg.c1 * sgn - cfg.c2 * sdfg.m[i]) * inv_m;
    }
    splat_mass_vjp(ps.x, prm.p_mass, gcell, dx);
    // Grasp term: soft-min of manipulator distance over particles.
    const T tau = cfg.softmin_tau;
    std::vector<T> d(np);
    for (size_t mi = 0; mi < manips.size(); mi++) {
      const Manipulator<T>& m = manips[mi];
      if (m.dof == 0) continue;
      T dmin = std::numeric_limits<T>::max();
      for (size_t p = 0; p < np; p++) {
        d[p] = sdf(m, ps.x[p]);
        dmin = std::min(dmin, d[p]);
      }
      T z = 0;
      for (size_t p = 0; p < np; p++) {
        T e = (d[p] - dmin) / tau;
        if (e < 40) z += std::exp(-e);
      }
      T softmin = dmin - tau * std::log(z);
      if (softmin <= 0) continue;
      for (size_t p = 0; p < np; p++) {
        T e = (d[p] - dmin) / tau;
        if (e >= 40) continue;
        T dbar = -gscale * cfg.c3 * std::exp(-e) / z;
        Vec3<T> r = ps.x[p] - m.pos;
        Vec3<T> gl = dbar * sdf_grad_local(m.kind, m.size, rotate_inv(m.rot, r));
        Quat<T> qb;
        Vec3<T> rb;
        rotate_inv_vjp(m.rot, r, gl, qb, rb);
        dx[p] += rb;
        dmpos[mi] -= rb;
        dmrot[mi] = qadd(dmrot[mi], qb);
      }
    }
  }

  const Particles<T>& initial_particles() const { return ps0_; }

 private:
  Particles<T> ps0_;
  std::vector<Manipulator<T>> manips0_;
  mutable MassTensor<T> scratch_;
  int action_dim_ = 0;

  void splat_current() const {
    scratch_.resize(sg.n);
    splat_mass(ps.x, prm.p_mass, scratch_);
  }

  // Reward terms of the current state against a given bias. The association
  // ((-a - b) - c) + c4 cancels bitwise against c4 = (a + b) + c at reset.
  RewardTerms<T> terms_with(T c4v) const {
    RewardTerms<T> r;
    splat_current();
    const T inv_m = 1 / total_mass;
    for (size_t i = 0; i < sg.m.size(); i++) {
      T st = scratch_.m[i] * inv_m, sgn = sg.m[i] * inv_m;
      r.mass += std::abs(st - sgn);
      r.dist += sdfg.m[i] * st;
    }
    const T tau = cfg.softmin_tau;
    for (const auto& m : manips) {
      if (m.dof == 0) continue;  // static obstacles are not graspers
      T dmin = std::numeric_limits<T>::max();
      for (size_t p = 0; p < ps.size(); p++)
        dmin = std::min(dmin, sdf(m, ps.x[p]));
      if (mode == ContactMode::Soft) {
        T z = 0;
        for (size_t p = 0; p < ps.size(); p++) {
          T e = (sdf(m, ps.x[p]) - dmin) / tau;
          if (e < 40) z += std::exp(-e);
        }
        r.grasp += std::max(T(0), dmin - tau * std::log(z));
      } else {
        r.grasp += std::max(T(0), dmin);
      }
    }
    T a = cfg.c1 * r.mass, b = cfg.c2 * r.dist, c = cfg.c3 * r.grasp;
    r.total = (-a - b - c) + c4v;
    return r;
  }

  void build() {
    if (cfg.env_steps < 1) fail(ErrorCode::Config, "env_steps must be >= 1");
    if (cfg.n_mass_grid < 8)
      fail(ErrorCode::Config, "mass tensor resolution must be >= 8");
    if (cfg.n_landmarks < 1) fail(ErrorCode::Config, "need at least 1 landmark");
    if (!(cfg.c1 > 0 && cfg.c2 > 0 && cfg.c3 >= 0 && cfg.softmin_tau > 0))
      fail(ErrorCode::Config, "reward weights must be positive (c3 may be 0)");
    prm = cfg.prm;
    prm.finalize();
    for (const auto& m : cfg.manips) {
      if (!(m.size.x > 0)) fail(ErrorCode::Config, "manipulator size must be positive");
      if (std::abs(qnorm(m.rot) - 1) > T(1e-6))
        fail(ErrorCode::Config, "manipulator orientation must be a unit quaternion");
    }
    sample_volumes(prm, cfg.volumes, cfg.manips, ps0_);
    if (int(ps0_.size()) < cfg.n_landmarks)
      fail(ErrorCode::Config, "fewer particles than landmarks");
    manips0_ = cfg.manips;
    for (auto& m : manips0_) {
      m.lin_vel = {};
      m.ang_vel = {};
    }
    action_dim_ = cfg.action_dim();
    if (cfg.a_min.empty()) cfg.a_min.assign(action_dim_, T(-1));
    if (cfg.a_max.empty()) cfg.a_max.assign(action_dim_, T(1));
    if (int(cfg.a_min.size()) != action_dim_ || int(cfg.a_max.size()) != action_dim_)
      fail(ErrorCode::Config, "action bounds length does not match action dim");
    for (int i = 0; i < action_dim_; i++)
      if (!(cfg.a_min[i] < cfg.a_max[i]))
        fail(ErrorCode::Config, "action bounds must satisfy min < max");

    std::vector<Vec3<T>> target = build_target(cfg, prm, ps0_);
    sg.resize(cfg.n_mass_grid);
    splat_mass(target, prm.p_mass, sg);
    sdfg = target_sdf(sg);
    s0.resize(cfg.n_mass_grid);
    splat_mass(ps0_.x, prm.p_mass, s0);
    total_mass = prm.p_mass * T(ps0_.size());
    base_iou = soft_iou(s0, sg);
    if (base_iou >= 1)
      fail(ErrorCode::Config, "initial shape already matches the target");
    int stride = int(ps0_.size()) / cfg.n_landmarks;
    landmarks.resize(cfg.n_landmarks);
    for (int i = 0; i < cfg.n_landmarks; i++) landmarks[i] = i * stride;
    grid.resize(prm.n);
    reset();
    RewardTerms<T> r0 = terms_with(0);
    c4 = cfg.c1 * r0.mass + cfg.c2 * r0.dist + cfg.c3 * r0.grasp;
  }
};

// ---------------------------------------------------------------------------
// Builtin tasks. Geometry lives in the unit cube with the floor band around
// y ~ 0.1; each variant perturbs placements via a deterministic seed.

namespace detail {

struct TaskRng {
  std::mt19937 g;
  TaskRng(uint32_t family, int variant)
      : g(family * 1000003u + uint32_t(variant) * 7919u + 12345u) {}
  double uni(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(g);
  }
};

}  // namespace detail

// Two spherical grippers carry a plasticine cube to a translated target.
template <class T>
TaskConfig<T> make_move(int variant) {
  detail::TaskRng rng(1, variant);
  TaskConfig<T> cfg;
  cfg.name = "move";
  cfg.variant = variant;
  cfg.prm.n = 64;
  T cx = T(0.5 + rng.uni(-0.02, 0.02)), cz = T(0.5 + rng.uni(-0.02, 0.02));
  T half = T(0.1);
  Volume<T> cube;
  cube.kind = VolKind::Box;
  cube.a = {cx - half, T(0.1), cz - half};
  cube.b = {cx + half, T(0.1) + 2 * half, cz + half};
  cfg.volumes.push_back(cube);
  T ang = T(rng.uni(0, 6.283185307179586)), amp = T(0.08 + rng.uni(0, 0.03));
  cfg.target.kind = TargetKind::Translate;
  cfg.target.offset = {amp * std::cos(ang), 0, amp * std::sin(ang)};
  for (int side = 0; side < 2; side++) {
    Manipulator<T> m;
    m.kind = ShapeKind::Sphere;
    m.size = {T(0.03), 0, 0};
    m.friction = T(0.9);
    m.dof = 3;
    m.dof_mask = 0x7;
    m.pos = {cx + (side ? T(1) : T(-1)) * (half + T(0.045)), T(0.2), cz};
    cfg.manips.push_back(m);
  }
  cfg.a_min.assign(6, T(-2));
  cfg.a_max.assign(6, T(2));
  return cfg;
}

// A torus mold must be pressed into a fixed cube at the right spot.
template <class T>
TaskConfig<T> make_torus(int variant) {
  detail::TaskRng rng(2, variant);
  TaskConfig<T> cfg;
  cfg.name = "torus";
  cfg.variant = variant;
  cfg.prm.n = 64;
  Volume<T> cube;
  cube.kind = VolKind::Box;
  cube.a = {T(0.42), T(0.10), T(0.42)};
  cube.b = {T(0.58), T(0.26), T(0.58)};
  cfg.volumes.push_back(cube);
  Manipulator<T> mold;
  mold.kind = ShapeKind::Torus;
  mold.size = {T(0.05), T(0.02), 0};
  mold.friction = T(0.9);
  mold.dof = 3;
  mold.dof_mask = 0x7;
  mold.pos = {T(0.5 + rng.uni(-0.06, 0.06)), T(0.36), T(0.5 + rng.uni(-0.06, 0.06))};
  cfg.manips.push_back(mold);
  cfg.target.kind = TargetKind::Script;
  cfg.target.script = "press";
  cfg.target.params = {T(0.5 + rng.uni(-0.025, 0.025)),
                       T(0.5 + rng.uni(-0.025, 0.025)), T(0.245), T(2.5)};
  cfg.a_min.assign(3, T(-2));
  cfg.a_max.assign(3, T(2));
  return cfg;
}

// A 3-DoF horizontal capsule (descend / roll along x / spin about y)
// flattens a dough box toward a squashed copy of itself.
template <class T>
TaskConfig<T> make_rollingpin(int variant) {
  detail::TaskRng rng(3, variant);
  TaskConfig<T> cfg;
  cfg.name = "rollingpin";
  cfg.variant = variant;
  cfg.prm.n = 64;
  Volume<T> dough;
  dough.kind = VolKind::Box;
  dough.a = {T(0.38), T(0.10), T(0.40)};
  dough.b = {T(0.62), T(0.18), T(0.60)};
  cfg.volumes.push_back(dough);
  Manipulator<T> pin;
  pin.kind = ShapeKind::Capsule;
  pin.size = {T(0.03), T(0.14), 0};
  pin.friction = T(0.9);
  pin.dof = 6;
  pin.dof_mask = (1u << 0) | (1u << 1) | (1u << 4);  // vx, vy, wy
  pin.pos = {T(0.5 + rng.uni(-0.03, 0.03)), T(0.23), T(0.5)};
  T s = T(std::sqrt(0.5));
  pin.rot = {s, s, 0, 0};  // local axis y -> world z
  cfg.manips.push_back(pin);
  cfg.target.kind = TargetKind::Script;
  cfg.target.script = "squash";
  cfg.target.params = {T(0.45 + rng.uni(0, 0.1)), T(0.5), T(0.5), T(0.10)};
  cfg.a_min = {T(-2), T(-2), T(-20)};
  cfg.a_max = {T(2), T(2), T(20)};
  return cfg;
}

// A vertical pen carves a random scribble into the top of a cube.
template <class T>
TaskConfig<T> make_writer(int variant) {
  detail::TaskRng rng(4, variant);
  TaskConfig<T> cfg;
  cfg.name = "writer";
  cfg.variant = variant;
  cfg.prm.n = 64;
  Volume<T> cube;
  cube.kind = VolKind::Box;
  cube.a = {T(0.42), T(0.10), T(0.42)};
  cube.b = {T(0.58), T(0.26), T(0.58)};
  cfg.volumes.push_back(cube);
  Manipulator<T> pen;
  pen.kind = ShapeKind::Capsule;
  pen.size = {T(0.015), T(0.07), 0};
  pen.friction = T(0.9);
  pen.dof = 3;
  pen.dof_mask = 0x7;
  // Tip sits 0.085 below the capsule center; hover the tip at y = 0.29.
  const T tip = T(0.085), hover = T(0.29);
  std::vector<T> pts;
  for (int i = 0; i < 3; i++) {
    pts.push_back(T(0.5 + rng.uni(-0.05, 0.05)));
    pts.push_back(T(0.5 + rng.uni(-0.05, 0.05)));
  }
  pen.pos = {pts[0], hover + tip, pts[1]};
  cfg.manips.push_back(pen);
  cfg.target.kind = TargetKind::Script;
  cfg.target.script = "scribble";
  // Pen-center heights: carve with the tip 0.02 into the top face (y=0.26).
  cfg.target.params = {T(0.24) + tip, hover + tip, T(2.5)};
  for (T v : pts) cfg.target.params.push_back(v);
  cfg.a_min.assign(3, T(-2));
  cfg.a_max.assign(3, T(2));
  return cfg;
}

// Two spherical grippers wind a rope around a static pillar.
template <class T>
TaskConfig<T> make_rope(int variant) {
  detail::TaskRng rng(5, variant);
  TaskConfig<T> cfg;
  cfg.name = "rope";
  cfg.variant = variant;
  cfg.prm.n = 64;
  cfg.prm.yield_stress = 200;  // stiffer rope so it bends without fracturing
  T cz = T(0.40 + rng.uni(0, 0.04));
  Volume<T> rope;
  rope.kind = VolKind::Capsule;
  rope.a = {T(0.28), T(0.13), cz};
  rope.b = {T(0.72), T(0.13), cz};
  rope.r = T(0.03);
  cfg.volumes.push_back(rope);
  Manipulator<T> pillar;
  pillar.kind = ShapeKind::Capsule;
  pillar.size = {T(0.03), T(0.12), 0};
  pillar.friction = T(0.1);
  pillar.dof = 0;
  pillar.dof_mask = 0;
  T pcx = T(0.5 + rng.uni(-0.03, 0.03));
  pillar.pos = {pcx, T(0.16), cz + T(0.065)};
  cfg.manips.push_back(pillar);
  for (int side = 0; side < 2; side++) {
    Manipulator<T> m;
    m.kind = ShapeKind::Sphere;
    m.size = {T(0.03), 0, 0};
    m.friction = T(0.9);
    m.dof = 3;
    m.dof_mask = 0x7;
    m.pos = {side ? T(0.72) : T(0.28), T(0.13), cz - T(0.065)};
    cfg.manips.push_back(m);
  }
  cfg.target.kind = TargetKind::Script;
  cfg.target.script = "rope_wrap";
  cfg.target.params = {pcx,     cz + T(0.065),         T(0.065),
                       T(1.7 + rng.uni(0, 0.4)), T(0.13), cz};
  cfg.a_min.assign(6, T(-2));
  cfg.a_max.assign(6, T(2));
  return cfg;
}

template <class T>
TaskConfig<T> make_task(const std::string& name, int variant) {
  if (name == "move") return make_move<T>(variant);
  if (name == "torus") return make_torus<T>(variant);
  if (name == "rollingpin") return make_rollingpin<T>(variant);
  if (name == "writer") return make_writer<T>(variant);
  if (name == "rope") return make_rope<T>(variant);
  fail(ErrorCode::Config, "unknown task: " + name);
}

// Hand-scripted reference solution for Move: squeeze, then carry toward the
// target offset. Used as a sanity oracle for evaluation plumbing.
template <class T>
std::vector<std::vector<T>> move_reference_actions(const TaskConfig<T>& cfg) {
  Vec3<T> off = cfg.target.offset;
  const int squeeze_steps = 6;
  const int carry_steps = cfg.env_steps - squeeze_steps;
  T step_len = cfg.prm.n_substeps * cfg.prm.dt;
  Vec3<T> carry = off / (carry_steps * step_len);
  std::vector<std::vector<T>> acts(cfg.env_steps, std::vector<T>(6, T(0)));
  for (int s = 0; s < cfg.env_steps; s++) {
    T grip = s < squeeze_steps ? T(1.2) : T(0.35);
    acts[s][0] = grip;   // left gripper +x
    acts[s][3] = -grip;  // right gripper -x
    if (s >= squeeze_steps) {
      acts[s][0] += carry.x;
      acts[s][3] += carry.x;
      acts[s][1] = acts[s][4] = carry.y;
      acts[s][2] = acts[s][5] = carry.z;
    }
  }
  return acts;
}

}  // namespace plastisim
