#pragma once

// Gradient-based trajectory optimization: repeated soft-contact rollouts with
// analytic action gradients feeding Adam or momentum gradient ascent on the
// episode reward. Iterates live unclamped; the environment clamps to the
// action bounds, so entries pushed past a bound stop receiving gradient and
// simply saturate.

#include <cmath>
#include <random>
#include <vector>

#include "adjoint.hpp"
#include "task.hpp"

namespace plastisim {

enum class OptimMethod { Adam, GdMomentum };

template <class T>
struct OptimConfig {
  OptimMethod method = OptimMethod::Adam;
  T learning_rate = T(0.1);
  int episodes = 200;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  T momentum = T(0.9);
  T init_scale = 0;  // stddev of the Gaussian action init; 0 = exact zeros
};

template <class T>
struct OptimResult {
  std::vector<std::vector<T>> best_actions;
  std::vector<T> reward_curve;  // soft episode reward, one entry per episode
  std::vector<T> score_curve;   // soft normalized incremental IoU per episode
  T best_soft_reward = 0;
  T final_score = 0;    // hard-contact normalized incremental IoU of best_actions
  T initial_score = 0;  // same metric for the initial actions
  int divergences = 0;
};

// Learning rates that work well for the builtin tasks: the pushing/pressing
// tasks tolerate 0.1, the thin-feature tasks (rope, writer) need 0.01.
template <class T>
T default_learning_rate(const std::string& task_name) {
  if (task_name == "rope" || task_name == "writer") return T(0.01);
  return T(0.1);
}

// Draw initial actions ~ N(0, init_scale); init_scale == 0 gives exact zeros
// without touching the generator so the zero init is bitwise reproducible.
template <class T>
std::vector<std::vector<T>> init_actions(const Env<T>& env, uint64_t seed,
                                         T init_scale) {
  std::vector<std::vector<T>> a(env.cfg.env_steps,
                                std::vector<T>(env.action_dim(), T(0)));
  if (init_scale > 0) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist(0.0, double(init_scale));
    for (auto& row : a)
      for (auto& v : row) v = T(dist(gen));
  }
  return a;
}

// First/second moment state for Adam, velocity for momentum GD. Flat over the
// (env_steps x action_dim) variables.
template <class T>
struct OptimState {
  std::vector<T> m, v;
  int step = 0;
  void reset(size_t n) {
    m.assign(n, T(0));
    v.assign(n, T(0));
    step = 0;
  }
};

// One ascent update in place. `grads` holds d(total reward)/d(action).
template <class T>
void adam_step(std::vector<std::vector<T>>& actions,
               const std::vector<std::vector<T>>& grads, OptimState<T>& st,
               const OptimConfig<T>& cfg, T lr) {
  st.step++;
  T bc1 = 1 - std::pow(cfg.beta1, T(st.step));
  T bc2 = 1 - std::pow(cfg.beta2, T(st.step));
  size_t k = 0;
  for (size_t t = 0; t < actions.size(); t++)
    for (size_t d = 0; d < actions[t].size(); d++, k++) {
      T g = grads[t][d];
      st.m[k] = cfg.beta1 * st.m[k] + (1 - cfg.beta1) * g;
      st.v[k] = cfg.beta2 * st.v[k] + (1 - cfg.beta2) * g * g;
      actions[t][d] += lr * (st.m[k] / bc1) / (std::sqrt(st.v[k] / bc2) + cfg.eps);
    }
}

template <class T>
void gd_momentum_step(std::vector<std::vector<T>>& actions,
                      const std::vector<std::vector<T>>& grads,
                      OptimState<T>& st, const OptimConfig<T>& cfg, T lr) {
  st.step++;
  size_t k = 0;
  for (size_t t = 0; t < actions.size(); t++)
    for (size_t d = 0; d < actions[t].size(); d++, k++) {
      st.m[k] = cfg.momentum * st.m[k] + grads[t][d];
      actions[t][d] += lr * st.m[k];
    }
}

namespace detail {

// Hard-contact evaluation of an action sequence: normalized incremental IoU of
// the final state. Leaves the env reset-able; restores nothing itself.
template <class T>
T hard_score(Env<T>& env, const std::vector<std::vector<T>>& actions) {
  env.mode = ContactMode::Hard;
  env.reset();
  for (const auto& a : actions) env.step(a);
  return env.normalized_iou();
}

}  // namespace detail

// Optimize an action trajectory against the soft-contact reward, then score
// the best iterate under hard contact. Per episode: one soft rollout, one
// backward pass, one update. A diverged rollout rolls the iterate back to the
// last stable one, halves the learning rate, and zeroes the optimizer moments;
// its reward_curve entry repeats the last stable reward. Divergence on the
// very first episode (the initial actions themselves) is rethrown since there
// is no stable iterate to fall back to. If the hard evaluation of the best
// iterate scores below (or diverges against) the initial actions, the result
// falls back to the initial actions, so the returned score is never worse
// than not optimizing at all.
template <class T>
OptimResult<T> optimize_trajectory(Env<T>& env, const OptimConfig<T>& cfg,
                                   uint64_t seed) {
  if (!(cfg.learning_rate > 0)) fail(ErrorCode::Config, "learning rate must be positive");
  if (cfg.episodes < 1) fail(ErrorCode::Config, "need at least 1 episode");
  if (!(cfg.beta1 >= 0 && cfg.beta1 < 1 && cfg.beta2 >= 0 && cfg.beta2 < 1 &&
        cfg.eps > 0 && cfg.momentum >= 0 && cfg.momentum < 1 && cfg.init_scale >= 0))
    fail(ErrorCode::Config, "optimizer hyperparameters out of range");

  ContactMode saved_mode = env.mode;
  std::vector<std::vector<T>> actions = init_actions(env, seed, cfg.init_scale);
  const std::vector<std::vector<T>> initial = actions;
  std::vector<std::vector<T>> stable = actions;  // last iterate that rolled out

  OptimState<T> st;
  st.reset(size_t(env.cfg.env_steps) * size_t(env.action_dim()));
  T lr = cfg.learning_rate;

  OptimResult<T> res;
  res.best_actions = actions;
  res.best_soft_reward = -std::numeric_limits<T>::infinity();
  res.reward_curve.reserve(cfg.episodes);
  res.score_curve.reserve(cfg.episodes);
  T last_reward = 0, last_score = 0;
  Tape<T> tape;

  env.mode = ContactMode::Soft;
  for (int ep = 0; ep < cfg.episodes; ep++) {
    T r;
    try {
      r = rollout(env, actions, tape);
    } catch (const Error& e) {
      if (e.code != ErrorCode::Diverged || ep == 0) {
        env.mode = saved_mode;
        throw;
      }
      res.divergences++;
      actions = stable;
      lr *= T(0.5);
      st.reset(st.m.size());
      res.reward_curve.push_back(last_reward);
      res.score_curve.push_back(last_score);
      continue;
    }
    res.reward_curve.push_back(r);
    last_reward = r;
    last_score = env.normalized_iou();  // env still holds the rollout's final state
    res.score_curve.push_back(last_score);
    if (r > res.best_soft_reward) {
      res.best_soft_reward = r;
      res.best_actions = actions;
    }
    std::vector<std::vector<T>> grads = backward(env, tape);
    stable = actions;
    if (cfg.method == OptimMethod::Adam)
      adam_step(actions, grads, st, cfg, lr);
    else
      gd_momentum_step(actions, grads, st, cfg, lr);
  }

  res.initial_score = detail::hard_score(env, initial);
  T best_score = -std::numeric_limits<T>::infinity();
  try {
    best_score = detail::hard_score(env, res.best_actions);
  } catch (const Error&) {
    // any failure to evaluate the best iterate (divergence, or metrics left
    // undefined by a blown-up state) falls back to the initial actions
  }
  if (best_score < res.initial_score) {
    res.best_actions = initial;
    best_score = res.initial_score;
  }
  res.final_score = best_score;
  env.mode = saved_mode;
  env.reset();
  return res;
}

}  // namespace plastisim
