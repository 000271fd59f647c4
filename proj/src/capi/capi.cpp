// C boundary: opaque environment handle, status codes, precision dispatch.
// All exceptions stop here.

#include "plastisim/plastisim.h"

#include <memory>
#include <string>
#include <vector>

#include "core/adjoint.hpp"
#include "core/config.hpp"
#include "core/optimize.hpp"

using plastisim::Env;
using plastisim::Error;
using plastisim::ErrorCode;
using plastisim::RunManifest;

struct ps_env {
  RunManifest m;
  std::unique_ptr<Env<float>> ef;
  std::unique_ptr<Env<double>> ed;
};

namespace {

thread_local std::string g_last_error;

template <class Fn>
ps_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return PS_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return ps_status(int(e.code));
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PS_ERR_INVALID;
  }
}

// Run fn with whichever precision this env holds.
template <class Fn>
auto dispatch(ps_env* e, Fn&& fn) {
  return e->ed ? fn(*e->ed) : fn(*e->ef);
}
template <class Fn>
auto dispatch(const ps_env* e, Fn&& fn) {
  return e->ed ? fn(static_cast<const Env<double>&>(*e->ed))
               : fn(static_cast<const Env<float>&>(*e->ef));
}

template <class T>
std::vector<std::vector<T>> to_matrix(const double* a, int steps, int dim) {
  std::vector<std::vector<T>> m(steps, std::vector<T>(dim));
  for (int t = 0; t < steps; t++)
    for (int i = 0; i < dim; i++) m[t][i] = T(a[size_t(t) * dim + i]);
  return m;
}

template <class T>
void from_matrix(const std::vector<std::vector<T>>& m, double* out) {
  size_t k = 0;
  for (const auto& row : m)
    for (T v : row) out[k++] = double(v);
}

void require(bool ok, const char* msg) {
  if (!ok) plastisim::fail(ErrorCode::Invalid, msg);
}

}  // namespace

extern "C" {

const char* ps_version(void) { return "1.0.0"; }
int ps_api_version(void) { return PS_API_VERSION; }
const char* ps_last_error(void) { return g_last_error.c_str(); }

ps_status ps_env_create(const char* manifest_json, ps_env** out) {
  return guarded([&] {
    require(manifest_json && out, "null argument to ps_env_create");
    auto e = std::make_unique<ps_env>();
    e->m = plastisim::parse_manifest(manifest_json);
    if (e->m.precision == "float")
      e->ef = std::make_unique<Env<float>>(plastisim::manifest_task<float>(e->m));
    else
      e->ed = std::make_unique<Env<double>>(plastisim::manifest_task<double>(e->m));
    if (e->m.contact == "hard")
      dispatch(e.get(), [](auto& env) {
        env.mode = plastisim::ContactMode::Hard;
        return 0;
      });
    *out = e.release();
  });
}

void ps_env_destroy(ps_env* env) { delete env; }

int ps_particle_count(const ps_env* env) {
  if (!env) return -1;
  return dispatch(env, [](const auto& e) { return int(e.ps.size()); });
}
int ps_action_dim(const ps_env* env) {
  if (!env) return -1;
  return dispatch(env, [](const auto& e) { return e.action_dim(); });
}
int ps_obs_dim(const ps_env* env) {
  if (!env) return -1;
  return dispatch(env, [](const auto& e) { return e.obs_dim(); });
}
int ps_env_steps(const ps_env* env) {
  if (!env) return -1;
  return dispatch(env, [](const auto& e) { return e.cfg.env_steps; });
}
int ps_manip_count(const ps_env* env) {
  if (!env) return -1;
  return dispatch(env, [](const auto& e) { return int(e.manips.size()); });
}
int ps_episodes(const ps_env* env) { return env ? env->m.episodes : -1; }
int ps_precision(const ps_env* env) {
  if (!env) return -1;
  return env->ed ? 8 : 4;
}
int ps_env_t(const ps_env* env) {
  if (!env) return -1;
  return dispatch(env, [](const auto& e) { return e.t; });
}

ps_status ps_set_contact_mode(ps_env* env, int hard) {
  return guarded([&] {
    require(env, "null env");
    dispatch(env, [&](auto& e) {
      e.mode = hard ? plastisim::ContactMode::Hard : plastisim::ContactMode::Soft;
      return 0;
    });
  });
}

ps_status ps_reset(ps_env* env) {
  return guarded([&] {
    require(env, "null env");
    dispatch(env, [](auto& e) {
      e.reset();
      return 0;
    });
  });
}

ps_status ps_step(ps_env* env, const double* action, double* reward) {
  return guarded([&] {
    require(env, "null env");
    dispatch(env, [&](auto& e) {
      using T = std::decay_t<decltype(e.ps.x[0].x)>;
      int d = e.action_dim();
      require(action || d == 0, "null action");
      std::vector<T> a(d);
      for (int i = 0; i < d; i++) a[i] = T(action[i]);
      T r = e.step(a);
      if (reward) *reward = double(r);
      return 0;
    });
  });
}

ps_status ps_observe(const ps_env* env, double* obs) {
  return guarded([&] {
    require(env && obs, "null argument to ps_observe");
    dispatch(env, [&](const auto& e) {
      auto o = e.observe();
      for (size_t i = 0; i < o.size(); i++) obs[i] = double(o[i]);
      return 0;
    });
  });
}

ps_status ps_particles(const ps_env* env, double* x, double* v) {
  return guarded([&] {
    require(env && x, "null argument to ps_particles");
    dispatch(env, [&](const auto& e) {
      for (size_t p = 0; p < e.ps.size(); p++) {
        x[3 * p + 0] = double(e.ps.x[p].x);
        x[3 * p + 1] = double(e.ps.x[p].y);
        x[3 * p + 2] = double(e.ps.x[p].z);
        if (v) {
          v[3 * p + 0] = double(e.ps.v[p].x);
          v[3 * p + 1] = double(e.ps.v[p].y);
          v[3 * p + 2] = double(e.ps.v[p].z);
        }
      }
      return 0;
    });
  });
}

ps_status ps_metrics(ps_env* env, double* iou, double* normalized_iou) {
  return guarded([&] {
    require(env, "null env");
    dispatch(env, [&](auto& e) {
      if (iou) *iou = double(e.iou());
      if (normalized_iou) *normalized_iou = double(e.normalized_iou());
      return 0;
    });
  });
}

ps_status ps_rollout_grad(ps_env* env, const double* actions,
                          double* total_reward, double* grads) {
  return guarded([&] {
    require(env && actions, "null argument to ps_rollout_grad");
    dispatch(env, [&](auto& e) {
      using T = std::decay_t<decltype(e.ps.x[0].x)>;
      auto a = to_matrix<T>(actions, e.cfg.env_steps, e.action_dim());
      plastisim::Tape<T> tape;
      T total = plastisim::rollout(e, a, tape);
      if (total_reward) *total_reward = double(total);
      if (grads) from_matrix(plastisim::backward(e, tape), grads);
      return 0;
    });
  });
}

ps_status ps_gradcheck(ps_env* env, const double* actions, double h,
                       double tolerance, ps_gradcheck_report* report) {
  bool passed = false;
  ps_status st = guarded([&] {
    require(env, "null env");
    double hh = h > 0 ? h : env->m.h;
    double tol = tolerance > 0 ? tolerance : env->m.tolerance;
    require(hh > 0 && tol > 0, "gradcheck needs positive h and tolerance");
    dispatch(env, [&](auto& e) {
      using T = std::decay_t<decltype(e.ps.x[0].x)>;
      std::vector<std::vector<T>> a =
          actions ? to_matrix<T>(actions, e.cfg.env_steps, e.action_dim())
                  : std::vector<std::vector<T>>(
                        e.cfg.env_steps, std::vector<T>(e.action_dim(), T(0)));
      plastisim::GradcheckReport<T> rep = plastisim::gradcheck(e, a, T(hh));
      passed = double(rep.max_rel_err) <= tol;
      if (report) {
        report->max_rel_err = double(rep.max_rel_err);
        report->analytic = double(rep.analytic_at_worst);
        report->numeric = double(rep.numeric_at_worst);
        report->h = hh;
        report->tolerance = tol;
        report->worst_step = rep.worst_step;
        report->worst_dim = rep.worst_dim;
        report->pass = passed ? 1 : 0;
      }
      return 0;
    });
  });
  if (st != PS_OK) return st;
  if (!passed) {
    g_last_error = "gradient check exceeded tolerance";
    return PS_ERR_TOLERANCE;
  }
  return PS_OK;
}

ps_status ps_reference_actions(const ps_env* env, double* out) {
  return guarded([&] {
    require(env && out, "null argument to ps_reference_actions");
    dispatch(env, [&](const auto& e) {
      if (e.cfg.name != "move")
        plastisim::fail(ErrorCode::Config,
                        "no reference motion is defined for task \"" +
                            e.cfg.name + "\"");
      from_matrix(plastisim::move_reference_actions(e.cfg), out);
      return 0;
    });
  });
}

ps_status ps_optimize(ps_env* env, double* best_actions, double* reward_curve,
                      double* score_curve, ps_optim_report* report) {
  return guarded([&] {
    require(env && best_actions, "null argument to ps_optimize");
    dispatch(env, [&](auto& e) {
      using T = std::decay_t<decltype(e.ps.x[0].x)>;
      plastisim::OptimConfig<T> oc = plastisim::manifest_optim<T>(env->m);
      plastisim::OptimResult<T> res =
          plastisim::optimize_trajectory(e, oc, env->m.seed);
      from_matrix(res.best_actions, best_actions);
      if (reward_curve)
        for (int i = 0; i < oc.episodes; i++)
          reward_curve[i] = double(res.reward_curve[i]);
      if (score_curve)
        for (int i = 0; i < oc.episodes; i++)
          score_curve[i] = double(res.score_curve[i]);
      if (report) {
        report->best_soft_reward = double(res.best_soft_reward);
        report->final_score = double(res.final_score);
        report->initial_score = double(res.initial_score);
        report->divergences = res.divergences;
        report->episodes = oc.episodes;
      }
      return 0;
    });
  });
}

}  // extern "C"
