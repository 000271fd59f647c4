#ifndef PLASTISIM_H
#define PLASTISIM_H

/* C interface to the differentiable elastoplastic simulator.
 *
 * An environment is created from a manifest: a JSON document (format tag
 * "plastisim-manifest/1") naming a builtin task, a variant, a seed, the
 * numeric precision, and optional simulation / optimizer overrides. All
 * functions return ps_status; on failure ps_last_error() describes what went
 * wrong. Action and gradient matrices are row-major [env_steps x action_dim]
 * doubles regardless of the environment's internal precision.
 */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define PS_API_VERSION 1

typedef enum ps_status {
  PS_OK = 0,
  PS_ERR_CONFIG = 2,    /* bad manifest / task configuration */
  PS_ERR_DIVERGED = 3,  /* simulation blew up */
  PS_ERR_TOLERANCE = 4, /* gradient check exceeded its tolerance */
  PS_ERR_INVALID = 5,   /* misuse: bad arguments or call sequence */
  PS_ERR_IO = 6,        /* file / format problem */
} ps_status;

typedef struct ps_env ps_env;

/* Library version string and API version of this header's implementation. */
const char* ps_version(void);
int ps_api_version(void);

/* Message for the most recent failing call on this thread ("" if none). */
const char* ps_last_error(void);

/* ------------------------------------------------------------ lifecycle -- */

ps_status ps_env_create(const char* manifest_json, ps_env** out);
void ps_env_destroy(ps_env* env);

/* ---------------------------------------------------------------- shape -- */

int ps_particle_count(const ps_env* env);
int ps_action_dim(const ps_env* env);
int ps_obs_dim(const ps_env* env);
int ps_env_steps(const ps_env* env);
int ps_manip_count(const ps_env* env);
int ps_episodes(const ps_env* env);  /* optimizer episodes from the manifest */
int ps_precision(const ps_env* env); /* bytes per scalar: 4 float, 8 double */

/* ------------------------------------------------------------- stepping -- */

/* hard != 0 selects hard contact projection; 0 selects softened contact. */
ps_status ps_set_contact_mode(ps_env* env, int hard);

ps_status ps_reset(ps_env* env);

/* Advance one env step (applies the clamped action for all substeps).
 * action: [action_dim]; reward (optional): the step's shaped reward. */
ps_status ps_step(ps_env* env, const double* action, double* reward);

/* Env steps taken since the last reset. */
int ps_env_t(const ps_env* env);

/* obs: [obs_dim] = landmark positions+velocities, then manipulator poses. */
ps_status ps_observe(const ps_env* env, double* obs);

/* x: [3*particle_count]; v may be NULL. */
ps_status ps_particles(const ps_env* env, double* x, double* v);

/* Goal-matching metrics of the current state. Either pointer may be NULL. */
ps_status ps_metrics(ps_env* env, double* iou, double* normalized_iou);

/* ------------------------------------------------------------ gradients -- */

/* Episode rollout + adjoint pass (soft contact only).
 * actions: [env_steps x action_dim]; total_reward (optional);
 * grads (optional): d(total reward)/d(action), same shape as actions. */
ps_status ps_rollout_grad(ps_env* env, const double* actions,
                          double* total_reward, double* grads);

typedef struct ps_gradcheck_report {
  double max_rel_err;
  double analytic;  /* analytic gradient at the worst entry */
  double numeric;   /* central finite difference at the worst entry */
  double h;
  double tolerance; /* effective tolerance used for pass/fail */
  int worst_step;
  int worst_dim;
  int pass;
} ps_gradcheck_report;

/* Compare the adjoint gradient against central finite differences.
 * actions may be NULL (zero actions); h <= 0 and tolerance <= 0 fall back to
 * the manifest's gradcheck section. Returns PS_ERR_TOLERANCE (report still
 * filled) when max_rel_err > tolerance. */
ps_status ps_gradcheck(ps_env* env, const double* actions, double h,
                       double tolerance, ps_gradcheck_report* report);

/* ----------------------------------------------------------- optimizing -- */

/* Hand-scripted reference actions for tasks that define one (currently the
 * move task): out is [env_steps x action_dim]. PS_ERR_CONFIG otherwise. */
ps_status ps_reference_actions(const ps_env* env, double* out);

typedef struct ps_optim_report {
  double best_soft_reward;
  double final_score;   /* hard-contact normalized incremental IoU of best */
  double initial_score; /* same metric for the initial actions */
  int divergences;
  int episodes;
} ps_optim_report;

/* Gradient ascent on the episode reward using the manifest's optim section
 * (method, learning rate, episodes, init scale) and seed.
 * best_actions: [env_steps x action_dim] out; reward_curve / score_curve
 * (optional): [episodes] out; report (optional). */
ps_status ps_optimize(ps_env* env, double* best_actions, double* reward_curve,
                      double* score_curve, ps_optim_report* report);

#ifdef __cplusplus
}
#endif

#endif /* PLASTISIM_H */
