#ifndef HSW_H
#define HSW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Observation length.
 */
#define HSW_OBS_DIM 11

/*
 Action length.
 */
#define HSW_ACT_DIM 3

typedef enum HswStatus {
  HSW_STATUS_OK = 0,
  HSW_STATUS_NULL_POINTER = 1,
  HSW_STATUS_INVALID_ARGUMENT = 2,
  HSW_STATUS_IO = 3,
  HSW_STATUS_CONFIG = 4,
  HSW_STATUS_CHECKPOINT = 5,
  /*
   The episode has ended; call `hsw_env_reset`.
   */
  HSW_STATUS_EPISODE_DONE = 6,
  HSW_STATUS_PANIC = 7,
} HswStatus;

typedef enum HswTermination {
  HSW_TERMINATION_NONE = 0,
  HSW_TERMINATION_CLOSING_VELOCITY = 1,
  HSW_TERMINATION_GROUND_IMPACT = 2,
  HSW_TERMINATION_TIME_LIMIT = 3,
  HSW_TERMINATION_CONSTRAINT_VIOLATION = 4,
  HSW_TERMINATION_DYNAMICS_FAILURE = 5,
} HswTermination;

/*
 Opaque environment handle.
 */
typedef struct HswEnv HswEnv;

/*
 Opaque policy handle.
 */
typedef struct HswPolicy HswPolicy;

typedef struct HswStepResult {
  double observation[HSW_OBS_DIM];
  double reward;
  bool done;
  enum HswTermination termination;
  /*
   Episode time after the step, s.
   */
  double time_s;
  /*
   Closest approach; NaN until the episode ends.
   */
  double miss_distance_m;
  /*
   Speed at the end of the episode; NaN until it ends.
   */
  double terminal_speed_mps;
} HswStepResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *hsw_version(void);

/*
 Message for the last failed call on this thread, or an empty string.
 Valid until the next library call on the same thread.
 */
const char *hsw_last_error_message(void);

/*
 Creates an environment from a config file, or the default scenario when
 `config_path` is null.

 # Safety
 `config_path` must be null or a valid NUL-terminated string; `out` must
 be a valid pointer.
 */
enum HswStatus hsw_env_new(const char *config_path, struct HswEnv **out);

/*
 Starts an episode and writes the first observation into `obs_out`
 (`HSW_OBS_DIM` doubles).

 # Safety
 `env` must come from `hsw_env_new`; `obs_out` must hold `HSW_OBS_DIM` doubles.
 */
enum HswStatus hsw_env_reset(struct HswEnv *env, uint64_t seed, double *obs_out);

/*
 Advances one guidance period with `action` (`HSW_ACT_DIM` doubles,
 normalized rate commands).

 # Safety
 `env` must come from `hsw_env_new`; `action` must hold `HSW_ACT_DIM`
 doubles; `out` must be valid.
 */
enum HswStatus hsw_env_step(struct HswEnv *env, const double *action, struct HswStepResult *out);

/*
 Releases an environment. Null is ignored.

 # Safety
 `env` must be null or come from `hsw_env_new` and not be used afterwards.
 */
void hsw_env_free(struct HswEnv *env);

/*
 Loads a trained policy checkpoint. The policy acts with its mean unless
 `stochastic` is set.

 # Safety
 `checkpoint_path` must be a valid NUL-terminated string; `out` must be valid.
 */
enum HswStatus hsw_policy_load(const char *checkpoint_path,
                               bool stochastic,
                               struct HswPolicy **out);

/*
 Creates the proportional-navigation baseline for the vehicle in
 `config_path` (default vehicle when null).

 # Safety
 `config_path` must be null or a valid NUL-terminated string; `out` must be valid.
 */
enum HswStatus hsw_policy_pn(const char *config_path, struct HswPolicy **out);

/*
 Clears recurrent state; call at the start of every episode with the
 episode seed.

 # Safety
 `policy` must come from `hsw_policy_load` or `hsw_policy_pn`.
 */
enum HswStatus hsw_policy_reset(struct HswPolicy *policy, uint64_t seed);

/*
 Maps an observation (`HSW_OBS_DIM` doubles) to an action
 (`HSW_ACT_DIM` doubles).

 # Safety
 `policy` must be a live handle; `obs` and `action_out` must hold the
 stated number of doubles.
 */
enum HswStatus hsw_policy_act(struct HswPolicy *policy, const double *obs, double *action_out);

/*
 Releases a policy. Null is ignored.

 # Safety
 `policy` must be null or a live handle not used afterwards.
 */
void hsw_policy_free(struct HswPolicy *policy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HSW_H */
