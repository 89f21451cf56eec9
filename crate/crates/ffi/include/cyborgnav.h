/* C interface for the cyborgnav simulation and metrics toolkit. */

#ifndef CYBORGNAV_H
#define CYBORGNAV_H

/* Generated by cbindgen from cyborgnav-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code returned by every fallible function in this interface.
typedef enum CnStatus {
  // The call succeeded.
  CN_OK = 0,
  // A required pointer argument was NULL.
  CN_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  CN_INVALID_UTF8 = 2,
  // The configuration failed validation.
  CN_INVALID_CONFIG = 3,
  // The simulation could not run to completion.
  CN_RUN_FAILED = 4,
  // A file could not be read or written.
  CN_IO_ERROR = 5,
  // The requested metric is undefined for this trial (e.g. tracking
  // error of a failed trial).
  CN_UNDEFINED_METRIC = 6,
  // An index argument was out of range.
  CN_INDEX_OUT_OF_RANGE = 7,
} CnStatus;

// Terminal outcome of a trial.
typedef enum CnOutcome {
  // The agent reached the destination circle.
  CN_OUTCOME_SUCCESS = 0,
  // The time limit elapsed first.
  CN_OUTCOME_TIMEOUT = 1,
  // The agent left the arena.
  CN_OUTCOME_OUT_OF_BOUNDS = 2,
} CnOutcome;

// Why a trial was flagged for exclusion from analysis.
typedef enum CnExclusion {
  // The trial is clean.
  CN_EXCLUSION_NONE = 0,
  // Fifteen or more consecutive same-side antenna stimuli.
  CN_EXCLUSION_UNILATERAL = 1,
  // More than a fifth of the frames lost tracking.
  CN_EXCLUSION_MISS_TRACKING = 2,
} CnExclusion;

// Stimulation channel of a command.
typedef enum CnChannel {
  CN_CHANNEL_LEFT_ANTENNA = 0,
  CN_CHANNEL_RIGHT_ANTENNA = 1,
  CN_CHANNEL_ELYTRA_BOTH = 2,
} CnChannel;

// Opaque trial configuration handle.
typedef struct CnConfig CnConfig;

// Opaque session handle: an ordered list of trials by one animal.
typedef struct CnSession CnSession;

// Opaque finished-trial handle.
typedef struct CnTrial CnTrial;

// One tracked pose sample.
typedef struct CnFrame {
  double t_s;
  double x_mm;
  double y_mm;
  double heading_deg;
  // 1 when the pose was tracked, 0 when it carries the last known pose.
  uint8_t tracked;
} CnFrame;

// One stimulus command as delivered.
typedef struct CnStimulus {
  double t_s;
  enum CnChannel channel;
  double frequency_hz;
  double duration_ms;
} CnStimulus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version of this library as a static NUL-terminated string.
const char *cn_version(void);

// Copy the current thread's last error message into `buf` (at most
// `cap - 1` bytes plus a NUL terminator). Returns the full message length
// in bytes, whether or not it fit. `buf` may be NULL when `cap` is 0.
size_t cn_last_error(char *buf, size_t cap);

// Allocate a configuration with the built-in defaults.
struct CnConfig *cn_config_default(void);

// Parse a configuration from a JSON document (the same schema the CLI
// accepts). On success writes a new handle to `out`.
//
// # Safety
// `json` must point to a NUL-terminated string.
enum CnStatus cn_config_from_json(const char *json, struct CnConfig **out);

// Free a configuration handle. NULL is accepted and ignored.
//
// # Safety
// `cfg` must be NULL or a pointer from a `cn_config_*` constructor, and
// must not be used afterwards.
void cn_config_free(struct CnConfig *cfg);

// Set the master seed.
//
// # Safety
// `cfg` must be a valid configuration handle.
enum CnStatus cn_config_set_seed(struct CnConfig *cfg, uint64_t seed);

// Set the proportional gain and update interval.
//
// # Safety
// `cfg` must be a valid configuration handle.
enum CnStatus cn_config_set_controller(struct CnConfig *cfg, double kp, double t_update_s);

// Run the lane in reverse (destination to origin) when `reversed` is
// nonzero.
//
// # Safety
// `cfg` must be a valid configuration handle.
enum CnStatus cn_config_set_reversed(struct CnConfig *cfg, uint8_t reversed);

// Run one trial under `cfg`. On success writes a new trial handle to
// `out`.
//
// # Safety
// `cfg` must be a valid configuration handle and `out` a valid pointer.
enum CnStatus cn_trial_run(const struct CnConfig *cfg, struct CnTrial **out);

// Run a session of `n_trials` trials under `cfg`, alternating direction
// and carrying habituation across trials. On success writes a new session
// handle to `out`.
//
// # Safety
// `cfg` must be a valid configuration handle and `out` a valid pointer.
enum CnStatus cn_session_run(const struct CnConfig *cfg, uint32_t n_trials, struct CnSession **out);

// Free a session handle. NULL is accepted and ignored.
//
// # Safety
// `session` must be NULL or a pointer from [`cn_session_run`], and must
// not be used afterwards.
void cn_session_free(struct CnSession *session);

// Number of trials in a session; 0 for NULL.
//
// # Safety
// `session` must be NULL or a valid session handle.
size_t cn_session_len(const struct CnSession *session);

// Clone trial `index` of a session into an independent trial handle.
//
// # Safety
// `session` must be a valid session handle and `out` a valid pointer.
enum CnStatus cn_session_trial(const struct CnSession *session, size_t index, struct CnTrial **out);

// Free a trial handle. NULL is accepted and ignored.
//
// # Safety
// `trial` must be NULL or a trial handle from this library, and must not
// be used afterwards.
void cn_trial_free(struct CnTrial *trial);

// Terminal outcome of the trial.
//
// # Safety
// `trial` must be a valid trial handle and `out` a valid pointer.
enum CnStatus cn_trial_outcome(const struct CnTrial *trial, enum CnOutcome *out);

// Exclusion flag of the trial.
//
// # Safety
// `trial` must be a valid trial handle and `out` a valid pointer.
enum CnStatus cn_trial_exclusion(const struct CnTrial *trial, enum CnExclusion *out);

// Number of pose frames in the trial; 0 for NULL.
//
// # Safety
// `trial` must be NULL or a valid trial handle.
size_t cn_trial_frame_count(const struct CnTrial *trial);

// Copy pose frame `index` into `out`.
//
// # Safety
// `trial` must be a valid trial handle and `out` a valid pointer.
enum CnStatus cn_trial_frame(const struct CnTrial *trial, size_t index, struct CnFrame *out);

// Number of stimuli delivered in the trial; 0 for NULL.
//
// # Safety
// `trial` must be NULL or a valid trial handle.
size_t cn_trial_stimulus_count(const struct CnTrial *trial);

// Copy stimulus `index` into `out`.
//
// # Safety
// `trial` must be a valid trial handle and `out` a valid pointer.
enum CnStatus cn_trial_stimulus(const struct CnTrial *trial, size_t index, struct CnStimulus *out);

// Tracking error of a successful trial, mm.
//
// # Safety
// `trial` must be a valid trial handle and `out` a valid pointer.
enum CnStatus cn_trial_tracking_error_mm(const struct CnTrial *trial, double *out);

// Navigation time of a successful trial, seconds.
//
// # Safety
// `trial` must be a valid trial handle and `out` a valid pointer.
enum CnStatus cn_trial_navigation_time_s(const struct CnTrial *trial, double *out);

// Stimulus count of a successful trial.
//
// # Safety
// `trial` must be a valid trial handle and `out` a valid pointer.
enum CnStatus cn_trial_control_effort(const struct CnTrial *trial, size_t *out);

// Write the trial to a JSONL log file at `path`.
//
// # Safety
// `trial` must be a valid trial handle and `path` a NUL-terminated string.
enum CnStatus cn_trial_write_jsonl(const struct CnTrial *trial, const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CYBORGNAV_H */
