#ifndef MECHLAB_H
#define MECHLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every exported function.
typedef enum MlStatus {
  ML_STATUS_OK = 0,
  // A required pointer argument was null.
  ML_STATUS_NULL_POINTER = 1,
  // An argument was out of range or not valid UTF-8.
  ML_STATUS_INVALID_ARGUMENT = 2,
  // The request is well-formed but violates a domain rule.
  ML_STATUS_DOMAIN = 3,
  // Structured text failed to parse.
  ML_STATUS_PARSE = 4,
  // The enumeration would exceed the strategy-profile cap.
  ML_STATUS_TOO_LARGE = 5,
  // Reading or writing data failed.
  ML_STATUS_IO = 6,
  // A theorem check found a violation.
  ML_STATUS_VIOLATION = 7,
  // An internal panic was caught.
  ML_STATUS_PANIC = 8,
} MlStatus;

// An environment: agents, type spaces, outcomes and payoffs.
typedef struct MlEnvironment MlEnvironment;

// A mechanism together with the environment it is played in.
typedef struct MlMechanism MlMechanism;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread; empty after a
// success. The pointer stays valid until the next call on this thread.
const char *ml_last_error_message(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void ml_string_free(char *s);

// Creates the two-worker principal-worker environment.
//
// # Safety
// `out` must be valid for writes.
enum MlStatus ml_environment_principal_worker(struct MlEnvironment **out);

// Parses an environment from TOML text. Any `scf` table in the text is
// ignored here.
//
// # Safety
// `text` must be a nul-terminated string and `out` valid for writes.
enum MlStatus ml_environment_from_toml(const char *text, struct MlEnvironment **out);

// # Safety
// `env` must be null or a handle from this library, not yet freed.
void ml_environment_free(struct MlEnvironment *env);

// Creates a built-in mechanism (`2x2-I`, `2x2-E`, `3x3-I` or `3x3-E`) in
// the principal-worker environment.
//
// # Safety
// `name` must be a nul-terminated string and `out` valid for writes.
enum MlStatus ml_mechanism_builtin(const char *name, struct MlMechanism **out);

// Parses a mechanism file (TOML). Parse failures carry line and column in
// the error message.
//
// # Safety
// `text` must be a nul-terminated string and `out` valid for writes.
enum MlStatus ml_mechanism_from_toml(const char *text, struct MlMechanism **out);

// # Safety
// `mech` must be null or a handle from this library, not yet freed.
void ml_mechanism_free(struct MlMechanism *mech);

// Number of agents of the mechanism.
//
// # Safety
// `mech` must be a live handle and `out` valid for writes.
enum MlStatus ml_mechanism_agent_count(const struct MlMechanism *mech, uintptr_t *out);

// Outcome index selected by a message profile (`n` message indices, one
// per agent).
//
// # Safety
// `mech` must be a live handle, `messages` must point to `n` values and
// `out` must be valid for writes.
enum MlStatus ml_mechanism_outcome(const struct MlMechanism *mech,
                                   const uintptr_t *messages,
                                   uintptr_t n,
                                   uintptr_t *out);

// Aligned text rendering of the outcome table. Free the result with
// [`ml_string_free`].
//
// # Safety
// `mech` must be a live handle and `out` valid for writes.
enum MlStatus ml_mechanism_render(const struct MlMechanism *mech, char **out);

// Counts pure-strategy ex-post equilibria and, among them, the
// dominant-strategy ones. Either output pointer may be null.
//
// # Safety
// `mech` must be a live handle; non-null outputs must be valid for writes.
enum MlStatus ml_count_ex_post_equilibria(const struct MlMechanism *mech,
                                          uintptr_t *out_total,
                                          uintptr_t *out_dominant);

// Whether the social choice function given by `table` (outcome index per
// type profile, row-major with agent 1 slowest) is strategy-proof.
//
// # Safety
// `env` must be a live handle, `table` must point to `n` values and `out`
// must be valid for writes.
enum MlStatus ml_is_strategy_proof(const struct MlEnvironment *env,
                                   const uintptr_t *table,
                                   uintptr_t n,
                                   bool *out);

// Runs the composition suite: the principal-worker instance plus `trials`
// random environments. Writes the number of failed trials to
// `out_violations` and returns `ML_STATUS_VIOLATION` when it is nonzero.
//
// # Safety
// `out_violations` must be null or valid for writes.
enum MlStatus ml_verify_prop1(uintptr_t trials, uint64_t seed, uintptr_t *out_violations);

// Simulates the calibrated fourteen-session experiment with `seed` and
// returns the dataset as CSV. Free the result with [`ml_string_free`].
//
// # Safety
// `out` must be valid for writes.
enum MlStatus ml_simulate_csv(uint64_t seed, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MECHLAB_H */
