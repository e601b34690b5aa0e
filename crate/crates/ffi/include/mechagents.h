#ifndef MECHAGENTS_H
#define MECHAGENTS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MaStatus {
  MA_STATUS_OK = 0,
  MA_STATUS_NULL_ARGUMENT = 1,
  MA_STATUS_INVALID_UTF8 = 2,
  MA_STATUS_PARSE = 3,
  MA_STATUS_VALIDATION = 4,
  MA_STATUS_IO = 5,
  MA_STATUS_NOT_FOUND = 6,
  MA_STATUS_PANIC = 7,
} MaStatus;

/*
 Outcome category of an execution.
 */
typedef enum MaOutcomeStatus {
  MA_OUTCOME_STATUS_SUCCESS = 0,
  MA_OUTCOME_STATUS_VALIDATION_ERROR = 1,
  MA_OUTCOME_STATUS_SOLVER_ERROR = 2,
} MaOutcomeStatus;

/*
 Result of executing a problem.
 */
typedef struct MaOutcome MaOutcome;

/*
 Parsed problem document.
 */
typedef struct MaProblem MaProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *ma_last_error(void);

/*
 Library version, static storage.
 */
const char *ma_version(void);

/*
 # Safety
 `s` must be null or a string returned by this library, freed once.
 */
void ma_string_free(char *s);

/*
 Parses a problem document (JSON). On success `*out` holds a new handle.

 # Safety
 `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum MaStatus ma_problem_parse(const char *json, struct MaProblem **out);

/*
 Checks the document without solving. On `Validation` the last error
 lists one `CODE: subject` line per violation.

 # Safety
 `problem` must be a live handle from [`ma_problem_parse`].
 */
enum MaStatus ma_problem_validate(const struct MaProblem *problem);

/*
 # Safety
 `problem` must be null or a handle from [`ma_problem_parse`], freed once.
 */
void ma_problem_free(struct MaProblem *problem);

/*
 Executes the problem, writing artifacts under `workdir`. Returns `Ok`
 whenever an outcome was produced, including validation and solver
 failures; inspect it with [`ma_outcome_status`].

 # Safety
 `problem` must be a live handle, `workdir` a nul-terminated string and
 `out` a valid pointer.
 */
enum MaStatus ma_execute(const struct MaProblem *problem,
                         const char *workdir,
                         struct MaOutcome **out);

/*
 # Safety
 `outcome` must be a live handle from [`ma_execute`].
 */
enum MaOutcomeStatus ma_outcome_status(const struct MaOutcome *outcome);

/*
 Looks up a named scalar such as `traction_force_x`.

 # Safety
 `outcome` must be a live handle, `name` a nul-terminated string and
 `value` a valid pointer.
 */
enum MaStatus ma_outcome_scalar(const struct MaOutcome *outcome, const char *name, double *value);

/*
 Human-readable outcome, as shown to agents. Free with [`ma_string_free`].

 # Safety
 `outcome` must be a live handle.
 */
char *ma_outcome_text(const struct MaOutcome *outcome);

/*
 The outcome as JSON. Free with [`ma_string_free`].

 # Safety
 `outcome` must be a live handle.
 */
char *ma_outcome_json(const struct MaOutcome *outcome);

/*
 # Safety
 `outcome` must be a live handle.
 */
size_t ma_outcome_artifact_count(const struct MaOutcome *outcome);

/*
 PNG path (relative to the work directory) of artifact `index`, or null
 when out of range. Free with [`ma_string_free`].

 # Safety
 `outcome` must be a live handle.
 */
char *ma_outcome_artifact_path(const struct MaOutcome *outcome, size_t index);

/*
 # Safety
 `outcome` must be null or a handle from [`ma_execute`], freed once.
 */
void ma_outcome_free(struct MaOutcome *outcome);

/*
 Renders a field file to PNG and reports the plotted range.

 # Safety
 Paths must be nul-terminated strings; `min` and `max` may be null.
 */
enum MaStatus ma_render_png(const char *field_path, const char *png_path, double *min, double *max);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MECHAGENTS_H */
