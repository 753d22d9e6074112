/* C interface to the motiondesc zero-shot retrieval experiments. */

#ifndef MOTIONDESC_H
#define MOTIONDESC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible C call.
 */
typedef enum MdStatus {
  /**
   * Success.
   */
  MD_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  MD_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  MD_STATUS_INVALID_UTF8 = 2,
  /**
   * The config failed to parse or validate.
   */
  MD_STATUS_INVALID_CONFIG = 3,
  /**
   * A required artifact (dataset, checkpoint) is missing; run the
   * producing step first.
   */
  MD_STATUS_MISSING_ARTIFACT = 4,
  /**
   * The operation itself failed at runtime.
   */
  MD_STATUS_RUNTIME_ERROR = 5,
} MdStatus;

/**
 * Opaque experiment handle. Not thread-safe: use one handle per thread.
 */
typedef struct MdExperiment MdExperiment;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing this thread's most recent failure, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *md_last_error(void);

/**
 * Library version as a static string.
 */
const char *md_version(void);

/**
 * Create an experiment from a JSON config string. A null or empty
 * `config_json` uses the built-in defaults. On success writes the new
 * handle to `out` and returns `MD_STATUS_OK`; the handle must be released
 * with [`md_experiment_free`].
 *
 * # Safety
 * `config_json` must be null or a valid NUL-terminated string. `out` must
 * be a valid pointer to writable memory for one pointer.
 */
enum MdStatus md_experiment_new(const char *config_json, struct MdExperiment **out);

/**
 * Release an experiment handle. Null is allowed and does nothing.
 *
 * # Safety
 * `exp` must be null or a pointer previously returned by
 * [`md_experiment_new`] that has not been freed yet.
 */
void md_experiment_free(struct MdExperiment *exp);

/**
 * Generate the source and target datasets into the configured data
 * directory.
 *
 * # Safety
 * `exp` must be a live handle from [`md_experiment_new`].
 */
enum MdStatus md_experiment_generate(struct MdExperiment *exp);

/**
 * Train on the generated source split and write the checkpoint. On success
 * writes the final-epoch training accuracy (percent) to
 * `out_final_train_acc` if it is non-null.
 *
 * # Safety
 * `exp` must be a live handle; `out_final_train_acc` must be null or
 * writable.
 */
enum MdStatus md_experiment_train(struct MdExperiment *exp, double *out_final_train_acc);

/**
 * Evaluate the trained checkpoint zero-shot on the target split. On
 * success writes the top-1 accuracy (percent) to `out_accuracy_percent`
 * if it is non-null. Fails with `MD_STATUS_MISSING_ARTIFACT` when no
 * checkpoint exists yet.
 *
 * # Safety
 * `exp` must be a live handle; `out_accuracy_percent` must be null or
 * writable.
 */
enum MdStatus md_experiment_evaluate(struct MdExperiment *exp,
                                     bool masked,
                                     double *out_accuracy_percent);

/**
 * Check the configured model's analytic gradients against finite
 * differences. On success writes the max relative error to
 * `out_max_rel_err` if non-null; returns `MD_STATUS_RUNTIME_ERROR` when
 * the check exceeds the 1e-5 threshold.
 *
 * # Safety
 * `exp` must be a live handle; `out_max_rel_err` must be null or writable.
 */
enum MdStatus md_experiment_grad_check(struct MdExperiment *exp, double *out_max_rel_err);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOTIONDESC_H */
