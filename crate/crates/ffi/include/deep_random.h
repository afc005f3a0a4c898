#ifndef DEEP_RANDOM_H
#define DEEP_RANDOM_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define DR_OK 0

#define DR_ERR_NULL 1

#define DR_ERR_INVALID 2

#define DR_ERR_CONFIG 3

#define DR_ERR_PARSE 4

#define DR_ERR_NOT_MATURE 5

#define DR_ERR_NOT_IN_ZETA 6

#define DR_ERR_BUFFER 7

#define DR_ERR_CHECKPOINT 8

#define DR_ERR_OTHER 9

#define DR_ERR_PANIC 10

/**
 * Opaque probability distribution over {0,1}^n.
 */
typedef struct DrDist DrDist;

/**
 * Opaque deep random generator.
 */
typedef struct DrDrg DrDrg;

/**
 * Opaque campaign report.
 */
typedef struct DrReport DrReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Empty after a success.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null with `len == 0`.
 */
int32_t dr_last_error(char *buf, size_t len, size_t *needed);

/**
 * Parses the text distribution format.
 *
 * # Safety
 * `src` must be a NUL-terminated string; `out` must be writable.
 */
int32_t dr_dist_from_text(const char *src, struct DrDist **out);

/**
 * Uniform distribution over {0,1}^n.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t dr_dist_uniform(size_t n, struct DrDist **out);

/**
 * # Safety
 * `d` must come from this library and not be used afterwards.
 */
void dr_dist_free(struct DrDist *d);

/**
 * # Safety
 * `d` must be a live handle; `n` and `support` must be writable or null.
 */
int32_t dr_dist_shape(const struct DrDist *d, size_t *n, size_t *support);

/**
 * Serializes to the text format. Call with a null buffer to learn the size.
 *
 * # Safety
 * `d` must be a live handle; `buf` must hold `len` bytes.
 */
int32_t dr_dist_to_text(const struct DrDist *d, char *buf, size_t len, size_t *needed);

/**
 * Draws one point into `bits` (one byte per coordinate, 0 or 1).
 *
 * # Safety
 * `d` must be a live handle; `bits` must hold `len >= n` bytes.
 */
int32_t dr_dist_sample(const struct DrDist *d, uint64_t seed, uint8_t *bits, size_t len);

/**
 * Membership in zeta(alpha).
 *
 * # Safety
 * `d` must be a live handle; `member` must be writable.
 */
int32_t dr_dist_in_zeta(const struct DrDist *d, double alpha, uint64_t seed, bool *member);

/**
 * New generator. `maturity == 0` keeps the computed maturity.
 *
 * # Safety
 * `out` must be writable.
 */
int32_t dr_drg_new(size_t n,
                   double k,
                   double alpha,
                   uint64_t seed,
                   size_t sequences,
                   uint64_t maturity,
                   struct DrDrg **out);

/**
 * # Safety
 * `g` must come from this library and not be used afterwards.
 */
void dr_drg_free(struct DrDrg *g);

/**
 * Advances every sequence by `steps`.
 *
 * # Safety
 * `g` must be a live handle.
 */
int32_t dr_drg_run(struct DrDrg *g, uint64_t steps);

/**
 * # Safety
 * `g` must be a live handle; `mature` must be writable.
 */
int32_t dr_drg_is_mature(const struct DrDrg *g, bool *mature);

/**
 * Elects a distribution; fails with `DR_ERR_NOT_MATURE` before maturity.
 *
 * # Safety
 * `g` must be a live handle; `out` must be writable.
 */
int32_t dr_drg_elect(struct DrDrg *g, struct DrDist **out);

/**
 * Checkpoint as JSON.
 *
 * # Safety
 * `g` must be a live handle; `buf` must hold `len` bytes.
 */
int32_t dr_drg_checkpoint(const struct DrDrg *g, char *buf, size_t len, size_t *needed);

/**
 * Rebuilds a generator from a checkpoint.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
int32_t dr_drg_restore(const char *json, struct DrDrg **out);

/**
 * Runs a Monte Carlo campaign from a TOML config (empty string for defaults).
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
int32_t dr_campaign_run(const char *toml, struct DrReport **out);

/**
 * # Safety
 * `r` must be a live handle; `buf` must hold `len` bytes.
 */
int32_t dr_report_json(const struct DrReport *r, char *buf, size_t len, size_t *needed);

/**
 * Counts of blocks, kept blocks and aborted blocks.
 *
 * # Safety
 * `r` must be a live handle; out-pointers must be writable or null.
 */
int32_t dr_report_counts(const struct DrReport *r,
                         uint64_t *blocks,
                         uint64_t *kept,
                         uint64_t *aborted);

/**
 * # Safety
 * `r` must come from this library and not be used afterwards.
 */
void dr_report_free(struct DrReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEEP_RANDOM_H */
