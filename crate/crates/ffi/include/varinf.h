#ifndef VARINF_H
#define VARINF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VarinfCertVerdict {
  VARINF_CERT_VERDICT_HOLDS = 0,
  VARINF_CERT_VERDICT_FAILS = 1,
  VARINF_CERT_VERDICT_INCONCLUSIVE = 2,
} VarinfCertVerdict;

/**
 * The quantity computed by [`varinf_estimate`].
 */
typedef enum VarinfQuantity {
  VARINF_QUANTITY_PLAIN = 0,
  VARINF_QUANTITY_LAMBDA = 1,
  VARINF_QUANTITY_THETA = 2,
  VARINF_QUANTITY_DELTA = 3,
  VARINF_QUANTITY_QUASI_LAMBDA = 4,
  VARINF_QUANTITY_QUASI_THETA = 5,
  VARINF_QUANTITY_QUASI_DELTA = 6,
} VarinfQuantity;

typedef enum VarinfStatus {
  VARINF_STATUS_OK = 0,
  VARINF_STATUS_NULL_POINTER = 1,
  VARINF_STATUS_INVALID_UTF8 = 2,
  VARINF_STATUS_PARSE = 3,
  VARINF_STATUS_INVALID_ARGUMENT = 4,
  VARINF_STATUS_DIMENSION = 5,
  VARINF_STATUS_COMPUTATION = 6,
  VARINF_STATUS_PANIC = 7,
} VarinfStatus;

typedef enum VarinfVerdict {
  VARINF_VERDICT_CONVERGED = 0,
  VARINF_VERDICT_NEGATIVE_INFINITY_DIVERGING = 1,
  VARINF_VERDICT_POSITIVE_INFINITY_DIVERGING = 2,
  VARINF_VERDICT_INCONCLUSIVE = 3,
} VarinfVerdict;

/**
 * A parsed function family.
 */
typedef struct VarinfFamily VarinfFamily;

/**
 * Value and verdict of an estimate. Infinite values are `±INFINITY`.
 */
typedef struct VarinfEstimate {
  double value;
  enum VarinfVerdict verdict;
  /**
   * Nonzero when some member needed an unbounded search.
   */
  bool heuristic;
} VarinfEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *varinf_last_error(void);

/**
 * Parses a family in the `.fam` text format.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VarinfStatus varinf_family_parse(const char *text, struct VarinfFamily **out);

/**
 * Loads a built-in fixture by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum VarinfStatus varinf_family_fixture(const char *name, struct VarinfFamily **out);

/**
 * # Safety
 * `family` must come from this library and not be freed twice. Null is ignored.
 */
void varinf_family_free(struct VarinfFamily *family);

/**
 * Dimension of the family's domain, 0 for a null handle.
 *
 * # Safety
 * `family` must be null or a live handle.
 */
uintptr_t varinf_family_dim(const struct VarinfFamily *family);

/**
 * Upper sum at `x` (`n` coordinates).
 *
 * # Safety
 * `x` must point to `n` doubles and `out` to one.
 */
enum VarinfStatus varinf_upper_sum(const struct VarinfFamily *family,
                                   const double *x,
                                   uintptr_t n,
                                   double *out);

/**
 * Estimates one quantity over `region` (an s-expression or `[a,b]`; null
 * for the family's own region).
 *
 * # Safety
 * `region` must be null or a NUL-terminated string; `out` a valid pointer.
 */
enum VarinfStatus varinf_estimate(const struct VarinfFamily *family,
                                  enum VarinfQuantity quantity,
                                  const char *region,
                                  uint64_t seed,
                                  struct VarinfEstimate *out);

/**
 * Certifies a property given by name, e.g. `"uniform-lsc"`. `joint-lsc`
 * and `inf-compact` are not available here.
 *
 * # Safety
 * `property` must be a NUL-terminated string, `region` null or one, and
 * `out` a valid pointer.
 */
enum VarinfStatus varinf_certify(const struct VarinfFamily *family,
                                 const char *property,
                                 const char *region,
                                 uint64_t seed,
                                 enum VarinfCertVerdict *out);

/**
 * Runs the regression corpus with `seed` and returns the JSON report in
 * `*out`, to be released with [`varinf_string_free`].
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum VarinfStatus varinf_corpus_json(uint64_t seed, char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed twice. Null is ignored.
 */
void varinf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VARINF_H */
