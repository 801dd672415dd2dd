#ifndef BTL_H
#define BTL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define BTL_OK 0

#define BTL_ERR_NULL -1

#define BTL_ERR_UTF8 -2

#define BTL_ERR_PARSE -3

#define BTL_ERR_MODEL -4

#define BTL_ERR_PIPELINE -5

#define BTL_ERR_NO_WITNESS -6

#define BTL_ERR_PANIC -7

#define BTL_SAT 0

#define BTL_UNSAT 1

#define BTL_UNKNOWN 2

/**
 * A parsed formula with its propositions.
 */
typedef struct BtlFormula BtlFormula;

typedef struct BtlResult BtlResult;

typedef struct BtlTree BtlTree;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *btl_version(void);

/**
 * Copies the last error message of this thread into `*out` (NULL if none).
 *
 * # Safety
 * `out` must be valid for writes.
 */
int32_t btl_last_error(char **out);

/**
 * # Safety
 * `s` must come from this library or be NULL.
 */
void btl_string_free(char *s);

/**
 * Parses a formula file: `props: p q` on the first line, then the formula.
 *
 * # Safety
 * `file_text` must be a nul-terminated string, `out` valid for writes.
 */
int32_t btl_formula_parse(const char *file_text, BtlFormula **out);

/**
 * Prints the formula in the concrete syntax.
 *
 * # Safety
 * `f` must be a live handle, `out` valid for writes.
 */
int32_t btl_formula_print(const BtlFormula *f, char **out);

/**
 * Number of propositions declared in the formula file.
 *
 * # Safety
 * `f` must be a live handle or NULL.
 */
uintptr_t btl_formula_prop_count(const BtlFormula *f);

/**
 * # Safety
 * `f` must come from `btl_formula_parse` or be NULL.
 */
void btl_formula_free(BtlFormula *f);

/**
 * Reads a tree in the JSON format of the command line.
 *
 * # Safety
 * `json` must be a nul-terminated string, `out` valid for writes.
 */
int32_t btl_tree_from_json(const char *json, BtlTree **out);

/**
 * # Safety
 * `t` must come from `btl_tree_from_json` or be NULL.
 */
void btl_tree_free(BtlTree *t);

/**
 * Evaluates `f` at `node` of `t`; writes 1 or 0 to `*out`.
 *
 * # Safety
 * Handles must be live, `out` valid for writes.
 */
int32_t btl_evaluate(const BtlFormula *f, const BtlTree *t, uintptr_t node, int32_t *out);

/**
 * Decides satisfiability with the given caps (0 selects the default).
 *
 * # Safety
 * `f` must be a live handle, `out` valid for writes.
 */
int32_t btl_sat(const BtlFormula *f, uintptr_t d_max, uintptr_t state_cap, BtlResult **out);

/**
 * `BTL_SAT`, `BTL_UNSAT` (within the branching cap) or `BTL_UNKNOWN`;
 * `BTL_ERR_NULL` for a NULL handle.
 *
 * # Safety
 * `r` must be a live handle or NULL.
 */
int32_t btl_result_verdict(const BtlResult *r);

/**
 * The witness as Kripke JSON; `BTL_ERR_NO_WITNESS` unless SAT.
 *
 * # Safety
 * `r` must be a live handle, `out` valid for writes.
 */
int32_t btl_result_witness_json(const BtlResult *r, char **out);

/**
 * Statistics and scope of the run as JSON.
 *
 * # Safety
 * `r` must be a live handle, `out` valid for writes.
 */
int32_t btl_result_report_json(const BtlResult *r, char **out);

/**
 * # Safety
 * `r` must come from `btl_sat` or be NULL.
 */
void btl_result_free(BtlResult *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BTL_H */
