#ifndef COMPCBF_H
#define COMPCBF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum CompcbfStatus {
  COMPCBF_STATUS_OK = 0,
  COMPCBF_STATUS_NULL_POINTER = 1,
  COMPCBF_STATUS_INVALID_UTF8 = 2,
  COMPCBF_STATUS_INVALID_ARGUMENT = 3,
  COMPCBF_STATUS_PARSE = 4,
  COMPCBF_STATUS_MODEL = 5,
  COMPCBF_STATUS_CHECK_FAILED = 6,
  COMPCBF_STATUS_SMALL_GAIN_VIOLATED = 7,
  COMPCBF_STATUS_PANIC = 8,
} CompcbfStatus;

/**
 * A deterministic Büchi or co-Büchi automaton.
 */
typedef struct CompcbfAutomaton CompcbfAutomaton;

/**
 * A local barrier certificate.
 */
typedef struct CompcbfCertificate CompcbfCertificate;

/**
 * A network of subsystems and, when known, its labeling function.
 */
typedef struct CompcbfNetwork CompcbfNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next `compcbf_*` call on the same thread.
 */
const char *compcbf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *compcbf_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void compcbf_string_free(char *s);

/**
 * Parses an automaton from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum CompcbfStatus compcbf_automaton_from_json(const char *json, struct CompcbfAutomaton **out);

/**
 * Complement of `a` as a new handle.
 *
 * # Safety
 * `a` must be a live automaton handle; `out` must be writable.
 */
enum CompcbfStatus compcbf_automaton_complement(const struct CompcbfAutomaton *a,
                                                struct CompcbfAutomaton **out);

/**
 * Number of states of `a`, or 0 for NULL.
 *
 * # Safety
 * `a` must be NULL or a live automaton handle.
 */
uintptr_t compcbf_automaton_state_count(const struct CompcbfAutomaton *a);

/**
 * # Safety
 * `a` must be NULL or a handle from this library not yet freed.
 */
void compcbf_automaton_free(struct CompcbfAutomaton *a);

/**
 * Decomposes the specification into run fragments, triplets and partition
 * keys and writes the result as JSON. A co-Büchi automaton is complemented
 * first. When `network` carries a labeling, partitions are marked feasible
 * or infeasible and the required certificates are listed.
 *
 * # Safety
 * `a` must be a live automaton handle, `network` NULL or a live network
 * handle, `out_json` writable.
 */
enum CompcbfStatus compcbf_decompose_json(const struct CompcbfAutomaton *a,
                                          const struct CompcbfNetwork *network,
                                          char **out_json);

/**
 * Parses a local certificate from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum CompcbfStatus compcbf_certificate_from_json(const char *json, struct CompcbfCertificate **out);

/**
 * State dimension of the certificate's barrier, or 0 for NULL.
 *
 * # Safety
 * `c` must be NULL or a live certificate handle.
 */
uintptr_t compcbf_certificate_dim(const struct CompcbfCertificate *c);

/**
 * Evaluates `B(x)` for a local state `x` of length `len`.
 *
 * # Safety
 * `c` must be a live certificate handle, `x` must point to `len` doubles,
 * `out` must be writable.
 */
enum CompcbfStatus compcbf_certificate_eval(const struct CompcbfCertificate *c,
                                            const double *x,
                                            uintptr_t len,
                                            double *out);

/**
 * # Safety
 * `c` must be NULL or a handle from this library not yet freed.
 */
void compcbf_certificate_free(struct CompcbfCertificate *c);

/**
 * Ring of `n` rooms with the default parameters.
 *
 * # Safety
 * `out` must be writable.
 */
enum CompcbfStatus compcbf_network_rooms(uintptr_t n, struct CompcbfNetwork **out);

/**
 * All-to-all network of `n` Kuramoto oscillators with the default parameters.
 *
 * # Safety
 * `out` must be writable.
 */
enum CompcbfStatus compcbf_network_kuramoto(uintptr_t n, struct CompcbfNetwork **out);

/**
 * Network described by a custom system JSON file's contents.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum CompcbfStatus compcbf_network_from_json(const char *json, struct CompcbfNetwork **out);

/**
 * Number of subsystems, or 0 for NULL.
 *
 * # Safety
 * `net` must be NULL or a live network handle.
 */
uintptr_t compcbf_network_size(const struct CompcbfNetwork *net);

/**
 * Length of the stacked state vector, or 0 for NULL.
 *
 * # Safety
 * `net` must be NULL or a live network handle.
 */
uintptr_t compcbf_network_state_dim(const struct CompcbfNetwork *net);

/**
 * Length of the stacked input vector, or 0 for NULL.
 *
 * # Safety
 * `net` must be NULL or a live network handle.
 */
uintptr_t compcbf_network_input_dim(const struct CompcbfNetwork *net);

/**
 * One step of the network: writes `x⁺` into `next`. All three buffers are
 * checked against the network's dimensions.
 *
 * # Safety
 * `net` must be a live network handle; `x`, `u` and `next` must point to
 * `x_len`, `u_len` and `next_len` doubles.
 */
enum CompcbfStatus compcbf_network_step(const struct CompcbfNetwork *net,
                                        const double *x,
                                        uintptr_t x_len,
                                        const double *u,
                                        uintptr_t u_len,
                                        double *next,
                                        uintptr_t next_len);

/**
 * Proposition labeling the stacked state `x`.
 *
 * # Safety
 * `net` must be a live network handle, `x` must point to `len` doubles,
 * `out` must be writable.
 */
enum CompcbfStatus compcbf_network_label(const struct CompcbfNetwork *net,
                                         const double *x,
                                         uintptr_t len,
                                         char **out);

/**
 * # Safety
 * `net` must be NULL or a handle from this library not yet freed.
 */
void compcbf_network_free(struct CompcbfNetwork *net);

/**
 * Gain matrix obtained by placing `c` on every subsystem of `net`, as JSON.
 * `psi` is the slope of the linear ψ used for additive gains; it must lie
 * in (0, 1], and 0 selects the library default.
 *
 * # Safety
 * `c` and `net` must be live handles; `out_json` must be writable.
 */
enum CompcbfStatus compcbf_gain_matrix_json(const struct CompcbfCertificate *c,
                                            const struct CompcbfNetwork *net,
                                            double psi,
                                            char **out_json);

/**
 * Small-gain test for `c` placed on every subsystem of `net`, with `psi` as
 * in [`compcbf_gain_matrix_json`]. Returns
 * `COMPCBF_STATUS_OK` when the condition holds and
 * `COMPCBF_STATUS_SMALL_GAIN_VIOLATED` when it fails or cannot be decided.
 *
 * # Safety
 * `c` and `net` must be live handles.
 */
enum CompcbfStatus compcbf_check_small_gain(const struct CompcbfCertificate *c,
                                            const struct CompcbfNetwork *net,
                                            double psi);

/**
 * Grid verification of the local conditions of `c` on subsystem `block`.
 * `grid_json` is NULL for the default grid, otherwise a grid specification
 * object whose missing fields take their defaults. The full report is
 * written to `out_report` when it is not NULL. Returns
 * `COMPCBF_STATUS_CHECK_FAILED` when some condition fails.
 *
 * # Safety
 * `c` and `net` must be live handles; `grid_json` NULL or a NUL-terminated
 * string; `out_report` NULL or writable.
 */
enum CompcbfStatus compcbf_verify_local(const struct CompcbfCertificate *c,
                                        const struct CompcbfNetwork *net,
                                        uintptr_t block,
                                        const char *grid_json,
                                        char **out_report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COMPCBF_H */
