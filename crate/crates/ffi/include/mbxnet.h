#ifndef MBXNET_H
#define MBXNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MbxDecision {
  MBX_DECISION_TRANSMIT = 0,
  MBX_DECISION_DISCARD = 1,
} MbxDecision;

typedef enum MbxPolarity {
  MBX_POLARITY_TRANSMIT_LOW_ENTROPY = 0,
  MBX_POLARITY_TRANSMIT_HIGH_ENTROPY = 1,
} MbxPolarity;

typedef enum MbxStatus {
  MBX_STATUS_OK = 0,
  MBX_STATUS_NULL_POINTER = 1,
  MBX_STATUS_INVALID_ARGUMENT = 2,
  MBX_STATUS_PERMISSION_DENIED = 3,
  MBX_STATUS_CODEC = 4,
  MBX_STATUS_INTEGRITY = 5,
  MBX_STATUS_CONFIG = 6,
  MBX_STATUS_RUNTIME = 7,
  MBX_STATUS_PANIC = 8,
} MbxStatus;

/**
 * Opaque mailbox handle.
 */
typedef struct MbxMailbox MbxMailbox;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *mbx_last_error(void);

/**
 * Creates a mailbox. A NULL `payload` means an absent payload and requires
 * `len == 0`.
 *
 * # Safety
 * `payload` must be NULL or point to `len` readable bytes; `out` must be a
 * valid pointer.
 */
enum MbxStatus mbx_mailbox_new(const uint8_t *payload,
                               size_t len,
                               double intrinsic_value,
                               uint64_t created_at,
                               struct MbxMailbox **out);

/**
 * Appends an annotation, returning a new handle; `m` is left unchanged.
 *
 * # Safety
 * `m` must be a live handle and `out` a valid pointer.
 */
enum MbxStatus mbx_mailbox_annotate(const struct MbxMailbox *m,
                                    uint32_t node_id,
                                    uint64_t time,
                                    double value_delta,
                                    int64_t size_delta,
                                    bool permitted,
                                    struct MbxMailbox **out);

/**
 * # Safety
 * `m` must be a live handle and `out` a valid pointer.
 */
enum MbxStatus mbx_mailbox_value(const struct MbxMailbox *m, double *out);

/**
 * Current size in bits.
 *
 * # Safety
 * `m` must be a live handle and `out` a valid pointer.
 */
enum MbxStatus mbx_mailbox_size(const struct MbxMailbox *m, uint64_t *out);

/**
 * Ticks elapsed between creation and `t`.
 *
 * # Safety
 * `m` must be a live handle and `out` a valid pointer.
 */
enum MbxStatus mbx_mailbox_age(const struct MbxMailbox *m, uint64_t t, uint64_t *out);

/**
 * Number of annotations, or 0 for a NULL handle.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t mbx_mailbox_annotation_count(const struct MbxMailbox *m);

/**
 * `Ok` if the stored digest matches the payload, `Integrity` otherwise.
 *
 * # Safety
 * `m` must be a live handle.
 */
enum MbxStatus mbx_mailbox_verify(const struct MbxMailbox *m);

/**
 * Serializes to the wire format. Release the buffer with [`mbx_bytes_free`].
 *
 * # Safety
 * `m` must be a live handle; `out` and `out_len` must be valid pointers.
 */
enum MbxStatus mbx_mailbox_encode(const struct MbxMailbox *m, uint8_t **out, size_t *out_len);

/**
 * Parses the wire format and checks the digest.
 *
 * # Safety
 * `bytes` must point to `len` readable bytes and `out` must be valid.
 */
enum MbxStatus mbx_mailbox_decode(const uint8_t *bytes, size_t len, struct MbxMailbox **out);

/**
 * # Safety
 * `m` must be NULL or a handle from this library that was not yet freed.
 */
void mbx_mailbox_free(struct MbxMailbox *m);

/**
 * # Safety
 * `ptr`/`len` must come from [`mbx_mailbox_encode`] and not yet be freed.
 */
void mbx_bytes_free(uint8_t *ptr, size_t len);

/**
 * Shannon entropy in bits of a probability vector of length `n`.
 *
 * # Safety
 * `p` must point to `n` readable doubles and `out` must be valid.
 */
enum MbxStatus mbx_prediction_entropy(const double *p, size_t n, double *out);

/**
 * Applies the threshold rule; writes the decision and the entropy.
 *
 * # Safety
 * `p` must point to `n` readable doubles; the out-pointers must be valid.
 */
enum MbxStatus mbx_assess(const double *p,
                          size_t n,
                          double threshold,
                          enum MbxPolarity polarity,
                          enum MbxDecision *out_decision,
                          double *out_entropy);

/**
 * Runs one experiment from a JSON config and returns the metrics report
 * (`records` and `summary`) as JSON. Release it with [`mbx_string_free`].
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MbxStatus mbx_run_experiment_json(const char *config_json, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void mbx_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MBXNET_H */
