#ifndef TEC_H
#define TEC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TecStatus {
  TEC_OK = 0,
  TEC_NULL_POINTER = 1,
  TEC_INVALID_ARGUMENT = 2,
  TEC_KEYSTREAM_ERROR = 3,
  TEC_CODEC_ERROR = 4,
  TEC_STORE_CORRUPT = 5,
  TEC_STORE_ERROR = 6,
  TEC_IO_ERROR = 7,
  TEC_PANIC = 8,
} TecStatus;

typedef struct TecCiphertext TecCiphertext;

typedef struct TecKeySpec TecKeySpec;

typedef struct TecStore TecStore;

typedef struct TecStream TecStream;

/**
 * Base selector: 0 = pi, 1 = e, 2 = ln 2.
 */
typedef uint8_t TecBase;

/**
 * Heap bytes handed to C. Release with `tec_buffer_free`.
 */
typedef struct TecBuffer {
  uint8_t *data;
  size_t len;
} TecBuffer;

/**
 * Try-count model selector: 0 = (2^2)^n, 1 = (2^3)^n, 2 = exact slot count 210^n.
 */
typedef uint8_t TecTryCountModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next `tec_*` call on the same thread.
 */
const char *tec_last_error_message(void);

/**
 * # Safety
 * `seed_decimal` must be a NUL-terminated string; `out` must be writable.
 */
enum TecStatus tec_keyspec_new(TecBase base_tag, const char *seed_decimal, struct TecKeySpec **out);

/**
 * Key whose multiplier is derived from identifier bytes and a millisecond timestamp.
 *
 * # Safety
 * `identifier` must point to `identifier_len` readable bytes; `out` must be writable.
 */
enum TecStatus tec_keyspec_from_identifier(TecBase base_tag,
                                           const uint8_t *identifier,
                                           size_t identifier_len,
                                           uint64_t timestamp_ms,
                                           struct TecKeySpec **out);

/**
 * # Safety
 * `spec` must come from a `tec_keyspec_*` constructor and not be freed twice.
 */
void tec_keyspec_free(struct TecKeySpec *spec);

/**
 * # Safety
 * `spec` must be a live handle; `out` must be writable.
 */
enum TecStatus tec_stream_new(const struct TecKeySpec *spec, struct TecStream **out);

/**
 * Writes the next `count` keystream bits to `out_bits`, one 0/1 byte each.
 *
 * # Safety
 * `stream` must be a live handle; `out_bits` must have room for `count` bytes.
 */
enum TecStatus tec_stream_next_bits(struct TecStream *stream, uint8_t *out_bits, size_t count);

/**
 * # Safety
 * `stream` must come from `tec_stream_new` and not be freed twice.
 */
void tec_stream_free(struct TecStream *stream);

/**
 * # Safety
 * `spec` must be a live handle, `data` must point to `len` bytes and `out` must be writable.
 */
enum TecStatus tec_seal(const struct TecKeySpec *spec,
                        const uint8_t *data,
                        size_t len,
                        bool use_fib,
                        struct TecCiphertext **out);

/**
 * # Safety
 * `spec` and `ct` must be live handles; `out` must be writable.
 */
enum TecStatus tec_open(const struct TecKeySpec *spec,
                        const struct TecCiphertext *ct,
                        bool use_fib,
                        struct TecBuffer *out);

/**
 * Number of meaningful bits, or 0 for a null handle.
 *
 * # Safety
 * `ct` must be null or a live handle.
 */
uint64_t tec_ciphertext_bit_len(const struct TecCiphertext *ct);

/**
 * Serialises to the `TEC1` file layout.
 *
 * # Safety
 * `ct` must be a live handle; `out` must be writable.
 */
enum TecStatus tec_ciphertext_to_file(const struct TecCiphertext *ct,
                                      bool use_fib,
                                      struct TecBuffer *out);

/**
 * Parses the `TEC1` file layout; `out_use_fib` receives the header flag.
 *
 * # Safety
 * `data` must point to `len` bytes; `out` and `out_use_fib` must be writable.
 */
enum TecStatus tec_ciphertext_from_file(const uint8_t *data,
                                        size_t len,
                                        struct TecCiphertext **out,
                                        bool *out_use_fib);

/**
 * # Safety
 * `ct` must come from this library and not be freed twice.
 */
void tec_ciphertext_free(struct TecCiphertext *ct);

/**
 * # Safety
 * `buf` must have been filled by this library and not be freed twice.
 */
void tec_buffer_free(struct TecBuffer buf);

/**
 * # Safety
 * `out` must be writable.
 */
enum TecStatus tec_store_new(struct TecStore **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum TecStatus tec_store_load(const char *path, struct TecStore **out);

/**
 * Writes atomically (temporary sibling, then rename).
 *
 * # Safety
 * `store` must be a live handle; `path` a NUL-terminated string.
 */
enum TecStatus tec_store_save(const struct TecStore *store, const char *path);

/**
 * # Safety
 * `store` must be null or a live handle.
 */
size_t tec_store_len(const struct TecStore *store);

/**
 * Enrolls a user. Identifier `i` is `labels[i]` with value
 * `values[i][0..value_lens[i]]`; the first one keys the stored record.
 * `host_secret` is a decimal integer.
 *
 * # Safety
 * All pointers must be valid for the stated lengths; the three identifier
 * arrays must each hold `n_identifiers` entries.
 */
enum TecStatus tec_store_enroll(struct TecStore *store,
                                const char *host_secret,
                                const char *username,
                                const uint8_t *password,
                                size_t password_len,
                                const char *const *labels,
                                const uint8_t *const *values,
                                const size_t *value_lens,
                                size_t n_identifiers,
                                uint64_t now_ms,
                                bool use_fib);

/**
 * Sets `*out_match` to whether `password` is the stored password.
 *
 * # Safety
 * `store` must be a live handle and the other pointers valid.
 */
enum TecStatus tec_store_verify(const struct TecStore *store,
                                const char *host_secret,
                                const char *username,
                                const uint8_t *password,
                                size_t password_len,
                                bool *out_match);

/**
 * # Safety
 * `store` must come from this library and not be freed twice.
 */
void tec_store_free(struct TecStore *store);

/**
 * Brute-force try count for `n` characters as a decimal string; release with
 * `tec_string_free`.
 *
 * # Safety
 * `out` must be writable.
 */
enum TecStatus tec_trycount(uint64_t n, TecTryCountModel model, char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void tec_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEC_H */
