/* C ABI for the panoptic-forge toolkit. Generated by cbindgen. */

#ifndef PANOPTIC_FORGE_H
#define PANOPTIC_FORGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum PfStatus {
  PfOk = 0,
  PfErrInvalidArgument = 1,
  PfErrIo = 2,
  PfErrFormat = 3,
  PfErrMismatch = 4,
  PfErrInternal = 5,
} PfStatus;

/**
 * Opaque joint label space handle.
 */
typedef struct PfLabelSpace PfLabelSpace;

/**
 * Opaque panoptic map handle.
 */
typedef struct PfPanopticMap PfPanopticMap;

/**
 * Opaque PQ accumulator handle.
 */
typedef struct PfPqStats PfPqStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the current thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length in
 * bytes, excluding the terminator.
 */
size_t pf_last_error_message(char *buf, size_t len);

/**
 * Elementwise fused score `(sigmoid(a) + sigmoid(b)) * (a + b)` over two
 * equally sized planes of `len` doubles.
 */
enum PfStatus pf_fuse_logits(const double *a, const double *b, size_t len, double *out);

/**
 * Pack a segment id (< 2^24) into RGB channels, lowest byte in R.
 */
enum PfStatus pf_encode_id_rgb(uint32_t id, uint8_t *r, uint8_t *g, uint8_t *b);

/**
 * Inverse of `pf_encode_id_rgb`; total on all byte triples.
 */
uint32_t pf_decode_id_rgb(uint8_t r, uint8_t g, uint8_t b);

/**
 * Read an id-encoded PNG and its JSON record into a new map handle.
 */
enum PfStatus pf_panoptic_read(const char *png_path,
                               const char *json_path,
                               struct PfPanopticMap **out);

/**
 * Write a map as PNG + JSON record (atomic, areas recomputed).
 */
enum PfStatus pf_panoptic_write(const struct PfPanopticMap *map,
                                const char *png_path,
                                const char *json_path);

void pf_panoptic_free(struct PfPanopticMap *map);

uint32_t pf_panoptic_width(const struct PfPanopticMap *map);

uint32_t pf_panoptic_height(const struct PfPanopticMap *map);

size_t pf_panoptic_segment_count(const struct PfPanopticMap *map);

/**
 * Load a serialized joint label space from a JSON file.
 */
enum PfStatus pf_label_space_read(const char *path, struct PfLabelSpace **out);

void pf_label_space_free(struct PfLabelSpace *space);

uint32_t pf_label_space_num_classes(const struct PfLabelSpace *space);

/**
 * Category of a joint id: 0 void, 1 stuff, 2 thing.
 */
enum PfStatus pf_label_space_category_of(const struct PfLabelSpace *space,
                                         uint32_t joint_id,
                                         int32_t *category);

/**
 * Joint id for a `(dataset, local class)` pair; 0 when unmapped.
 */
uint32_t pf_label_space_remap(const struct PfLabelSpace *space,
                              const char *dataset_id,
                              uint32_t local_id);

struct PfPqStats *pf_pq_stats_new(void);

void pf_pq_stats_free(struct PfPqStats *stats);

/**
 * Match one prediction/ground-truth pair and accumulate into `stats`.
 */
enum PfStatus pf_pq_match_segments(const struct PfPanopticMap *pred,
                                   const struct PfPanopticMap *gt,
                                   struct PfPqStats *stats);

/**
 * Componentwise accumulate `other` into `into`.
 */
enum PfStatus pf_pq_merge(struct PfPqStats *into, const struct PfPqStats *other);

/**
 * Finalize the accumulator into a PQ/SQ/RQ report rendered as a JSON
 * string (values in [0, 1]). Free the string with `pf_string_free`.
 */
enum PfStatus pf_pq_report_json(const struct PfPqStats *stats,
                                const struct PfLabelSpace *space,
                                char **out);

/**
 * Free a string returned by this library.
 */
void pf_string_free(char *text);

/**
 * Learning rate of the published training schedule at an iteration
 * (base 0.01, 200-iteration warm-up from 1/3, decade drops at 400k/520k).
 */
double pf_default_lr_at(uint64_t iter);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PANOPTIC_FORGE_H */
