/* C interface to the depthfuse all-in-focus imaging pipeline. */

#ifndef DEPTHFUSE_H
#define DEPTHFUSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcome. Anything but `DF_STATUS_OK` leaves a description in
 * `df_last_error_message`.
 */
typedef enum DfStatus {
  DF_STATUS_OK = 0,
  DF_STATUS_NULL_ARGUMENT = 1,
  DF_STATUS_INVALID_ARGUMENT = 2,
  DF_STATUS_IO_ERROR = 3,
  DF_STATUS_FORMAT_ERROR = 4,
  DF_STATUS_NUMERIC_ERROR = 5,
  DF_STATUS_INTERNAL_ERROR = 6,
} DfStatus;

/**
 * Opaque calibration bundle.
 */
typedef struct DfCalibration DfCalibration;

/**
 * Opaque 8-bit RGB image.
 */
typedef struct DfColorImage DfColorImage;

/**
 * Opaque per-pixel depth map (millimeters, 0 marks a hole).
 */
typedef struct DfDepthMap DfDepthMap;

/**
 * Opaque ordered multi-focus source collection under construction.
 */
typedef struct DfImageStack DfImageStack;

/**
 * Opaque per-pixel chosen-source indices.
 */
typedef struct DfLabelMap DfLabelMap;

/**
 * Opaque region labeling of a depth map.
 */
typedef struct DfSegmentation DfSegmentation;

/**
 * Per-stage pipeline wall time in milliseconds.
 */
typedef struct DfTimings {
  double preprocess_ms;
  double segment_ms;
  double select_ms;
  double total_ms;
} DfTimings;

/**
 * The six fusion-quality metric values; a slot is NaN when that metric was
 * not computable on the inputs.
 */
typedef struct DfMetricReport {
  double q_mi;
  double q_ncie;
  double q_g;
  double q_p;
  double q_y;
  double q_cb;
} DfMetricReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *df_version(void);

/**
 * Message of the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *df_last_error_message(void);

/**
 * Loads a 16-bit PGM depth map.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be a valid location.
 */
enum DfStatus df_depth_map_read_pgm(const char *path, struct DfDepthMap **out);

/**
 * Writes a depth map as 16-bit PGM.
 *
 * # Safety
 * `map` must be a live handle; `path` must be NUL-terminated.
 */
enum DfStatus df_depth_map_write_pgm(const struct DfDepthMap *map, const char *path);

/**
 * Builds a depth map from a row-major buffer of `width * height` samples.
 *
 * # Safety
 * `data` must point to at least `width * height` readable `uint16_t`s.
 */
enum DfStatus df_depth_map_create(size_t width,
                                  size_t height,
                                  const uint16_t *data,
                                  struct DfDepthMap **out);

/**
 * # Safety
 * `map` must be a live handle.
 */
size_t df_depth_map_width(const struct DfDepthMap *map);

/**
 * # Safety
 * `map` must be a live handle.
 */
size_t df_depth_map_height(const struct DfDepthMap *map);

/**
 * Copies all samples into `buffer` (`len` must be `width * height`).
 *
 * # Safety
 * `buffer` must point to `len` writable `uint16_t`s.
 */
enum DfStatus df_depth_map_copy_data(const struct DfDepthMap *map, uint16_t *buffer, size_t len);

/**
 * # Safety
 * `map` must come from this library and not be used afterwards.
 */
void df_depth_map_free(struct DfDepthMap *map);

/**
 * Loads an 8-bit RGB PNG.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be a valid location.
 */
enum DfStatus df_color_image_read_png(const char *path, struct DfColorImage **out);

/**
 * # Safety
 * `img` must be a live handle; `path` must be NUL-terminated.
 */
enum DfStatus df_color_image_write_png(const struct DfColorImage *img, const char *path);

/**
 * Builds an image from interleaved row-major RGB bytes.
 *
 * # Safety
 * `data` must point to `width * height * 3` readable bytes.
 */
enum DfStatus df_color_image_create(size_t width,
                                    size_t height,
                                    const uint8_t *data,
                                    struct DfColorImage **out);

/**
 * # Safety
 * `img` must be a live handle.
 */
size_t df_color_image_width(const struct DfColorImage *img);

/**
 * # Safety
 * `img` must be a live handle.
 */
size_t df_color_image_height(const struct DfColorImage *img);

/**
 * Copies interleaved RGB bytes into `buffer` (`len` = `width*height*3`).
 *
 * # Safety
 * `buffer` must point to `len` writable bytes.
 */
enum DfStatus df_color_image_copy_data(const struct DfColorImage *img, uint8_t *buffer, size_t len);

/**
 * # Safety
 * `img` must come from this library and not be used afterwards.
 */
void df_color_image_free(struct DfColorImage *img);

/**
 * Creates an empty source stack; push at least two images before use.
 */
struct DfImageStack *df_image_stack_create(void);

/**
 * Appends a copy of `img` to the stack.
 *
 * # Safety
 * Both handles must be live.
 */
enum DfStatus df_image_stack_push(struct DfImageStack *stack, const struct DfColorImage *img);

/**
 * # Safety
 * `stack` must come from this library and not be used afterwards.
 */
void df_image_stack_free(struct DfImageStack *stack);

/**
 * Loads a calibration JSON bundle.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be a valid location.
 */
enum DfStatus df_calibration_read_json(const char *path, struct DfCalibration **out);

/**
 * # Safety
 * `calib` must come from this library and not be used afterwards.
 */
void df_calibration_free(struct DfCalibration *calib);

/**
 * Runs preprocess, segmentation, selection, and composition. Any of the
 * output handles may be null when that artifact is not wanted; `timings`
 * may be null as well. Pass non-positive tunables to use the defaults
 * (lambda 0.25, k 30 mm, felz_k 100 mm, min_region_px 100).
 *
 * # Safety
 * `depth`, `stack`, and `calib` must be live handles; output locations,
 * when non-null, must be writable.
 */
enum DfStatus df_pipeline_run(const struct DfDepthMap *depth,
                              const struct DfImageStack *stack,
                              const struct DfCalibration *calib,
                              double ad_lambda,
                              double ad_k_mm,
                              double felz_k,
                              size_t min_region_px,
                              struct DfColorImage **fused_out,
                              struct DfLabelMap **labels_out,
                              struct DfSegmentation **segmentation_out,
                              struct DfTimings *timings);

/**
 * # Safety
 * `seg` must be a live handle.
 */
size_t df_segmentation_region_count(const struct DfSegmentation *seg);

/**
 * Copies per-pixel region labels into `buffer` (`len` = `width*height`).
 *
 * # Safety
 * `buffer` must point to `len` writable `uint32_t`s.
 */
enum DfStatus df_segmentation_copy_labels(const struct DfSegmentation *seg,
                                          uint32_t *buffer,
                                          size_t len);

/**
 * # Safety
 * `seg` must come from this library and not be used afterwards.
 */
void df_segmentation_free(struct DfSegmentation *seg);

/**
 * Copies per-pixel source indices into `buffer` (`len` = `width*height`).
 *
 * # Safety
 * `buffer` must point to `len` writable bytes.
 */
enum DfStatus df_label_map_copy_data(const struct DfLabelMap *labels, uint8_t *buffer, size_t len);

/**
 * # Safety
 * `labels` must come from this library and not be used afterwards.
 */
void df_label_map_free(struct DfLabelMap *labels);

/**
 * Scores a fused image against its two sources with all six metrics.
 * Individual metrics that cannot be computed leave NaN in their slot.
 *
 * # Safety
 * All three image handles must be live; `report` must be writable.
 */
enum DfStatus df_evaluate_metrics(const struct DfColorImage *source_a,
                                  const struct DfColorImage *source_b,
                                  const struct DfColorImage *fused,
                                  struct DfMetricReport *report);

/**
 * Back depth of field at focus distance `u_mm`.
 *
 * # Safety
 * `out` must be writable.
 */
enum DfStatus df_back_dof(double u_mm, double f_mm, double f_number, double coc_mm, double *out);

/**
 * Front depth of field at focus distance `u_mm`.
 *
 * # Safety
 * `out` must be writable.
 */
enum DfStatus df_front_dof(double u_mm, double f_mm, double f_number, double coc_mm, double *out);

/**
 * Whether the depth span `[min_mm, max_mm]` can appear in focus under one
 * setting; writes 1 or 0.
 *
 * # Safety
 * `out` must be writable.
 */
enum DfStatus df_dof_rule(double min_mm,
                          double max_mm,
                          double f_mm,
                          double f_number,
                          double coc_mm,
                          int32_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEPTHFUSE_H */
