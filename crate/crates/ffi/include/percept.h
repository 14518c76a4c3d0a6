#ifndef PERCEPT_H
#define PERCEPT_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum PerceptStatus {
  PERCEPT_STATUS_OK = 0,
  PERCEPT_STATUS_NULL_POINTER = 1,
  PERCEPT_STATUS_INVALID_UTF8 = 2,
  PERCEPT_STATUS_INVALID_ARGUMENT = 3,
  PERCEPT_STATUS_SHAPE_MISMATCH = 4,
  PERCEPT_STATUS_UNKNOWN_LAYER = 5,
  PERCEPT_STATUS_IO = 6,
  PERCEPT_STATUS_FORMAT = 7,
  PERCEPT_STATUS_NUMERICAL = 8,
  PERCEPT_STATUS_EXPLAINER = 9,
  PERCEPT_STATUS_BUFFER_TOO_SMALL = 10,
  PERCEPT_STATUS_PANIC = 11,
} PerceptStatus;

typedef struct PerceptNetwork PerceptNetwork;

typedef struct PerceptSaliency PerceptSaliency;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null after a
 successful call. Valid until the next call on the same thread.
 */
const char *percept_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *percept_version(void);

/*
 Loads a network weight file.

 # Safety
 `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum PerceptStatus percept_network_load(const char *path, struct PerceptNetwork **out);

/*
 Builds the seeded reference CNN, or its quadrant-planted variant.

 # Safety
 `out` must be a writable pointer.
 */
enum PerceptStatus percept_network_reference(uint64_t seed,
                                             bool planted,
                                             struct PerceptNetwork **out);

/*
 # Safety
 `net` must be null or a handle from this library not yet freed.
 */
void percept_network_free(struct PerceptNetwork *net);

/*
 Writes the `[channels, height, width]` input shape to `out_shape[0..3]`.

 # Safety
 `net` must be a live handle and `out_shape` must hold 3 values.
 */
enum PerceptStatus percept_network_input_shape(const struct PerceptNetwork *net, size_t *out_shape);

/*
 # Safety
 `net` must be a live handle and `out` a writable pointer.
 */
enum PerceptStatus percept_network_class_count(const struct PerceptNetwork *net, size_t *out);

/*
 Forward pass. `input` holds `input_len` values in `[C,H,W]` order;
 `out` receives the class logits.

 # Safety
 Pointers must be valid for the stated lengths.
 */
enum PerceptStatus percept_network_logits(const struct PerceptNetwork *net,
                                          const float *input,
                                          size_t input_len,
                                          float *out,
                                          size_t out_len);

/*
 Computes a saliency map with default settings for `method`, one of
 gradcam, gradcampp, scorecam, vanilla, guided, smoothgrad or ig.
 `target` < 0 selects the predicted class. `layer` is used by the CAM
 methods and defaults to "conv2" when null. `seed` drives SmoothGrad.

 # Safety
 Pointers must be valid; `input` must hold `input_len` values.
 */
enum PerceptStatus percept_saliency_compute(const struct PerceptNetwork *net,
                                            const char *method,
                                            const float *input,
                                            size_t input_len,
                                            int64_t target,
                                            const char *layer,
                                            uint64_t seed,
                                            struct PerceptSaliency **out);

/*
 # Safety
 `s` must be null or a handle from this library not yet freed.
 */
void percept_saliency_free(struct PerceptSaliency *s);

/*
 # Safety
 `s` must be a live handle; `height` and `width` writable pointers.
 */
enum PerceptStatus percept_saliency_dims(const struct PerceptSaliency *s,
                                         size_t *height,
                                         size_t *width);

/*
 Class the map explains.

 # Safety
 `s` must be a live handle and `out` a writable pointer.
 */
enum PerceptStatus percept_saliency_target(const struct PerceptSaliency *s, size_t *out);

/*
 Copies the row-major map into `out`, which must hold height * width values.

 # Safety
 `s` must be a live handle; `out` must be valid for `out_len` values.
 */
enum PerceptStatus percept_saliency_values(const struct PerceptSaliency *s,
                                           float *out,
                                           size_t out_len);

/*
 Explains a bag-of-words text classifier (given as model JSON) on `text`
 with `method` one of lime, shap, anchor or cle, using default settings.
 `label` < 0 selects the predicted class. The explanation JSON is written
 to `out`.

 # Safety
 String arguments must be NUL-terminated; `out` must be writable.
 */
enum PerceptStatus percept_explain_text_json(const char *model_json,
                                             const char *text,
                                             const char *method,
                                             int64_t label,
                                             uint64_t seed,
                                             char **out);

/*
 Explains row `row` of a CSV table under a linear tabular model (given as
 model JSON). `categorical` is a comma-separated column list or null.

 # Safety
 String arguments must be NUL-terminated or null where noted; `out` must
 be writable.
 */
enum PerceptStatus percept_explain_tabular_json(const char *model_json,
                                                const char *csv,
                                                const char *categorical,
                                                size_t row,
                                                bool discretize,
                                                const char *method,
                                                int64_t label,
                                                uint64_t seed,
                                                char **out);

/*
 Releases a string returned by this library.

 # Safety
 `s` must be null or a string from this library not yet freed.
 */
void percept_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERCEPT_H */
