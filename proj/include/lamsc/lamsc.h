/* SPDX-License-Identifier: Apache-2.0 */
/*
 * C interface to the LAM-SC simulator. All functions return a lamsc_status;
 * on failure the message is available from lamsc_session_last_error() (or
 * lamsc_last_error() for calls without a session). Strings returned by the
 * library stay valid until the next call on the same session or thread.
 */
#ifndef LAMSC_H
#define LAMSC_H

#include <stddef.h>
#include <stdint.h>

#if defined(LAMSC_BUILDING_LIBRARY)
#define LAMSC_API __attribute__((visibility("default")))
#else
#define LAMSC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lamsc_status {
  LAMSC_OK = 0,
  LAMSC_ERR_INVALID_ARGUMENT = 1,
  LAMSC_ERR_SHAPE_MISMATCH = 2,
  LAMSC_ERR_PRECONDITION = 3,
  LAMSC_ERR_IO = 4,
  LAMSC_ERR_CONFIG = 5,
  LAMSC_ERR_BACKEND = 6,
  LAMSC_ERR_NUMERIC = 7,
  LAMSC_ERR_MISSING_ARTIFACT = 8,
  LAMSC_ERR_INTERNAL = 9
} lamsc_status;

typedef struct lamsc_session lamsc_session;

LAMSC_API const char* lamsc_version(void);
LAMSC_API const char* lamsc_status_string(lamsc_status status);
/* Message of the last failure on this thread (any entry point). */
LAMSC_API const char* lamsc_last_error(void);

/* Loads and validates a JSON run config; overrides are "section.key=value". */
LAMSC_API lamsc_status lamsc_session_create(const char* config_path, const char* const* overrides,
                                            size_t override_count, lamsc_session** out);
LAMSC_API void lamsc_session_destroy(lamsc_session* session);
LAMSC_API const char* lamsc_session_last_error(const lamsc_session* session);
LAMSC_API const char* lamsc_session_config_json(const lamsc_session* session);
LAMSC_API const char* lamsc_session_config_digest(const lamsc_session* session);
LAMSC_API const char* lamsc_session_output_dir(const lamsc_session* session);

/* image: file path or dataset stem. */
LAMSC_API lamsc_status lamsc_segment(lamsc_session* session, const char* image, const char* out_dir,
                                     int human_select, size_t* mask_count);

/* phase: asi | channel | semantic | crossed | asc; variant: lamsc | baseline | both (NULL = both). */
LAMSC_API lamsc_status lamsc_train(lamsc_session* session, const char* phase, const char* variant);

LAMSC_API lamsc_status lamsc_eval(lamsc_session* session, size_t* rows);

typedef struct lamsc_transmit_options {
  int has_snr_db;
  double snr_db;
  int has_noise_variance;
  double noise_variance;
  int full_mask;
} lamsc_transmit_options;

typedef struct lamsc_transmit_summary {
  size_t segments;
  size_t preserved;
  double psnr_vs_semantic_aware_db;
  uint64_t original_elements;
  uint64_t feature_elements;
  uint64_t retained_elements;
  uint64_t retained_bits;
} lamsc_transmit_summary;

LAMSC_API lamsc_status lamsc_transmit(lamsc_session* session, const char* image, const char* out_dir,
                                      const lamsc_transmit_options* options, lamsc_transmit_summary* summary);

LAMSC_API lamsc_status lamsc_report(lamsc_session* session);

/* Writes a synthetic annotated dataset (square images of side `size`). */
LAMSC_API lamsc_status lamsc_make_dataset(const char* root, int count, int size, uint64_t seed);

/* Metrics on HWC row-major images with values in [0, 1]. */
LAMSC_API lamsc_status lamsc_psnr(const double* a, const double* b, int height, int width, int channels,
                                  double* out);
LAMSC_API lamsc_status lamsc_ssim(const double* a, const double* b, int height, int width, int channels,
                                  double* out);

typedef struct lamsc_bit_report {
  uint64_t original_elements;
  uint64_t feature_elements;
  uint64_t retained_elements;
  int bits_per_element;
  uint64_t mask_side_info_bits;
  uint64_t original_bits;
  uint64_t feature_bits;
  uint64_t retained_bits;
  uint64_t retained_bits_with_side_info;
} lamsc_bit_report;

/* mask: feature_h*feature_w*feature_c bytes in {0,1}. */
LAMSC_API lamsc_status lamsc_bit_account(int height, int width, int channels, int feature_h, int feature_w,
                                         int feature_c, const uint8_t* mask, int bits_per_element,
                                         lamsc_bit_report* out);

#ifdef __cplusplus
}
#endif

#endif /* LAMSC_H */
