/*
 * Copyright 2026 The addlab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef ADDLAB_H
#define ADDLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define ADDLAB_API __attribute__((visibility("default")))
#else
#define ADDLAB_API
#endif

/* Status codes double as CLI exit codes. */
typedef enum addlab_status {
  ADDLAB_OK = 0,
  ADDLAB_ERR_USAGE = 1,   /* bad arguments or configuration */
  ADDLAB_ERR_DATA = 2,    /* invalid, corrupt or incompatible input */
  ADDLAB_ERR_RUNTIME = 3  /* I/O failure, non-finite loss, internal error */
} addlab_status;

typedef struct addlab_checkpoint addlab_checkpoint;
typedef struct addlab_feature addlab_feature;

/* Message of the last failure on the calling thread; never NULL. */
ADDLAB_API const char* addlab_last_error(void);
/* Fine-grained cause of the last failure ("checksum", "truncated", ...). */
ADDLAB_API const char* addlab_last_error_reason(void);
ADDLAB_API const char* addlab_version(void);

/* "error", "info" or "debug"; NULL reads ADDLAB_LOG (default info). */
ADDLAB_API addlab_status addlab_set_log_level(const char* level);

/* Pipeline stages. Optional string arguments may be NULL. */
ADDLAB_API addlab_status addlab_extract(const char* manifest, const char* feature,
                                        const char* out_dir, const char* config,
                                        size_t jobs);
ADDLAB_API addlab_status addlab_train(const char* manifest, const char* views,
                                      const char* mode, const char* out,
                                      const char* config, const uint64_t* seed,
                                      size_t jobs);
/* eer_out may be NULL. Returns ADDLAB_ERR_DATA after writing outputs when
   some utterances had to be skipped. */
ADDLAB_API addlab_status addlab_eval(const char* checkpoint, const char* manifest,
                                     const char* views, const char* scores,
                                     const char* report, size_t jobs,
                                     double* eer_out);
ADDLAB_API addlab_status addlab_synth(const char* spec, const char* out_dir);

/* Checkpoints. */
ADDLAB_API addlab_status addlab_checkpoint_load(const char* path,
                                                addlab_checkpoint** out);
ADDLAB_API void addlab_checkpoint_free(addlab_checkpoint* ckpt);
/* Copies a NUL-terminated summary into buf when it fits; *needed receives
   the full length including the terminator. */
ADDLAB_API addlab_status addlab_checkpoint_describe(const addlab_checkpoint* ckpt,
                                                    char* buf, size_t cap,
                                                    size_t* needed);
ADDLAB_API size_t addlab_checkpoint_epoch(const addlab_checkpoint* ckpt);
ADDLAB_API double addlab_checkpoint_val_loss(const addlab_checkpoint* ckpt);

/* Feature files. */
ADDLAB_API addlab_status addlab_feature_read(const char* path, addlab_feature** out);
ADDLAB_API void addlab_feature_free(addlab_feature* f);
ADDLAB_API const char* addlab_feature_name(const addlab_feature* f);
ADDLAB_API size_t addlab_feature_ndims(const addlab_feature* f);
ADDLAB_API size_t addlab_feature_dim(const addlab_feature* f, size_t axis);
ADDLAB_API float addlab_feature_frame_rate(const addlab_feature* f);
ADDLAB_API const float* addlab_feature_data(const addlab_feature* f);
ADDLAB_API addlab_status addlab_feature_write(const char* path, const char* name,
                                              const size_t* dims, size_t ndims,
                                              const float* data, float frame_rate);

/* EER over n scores; labels are 0 (genuine) or 1 (spoof). */
ADDLAB_API addlab_status addlab_compute_eer(const double* scores, const int* labels,
                                            size_t n, double* eer, double* threshold);

#ifdef __cplusplus
}
#endif

#endif /* ADDLAB_H */
