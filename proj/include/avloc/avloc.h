// Copyright 2026 The avloc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


/* C interface to the avloc library. Every call returns an avloc_status;
 * on failure avloc_last_error() holds a message for the calling thread.
 * Objects are opaque and released with the matching *_free function. */

#ifndef AVLOC_AVLOC_H_
#define AVLOC_AVLOC_H_

#include <stddef.h>
#include <stdint.h>

#if defined(AVLOC_BUILDING_LIBRARY)
#define AVLOC_API __attribute__((visibility("default")))
#else
#define AVLOC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum avloc_status {
  AVLOC_OK = 0,
  AVLOC_ERR_INVALID_ARGUMENT = 1,
  AVLOC_ERR_IO = 2,
  AVLOC_ERR_MALFORMED_HEADER = 3,
  AVLOC_ERR_SHAPE_MISMATCH = 4,
  AVLOC_ERR_TRUNCATED_PAYLOAD = 5,
  AVLOC_ERR_NUMERIC = 6,
  AVLOC_ERR_INTERNAL = 7
} avloc_status;

typedef enum avloc_mode {
  AVLOC_MODE_VANILLA = 0,
  AVLOC_MODE_HP = 1,
  AVLOC_MODE_RANDOM_HP = 2
} avloc_mode;

typedef struct avloc_dataset avloc_dataset;
typedef struct avloc_params avloc_params;
typedef struct avloc_features avloc_features;
typedef struct avloc_index avloc_index;
typedef struct avloc_train_log avloc_train_log;
typedef struct avloc_report avloc_report;
typedef struct avloc_table avloc_table;

typedef struct avloc_synth_config {
  int n_samples;
  int n_classes;
  int image_height;
  int image_width;
  int audio_height;
  int audio_width;
  int object_size;
  double noise_std;
  int distractors;
  int distractor_size;
  int texture_period;
  int position_stride;
  uint64_t seed;
} avloc_synth_config;

typedef struct avloc_train_config {
  int epochs_stage1;
  int epochs_stage2;
  int batch_size;
  double learning_rate;
  double epsilon;
  double tau;
  int k;
  uint64_t seed;
  int stop_grad_mask;
  int remine_every;
  avloc_mode mode;
  int channels;
  int patch;
} avloc_train_config;

typedef struct avloc_eval_protocol {
  double binarize_threshold;
  double success_threshold;
} avloc_eval_protocol;

typedef struct avloc_log_record {
  int stage;
  int epoch;
  int step;
  double loss;
  double grad_norm;
} avloc_log_record;

typedef struct avloc_grad_check_result {
  double max_rel_error;
  size_t worst_entry;
  double analytic;
  double numeric;
} avloc_grad_check_result;

AVLOC_API const char* avloc_status_string(avloc_status status);
AVLOC_API const char* avloc_last_error(void);

AVLOC_API void avloc_synth_config_default(avloc_synth_config* config);
AVLOC_API void avloc_train_config_default(avloc_train_config* config);
AVLOC_API void avloc_eval_protocol_default(avloc_eval_protocol* protocol);
AVLOC_API const char* avloc_mode_name(avloc_mode mode);
AVLOC_API avloc_status avloc_mode_parse(const char* name, avloc_mode* mode);
AVLOC_API avloc_status avloc_train_config_save(const avloc_train_config* config,
                                               const char* path);

/* Datasets. A dump directory holds samples.avd, boxes.csv and classes.csv. */
AVLOC_API avloc_status avloc_dataset_generate(const avloc_synth_config* config,
                                              avloc_dataset** out);
AVLOC_API avloc_status avloc_dataset_save(const avloc_dataset* dataset, const char* dir);
AVLOC_API avloc_status avloc_dataset_load(const char* dir, avloc_dataset** out);
AVLOC_API int avloc_dataset_size(const avloc_dataset* dataset);
AVLOC_API void avloc_dataset_free(avloc_dataset* dataset);

/* Encoder parameters. */
AVLOC_API avloc_status avloc_params_init(const avloc_dataset* dataset, int channels, int patch,
                                         uint64_t seed, avloc_params** out);
AVLOC_API avloc_status avloc_params_save(const avloc_params* params, const char* path);
AVLOC_API avloc_status avloc_params_load(const char* path, avloc_params** out);
AVLOC_API size_t avloc_params_count(const avloc_params* params);
AVLOC_API const double* avloc_params_data(const avloc_params* params);
AVLOC_API void avloc_params_free(avloc_params* params);

/* Features of every sample under the given parameters. */
AVLOC_API avloc_status avloc_features_encode(const avloc_params* params,
                                             const avloc_dataset* dataset,
                                             avloc_features** out);
AVLOC_API avloc_status avloc_features_save(const avloc_features* features, const char* path);
AVLOC_API avloc_status avloc_features_load(const char* path, avloc_features** out);
AVLOC_API int avloc_features_size(const avloc_features* features);
AVLOC_API void avloc_features_free(avloc_features* features);

/* Mining. */
AVLOC_API avloc_status avloc_index_build(const avloc_features* features, int k,
                                         avloc_index** out);
AVLOC_API avloc_status avloc_index_random(int n, int k, uint64_t seed, avloc_index** out);
AVLOC_API avloc_status avloc_index_save(const avloc_index* index, const char* path);
AVLOC_API avloc_status avloc_index_load(const char* path, avloc_index** out);
AVLOC_API avloc_status avloc_index_precision(const avloc_index* index,
                                             const avloc_dataset* dataset, double* out);
AVLOC_API void avloc_index_free(avloc_index* index);

/* Training. On AVLOC_ERR_NUMERIC (divergence) *out_params still receives the
 * last finite parameters and *out_log the records up to that point.
 * init, stage1 and index may be NULL. */
AVLOC_API avloc_status avloc_train_stage1(const avloc_dataset* dataset,
                                          const avloc_train_config* config,
                                          const avloc_params* init, avloc_params** out_params,
                                          avloc_train_log** out_log);
AVLOC_API avloc_status avloc_train_stage2(const avloc_dataset* dataset,
                                          const avloc_params* stage1,
                                          const avloc_index* index,
                                          const avloc_train_config* config,
                                          avloc_params** out_params,
                                          avloc_train_log** out_log);
AVLOC_API avloc_status avloc_train_full(const avloc_dataset* dataset,
                                        const avloc_train_config* config,
                                        const avloc_params* stage1, const avloc_index* index,
                                        avloc_params** out_params, avloc_train_log** out_log);
AVLOC_API size_t avloc_train_log_size(const avloc_train_log* log);
AVLOC_API avloc_status avloc_train_log_get(const avloc_train_log* log, size_t i,
                                           avloc_log_record* out);
AVLOC_API avloc_status avloc_train_log_save(const avloc_train_log* log, const char* path);
AVLOC_API void avloc_train_log_free(avloc_train_log* log);

/* Evaluation. */
AVLOC_API avloc_status avloc_evaluate(const avloc_params* params, const avloc_dataset* dataset,
                                      const avloc_eval_protocol* protocol,
                                      avloc_report** out);
AVLOC_API avloc_status avloc_evaluate_features(const avloc_features* features,
                                               const char* boxes_path, int image_height,
                                               int image_width,
                                               const avloc_eval_protocol* protocol,
                                               avloc_report** out);
AVLOC_API double avloc_report_ciou(const avloc_report* report);
AVLOC_API double avloc_report_auc(const avloc_report* report);
AVLOC_API size_t avloc_report_size(const avloc_report* report);
AVLOC_API avloc_status avloc_report_get(const avloc_report* report, size_t i, int* id,
                                        double* iou);
AVLOC_API avloc_status avloc_report_save(const avloc_report* report, const char* path);
AVLOC_API void avloc_report_free(avloc_report* report);

/* Ablations. Each entry trains both stages from the shared stage-1
 * parameters (trained here when stage1 is NULL) and evaluates on eval. */
AVLOC_API avloc_status avloc_ablate_k(const avloc_dataset* train, const avloc_dataset* eval,
                                      const avloc_train_config* config, const int* k_list,
                                      size_t n_k, const avloc_params* stage1,
                                      avloc_table** out);
AVLOC_API avloc_status avloc_compare(const avloc_dataset* train, const avloc_dataset* eval,
                                     const avloc_train_config* config, const avloc_mode* modes,
                                     size_t n_modes, const avloc_params* stage1,
                                     avloc_table** out);
AVLOC_API size_t avloc_table_size(const avloc_table* table);
AVLOC_API avloc_status avloc_table_get(const avloc_table* table, size_t i, const char** label,
                                       double* ciou, double* auc);
AVLOC_API avloc_status avloc_table_save(const avloc_table* table, const char* path);
AVLOC_API void avloc_table_free(avloc_table* table);

/* Writes resp_<i>_<j>.pgm for audio of sample i against the image of sample
 * j, for every i in ids and j in ids (or j = i only when cross is 0). */
AVLOC_API avloc_status avloc_export_maps(const avloc_params* params,
                                         const avloc_dataset* dataset, const int* ids,
                                         size_t n_ids, int cross, const char* dir);

/* Gradient check on a seeded tiny instance. */
AVLOC_API avloc_status avloc_grad_check(uint64_t seed, int stop_grad_mask,
                                        avloc_grad_check_result* out);

#ifdef __cplusplus
}
#endif

#endif  // AVLOC_AVLOC_H_
