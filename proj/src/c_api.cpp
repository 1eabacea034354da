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


#include "avloc/avloc.h"

#include <exception>
#include <new>
#include <string>
#include <utility>
#include <vector>

#include "avloc/attention.hpp"
#include "avloc/encoders.hpp"
#include "avloc/error.hpp"
#include "avloc/metrics.hpp"
#include "avloc/mining.hpp"
#include "avloc/synthdata.hpp"
#include "avloc/trainer.hpp"

struct avloc_dataset {
  avloc::Dataset value;
};
struct avloc_params {
  avloc::EncoderParams value;
};
struct avloc_features {
  avloc::FeatureSet value;
};
struct avloc_index {
  avloc::MiningIndex value;
};
struct avloc_train_log {
  std::vector<avloc::TrainLogRecord> value;
};
struct avloc_report {
  avloc::EvalReport value;
};
struct avloc_table {
  std::vector<avloc::ResultRow> value;
};

namespace {

thread_local std::string g_last_error;

avloc_status status_of(avloc::ErrorKind kind) {
  switch (kind) {
    case avloc::ErrorKind::kInvalidArgument: return AVLOC_ERR_INVALID_ARGUMENT;
    case avloc::ErrorKind::kIo: return AVLOC_ERR_IO;
    case avloc::ErrorKind::kMalformedHeader: return AVLOC_ERR_MALFORMED_HEADER;
    case avloc::ErrorKind::kShapeMismatch: return AVLOC_ERR_SHAPE_MISMATCH;
    case avloc::ErrorKind::kTruncatedPayload: return AVLOC_ERR_TRUNCATED_PAYLOAD;
    case avloc::ErrorKind::kNumeric: return AVLOC_ERR_NUMERIC;
  }
  return AVLOC_ERR_INTERNAL;
}

avloc_status set_error(avloc_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename F>
avloc_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const avloc::Error& e) {
    return set_error(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(AVLOC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(AVLOC_ERR_INTERNAL, e.what());
  }
}

avloc_status null_arg(const char* name) {
  return set_error(AVLOC_ERR_INVALID_ARGUMENT, std::string(name) + " is null");
}

#define AVLOC_REQUIRE(ptr)              \
  do {                                  \
    if ((ptr) == nullptr) return null_arg(#ptr); \
  } while (0)

avloc::SynthConfig to_core(const avloc_synth_config& c) {
  avloc::SynthConfig s;
  s.n_samples = c.n_samples;
  s.n_classes = c.n_classes;
  s.image_height = c.image_height;
  s.image_width = c.image_width;
  s.audio_height = c.audio_height;
  s.audio_width = c.audio_width;
  s.object_size = c.object_size;
  s.noise_std = c.noise_std;
  s.distractors = c.distractors;
  s.distractor_size = c.distractor_size;
  s.texture_period = c.texture_period;
  s.position_stride = c.position_stride;
  s.seed = c.seed;
  return s;
}

avloc::TrainMode to_core(avloc_mode m) {
  switch (m) {
    case AVLOC_MODE_VANILLA: return avloc::TrainMode::kVanilla;
    case AVLOC_MODE_HP: return avloc::TrainMode::kHardPositive;
    case AVLOC_MODE_RANDOM_HP: return avloc::TrainMode::kRandomHardPositive;
  }
  avloc::fail(avloc::ErrorKind::kInvalidArgument, "unknown mode");
}

avloc::TrainConfig to_core(const avloc_train_config& c) {
  avloc::TrainConfig t;
  t.epochs_stage1 = c.epochs_stage1;
  t.epochs_stage2 = c.epochs_stage2;
  t.batch_size = c.batch_size;
  t.learning_rate = c.learning_rate;
  t.epsilon = c.epsilon;
  t.tau = c.tau;
  t.k = c.k;
  t.seed = c.seed;
  t.stop_grad_mask = c.stop_grad_mask != 0;
  t.remine_every = c.remine_every;
  t.mode = to_core(c.mode);
  t.channels = c.channels;
  t.patch = c.patch;
  t.validate();
  return t;
}

avloc::EvalProtocol to_core(const avloc_eval_protocol* p) {
  avloc::EvalProtocol e;
  if (p != nullptr) {
    e.binarize_threshold = p->binarize_threshold;
    e.success_threshold = p->success_threshold;
  }
  return e;
}

avloc_status finish_training(avloc::TrainResult&& r, avloc_params** out_params,
                             avloc_train_log** out_log) {
  *out_params = new avloc_params{std::move(r.params)};
  if (out_log != nullptr) *out_log = new avloc_train_log{std::move(r.log)};
  if (r.diverged) return set_error(AVLOC_ERR_NUMERIC, r.message);
  return AVLOC_OK;
}

}  // namespace

extern "C" {

const char* avloc_status_string(avloc_status status) {
  switch (status) {
    case AVLOC_OK: return "ok";
    case AVLOC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case AVLOC_ERR_IO: return "i/o error";
    case AVLOC_ERR_MALFORMED_HEADER: return "malformed header";
    case AVLOC_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case AVLOC_ERR_TRUNCATED_PAYLOAD: return "truncated payload";
    case AVLOC_ERR_NUMERIC: return "numeric failure";
    case AVLOC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* avloc_last_error(void) { return g_last_error.c_str(); }

void avloc_synth_config_default(avloc_synth_config* config) {
  if (config == nullptr) return;
  const avloc::SynthConfig s;
  *config = avloc_synth_config{s.n_samples,   s.n_classes,       s.image_height,
                               s.image_width, s.audio_height,    s.audio_width,
                               s.object_size, s.noise_std,       s.distractors,
                               s.distractor_size, s.texture_period, s.position_stride,
                               s.seed};
}

void avloc_train_config_default(avloc_train_config* config) {
  if (config == nullptr) return;
  const avloc::TrainConfig t;
  avloc_mode mode = AVLOC_MODE_HP;
  if (t.mode == avloc::TrainMode::kVanilla) mode = AVLOC_MODE_VANILLA;
  if (t.mode == avloc::TrainMode::kRandomHardPositive) mode = AVLOC_MODE_RANDOM_HP;
  *config = avloc_train_config{t.epochs_stage1, t.epochs_stage2, t.batch_size,
                               t.learning_rate, t.epsilon,       t.tau,
                               t.k,             t.seed,          t.stop_grad_mask ? 1 : 0,
                               t.remine_every,  mode,            t.channels,
                               t.patch};
}

void avloc_eval_protocol_default(avloc_eval_protocol* protocol) {
  if (protocol == nullptr) return;
  const avloc::EvalProtocol e;
  *protocol = avloc_eval_protocol{e.binarize_threshold, e.success_threshold};
}

const char* avloc_mode_name(avloc_mode mode) {
  switch (mode) {
    case AVLOC_MODE_VANILLA: return "vanilla";
    case AVLOC_MODE_HP: return "hp";
    case AVLOC_MODE_RANDOM_HP: return "random_hp";
  }
  return "unknown";
}

avloc_status avloc_mode_parse(const char* name, avloc_mode* mode) {
  AVLOC_REQUIRE(name);
  AVLOC_REQUIRE(mode);
  const auto m = avloc::parse_mode(name);
  if (!m) {
    return set_error(AVLOC_ERR_INVALID_ARGUMENT,
                     std::string("unknown mode '") + name + "' (vanilla, hp, random_hp)");
  }
  switch (*m) {
    case avloc::TrainMode::kVanilla: *mode = AVLOC_MODE_VANILLA; break;
    case avloc::TrainMode::kHardPositive: *mode = AVLOC_MODE_HP; break;
    case avloc::TrainMode::kRandomHardPositive: *mode = AVLOC_MODE_RANDOM_HP; break;
  }
  return AVLOC_OK;
}

avloc_status avloc_train_config_save(const avloc_train_config* config, const char* path) {
  AVLOC_REQUIRE(config);
  AVLOC_REQUIRE(path);
  return guarded([&] {
    avloc::save_config_echo(to_core(*config), path);
    return AVLOC_OK;
  });
}

avloc_status avloc_dataset_generate(const avloc_synth_config* config, avloc_dataset** out) {
  AVLOC_REQUIRE(config);
  AVLOC_REQUIRE(out);
  return guarded([&] {
    *out = new avloc_dataset{avloc::generate(to_core(*config))};
    return AVLOC_OK;
  });
}

avloc_status avloc_dataset_save(const avloc_dataset* dataset, const char* dir) {
  AVLOC_REQUIRE(dataset);
  AVLOC_REQUIRE(dir);
  return guarded([&] {
    avloc::save_dataset(dataset->value, dir);
    return AVLOC_OK;
  });
}

avloc_status avloc_dataset_load(const char* dir, avloc_dataset** out) {
  AVLOC_REQUIRE(dir);
  AVLOC_REQUIRE(out);
  return guarded([&] {
    *out = new avloc_dataset{avloc::load_dataset(dir)};
    return AVLOC_OK;
  });
}

int avloc_dataset_size(const avloc_dataset* dataset) {
  return dataset == nullptr ? 0 : static_cast<int>(dataset->value.size());
}

void avloc_dataset_free(avloc_dataset* dataset) { delete dataset; }

avloc_status avloc_params_init(const avloc_dataset* dataset, int channels, int patch,
                               uint64_t seed, avloc_params** out) {
  AVLOC_REQUIRE(dataset);
  AVLOC_REQUIRE(out);
  return guarded([&] {
    const auto shape = avloc::shape_for(dataset->value, channels, patch);
    *out = new avloc_params{avloc::init_params(shape, seed)};
    return AVLOC_OK;
  });
}

avloc_status avloc_params_save(const avloc_params* params, const char* path) {
  AVLOC_REQUIRE(params);
  AVLOC_REQUIRE(path);
  return guarded([&] {
    avloc::save_params(params->value, path);
    return AVLOC_OK;
  });
}

avloc_status avloc_params_load(const char* path, avloc_params** out) {
  AVLOC_REQUIRE(path);
  AVLOC_REQUIRE(out);
  return guarded([&] {
    *out = new avloc_params{avloc::load_params(path)};
    return AVLOC_OK;
  });
}

size_t avloc_params_count(const avloc_params* params) {
  return params == nullptr ? 0 : params->value.values.size();
}

const double* avloc_params_data(const avloc_params* params) {
  return params == nullptr ? nullptr : params->value.values.data();
}

void avloc_params_free(avloc_params* params) { delete params; }

avloc_status avloc_features_encode(const avloc_params* params, const avloc_dataset* dataset,
                                   avloc_features** out) {
  AVLOC_REQUIRE(params);
  AVLOC_REQUIRE(dataset);
  AVLOC_REQUIRE(out);
  return guarded([&] {
    *out = new avloc_features{avloc::encode_dataset(params->value, dataset->value)};
    return AVLOC_OK;
  });
}

avloc_status avloc_features_save(const avloc_features* features, const char* path) {
  AVLOC_REQUIRE(features);
  AVLOC_REQUIRE(path);
  return guarded([&] {
    avloc::save_features(features->value, path);
    return AVLOC_OK;
  });
}

avloc_status avloc_features_load(const char* path, avloc_features** out) {
  AVLOC_REQUIRE(path);
  AVLOC_REQUIRE(out);
  return guarded([&] {
    *out = new avloc_features{avloc::load_features(path)};
    return AVLOC_OK;
  });
}

int avloc_features_size(const avloc_features* features) {
  return features == nullptr ? 0 : static_cast<int>(features->value.size());
}

void avloc_features_free(avloc_features* features) { delete features; }

avloc_status avloc_index_build(const avloc_features* features, int k, avloc_index** out) {
  AVLOC_REQUIRE(features);
  AVLOC_REQUIRE(out);
  return guarded([&] {
    *out = new avloc_index{avloc::build_index(features->value, k)};
    return AVLOC_OK;
  });
}

avloc_status avloc_index_random(int n, int k, uint64_t seed, avloc_index** out) {
  AVLOC_REQUIRE(out);
  return guarded([&] {
    *out = new avloc_index{avloc::random_index(n, k, seed)};
    return AVLOC_OK;
  });
}

avloc_status avloc_index_save(const avloc_index* index, const char* path) {
  AVLOC_REQUIRE(index);
  AVLOC_REQUIRE(path);
  return guarded([&] {
    avloc::save_index(index->value, path);
    return AVLOC_OK;
  });
}

avloc_status avloc_index_load(const char* path, avloc_index** out) {
  AVLOC_REQUIRE(path);
  AVLOC_REQUIRE(out);
  return guarded([&] {
    *out = new avloc_index{avloc::load_index(path)};
    return AVLOC_OK;
  });
}

avloc_status avloc_index_precision(const avloc_index* index, const avloc_dataset* dataset,
                                   double* out) {
  AVLOC_REQUIRE(index);
  AVLOC_REQUIRE(dataset);
  AVLOC_REQUIRE(out);
  return guarded([&] {
    *out = avloc::mining_precision(index->value, avloc::class_labels(dataset->value));
    return AVLOC_OK;
  });
}

void avloc_index_free(avloc_index* index) { delete index; }

avloc_status avloc_train_stage1(const avloc_dataset* dataset, const avloc_train_config* config,
                                const avloc_params* init, avloc_params** out_params,
                                avloc_train_log** out_log) {
  AVLOC_REQUIRE(dataset);
  AVLOC_REQUIRE(config);
  AVLOC_REQUIRE(out_params);
  return guarded([&] {
    auto r = avloc::train_stage1(dataset->value, to_core(*config),
                                 init != nullptr ? &init->value : nullptr);
    return finish_training(std::move(r), out_params, out_log);
  });
}

avloc_status avloc_train_stage2(const avloc_dataset* dataset, const avloc_params* stage1,
                                const avloc_index* index, const avloc_train_config* config,
                                avloc_params** out_params, avloc_train_log** out_log) {
  AVLOC_REQUIRE(dataset);
  AVLOC_REQUIRE(stage1);
  AVLOC_REQUIRE(config);
  AVLOC_REQUIRE(out_params);
  return guarded([&] {
    auto r = avloc::train_stage2(dataset->value, stage1->value,
                                 index != nullptr ? &index->value : nullptr, to_core(*config));
    return finish_training(std::move(r), out_params, out_log);
  });
}

avloc_status avloc_train_full(const avloc_dataset* dataset, const avloc_train_config* config,
                              const avloc_params* stage1, const avloc_index* index,
                              avloc_params** out_params, avloc_train_log** out_log) {
  AVLOC_REQUIRE(dataset);
  AVLOC_REQUIRE(config);
  AVLOC_REQUIRE(out_params);
  return guarded([&] {
    auto r = avloc::train_full(dataset->value, to_core(*config),
                               stage1 != nullptr ? &stage1->value : nullptr,
                               index != nullptr ? &index->value : nullptr);
    return finish_training(std::move(r), out_params, out_log);
  });
}

size_t avloc_train_log_size(const avloc_train_log* log) {
  return log == nullptr ? 0 : log->value.size();
}

avloc_status avloc_train_log_get(const avloc_train_log* log, size_t i, avloc_log_record* out) {
  AVLOC_REQUIRE(log);
  AVLOC_REQUIRE(out);
  if (i >= log->value.size()) return set_error(AVLOC_ERR_INVALID_ARGUMENT, "log index out of range");
  const auto& r = log->value[i];
  *out = avloc_log_record{r.stage, r.epoch, r.step, r.loss, r.grad_norm};
  return AVLOC_OK;
}

avloc_status avloc_train_log_save(const avloc_train_log* log, const char* path) {
  AVLOC_REQUIRE(log);
  AVLOC_REQUIRE(path);
  return guarded([&] {
    avloc::save_log(log->value, path);
    return AVLOC_OK;
  });
}

void avloc_train_log_free(avloc_train_log* log) { delete log; }

avloc_status avloc_evaluate(const avloc_params* params, const avloc_dataset* dataset,
                            const avloc_eval_protocol* protocol, avloc_report** out) {
  AVLOC_REQUIRE(params);
  AVLOC_REQUIRE(dataset);
  AVLOC_REQUIRE(out);
  return guarded([&] {
    *out = new avloc_report{avloc::evaluate(params->value, dataset->value, to_core(protocol))};
    return AVLOC_OK;
  });
}

avloc_status avloc_evaluate_features(const avloc_features* features, const char* boxes_path,
                                     int image_height, int image_width,
                                     const avloc_eval_protocol* protocol, avloc_report** out) {
  AVLOC_REQUIRE(features);
  AVLOC_REQUIRE(boxes_path);
  AVLOC_REQUIRE(out);
  return guarded([&] {
    const auto boxes = avloc::load_boxes(boxes_path);
    *out = new avloc_report{avloc::evaluate_features(features->value, boxes, image_height,
                                                     image_width, to_core(protocol))};
    return AVLOC_OK;
  });
}

double avloc_report_ciou(const avloc_report* report) {
  return report == nullptr ? 0.0 : report->value.ciou;
}

double avloc_report_auc(const avloc_report* report) {
  return report == nullptr ? 0.0 : report->value.auc;
}

size_t avloc_report_size(const avloc_report* report) {
  return report == nullptr ? 0 : report->value.per_sample.size();
}

avloc_status avloc_report_get(const avloc_report* report, size_t i, int* id, double* iou) {
  AVLOC_REQUIRE(report);
  if (i >= report->value.per_sample.size()) {
    return set_error(AVLOC_ERR_INVALID_ARGUMENT, "report index out of range");
  }
  if (id != nullptr) *id = report->value.per_sample[i].id;
  if (iou != nullptr) *iou = report->value.per_sample[i].iou;
  return AVLOC_OK;
}

avloc_status avloc_report_save(const avloc_report* report, const char* path) {
  AVLOC_REQUIRE(report);
  AVLOC_REQUIRE(path);
  return guarded([&] {
    avloc::save_report(report->value, path);
    return AVLOC_OK;
  });
}

void avloc_report_free(avloc_report* report) { delete report; }

avloc_status avloc_ablate_k(const avloc_dataset* train, const avloc_dataset* eval,
                            const avloc_train_config* config, const int* k_list, size_t n_k,
                            const avloc_params* stage1, avloc_table** out) {
  AVLOC_REQUIRE(train);
  AVLOC_REQUIRE(eval);
  AVLOC_REQUIRE(config);
  AVLOC_REQUIRE(k_list);
  AVLOC_REQUIRE(out);
  return guarded([&] {
    const auto cfg = to_core(*config);
    avloc::EncoderParams shared;
    if (stage1 != nullptr) {
      shared = stage1->value;
    } else {
      auto r = avloc::train_stage1(train->value, cfg);
      if (r.diverged) avloc::fail(avloc::ErrorKind::kNumeric, r.message);
      shared = std::move(r.params);
    }
    const std::vector<int> ks(k_list, k_list + n_k);
    *out = new avloc_table{avloc::ablate_k(train->value, eval->value, cfg, ks, shared)};
    return AVLOC_OK;
  });
}

avloc_status avloc_compare(const avloc_dataset* train, const avloc_dataset* eval,
                           const avloc_train_config* config, const avloc_mode* modes,
                           size_t n_modes, const avloc_params* stage1, avloc_table** out) {
  AVLOC_REQUIRE(train);
  AVLOC_REQUIRE(eval);
  AVLOC_REQUIRE(config);
  AVLOC_REQUIRE(modes);
  AVLOC_REQUIRE(out);
  return guarded([&] {
    const auto cfg = to_core(*config);
    avloc::EncoderParams shared;
    if (stage1 != nullptr) {
      shared = stage1->value;
    } else {
      auto r = avloc::train_stage1(train->value, cfg);
      if (r.diverged) avloc::fail(avloc::ErrorKind::kNumeric, r.message);
      shared = std::move(r.params);
    }
    std::vector<avloc::TrainMode> ms;
    for (size_t i = 0; i < n_modes; ++i) ms.push_back(to_core(modes[i]));
    *out = new avloc_table{avloc::compare_methods(train->value, eval->value, cfg, ms, shared)};
    return AVLOC_OK;
  });
}

size_t avloc_table_size(const avloc_table* table) {
  return table == nullptr ? 0 : table->value.size();
}

avloc_status avloc_table_get(const avloc_table* table, size_t i, const char** label,
                             double* ciou, double* auc) {
  AVLOC_REQUIRE(table);
  if (i >= table->value.size()) return set_error(AVLOC_ERR_INVALID_ARGUMENT, "row out of range");
  const auto& row = table->value[i];
  if (label != nullptr) *label = row.label.c_str();
  if (ciou != nullptr) *ciou = row.ciou;
  if (auc != nullptr) *auc = row.auc;
  return AVLOC_OK;
}

avloc_status avloc_table_save(const avloc_table* table, const char* path) {
  AVLOC_REQUIRE(table);
  AVLOC_REQUIRE(path);
  return guarded([&] {
    // Rows from ablate_k carry numeric labels; comparison rows carry mode names.
    bool numeric = !table->value.empty();
    for (const auto& row : table->value) {
      numeric = numeric && !row.label.empty() &&
                row.label.find_first_not_of("0123456789") == std::string::npos;
    }
    avloc::save_rows(table->value, numeric ? "K" : "mode", path);
    return AVLOC_OK;
  });
}

void avloc_table_free(avloc_table* table) { delete table; }

avloc_status avloc_export_maps(const avloc_params* params, const avloc_dataset* dataset,
                               const int* ids, size_t n_ids, int cross, const char* dir) {
  AVLOC_REQUIRE(params);
  AVLOC_REQUIRE(dataset);
  AVLOC_REQUIRE(dir);
  if (n_ids > 0 && ids == nullptr) return null_arg("ids");
  return guarded([&] {
    const auto& ds = dataset->value;
    const int n = static_cast<int>(ds.size());
    for (size_t a = 0; a < n_ids; ++a) {
      if (ids[a] < 1 || ids[a] > n) {
        avloc::fail(avloc::ErrorKind::kInvalidArgument,
                    "sample id " + std::to_string(ids[a]) + " out of range");
      }
    }
    std::filesystem::create_directories(dir);
    for (size_t a = 0; a < n_ids; ++a) {
      const auto& si = ds[ids[a] - 1];
      const auto audio = avloc::encode_audio(params->value, si.audio);
      for (size_t b = 0; b < n_ids; ++b) {
        if (!cross && a != b) continue;
        const auto& sj = ds[ids[b] - 1];
        const auto alpha = avloc::response_map(audio, avloc::encode_vision(params->value, sj.image));
        const std::string name =
            "resp_" + std::to_string(ids[a]) + "_" + std::to_string(ids[b]) + ".pgm";
        avloc::write_pgm(alpha, std::filesystem::path(dir) / name);
      }
    }
    return AVLOC_OK;
  });
}

avloc_status avloc_grad_check(uint64_t seed, int stop_grad_mask, avloc_grad_check_result* out) {
  AVLOC_REQUIRE(out);
  return guarded([&] {
    const auto inst = avloc::make_grad_check_instance(seed);
    avloc::ObjectiveConfig cfg;
    cfg.stop_grad_mask = stop_grad_mask != 0;
    const auto r = avloc::grad_check(inst.params, inst.dataset, inst.plan, cfg);
    *out = avloc_grad_check_result{r.max_rel_error, r.worst_entry, r.analytic, r.numeric};
    if (!r.finite) avloc::fail(avloc::ErrorKind::kNumeric, "non-finite gradient");
    return AVLOC_OK;
  });
}

}  // extern "C"
