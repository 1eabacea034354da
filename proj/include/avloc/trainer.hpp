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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "avloc/encoders.hpp"
#include "avloc/mining.hpp"
#include "avloc/objective.hpp"
#include "avloc/synthdata.hpp"

namespace avloc {

enum class TrainMode { kVanilla, kHardPositive, kRandomHardPositive };

const char* mode_name(TrainMode mode);
std::optional<TrainMode> parse_mode(std::string_view name);

struct TrainConfig {
  int epochs_stage1 = 30;
  int epochs_stage2 = 30;
  int batch_size = 16;
  double learning_rate = 0.05;
  double epsilon = kDefaultEpsilon;
  double tau = kDefaultTau;
  int k = 19;  // clamped to n - 1 at use
  std::uint64_t seed = 0;
  bool stop_grad_mask = false;
  int remine_every = 0;  // stage-2 epochs between re-mining; 0 = mine once
  TrainMode mode = TrainMode::kHardPositive;
  int channels = 16;
  int patch = 4;

  void validate() const;
};

struct TrainLogRecord {
  int stage = 1;
  int epoch = 0;
  int step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  friend bool operator==(const TrainLogRecord&, const TrainLogRecord&) = default;
};

struct TrainResult {
  EncoderParams params;
  std::vector<TrainLogRecord> log;
  bool diverged = false;  // params then hold the last finite state
  std::string message;
};

/// params - learning_rate * grads. Rejects non-finite gradients.
EncoderParams sgd_step(const EncoderParams& params, const EncoderParams& grads,
                       double learning_rate);

/// Seed of the parameter initializer for a run seed.
std::uint64_t init_seed(std::uint64_t run_seed);
/// Seed of the random positive sets (random_hp mode) for a run seed.
std::uint64_t random_index_seed(std::uint64_t run_seed);

/// Vanilla objective; every non-anchor batch member is a negative. Starts from
/// `init` when given, else from init_params(shape, init_seed(seed)).
TrainResult train_stage1(const Dataset& dataset, const TrainConfig& config,
                         const EncoderParams* init = nullptr);

/// Objective selected by config.mode, starting from stage-1 parameters. For
/// hp and random_hp an index over the same dataset is required; negatives are
/// batch members inside the anchor's negative set.
TrainResult train_stage2(const Dataset& dataset, const EncoderParams& stage1,
                         const MiningIndex* index, const TrainConfig& config);

/// Index for stage 2 according to the mode: mined from the features of
/// `params` (hp), seeded random sets (random_hp), none (vanilla).
std::optional<MiningIndex> index_for_mode(const Dataset& dataset, const EncoderParams& params,
                                          const TrainConfig& config);

/// Stage 1, mining per mode, stage 2.
TrainResult train_full(const Dataset& dataset, const TrainConfig& config,
                       const EncoderParams* stage1 = nullptr,
                       const MiningIndex* index = nullptr);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool finite = true;
};

/// Central differences (step 1e-4) over every parameter against loss_grad.
/// Relative error is |a - f| / max(|a|, |f|, 1).
GradCheckResult grad_check(const EncoderParams& params, const Dataset& dataset,
                           std::span<const AnchorPlan> plan, const ObjectiveConfig& config,
                           double step = 1e-4);

/// Tiny seeded instance: n = 4 samples of 3x4x4 images and 1x2x2 audio,
/// c = 4, 2x2 patches (h = w = 2), parameters uniform in [-1, 1], one hard
/// positive pair and the index complement as negatives for every anchor.
struct GradCheckInstance {
  Dataset dataset;
  EncoderParams params;
  std::vector<AnchorPlan> plan;
};
GradCheckInstance make_grad_check_instance(std::uint64_t seed);

void save_log(const std::vector<TrainLogRecord>& log, const std::filesystem::path& path);
/// key=value echo of the training configuration next to a checkpoint.
void save_config_echo(const TrainConfig& config, const std::filesystem::path& path);

}  // namespace avloc
