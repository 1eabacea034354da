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
#include <span>
#include <string>
#include <vector>

#include "avloc/attention.hpp"
#include "avloc/encoders.hpp"
#include "avloc/synthdata.hpp"
#include "avloc/trainer.hpp"

namespace avloc {

struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;

  bool at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x] != 0; }
};

/// Min-max normalizes the map (constant maps read 0.5), keeps sites >= threshold
/// and upsamples nearest-neighbour to image_height x image_width.
BinaryMask binarize_map(const Map2D& alpha, int image_height, int image_width,
                        double threshold = 0.5);

/// Pixel IoU of the mask against the box; 0 when the union is empty.
double iou(const BinaryMask& pred, const Box& box);

struct EvalProtocol {
  double binarize_threshold = 0.5;
  double success_threshold = 0.5;
};

/// IoU thresholds k/20 for k = 1..19 used for AUC.
std::vector<double> auc_thresholds();

struct SampleIou {
  int id = 0;
  double iou = 0.0;
};

struct EvalReport {
  double ciou = 0.0;
  double auc = 0.0;
  std::vector<SampleIou> per_sample;  // ascending id
  int n_eval = 0;
  double binarize_threshold = 0.5;
  double success_threshold = 0.5;
};

/// cIoU (fraction with IoU >= success threshold) and AUC (mean success over
/// auc_thresholds()) from per-sample IoUs.
EvalReport summarize(std::vector<SampleIou> per_sample, const EvalProtocol& protocol);

EvalReport evaluate(const EncoderParams& params, const Dataset& dataset,
                    const EvalProtocol& protocol = {});

/// Same protocol on precomputed features; `boxes` are matched by id.
EvalReport evaluate_features(const FeatureSet& features,
                             std::span<const std::pair<int, Box>> boxes, int image_height,
                             int image_width, const EvalProtocol& protocol = {});

/// Report CSV: `id,iou` header, one row per sample, then a summary row
/// `ciou=<v>,auc=<v>`.
void save_report(const EvalReport& report, const std::filesystem::path& path);

struct ResultRow {
  std::string label;  // K value or mode name
  double ciou = 0.0;
  double auc = 0.0;
  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

/// One two-stage run per K sharing the stage-1 parameters; config.mode picks
/// hp or random_hp. Trains on `train`, evaluates on `eval`.
std::vector<ResultRow> ablate_k(const Dataset& train, const Dataset& eval,
                                const TrainConfig& config, std::span<const int> k_list,
                                const EncoderParams& stage1);

/// Stage 2 per mode from shared stage-1 parameters with matched seeds.
std::vector<ResultRow> compare_methods(const Dataset& train, const Dataset& eval,
                                       const TrainConfig& config,
                                       std::span<const TrainMode> modes,
                                       const EncoderParams& stage1);

/// `header` names the first column (`K` or `mode`).
void save_rows(const std::vector<ResultRow>& rows, const std::string& header,
               const std::filesystem::path& path);

}  // namespace avloc
