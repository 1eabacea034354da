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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "avloc/grid.hpp"

namespace avloc {

/// Axis-aligned box in image pixels, inclusive-exclusive: [x0, x1) x [y0, y1).
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int area() const { return (x1 - x0) * (y1 - y0); }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  friend bool operator==(const Box&, const Box&) = default;
};

struct SamplePair {
  int id = 0;   // 1-based
  Grid image;   // 3 x H_v x W_v
  Grid audio;   // 1 x H_a x W_a
  std::optional<int> latent_class;  // 1..C
  std::optional<Box> gt_box;

  friend bool operator==(const SamplePair&, const SamplePair&) = default;
};

struct Dataset {
  std::vector<SamplePair> samples;

  std::size_t size() const { return samples.size(); }
  const SamplePair& operator[](std::size_t i) const { return samples[i]; }
  int image_height() const { return samples.empty() ? 0 : samples[0].image.height; }
  int image_width() const { return samples.empty() ? 0 : samples[0].image.width; }
  int audio_height() const { return samples.empty() ? 0 : samples[0].audio.height; }
  int audio_width() const { return samples.empty() ? 0 : samples[0].audio.width; }

  /// Checks the dataset invariants: uniform positive shapes, ids 1..n in
  /// order, boxes inside the image with positive area.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SynthConfig {
  int n_samples = 200;
  int n_classes = 10;
  int image_height = 32;
  int image_width = 32;
  int audio_height = 16;
  int audio_width = 16;
  int object_size = 12;
  double noise_std = 0.05;
  // Non-sounding objects of other classes placed next to the sounding one.
  int distractors = 1;
  int distractor_size = 4;  // 0 = object_size
  int texture_period = 4;
  int position_stride = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-class 3×t×t tile: 1 at flat positions d with d % C == z - 1. Objects
/// repeat the tile anchored at the image origin, so pixel (y, x) of channel
/// ch takes tile value (ch, y % t, x % t).
Grid class_texture(int latent_class, int n_classes, int period);

/// Per-class audio template: 1 at flat positions f with f % C == z - 1.
Grid class_audio_template(int latent_class, int n_classes, int height, int width);

/// Draw order per sample (one generator seeded with config.seed):
///   class z = 1 + uniform_int(C); per distractor a class offset
///   1 + uniform_int(C - 1); then the layout: y0 = uniform_int(H - s + 1),
///   x0 = uniform_int(W - s + 1) for the sounding object followed by the same
///   pair per distractor, redrawn as a whole while any two objects overlap;
///   then 3*H*W image noise normals and H_a*W_a audio noise normals.
Dataset generate(const SynthConfig& config);

std::vector<int> class_labels(const Dataset& dataset);

// ---------------------------------------------------------------------------
// Feature files

struct AudioFeature {
  std::vector<double> values;
  friend bool operator==(const AudioFeature&, const AudioFeature&) = default;
};

struct VisionFeature {
  Grid values;  // c x h x w
  friend bool operator==(const VisionFeature&, const VisionFeature&) = default;
};

struct FeatureSet {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<int> ids;
  std::vector<AudioFeature> audio;
  std::vector<VisionFeature> vision;

  std::size_t size() const { return ids.size(); }
  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};

/// Text format: header `AVF1 <n> <c> <h> <w>`, then per sample a line
/// `A <id> <c reals>` and a line `V <id> <c*h*w reals>` (channel-major).
void save_features(const FeatureSet& features, const std::filesystem::path& path);
FeatureSet load_features(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dataset dump: directory holding samples.avd, boxes.csv and classes.csv.

void save_boxes(const Dataset& dataset, const std::filesystem::path& path);
std::vector<std::pair<int, Box>> load_boxes(const std::filesystem::path& path);
void save_classes(const Dataset& dataset, const std::filesystem::path& path);

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace avloc
