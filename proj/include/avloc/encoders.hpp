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
#include <vector>

#include "avloc/grid.hpp"
#include "avloc/rng.hpp"
#include "avloc/synthdata.hpp"

namespace avloc {

/// Sizes of the two-stream encoder. The vision stream cuts the image into
/// non-overlapping patch x patch tiles and projects each onto `channels`; the
/// audio stream projects the flattened grid onto `channels`.
struct EncoderShape {
  int channels = 16;
  int patch = 4;
  int image_height = 32;
  int image_width = 32;
  int audio_height = 16;
  int audio_width = 16;

  int grid_height() const { return image_height / patch; }
  int grid_width() const { return image_width / patch; }
  int patch_dim() const { return 3 * patch * patch; }
  int audio_dim() const { return audio_height * audio_width; }

  std::size_t vision_weight_size() const {
    return static_cast<std::size_t>(channels) * patch_dim();
  }
  std::size_t audio_weight_size() const {
    return static_cast<std::size_t>(channels) * audio_dim();
  }
  std::size_t total_size() const {
    return vision_weight_size() + audio_weight_size() + 2 * static_cast<std::size_t>(channels);
  }

  void validate() const;
  friend bool operator==(const EncoderShape&, const EncoderShape&) = default;
};

/// All weights live in one flat array laid out as
/// [vision_weight (c x 3p^2) | vision_bias (c) | audio_weight (c x H_a W_a) | audio_bias (c)].
/// Vision weight columns follow (image channel, dy, dx) order. The same type
/// doubles as a gradient buffer.
struct EncoderParams {
  EncoderShape shape;
  std::vector<double> values;

  EncoderParams() = default;
  explicit EncoderParams(const EncoderShape& s) : shape(s), values(s.total_size(), 0.0) {}

  std::span<double> vision_weight() { return {values.data(), shape.vision_weight_size()}; }
  std::span<double> vision_bias() {
    return {values.data() + shape.vision_weight_size(), static_cast<std::size_t>(shape.channels)};
  }
  std::span<double> audio_weight() {
    return {values.data() + shape.vision_weight_size() + shape.channels,
            shape.audio_weight_size()};
  }
  std::span<double> audio_bias() {
    return {values.data() + shape.total_size() - shape.channels,
            static_cast<std::size_t>(shape.channels)};
  }
  std::span<const double> vision_weight() const {
    return {values.data(), shape.vision_weight_size()};
  }
  std::span<const double> vision_bias() const {
    return {values.data() + shape.vision_weight_size(), static_cast<std::size_t>(shape.channels)};
  }
  std::span<const double> audio_weight() const {
    return {values.data() + shape.vision_weight_size() + shape.channels,
            shape.audio_weight_size()};
  }
  std::span<const double> audio_bias() const {
    return {values.data() + shape.total_size() - shape.channels,
            static_cast<std::size_t>(shape.channels)};
  }

  /// Shape consistency and finiteness.
  void validate() const;

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

EncoderShape shape_for(const Dataset& dataset, int channels, int patch);

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per stream, weights then bias.
EncoderParams init_params(const EncoderShape& shape, std::uint64_t seed);

VisionFeature encode_vision(const EncoderParams& params, const Grid& image);
AudioFeature encode_audio(const EncoderParams& params, const Grid& audio);

/// Reverse-mode pass through the affine+tanh vision map. `output` must be the
/// forward result for `image`. Parameter gradients are accumulated into
/// `param_grad`; the input gradient is accumulated when `input_grad` is set.
void accumulate_vision_grad(const EncoderParams& params, const Grid& image,
                            const VisionFeature& output, const Grid& upstream,
                            EncoderParams& param_grad, Grid* input_grad = nullptr);
void accumulate_audio_grad(const EncoderParams& params, const Grid& audio,
                           const AudioFeature& output, std::span<const double> upstream,
                           EncoderParams& param_grad, Grid* input_grad = nullptr);

struct EncoderGradients {
  EncoderParams params;  // gradient w.r.t. every parameter entry
  Grid input;            // gradient w.r.t. the encoder input
};

EncoderGradients encode_vision_grad(const EncoderParams& params, const Grid& image,
                                    const Grid& upstream);
EncoderGradients encode_audio_grad(const EncoderParams& params, const Grid& audio,
                                   std::span<const double> upstream);

/// Checkpoint: header `AVP1 <c> <p> <H_v> <W_v> <H_a> <W_a>`, then one line
/// per flat array in layout order.
void save_params(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_params(const std::filesystem::path& path);

FeatureSet encode_dataset(const EncoderParams& params, const Dataset& dataset);

}  // namespace avloc
