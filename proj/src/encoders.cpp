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

#include "avloc/encoders.hpp"

#include <cmath>
#include <string>

#include "avloc/error.hpp"
#include "avloc/textio.hpp"

namespace avloc {

void EncoderShape::validate() const {
  require(channels >= 1, "encoder channels must be positive");
  require(patch >= 1, "patch size must be positive");
  require(image_height > 0 && image_width > 0, "image size must be positive");
  require(audio_height > 0 && audio_width > 0, "audio size must be positive");
  require(image_height % patch == 0 && image_width % patch == 0,
          "image size must be a multiple of the patch size");
}

void EncoderParams::validate() const {
  shape.validate();
  if (values.size() != shape.total_size()) {
    fail(ErrorKind::kShapeMismatch, "parameter array does not match encoder shape");
  }
  for (double v : values) {
    if (!std::isfinite(v)) fail(ErrorKind::kNumeric, "non-finite encoder parameter");
  }
}

EncoderShape shape_for(const Dataset& dataset, int channels, int patch) {
  EncoderShape s;
  s.channels = channels;
  s.patch = patch;
  s.image_height = dataset.image_height();
  s.image_width = dataset.image_width();
  s.audio_height = dataset.audio_height();
  s.audio_width = dataset.audio_width();
  s.validate();
  return s;
}

EncoderParams init_params(const EncoderShape& shape, std::uint64_t seed) {
  shape.validate();
  EncoderParams p(shape);
  Rng rng(seed);
  const double sv = 1.0 / std::sqrt(static_cast<double>(shape.patch_dim()));
  const double sa = 1.0 / std::sqrt(static_cast<double>(shape.audio_dim()));
  for (double& w : p.vision_weight()) w = rng.uniform(-sv, sv);
  for (double& b : p.vision_bias()) b = rng.uniform(-sv, sv);
  for (double& w : p.audio_weight()) w = rng.uniform(-sa, sa);
  for (double& b : p.audio_bias()) b = rng.uniform(-sa, sa);
  return p;
}

namespace {

void check_image(const EncoderShape& s, const Grid& image) {
  if (image.channels != 3 || image.height != s.image_height || image.width != s.image_width ||
      image.values.size() != image.size()) {
    fail(ErrorKind::kShapeMismatch, "image shape does not match the encoder");
  }
}

void check_audio(const EncoderShape& s, const Grid& audio) {
  if (audio.channels != 1 || audio.height != s.audio_height || audio.width != s.audio_width ||
      audio.values.size() != audio.size()) {
    fail(ErrorKind::kShapeMismatch, "audio shape does not match the encoder");
  }
}

}  // namespace

VisionFeature encode_vision(const EncoderParams& params, const Grid& image) {
  const auto& s = params.shape;
  check_image(s, image);
  const int p = s.patch, gh = s.grid_height(), gw = s.grid_width(), pd = s.patch_dim();
  const auto weight = params.vision_weight();
  const auto bias = params.vision_bias();

  VisionFeature out{Grid(s.channels, gh, gw)};
  std::vector<double> patch(pd);
  for (int u = 0; u < gh; ++u) {
    for (int v = 0; v < gw; ++v) {
      int q = 0;
      for (int ch = 0; ch < 3; ++ch)
        for (int dy = 0; dy < p; ++dy)
          for (int dx = 0; dx < p; ++dx) patch[q++] = image.at(ch, u * p + dy, v * p + dx);
      for (int k = 0; k < s.channels; ++k) {
        const double* row = weight.data() + static_cast<std::size_t>(k) * pd;
        double acc = bias[k];
        for (int t = 0; t < pd; ++t) acc += row[t] * patch[t];
        out.values.at(k, u, v) = std::tanh(acc);
      }
    }
  }
  return out;
}

AudioFeature encode_audio(const EncoderParams& params, const Grid& audio) {
  const auto& s = params.shape;
  check_audio(s, audio);
  const int d = s.audio_dim();
  const auto weight = params.audio_weight();
  const auto bias = params.audio_bias();
  AudioFeature out{std::vector<double>(s.channels)};
  for (int k = 0; k < s.channels; ++k) {
    const double* row = weight.data() + static_cast<std::size_t>(k) * d;
    double acc = bias[k];
    for (int t = 0; t < d; ++t) acc += row[t] * audio.values[t];
    out.values[k] = std::tanh(acc);
  }
  return out;
}

void accumulate_vision_grad(const EncoderParams& params, const Grid& image,
                            const VisionFeature& output, const Grid& upstream,
                            EncoderParams& param_grad, Grid* input_grad) {
  const auto& s = params.shape;
  check_image(s, image);
  if (!upstream.same_shape(output.values) ||
      upstream.channels != s.channels || upstream.height != s.grid_height() ||
      upstream.width != s.grid_width()) {
    fail(ErrorKind::kShapeMismatch, "upstream gradient does not match vision feature shape");
  }
  if (param_grad.shape != s) fail(ErrorKind::kShapeMismatch, "gradient buffer shape differs");
  if (input_grad && !input_grad->same_shape(image)) *input_grad = Grid(3, s.image_height, s.image_width);

  const int p = s.patch, gh = s.grid_height(), gw = s.grid_width(), pd = s.patch_dim();
  const auto weight = params.vision_weight();
  auto gweight = param_grad.vision_weight();
  auto gbias = param_grad.vision_bias();
  std::vector<double> patch(pd), gpatch(pd);
  for (int u = 0; u < gh; ++u) {
    for (int v = 0; v < gw; ++v) {
      int q = 0;
      for (int ch = 0; ch < 3; ++ch)
        for (int dy = 0; dy < p; ++dy)
          for (int dx = 0; dx < p; ++dx) patch[q++] = image.at(ch, u * p + dy, v * p + dx);
      std::fill(gpatch.begin(), gpatch.end(), 0.0);
      for (int k = 0; k < s.channels; ++k) {
        const double y = output.values.at(k, u, v);
        const double g = upstream.at(k, u, v) * (1.0 - y * y);
        if (g == 0.0) continue;
        double* grow = gweight.data() + static_cast<std::size_t>(k) * pd;
        for (int t = 0; t < pd; ++t) grow[t] += g * patch[t];
        gbias[k] += g;
        if (input_grad) {
          const double* row = weight.data() + static_cast<std::size_t>(k) * pd;
          for (int t = 0; t < pd; ++t) gpatch[t] += g * row[t];
        }
      }
      if (input_grad) {
        q = 0;
        for (int ch = 0; ch < 3; ++ch)
          for (int dy = 0; dy < p; ++dy)
            for (int dx = 0; dx < p; ++dx) input_grad->at(ch, u * p + dy, v * p + dx) += gpatch[q++];
      }
    }
  }
}

void accumulate_audio_grad(const EncoderParams& params, const Grid& audio,
                           const AudioFeature& output, std::span<const double> upstream,
                           EncoderParams& param_grad, Grid* input_grad) {
  const auto& s = params.shape;
  check_audio(s, audio);
  if (upstream.size() != static_cast<std::size_t>(s.channels) ||
      output.values.size() != upstream.size()) {
    fail(ErrorKind::kShapeMismatch, "upstream gradient does not match audio feature length");
  }
  if (param_grad.shape != s) fail(ErrorKind::kShapeMismatch, "gradient buffer shape differs");
  if (input_grad && !input_grad->same_shape(audio)) *input_grad = Grid(1, s.audio_height, s.audio_width);

  const int d = s.audio_dim();
  const auto weight = params.audio_weight();
  auto gweight = param_grad.audio_weight();
  auto gbias = param_grad.audio_bias();
  for (int k = 0; k < s.channels; ++k) {
    const double y = output.values[k];
    const double g = upstream[k] * (1.0 - y * y);
    if (g == 0.0) continue;
    double* grow = gweight.data() + static_cast<std::size_t>(k) * d;
    for (int t = 0; t < d; ++t) grow[t] += g * audio.values[t];
    gbias[k] += g;
    if (input_grad) {
      const double* row = weight.data() + static_cast<std::size_t>(k) * d;
      for (int t = 0; t < d; ++t) input_grad->values[t] += g * row[t];
    }
  }
}

EncoderGradients encode_vision_grad(const EncoderParams& params, const Grid& image,
                                    const Grid& upstream) {
  const auto out = encode_vision(params, image);
  EncoderGradients g{EncoderParams(params.shape), Grid(3, image.height, image.width)};
  accumulate_vision_grad(params, image, out, upstream, g.params, &g.input);
  return g;
}

EncoderGradients encode_audio_grad(const EncoderParams& params, const Grid& audio,
                                   std::span<const double> upstream) {
  const auto out = encode_audio(params, audio);
  EncoderGradients g{EncoderParams(params.shape), Grid(1, audio.height, audio.width)};
  accumulate_audio_grad(params, audio, out, upstream, g.params, &g.input);
  return g;
}

void save_params(const EncoderParams& params, const std::filesystem::path& path) {
  params.validate();
  const auto& s = params.shape;
  auto out = textio::open_out(path);
  out << "AVP1 " << s.channels << ' ' << s.patch << ' ' << s.image_height << ' '
      << s.image_width << ' ' << s.audio_height << ' ' << s.audio_width << '\n';
  auto line = [&](std::span<const double> xs) {
    bool first = true;
    for (double x : xs) {
      if (!first) out << ' ';
      out << textio::format_real(x);
      first = false;
    }
    out << '\n';
  };
  line(params.vision_weight());
  line(params.vision_bias());
  line(params.audio_weight());
  line(params.audio_bias());
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

EncoderParams load_params(const std::filesystem::path& path) {
  const auto lines = textio::read_lines(path);
  if (lines.empty()) fail(ErrorKind::kMalformedHeader, "empty checkpoint");
  const auto header = textio::split_ws(lines[0]);
  if (header.size() != 7 || header[0] != "AVP1") {
    fail(ErrorKind::kMalformedHeader, "expected header 'AVP1 <c> <p> <H_v> <W_v> <H_a> <W_a>'");
  }
  int dims[6];
  for (int k = 0; k < 6; ++k) {
    const auto v = textio::parse_int(header[k + 1], ErrorKind::kMalformedHeader);
    if (v <= 0 || v > (1 << 20)) fail(ErrorKind::kMalformedHeader, "invalid checkpoint dimension");
    dims[k] = static_cast<int>(v);
  }
  EncoderShape s{dims[0], dims[1], dims[2], dims[3], dims[4], dims[5]};
  try {
    s.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kMalformedHeader, e.what());
  }
  EncoderParams p(s);
  std::size_t filled = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    for (auto tok : textio::split_ws(lines[i])) {
      if (filled == p.values.size()) {
        fail(ErrorKind::kShapeMismatch, "checkpoint holds more values than its header declares");
      }
      p.values[filled++] = textio::parse_real(tok, ErrorKind::kShapeMismatch);
    }
  }
  if (filled != p.values.size()) {
    fail(ErrorKind::kTruncatedPayload, "checkpoint ends before all parameters were read");
  }
  p.validate();
  return p;
}

FeatureSet encode_dataset(const EncoderParams& params, const Dataset& dataset) {
  FeatureSet f;
  f.channels = params.shape.channels;
  f.height = params.shape.grid_height();
  f.width = params.shape.grid_width();
  for (const auto& s : dataset.samples) {
    f.ids.push_back(s.id);
    f.audio.push_back(encode_audio(params, s.audio));
    f.vision.push_back(encode_vision(params, s.image));
  }
  return f;
}

}  // namespace avloc
