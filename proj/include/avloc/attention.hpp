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

#include <filesystem>
#include <vector>

#include "avloc/grid.hpp"
#include "avloc/synthdata.hpp"

namespace avloc {

inline constexpr double kDefaultEpsilon = 0.65;
inline constexpr double kDefaultTau = 0.03;

/// Per-site cosine between an audio embedding and the vision feature column
/// at that site. `degenerate` is set when some site (or the audio vector) has
/// zero norm; those sites read 0.
struct ResponseMap : Map2D {
  bool degenerate = false;
  using Map2D::Map2D;
};

/// Soft selection sigma((alpha - eps) / tau), same shape as its map.
struct PseudoMask : Map2D {
  using Map2D::Map2D;
};

ResponseMap response_map(const AudioFeature& audio, const VisionFeature& vision);

double sigmoid(double x);

PseudoMask pseudo_mask(const ResponseMap& alpha, double epsilon, double tau);

/// <m, alpha> / sum(m): the mask-weighted mean response.
double masked_response(const PseudoMask& mask, const ResponseMap& alpha);

double mean_response(const ResponseMap& alpha);

struct ResponseMapGrad {
  std::vector<double> audio;  // length c
  Grid vision;                // c x h x w
};

/// Gradients of sum_uv upstream[u,v] * alpha[u,v] w.r.t. the audio vector and
/// the vision grid. Zero-norm sites contribute nothing.
ResponseMapGrad response_map_grad(const AudioFeature& audio, const VisionFeature& vision,
                                  const Map2D& upstream);

struct MaskedResponse {
  double value = 0.0;
  Map2D grad;  // d value / d alpha
};

/// masked_response(pseudo_mask(alpha), alpha) together with its derivative
/// with respect to alpha. With `stop_grad_mask` the mask is held constant.
MaskedResponse masked_response_with_grad(const ResponseMap& alpha, double epsilon, double tau,
                                         bool stop_grad_mask);

/// Plain PGM (P2), values mapped linearly from [-1, 1] to [0, 255].
void write_pgm(const ResponseMap& alpha, const std::filesystem::path& path);

}  // namespace avloc
