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

#include <span>
#include <vector>

#include "avloc/attention.hpp"
#include "avloc/encoders.hpp"
#include "avloc/synthdata.hpp"

namespace avloc {

/// Positive and negative responses for one anchor. With `hard_terms` off only
/// the base pair enters p_i (vanilla objective); p_a, p_v, p_c then stay 0.
struct ResponseBundle {
  int anchor = 0;
  int audio_pos = -1;   // j, drawn from the audio positive set
  int vision_pos = -1;  // k, drawn from the vision positive set
  bool hard_terms = true;
  double p_b = 0.0;
  double p_a = 0.0;
  double p_v = 0.0;
  double p_c = 0.0;
  double p_i = 0.0;
  double n_i = 0.0;
};

struct PositiveResponses {
  double p_b = 0.0;  // audio i, image i
  double p_a = 0.0;  // audio j, image i
  double p_v = 0.0;  // audio i, image k
  double p_c = 0.0;  // audio j, image k
};

/// Mask-weighted responses of the four pairings of (A_i, A_j) x (V_i, V_k).
PositiveResponses positive_responses(const AudioFeature& a_i, const VisionFeature& v_i,
                                     const AudioFeature& a_j, const VisionFeature& v_k,
                                     double epsilon, double tau);

/// sum_l exp(mean_response(alpha(A_i, V_l))); 0 for an empty set.
double negative_response(const AudioFeature& a_i, std::span<const VisionFeature> negatives);

ResponseBundle make_bundle(const PositiveResponses& pos, double n_i, bool hard_terms);

/// Smallest argument handed to the log; inert for valid inputs.
inline constexpr double kLogFloor = 1e-30;

/// Mean over bundles of -log(p_i / (p_i + n_i)).
double loss_hp(std::span<const ResponseBundle> batch);
/// Same with p_i replaced by exp(p_b).
double loss_vanilla(std::span<const ResponseBundle> batch);

enum class LossKind { kVanilla, kHardPositive };

struct ObjectiveConfig {
  double epsilon = kDefaultEpsilon;
  double tau = kDefaultTau;
  bool stop_grad_mask = false;
  LossKind kind = LossKind::kHardPositive;
  // When set, positive-pair masks are computed from these parameters and held
  // fixed. Finite differences of such a loss are the reference for the
  // stop-grad gradient.
  const EncoderParams* frozen_mask = nullptr;
};

/// Which samples an anchor is scored against in one step. Indices are
/// 0-based into the dataset; audio_pos/vision_pos are ignored for the
/// vanilla loss.
struct AnchorPlan {
  int anchor = 0;
  int audio_pos = -1;
  int vision_pos = -1;
  std::vector<int> negatives;
};

struct LossAndGrad {
  double loss = 0.0;
  EncoderParams grad;
  std::vector<ResponseBundle> bundles;
};

/// Loss over the planned anchors and its exact gradient w.r.t. every encoder
/// parameter. Contributions are reduced in ascending sample order.
LossAndGrad loss_grad(const EncoderParams& params, const Dataset& dataset,
                      std::span<const AnchorPlan> plan, const ObjectiveConfig& config);

/// Forward pass only.
double loss_value(const EncoderParams& params, const Dataset& dataset,
                  std::span<const AnchorPlan> plan, const ObjectiveConfig& config);

}  // namespace avloc
