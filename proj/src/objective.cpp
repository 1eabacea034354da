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

#include "avloc/objective.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "avloc/error.hpp"

namespace avloc {

namespace {

double pair_response(const AudioFeature& a, const VisionFeature& v, double eps, double tau) {
  const ResponseMap alpha = response_map(a, v);
  return masked_response(pseudo_mask(alpha, eps, tau), alpha);
}

void check_bundle(const ResponseBundle& b) {
  const double xs[] = {b.p_b, b.p_a, b.p_v, b.p_c, b.p_i, b.n_i};
  for (double x : xs) {
    if (!std::isfinite(x)) fail(ErrorKind::kNumeric, "non-finite response in loss input");
  }
  if (b.n_i < 0.0) fail(ErrorKind::kNumeric, "negative aggregate must be nonnegative");
}

double bundle_loss(double positive, double negative) {
  const double ratio = positive / (positive + negative);
  return -std::log(std::max(ratio, kLogFloor));
}

struct Encoded {
  AudioFeature audio;
  VisionFeature vision;
  std::vector<double> audio_grad;
  Grid vision_grad;
  bool touched = false;
};

}  // namespace

PositiveResponses positive_responses(const AudioFeature& a_i, const VisionFeature& v_i,
                                     const AudioFeature& a_j, const VisionFeature& v_k,
                                     double epsilon, double tau) {
  return PositiveResponses{pair_response(a_i, v_i, epsilon, tau),
                           pair_response(a_j, v_i, epsilon, tau),
                           pair_response(a_i, v_k, epsilon, tau),
                           pair_response(a_j, v_k, epsilon, tau)};
}

double negative_response(const AudioFeature& a_i, std::span<const VisionFeature> negatives) {
  double total = 0.0;
  for (const auto& v : negatives) total += std::exp(mean_response(response_map(a_i, v)));
  return total;
}

ResponseBundle make_bundle(const PositiveResponses& pos, double n_i, bool hard_terms) {
  ResponseBundle b;
  b.hard_terms = hard_terms;
  b.p_b = pos.p_b;
  if (hard_terms) {
    b.p_a = pos.p_a;
    b.p_v = pos.p_v;
    b.p_c = pos.p_c;
    b.p_i = std::exp(pos.p_b) + std::exp(pos.p_a) + std::exp(pos.p_v) + std::exp(pos.p_c);
  } else {
    b.p_i = std::exp(pos.p_b);
  }
  b.n_i = n_i;
  return b;
}

double loss_hp(std::span<const ResponseBundle> batch) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& b : batch) {
    check_bundle(b);
    total += bundle_loss(b.p_i, b.n_i);
  }
  return total / static_cast<double>(batch.size());
}

double loss_vanilla(std::span<const ResponseBundle> batch) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& b : batch) {
    check_bundle(b);
    total += bundle_loss(std::exp(b.p_b), b.n_i);
  }
  return total / static_cast<double>(batch.size());
}

namespace {

LossAndGrad run_objective(const EncoderParams& params, const Dataset& dataset,
                          std::span<const AnchorPlan> plan, const ObjectiveConfig& config,
                          bool want_grad) {
  require(config.tau > 0.0, "tau must be positive");
  const bool hard = config.kind == LossKind::kHardPositive;
  const int n = static_cast<int>(dataset.size());
  auto check_id = [&](int id) {
    require(id >= 0 && id < n, "plan refers to a sample outside the dataset");
  };

  std::map<int, Encoded> cache;
  auto get = [&](int id) -> Encoded& {
    auto it = cache.find(id);
    if (it != cache.end()) return it->second;
    Encoded e;
    e.audio = encode_audio(params, dataset[id].audio);
    e.vision = encode_vision(params, dataset[id].image);
    if (want_grad) {
      e.audio_grad.assign(e.audio.values.size(), 0.0);
      e.vision_grad = Grid(e.vision.values.channels, e.vision.values.height,
                           e.vision.values.width);
    }
    return cache.emplace(id, std::move(e)).first->second;
  };
  // Encode in ascending id order so the cache layout is plan-order independent.
  {
    std::vector<int> ids;
    for (const auto& a : plan) {
      check_id(a.anchor);
      ids.push_back(a.anchor);
      if (hard) {
        check_id(a.audio_pos);
        check_id(a.vision_pos);
        ids.push_back(a.audio_pos);
        ids.push_back(a.vision_pos);
      }
      for (int l : a.negatives) {
        check_id(l);
        ids.push_back(l);
      }
    }
    std::sort(ids.begin(), ids.end());
    for (int id : ids) get(id);
  }

  LossAndGrad out;
  const double scale = plan.empty() ? 0.0 : 1.0 / static_cast<double>(plan.size());

  auto backprop_pair = [&](Encoded& audio_side, Encoded& vision_side, const Map2D& upstream) {
    const auto g = response_map_grad(audio_side.audio, vision_side.vision, upstream);
    for (std::size_t k = 0; k < g.audio.size(); ++k) audio_side.audio_grad[k] += g.audio[k];
    for (std::size_t t = 0; t < g.vision.values.size(); ++t) {
      vision_side.vision_grad.values[t] += g.vision.values[t];
    }
    audio_side.touched = vision_side.touched = true;
  };

  double total = 0.0;
  for (const auto& a : plan) {
    Encoded& ei = cache.at(a.anchor);

    struct Term {
      Encoded* audio_side;
      Encoded* vision_side;
      ResponseMap alpha;
      MaskedResponse masked;
    };
    std::vector<Term> terms;
    auto add_term = [&](Encoded& au, Encoded& vi, int audio_id, int vision_id) {
      ResponseMap alpha = response_map(au.audio, vi.vision);
      MaskedResponse mr;
      if (config.frozen_mask) {
        const ResponseMap ref =
            response_map(encode_audio(*config.frozen_mask, dataset[audio_id].audio),
                         encode_vision(*config.frozen_mask, dataset[vision_id].image));
        const PseudoMask m = pseudo_mask(ref, config.epsilon, config.tau);
        double mass = 0.0;
        for (double x : m.values) mass += x;
        mr.value = masked_response(m, alpha);
        mr.grad = Map2D(alpha.height, alpha.width);
        for (std::size_t s = 0; s < m.size(); ++s) mr.grad.values[s] = m.values[s] / mass;
      } else {
        mr = masked_response_with_grad(alpha, config.epsilon, config.tau, config.stop_grad_mask);
      }
      terms.push_back(Term{&au, &vi, std::move(alpha), std::move(mr)});
    };
    add_term(ei, ei, a.anchor, a.anchor);
    if (hard) {
      Encoded& ej = cache.at(a.audio_pos);
      Encoded& ek = cache.at(a.vision_pos);
      add_term(ej, ei, a.audio_pos, a.anchor);
      add_term(ei, ek, a.anchor, a.vision_pos);
      add_term(ej, ek, a.audio_pos, a.vision_pos);
    }

    std::vector<ResponseMap> neg_maps;
    std::vector<double> neg_means;
    double n_i = 0.0;
    for (int l : a.negatives) {
      neg_maps.push_back(response_map(ei.audio, cache.at(l).vision));
      neg_means.push_back(mean_response(neg_maps.back()));
      n_i += std::exp(neg_means.back());
    }

    PositiveResponses pos;
    pos.p_b = terms[0].masked.value;
    if (hard) {
      pos.p_a = terms[1].masked.value;
      pos.p_v = terms[2].masked.value;
      pos.p_c = terms[3].masked.value;
    }
    ResponseBundle bundle = make_bundle(pos, n_i, hard);
    bundle.anchor = a.anchor;
    bundle.audio_pos = hard ? a.audio_pos : -1;
    bundle.vision_pos = hard ? a.vision_pos : -1;
    check_bundle(bundle);
    const double denom = bundle.p_i + bundle.n_i;
    const double ratio = bundle.p_i / denom;
    total += -std::log(std::max(ratio, kLogFloor));
    out.bundles.push_back(bundle);

    if (!want_grad || ratio < kLogFloor) continue;
    // d/dP_x [log(P+N) - log P] = exp(P_x) (1/(P+N) - 1/P)
    const double pos_coeff = (1.0 / denom - 1.0 / bundle.p_i) * scale;
    for (auto& t : terms) {
      const double w = std::exp(t.masked.value) * pos_coeff;
      Map2D up(t.alpha.height, t.alpha.width);
      for (std::size_t s = 0; s < up.size(); ++s) up.values[s] = w * t.masked.grad.values[s];
      backprop_pair(*t.audio_side, *t.vision_side, up);
    }
    for (std::size_t q = 0; q < a.negatives.size(); ++q) {
      const ResponseMap& alpha = neg_maps[q];
      const double w = std::exp(neg_means[q]) / denom * scale /
                       static_cast<double>(alpha.size());
      Map2D up(alpha.height, alpha.width, w);
      backprop_pair(ei, cache.at(a.negatives[q]), up);
    }
  }
  out.loss = total * scale;

  if (want_grad) {
    out.grad = EncoderParams(params.shape);
    for (auto& [id, e] : cache) {
      if (!e.touched) continue;
      accumulate_audio_grad(params, dataset[id].audio, e.audio, e.audio_grad, out.grad);
      accumulate_vision_grad(params, dataset[id].image, e.vision, e.vision_grad, out.grad);
    }
    for (double g : out.grad.values) {
      if (!std::isfinite(g)) fail(ErrorKind::kNumeric, "non-finite gradient");
    }
  }
  return out;
}

}  // namespace

LossAndGrad loss_grad(const EncoderParams& params, const Dataset& dataset,
                      std::span<const AnchorPlan> plan, const ObjectiveConfig& config) {
  return run_objective(params, dataset, plan, config, true);
}

double loss_value(const EncoderParams& params, const Dataset& dataset,
                  std::span<const AnchorPlan> plan, const ObjectiveConfig& config) {
  return run_objective(params, dataset, plan, config, false).loss;
}

}  // namespace avloc
