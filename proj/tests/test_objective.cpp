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


#include <cmath>
#include <numbers>

#include "avloc/encoders.hpp"
#include "avloc/error.hpp"
#include "avloc/objective.hpp"
#include "avloc/rng.hpp"
#include "avloc/trainer.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace avloc;

namespace {

double pair_masked(const AudioFeature& a, const VisionFeature& v, double eps, double tau) {
  const auto& g = v.values;
  const auto alpha = avloc_oracle::cosine_map(a.values, g.values, g.channels, g.height, g.width);
  return avloc_oracle::weighted_mean(avloc_oracle::mask(alpha, eps, tau), alpha);
}

double pair_mean(const AudioFeature& a, const VisionFeature& v) {
  const auto& g = v.values;
  return avloc_oracle::plain_mean(
      avloc_oracle::cosine_map(a.values, g.values, g.channels, g.height, g.width));
}

// Loss straight from the definition, one anchor at a time.
double oracle_loss(const EncoderParams& params, const Dataset& ds,
                   const std::vector<AnchorPlan>& plan, bool hard, double eps, double tau) {
  auto A = [&](int i) { return encode_audio(params, ds[i].audio); };
  auto V = [&](int i) { return encode_vision(params, ds[i].image); };
  double total = 0.0;
  for (const auto& p : plan) {
    const int i = p.anchor;
    double P = std::exp(pair_masked(A(i), V(i), eps, tau));
    if (hard) {
      const int j = p.audio_pos, k = p.vision_pos;
      P += std::exp(pair_masked(A(j), V(i), eps, tau)) +
           std::exp(pair_masked(A(i), V(k), eps, tau)) +
           std::exp(pair_masked(A(j), V(k), eps, tau));
    }
    double N = 0.0;
    for (int l : p.negatives) N += std::exp(pair_mean(A(i), V(l)));
    total += -std::log(P / (P + N));
  }
  return total / static_cast<double>(plan.size());
}

}  // namespace

TEST_CASE("loss anchors") {
  const PositiveResponses zero{};
  const ResponseBundle none = make_bundle(zero, 0.0, true);
  CHECK(loss_hp(std::vector<ResponseBundle>{none}) == 0.0);
  CHECK(loss_vanilla(std::vector<ResponseBundle>{make_bundle(zero, 0.0, false)}) == 0.0);

  const ResponseBundle one = make_bundle(zero, std::exp(0.0), true);
  CHECK(one.p_i == 4.0);
  CHECK(std::abs(loss_hp(std::vector<ResponseBundle>{one}) + std::log(4.0 / 5.0)) <= 1e-12);

  const ResponseBundle van = make_bundle(zero, 1.0, false);
  CHECK(std::abs(loss_vanilla(std::vector<ResponseBundle>{van}) - std::numbers::ln2) <= 1e-12);
  CHECK(std::abs(loss_hp(std::vector<ResponseBundle>{van}) - std::numbers::ln2) <= 1e-12);
  CHECK(loss_hp(std::vector<ResponseBundle>{}) == 0.0);
}

TEST_CASE("positive aggregate is the sum of four exponentials") {
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    PositiveResponses p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                        rng.uniform(-1, 1)};
    const auto b = make_bundle(p, 0.5, true);
    const double want = std::exp(p.p_b) + std::exp(p.p_a) + std::exp(p.p_v) + std::exp(p.p_c);
    CHECK(std::abs(b.p_i - want) <= 1e-14 * want);
    const auto v = make_bundle(p, 0.5, false);
    CHECK(v.p_i == std::exp(p.p_b));
    // With the hard terms zeroed out of the positive sum the two losses agree.
    const auto bv = make_bundle(p, 0.5, true);
    CHECK(loss_vanilla(std::vector<ResponseBundle>{bv}) ==
          doctest::Approx(-std::log(std::exp(p.p_b) / (std::exp(p.p_b) + 0.5))).epsilon(1e-14));
  }
}

TEST_CASE("negative aggregate is zero exactly when the set is empty") {
  Rng rng(12);
  AudioFeature a{{0.3, -0.2, 0.9}};
  CHECK(negative_response(a, {}) == 0.0);
  std::vector<VisionFeature> vs(3);
  for (auto& v : vs) {
    v.values = Grid(3, 2, 2);
    for (double& x : v.values.values) x = rng.uniform(-1, 1);
  }
  double want = 0.0;
  for (const auto& v : vs) want += std::exp(pair_mean(a, v));
  CHECK(negative_response(a, vs) == doctest::Approx(want).epsilon(1e-13));
  CHECK(negative_response(a, vs) > 0.0);
}

TEST_CASE("loss inputs are validated") {
  auto b = make_bundle(PositiveResponses{}, 1.0, true);
  b.n_i = -1.0;
  CHECK_THROWS_AS(loss_hp(std::vector<ResponseBundle>{b}), Error);
  b.n_i = std::nan("");
  CHECK_THROWS_AS(loss_vanilla(std::vector<ResponseBundle>{b}), Error);
  // Tiny ratios hit the floor instead of producing infinity.
  auto tiny = make_bundle(PositiveResponses{}, 1e300, false);
  CHECK(loss_vanilla(std::vector<ResponseBundle>{tiny}) ==
        doctest::Approx(-std::log(kLogFloor)));
}

TEST_CASE("objective value matches the definition") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto inst = make_grad_check_instance(seed);
    for (bool hard : {true, false}) {
      ObjectiveConfig c;
      c.kind = hard ? LossKind::kHardPositive : LossKind::kVanilla;
      const double got = loss_value(inst.params, inst.dataset, inst.plan, c);
      const double want =
          oracle_loss(inst.params, inst.dataset, inst.plan, hard, c.epsilon, c.tau);
      CHECK(std::abs(got - want) <= 1e-12);
      CHECK(loss_grad(inst.params, inst.dataset, inst.plan, c).loss == got);
    }
  }
}

TEST_CASE("vanilla objective equals the hard objective with self positives") {
  const auto inst = make_grad_check_instance(3);
  std::vector<AnchorPlan> plan = inst.plan;
  ObjectiveConfig vanilla;
  vanilla.kind = LossKind::kVanilla;
  const double lv = loss_value(inst.params, inst.dataset, plan, vanilla);
  for (auto& p : plan) p.audio_pos = p.vision_pos = p.anchor;
  // P then holds four copies of exp(P_b); rescaling N by 4 gives back vanilla.
  const auto lg = loss_grad(inst.params, inst.dataset, plan, ObjectiveConfig{});
  double want = 0.0;
  for (const auto& b : lg.bundles) {
    CHECK(b.p_i == doctest::Approx(4.0 * std::exp(b.p_b)).epsilon(1e-14));
    want += -std::log(std::exp(b.p_b) / (std::exp(b.p_b) + b.n_i));
  }
  CHECK(std::abs(want / plan.size() - lv) <= 1e-12);
}

TEST_CASE("gradients match central differences") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = make_grad_check_instance(seed);
    for (bool stop : {false, true}) {
      ObjectiveConfig c;
      c.stop_grad_mask = stop;
      const auto r = grad_check(inst.params, inst.dataset, inst.plan, c);
      CHECK(r.finite);
      CHECK(r.max_rel_error < 1e-4);
    }
    ObjectiveConfig v;
    v.kind = LossKind::kVanilla;
    CHECK(grad_check(inst.params, inst.dataset, inst.plan, v).max_rel_error < 1e-4);
  }
}

TEST_CASE("empty plan gives zero loss and zero gradient") {
  const auto inst = make_grad_check_instance(4);
  const auto lg = loss_grad(inst.params, inst.dataset, std::vector<AnchorPlan>{}, {});
  CHECK(lg.loss == 0.0);
  for (double g : lg.grad.values) CHECK(g == 0.0);
}

TEST_CASE("anchors without negatives contribute no gradient") {
  const auto inst = make_grad_check_instance(5);
  std::vector<AnchorPlan> plan = inst.plan;
  for (auto& p : plan) p.negatives.clear();
  const auto lg = loss_grad(inst.params, inst.dataset, plan, {});
  CHECK(lg.loss == 0.0);
  for (double g : lg.grad.values) CHECK(std::abs(g) <= 1e-15);
}

TEST_CASE("plan ids are range checked") {
  const auto inst = make_grad_check_instance(6);
  std::vector<AnchorPlan> plan = {AnchorPlan{0, 1, 9, {2}}};
  CHECK_THROWS_AS(loss_value(inst.params, inst.dataset, plan, {}), Error);
  ObjectiveConfig bad;
  bad.tau = 0.0;
  CHECK_THROWS_AS(loss_value(inst.params, inst.dataset, inst.plan, bad), Error);
}

TEST_CASE("a mask frozen at the evaluation point leaves the loss unchanged") {
  const auto inst = make_grad_check_instance(7);
  ObjectiveConfig frozen;
  frozen.frozen_mask = &inst.params;
  CHECK(std::abs(loss_value(inst.params, inst.dataset, inst.plan, frozen) -
                 loss_value(inst.params, inst.dataset, inst.plan, {})) <= 1e-14);
  ObjectiveConfig stop;
  stop.stop_grad_mask = true;
  const auto gs = loss_grad(inst.params, inst.dataset, inst.plan, stop).grad;
  const auto gf = loss_grad(inst.params, inst.dataset, inst.plan, frozen).grad;
  const auto gd = loss_grad(inst.params, inst.dataset, inst.plan, {}).grad;
  double diff_frozen = 0.0, diff_full = 0.0;
  for (std::size_t t = 0; t < gs.values.size(); ++t) {
    diff_frozen = std::max(diff_frozen, std::abs(gs.values[t] - gf.values[t]));
    diff_full = std::max(diff_full, std::abs(gs.values[t] - gd.values[t]));
  }
  CHECK(diff_frozen <= 1e-14);
  CHECK(diff_full > 1e-6);
}
