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

#include "avloc/attention.hpp"
#include "avloc/error.hpp"
#include "avloc/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace avloc;

namespace {

AudioFeature audio_of(std::vector<double> v) { return AudioFeature{std::move(v)}; }

VisionFeature vision_of(int c, int h, int w, std::vector<double> v) {
  VisionFeature f;
  f.values = Grid(c, h, w);
  f.values.values = std::move(v);
  return f;
}

struct Instance {
  AudioFeature a;
  VisionFeature v;
};

Instance random_instance(Rng& rng, int c, int h, int w) {
  Instance in;
  in.a.values.resize(c);
  for (double& x : in.a.values) x = rng.uniform(-1.0, 1.0);
  in.v.values = Grid(c, h, w);
  for (double& x : in.v.values.values) x = rng.uniform(-1.0, 1.0);
  return in;
}

std::vector<std::vector<double>> rows(const Map2D& m) {
  std::vector<std::vector<double>> out(m.height, std::vector<double>(m.width));
  for (int u = 0; u < m.height; ++u)
    for (int v = 0; v < m.width; ++v) out[u][v] = m.at(u, v);
  return out;
}

ResponseMap map_of(int h, int w, std::vector<double> values) {
  ResponseMap m(h, w);
  m.values = std::move(values);
  return m;
}

}  // namespace

TEST_CASE("parallel and orthogonal sites") {
  const auto alpha = response_map(audio_of({1, 0}), vision_of(2, 1, 2, {1, 0, 0, 1}));
  CHECK(alpha.at(0, 0) == 1.0);
  CHECK(alpha.at(0, 1) == 0.0);
  CHECK_FALSE(alpha.degenerate);
  const auto scaled = response_map(audio_of({3, 4}), vision_of(2, 1, 1, {6, 8}));
  CHECK(scaled.at(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("response maps match the per-site loop") {
  Rng rng(1);
  for (int t = 0; t < 25; ++t) {
    const auto in = random_instance(rng, 4, 3, 3);
    const auto got = response_map(in.a, in.v);
    const auto want = avloc_oracle::cosine_map(in.a.values, in.v.values.values, 4, 3, 3);
    for (int u = 0; u < 3; ++u)
      for (int v = 0; v < 3; ++v) CHECK(std::abs(got.at(u, v) - want[u][v]) <= 1e-12);
  }
}

TEST_CASE("zero-norm sites read zero and flag the map") {
  const auto alpha = response_map(audio_of({1, 1}), vision_of(2, 1, 2, {0, 1, 0, 1}));
  CHECK(alpha.degenerate);
  CHECK(alpha.at(0, 0) == 0.0);
  CHECK(alpha.at(0, 1) == doctest::Approx(1.0));
  const auto silent = response_map(audio_of({0, 0}), vision_of(2, 1, 1, {1, 1}));
  CHECK(silent.degenerate);
  CHECK(silent.at(0, 0) == 0.0);
}

TEST_CASE("response maps are scale invariant") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    auto in = random_instance(rng, 5, 2, 4);
    const auto base = response_map(in.a, in.v);
    for (double& x : in.a.values) x *= 3.7;
    const double s = rng.uniform(0.1, 10.0);
    for (int k = 0; k < 5; ++k) in.v.values.at(k, 1, 2) *= s;
    const auto scaled = response_map(in.a, in.v);
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(std::abs(base.values[i] - scaled.values[i]) <= 1e-9);
      CHECK(std::abs(base.values[i]) <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("mask anchors") {
  const double eps = kDefaultEpsilon, tau = kDefaultTau;
  CHECK(eps == 0.65);
  CHECK(tau == 0.03);
  CHECK(pseudo_mask(map_of(1, 1, {eps}), eps, tau).at(0, 0) == 0.5);
  // Reference values from 40-digit evaluation of 1 / (1 + exp(-x)).
  CHECK(std::abs(pseudo_mask(map_of(1, 1, {1.0}), eps, tau).at(0, 0) -
                 0.99999142513442627782) <= 1e-9);
  CHECK(std::abs(pseudo_mask(map_of(1, 1, {0.0}), eps, tau).at(0, 0) -
                 3.8930163282735117375e-10) <= 1e-9);
  CHECK_THROWS_AS(pseudo_mask(map_of(1, 1, {0.0}), eps, 0.0), Error);
  CHECK_THROWS_AS(pseudo_mask(map_of(1, 1, {0.0}), eps, -1.0), Error);
}

TEST_CASE("mask is strictly increasing and inside (0, 1)") {
  std::vector<double> grid;
  for (int k = -20; k <= 20; ++k) grid.push_back(k / 20.0);
  const auto m = pseudo_mask(map_of(1, static_cast<int>(grid.size()), grid), 0.3, 0.2);
  for (std::size_t k = 0; k < m.size(); ++k) {
    CHECK(m.values[k] > 0.0);
    CHECK(m.values[k] < 1.0);
    if (k > 0) CHECK(m.values[k] > m.values[k - 1]);
  }
}

TEST_CASE("masked and mean responses") {
  PseudoMask half(1, 2, 0.5);
  CHECK(masked_response(half, map_of(1, 2, {0.2, 0.6})) == doctest::Approx(0.4).epsilon(1e-15));
  Rng rng(3);
  PseudoMask m(2, 3);
  for (double& x : m.values) x = rng.uniform(0.01, 1.0);
  CHECK(masked_response(m, map_of(2, 3, std::vector<double>(6, -0.3))) ==
        doctest::Approx(-0.3).epsilon(1e-15));
  CHECK(mean_response(map_of(2, 2, {0.5, 0.5, 0.5, 0.5})) == 0.5);
  CHECK(mean_response(map_of(1, 2, {1, -1})) == 0.0);
  CHECK_THROWS_AS(masked_response(PseudoMask(1, 2, 0.0), map_of(1, 2, {0.1, 0.2})), Error);
}

TEST_CASE("masked and mean responses match loop oracles") {
  Rng rng(4);
  for (int t = 0; t < 25; ++t) {
    const auto in = random_instance(rng, 3, 3, 3);
    const auto alpha = response_map(in.a, in.v);
    const double eps = rng.uniform(-0.5, 0.9), tau = rng.uniform(0.02, 0.5);
    const auto m = pseudo_mask(alpha, eps, tau);
    const auto om = avloc_oracle::mask(rows(alpha), eps, tau);
    for (int u = 0; u < 3; ++u)
      for (int v = 0; v < 3; ++v) CHECK(std::abs(m.at(u, v) - om[u][v]) <= 1e-12);
    const double r = masked_response(m, alpha);
    CHECK(std::abs(r - avloc_oracle::weighted_mean(om, rows(alpha))) <= 1e-12);
    CHECK(std::abs(mean_response(alpha) - avloc_oracle::plain_mean(rows(alpha))) <= 1e-12);
    const auto [lo, hi] = std::minmax_element(alpha.values.begin(), alpha.values.end());
    CHECK(r >= *lo - 1e-12);
    CHECK(r <= *hi + 1e-12);
  }
}

TEST_CASE("response map gradients match central differences") {
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    auto in = random_instance(rng, 4, 2, 3);
    Map2D up(2, 3);
    for (double& x : up.values) x = rng.uniform(-1.0, 1.0);
    auto objective = [&] {
      const auto alpha = response_map(in.a, in.v);
      double s = 0.0;
      for (std::size_t k = 0; k < alpha.size(); ++k) s += up.values[k] * alpha.values[k];
      return s;
    };
    const auto g = response_map_grad(in.a, in.v, up);
    const double h = 1e-6;
    auto check_entry = [&](double& x, double analytic) {
      const double keep = x;
      x = keep + h;
      const double f1 = objective();
      x = keep - h;
      const double f0 = objective();
      x = keep;
      const double numeric = (f1 - f0) / (2 * h);
      CHECK(std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6}) <
            1e-4);
    };
    for (int k = 0; k < 4; ++k) check_entry(in.a.values[k], g.audio[k]);
    for (std::size_t k = 0; k < in.v.values.size(); ++k) {
      check_entry(in.v.values.values[k], g.vision.values[k]);
    }
  }
}

TEST_CASE("cosine is stationary under scaling along the site vector") {
  const auto a = audio_of({0.6, -0.8, 0.0});
  const auto v = vision_of(3, 1, 1, {1.2, -1.6, 0.0});
  const auto g = response_map_grad(a, v, Map2D(1, 1, 1.0));
  double along_a = 0.0, along_v = 0.0;
  for (int k = 0; k < 3; ++k) {
    along_a += g.audio[k] * a.values[k];
    along_v += g.vision.values[k] * v.values.values[k];
  }
  CHECK(std::abs(along_a) <= 1e-15);
  CHECK(std::abs(along_v) <= 1e-15);
  const auto zero = response_map_grad(a, v, Map2D(1, 1, 0.0));
  for (double x : zero.audio) CHECK(x == 0.0);
  for (double x : zero.vision.values) CHECK(x == 0.0);
}

TEST_CASE("masked response derivative with and without the mask gradient") {
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    ResponseMap alpha(3, 3);
    for (double& x : alpha.values) x = rng.uniform(0.4, 0.9);
    const double eps = 0.65, tau = 0.1;
    for (bool stop : {false, true}) {
      const auto r = masked_response_with_grad(alpha, eps, tau, stop);
      CHECK(r.value == doctest::Approx(masked_response(pseudo_mask(alpha, eps, tau), alpha)));
      const auto fixed = pseudo_mask(alpha, eps, tau);
      for (std::size_t k = 0; k < alpha.size(); ++k) {
        auto f = [&](double delta) {
          ResponseMap b = alpha;
          b.values[k] += delta;
          return stop ? masked_response(fixed, b) : masked_response(pseudo_mask(b, eps, tau), b);
        };
        const double numeric = (f(1e-6) - f(-1e-6)) / 2e-6;
        CHECK(r.grad.values[k] == doctest::Approx(numeric).epsilon(1e-6));
      }
    }
    const auto a = masked_response_with_grad(alpha, eps, tau, false);
    const auto b = masked_response_with_grad(alpha, eps, tau, true);
    CHECK_FALSE(a.grad == b.grad);
  }
}

TEST_CASE("PGM export maps [-1, 1] onto [0, 255]") {
  avloc_test::TempDir dir("pgm");
  write_pgm(map_of(1, 3, {-1.0, 0.0, 1.0}), dir / "m.pgm");
  CHECK(avloc_test::slurp(dir / "m.pgm") == "P2\n3 1\n255\n0 128 255\n");
}
