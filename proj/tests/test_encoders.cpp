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
#include <functional>

#include "avloc/encoders.hpp"
#include "avloc/error.hpp"
#include "avloc/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace avloc;

namespace {

EncoderShape tiny_shape() {
  EncoderShape s;
  s.channels = 3;
  s.patch = 2;
  s.image_height = 4;
  s.image_width = 6;
  s.audio_height = 2;
  s.audio_width = 3;
  return s;
}

EncoderParams random_params(const EncoderShape& s, std::uint64_t seed) {
  EncoderParams p(s);
  Rng rng(seed);
  for (double& v : p.values) v = rng.uniform(-1.0, 1.0);
  return p;
}

Grid random_grid(int c, int h, int w, Rng& rng) {
  Grid g(c, h, w);
  for (double& v : g.values) v = rng.uniform(-1.0, 1.0);
  return g;
}

// Per-patch dot products written out site by site.
Grid vision_oracle(const EncoderParams& p, const Grid& image) {
  const auto& s = p.shape;
  Grid out(s.channels, s.grid_height(), s.grid_width());
  for (int k = 0; k < s.channels; ++k) {
    for (int u = 0; u < s.grid_height(); ++u) {
      for (int v = 0; v < s.grid_width(); ++v) {
        double acc = p.vision_bias()[k];
        int col = 0;
        for (int ch = 0; ch < 3; ++ch)
          for (int dy = 0; dy < s.patch; ++dy)
            for (int dx = 0; dx < s.patch; ++dx, ++col)
              acc += p.vision_weight()[k * s.patch_dim() + col] *
                     image.at(ch, u * s.patch + dy, v * s.patch + dx);
        out.at(k, u, v) = std::tanh(acc);
      }
    }
  }
  return out;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// Central differences of f over every entry of `x`.
std::vector<double> numeric_grad(std::vector<double>& x, const std::function<double()>& f) {
  std::vector<double> g(x.size());
  const double h = 1e-5;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("zero parameters map everything to zero") {
  const auto s = tiny_shape();
  const EncoderParams zero(s);
  Rng rng(3);
  const auto v = encode_vision(zero, random_grid(3, 4, 6, rng));
  for (double x : v.values.values) CHECK(x == 0.0);
  const auto a = encode_audio(zero, Grid(1, 2, 3));
  for (double x : a.values) CHECK(x == 0.0);
}

TEST_CASE("vision encoder matches the patch-loop oracle") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = tiny_shape();
    const auto p = random_params(s, seed);
    Rng rng(seed + 100);
    const Grid image = random_grid(3, 4, 6, rng);
    const auto got = encode_vision(p, image);
    const Grid want = vision_oracle(p, image);
    REQUIRE(got.values.same_shape(want));
    for (std::size_t k = 0; k < want.size(); ++k) {
      CHECK(got.values.values[k] == doctest::Approx(want.values[k]).epsilon(1e-14));
    }
  }
}

TEST_CASE("one-hot patch through a selecting projection gives tanh of that pixel") {
  const auto s = tiny_shape();
  EncoderParams p(s);
  // Channel 1 reads image channel 2, patch offset (1, 0).
  const int col = (2 * s.patch + 1) * s.patch + 0;
  p.vision_weight()[1 * s.patch_dim() + col] = 1.0;
  Grid image(3, 4, 6);
  image.at(2, 3, 4) = 0.7;  // site (1, 2)
  const auto v = encode_vision(p, image);
  CHECK(v.values.at(1, 1, 2) == doctest::Approx(std::tanh(0.7)).epsilon(1e-15));
  CHECK(v.values.at(1, 0, 0) == 0.0);
  CHECK(v.values.at(0, 1, 2) == 0.0);
}

TEST_CASE("bias shifts the pre-activation at every site") {
  const auto s = tiny_shape();
  auto p = random_params(s, 9);
  Rng rng(10);
  const Grid image = random_grid(3, 4, 6, rng);
  const auto before = encode_vision(p, image);
  const double delta = 0.25;
  for (double& b : p.vision_bias()) b += delta;
  const auto after = encode_vision(p, image);
  for (std::size_t k = 0; k < before.values.size(); ++k) {
    CHECK(std::atanh(after.values.values[k]) - std::atanh(before.values.values[k]) ==
          doctest::Approx(delta).epsilon(1e-9));
  }
}

TEST_CASE("audio encoder with a single nonzero input") {
  const auto s = tiny_shape();
  const auto p = random_params(s, 4);
  Grid audio(1, 2, 3);
  audio.values[4] = -1.5;
  const auto a = encode_audio(p, audio);
  for (int k = 0; k < s.channels; ++k) {
    const double want = std::tanh(p.audio_weight()[k * s.audio_dim() + 4] * -1.5 + p.audio_bias()[k]);
    CHECK(a.values[k] == doctest::Approx(want).epsilon(1e-15));
  }
}

TEST_CASE("audio outputs stay inside (-1, 1)") {
  const auto s = tiny_shape();
  auto p = random_params(s, 5);
  for (double& v : p.values) v *= 50.0;
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    Grid audio = random_grid(1, 2, 3, rng);
    for (double& v : audio.values) v *= 10.0;
    for (double x : encode_audio(p, audio).values) {
      CHECK(x >= -1.0);
      CHECK(x <= 1.0);
    }
  }
}

TEST_CASE("shape mismatches are rejected") {
  const auto p = random_params(tiny_shape(), 1);
  CHECK_THROWS_AS(encode_vision(p, Grid(3, 4, 4)), Error);
  CHECK_THROWS_AS(encode_audio(p, Grid(1, 3, 3)), Error);
  Rng rng(2);
  const Grid image = random_grid(3, 4, 6, rng);
  CHECK_THROWS_AS(encode_vision_grad(p, image, Grid(3, 2, 2)), Error);
  const std::vector<double> bad(2);
  CHECK_THROWS_AS(encode_audio_grad(p, Grid(1, 2, 3), bad), Error);
}

TEST_CASE("zero upstream gradient gives zero parameter gradient") {
  const auto s = tiny_shape();
  const auto p = random_params(s, 7);
  Rng rng(8);
  const auto g = encode_vision_grad(p, random_grid(3, 4, 6, rng), Grid(3, 2, 3));
  for (double x : g.params.values) CHECK(x == 0.0);
  const std::vector<double> up(3, 0.0);
  const auto ga = encode_audio_grad(p, random_grid(1, 2, 3, rng), up);
  for (double x : ga.params.values) CHECK(x == 0.0);
}

TEST_CASE("at zero pre-activation the input gradient is upstream times weight") {
  const auto s = tiny_shape();
  auto p = random_params(s, 11);
  for (double& b : p.audio_bias()) b = 0.0;
  const Grid audio(1, 2, 3);
  const std::vector<double> up = {0.3, -1.2, 2.0};
  const auto g = encode_audio_grad(p, audio, up);
  for (int f = 0; f < s.audio_dim(); ++f) {
    double want = 0.0;
    for (int k = 0; k < 3; ++k) want += up[k] * p.audio_weight()[k * s.audio_dim() + f];
    CHECK(g.input.values[f] == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("vision and audio gradients match central differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = tiny_shape();
    auto p = random_params(s, seed);
    Rng rng(seed * 7);
    Grid image = random_grid(3, 4, 6, rng);
    Grid audio = random_grid(1, 2, 3, rng);
    const Grid up_v = random_grid(3, 2, 3, rng);
    const Grid up_a = random_grid(1, 1, 3, rng);

    auto vision_obj = [&] {
      const auto v = encode_vision(p, image);
      double acc = 0.0;
      for (std::size_t k = 0; k < up_v.size(); ++k) acc += up_v.values[k] * v.values.values[k];
      return acc;
    };
    auto audio_obj = [&] {
      const auto a = encode_audio(p, audio);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.values.size(); ++k) acc += up_a.values[k] * a.values[k];
      return acc;
    };
    const auto gv = encode_vision_grad(p, image, up_v);
    const auto ga = encode_audio_grad(p, audio, up_a.values);
    const auto nv = numeric_grad(p.values, vision_obj);
    const auto na = numeric_grad(p.values, audio_obj);
    const auto niv = numeric_grad(image.values, vision_obj);
    const auto nia = numeric_grad(audio.values, audio_obj);
    double worst = 0.0;
    for (std::size_t k = 0; k < p.values.size(); ++k) {
      worst = std::max(worst, rel_err(gv.params.values[k], nv[k]));
      worst = std::max(worst, rel_err(ga.params.values[k], na[k]));
    }
    for (std::size_t k = 0; k < image.size(); ++k) worst = std::max(worst, rel_err(gv.input.values[k], niv[k]));
    for (std::size_t k = 0; k < audio.size(); ++k) worst = std::max(worst, rel_err(ga.input.values[k], nia[k]));
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("init draws inside the fan-in bound") {
  const auto s = tiny_shape();
  const auto p = init_params(s, 42);
  CHECK(p == init_params(s, 42));
  CHECK_FALSE(p == init_params(s, 43));
  const double bv = 1.0 / std::sqrt(static_cast<double>(s.patch_dim()));
  const double ba = 1.0 / std::sqrt(static_cast<double>(s.audio_dim()));
  for (double w : p.vision_weight()) CHECK(std::abs(w) <= bv);
  for (double w : p.vision_bias()) CHECK(std::abs(w) <= bv);
  for (double w : p.audio_weight()) CHECK(std::abs(w) <= ba);
  for (double w : p.audio_bias()) CHECK(std::abs(w) <= ba);
}

TEST_CASE("checkpoints round-trip and reject damaged files") {
  avloc_test::TempDir dir("params");
  const auto p = random_params(tiny_shape(), 12);
  save_params(p, dir / "p.avp");
  CHECK(load_params(dir / "p.avp") == p);

  const std::string text = avloc_test::slurp(dir / "p.avp");
  const auto nl = text.find('\n');
  avloc_test::spit(dir / "hdr.avp", "AVP1 3 2 4 6 2" + text.substr(nl));
  CHECK_THROWS_AS(load_params(dir / "hdr.avp"), Error);
  const auto last = text.rfind(' ');
  avloc_test::spit(dir / "short.avp", text.substr(0, last) + "\n");
  try {
    load_params(dir / "short.avp");
    FAIL("expected truncation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTruncatedPayload);
  }
  avloc_test::spit(dir / "long.avp", text + "0.5\n");
  try {
    load_params(dir / "long.avp");
    FAIL("expected mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShapeMismatch);
  }
}

TEST_CASE("non-finite parameters fail validation") {
  auto p = random_params(tiny_shape(), 13);
  p.values[3] = std::nan("");
  CHECK_THROWS_AS(p.validate(), Error);
}
