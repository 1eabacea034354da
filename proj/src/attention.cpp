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

#include "avloc/attention.hpp"

#include <algorithm>
#include <cmath>

#include "avloc/error.hpp"
#include "avloc/textio.hpp"

namespace avloc {

namespace {

double norm(const double* x, std::size_t n, std::size_t stride) {
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += x[k * stride] * x[k * stride];
  return std::sqrt(acc);
}

void check_pair(const AudioFeature& audio, const VisionFeature& vision) {
  if (audio.values.size() != static_cast<std::size_t>(vision.values.channels) ||
      vision.values.values.size() != vision.values.size()) {
    fail(ErrorKind::kShapeMismatch, "audio and vision channel counts differ");
  }
}

void check_same(const Map2D& a, const Map2D& b) {
  if (a.height != b.height || a.width != b.width || a.values.size() != b.values.size()) {
    fail(ErrorKind::kShapeMismatch, "maps differ in shape");
  }
}

}  // namespace

ResponseMap response_map(const AudioFeature& audio, const VisionFeature& vision) {
  check_pair(audio, vision);
  const Grid& V = vision.values;
  const std::size_t c = audio.values.size();
  const std::size_t plane = static_cast<std::size_t>(V.height) * V.width;
  ResponseMap alpha(V.height, V.width);
  const double na = norm(audio.values.data(), c, 1);
  for (std::size_t site = 0; site < plane; ++site) {
    const double* col = V.values.data() + site;
    const double nv = norm(col, c, plane);
    if (na == 0.0 || nv == 0.0) {
      alpha.degenerate = true;
      continue;
    }
    double dot = 0.0;
    for (std::size_t k = 0; k < c; ++k) dot += audio.values[k] * col[k * plane];
    alpha.values[site] = std::clamp(dot / (na * nv), -1.0, 1.0);
  }
  return alpha;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

PseudoMask pseudo_mask(const ResponseMap& alpha, double epsilon, double tau) {
  require(tau > 0.0 && std::isfinite(tau), "tau must be positive");
  PseudoMask m(alpha.height, alpha.width);
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    m.values[i] = sigmoid((alpha.values[i] - epsilon) / tau);
  }
  return m;
}

double masked_response(const PseudoMask& mask, const ResponseMap& alpha) {
  check_same(mask, alpha);
  double mass = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    mass += mask.values[i];
    dot += mask.values[i] * alpha.values[i];
  }
  if (!(mass > 0.0)) fail(ErrorKind::kNumeric, "pseudo-mask has zero mass");
  return dot / mass;
}

double mean_response(const ResponseMap& alpha) {
  if (alpha.size() == 0) return 0.0;
  double acc = 0.0;
  for (double a : alpha.values) acc += a;
  return acc / static_cast<double>(alpha.size());
}

ResponseMapGrad response_map_grad(const AudioFeature& audio, const VisionFeature& vision,
                                  const Map2D& upstream) {
  check_pair(audio, vision);
  const Grid& V = vision.values;
  if (upstream.height != V.height || upstream.width != V.width) {
    fail(ErrorKind::kShapeMismatch, "upstream gradient does not match response map shape");
  }
  const std::size_t c = audio.values.size();
  const std::size_t plane = static_cast<std::size_t>(V.height) * V.width;
  ResponseMapGrad g{std::vector<double>(c, 0.0), Grid(V.channels, V.height, V.width)};
  const double na = norm(audio.values.data(), c, 1);
  if (na == 0.0) return g;
  for (std::size_t site = 0; site < plane; ++site) {
    const double up = upstream.values[site];
    if (up == 0.0) continue;
    const double* col = V.values.data() + site;
    const double nv = norm(col, c, plane);
    if (nv == 0.0) continue;
    double dot = 0.0;
    for (std::size_t k = 0; k < c; ++k) dot += audio.values[k] * col[k * plane];
    const double inv = 1.0 / (na * nv);
    const double cosv = dot * inv;
    // d cos / dA = V/(|A||V|) - cos A/|A|^2 ; d cos / dV = A/(|A||V|) - cos V/|V|^2
    const double a_scale = cosv / (na * na);
    const double v_scale = cosv / (nv * nv);
    double* gv = g.vision.values.data() + site;
    for (std::size_t k = 0; k < c; ++k) {
      g.audio[k] += up * (col[k * plane] * inv - a_scale * audio.values[k]);
      gv[k * plane] += up * (audio.values[k] * inv - v_scale * col[k * plane]);
    }
  }
  return g;
}

MaskedResponse masked_response_with_grad(const ResponseMap& alpha, double epsilon, double tau,
                                         bool stop_grad_mask) {
  const PseudoMask m = pseudo_mask(alpha, epsilon, tau);
  MaskedResponse out;
  out.value = masked_response(m, alpha);
  out.grad = Map2D(alpha.height, alpha.width);
  double mass = 0.0;
  for (double v : m.values) mass += v;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double mi = m.values[i];
    double g = mi / mass;
    if (!stop_grad_mask) {
      const double dm = mi * (1.0 - mi) / tau;
      g += (alpha.values[i] - out.value) / mass * dm;
    }
    out.grad.values[i] = g;
  }
  return out;
}

void write_pgm(const ResponseMap& alpha, const std::filesystem::path& path) {
  auto out = textio::open_out(path);
  out << "P2\n" << alpha.width << ' ' << alpha.height << "\n255\n";
  for (int y = 0; y < alpha.height; ++y) {
    for (int x = 0; x < alpha.width; ++x) {
      const double a = std::clamp(alpha.at(y, x), -1.0, 1.0);
      const int level = static_cast<int>(std::lround((a + 1.0) * 0.5 * 255.0));
      out << (x ? " " : "") << level;
    }
    out << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace avloc
