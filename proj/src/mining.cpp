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

#include "avloc/mining.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "avloc/error.hpp"
#include "avloc/rng.hpp"
#include "avloc/textio.hpp"

namespace avloc {

namespace {

Embedding normalized(const Embedding& x) {
  double n2 = 0.0;
  for (double v : x) n2 += v * v;
  if (n2 == 0.0) return {};
  const double inv = 1.0 / std::sqrt(n2);
  Embedding out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] * inv;
  return out;
}

std::vector<double> scores_normalized(const std::vector<Embedding>& unit, std::size_t i) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> scores(unit.size(), kNegInf);
  if (unit[i].empty()) return scores;
  for (std::size_t j = 0; j < unit.size(); ++j) {
    if (unit[j].empty()) continue;
    double dot = 0.0;
    for (std::size_t k = 0; k < unit[i].size(); ++k) dot += unit[i][k] * unit[j][k];
    scores[j] = dot;
  }
  return scores;
}

void fill_negatives(MiningIndex& index) {
  index.neg.assign(index.n, {});
  std::vector<char> taken(index.n);
  for (int i = 0; i < index.n; ++i) {
    std::fill(taken.begin(), taken.end(), 0);
    taken[i] = 1;
    for (int j : index.pos_audio[i]) taken[j] = 1;
    for (int j : index.pos_vision[i]) taken[j] = 1;
    for (int j = 0; j < index.n; ++j) {
      if (!taken[j]) index.neg[i].push_back(j);
    }
  }
}

void check_embeddings(const std::vector<Embedding>& xs) {
  for (const auto& x : xs) {
    if (x.size() != xs.front().size()) fail(ErrorKind::kShapeMismatch, "embedding lengths differ");
  }
}

}  // namespace

Embedding pool_vision(const VisionFeature& vision) {
  const Grid& V = vision.values;
  const std::size_t plane = static_cast<std::size_t>(V.height) * V.width;
  Embedding out(V.channels, 0.0);
  for (int k = 0; k < V.channels; ++k) {
    double acc = 0.0;
    for (std::size_t s = 0; s < plane; ++s) acc += V.values[k * plane + s];
    out[k] = acc / static_cast<double>(plane);
  }
  return out;
}

std::vector<double> similarity_scores(const std::vector<Embedding>& features, std::size_t i) {
  require(i < features.size(), "anchor index out of range");
  check_embeddings(features);
  std::vector<Embedding> unit;
  unit.reserve(features.size());
  for (const auto& x : features) unit.push_back(normalized(x));
  return scores_normalized(unit, i);
}

std::vector<int> top_k(const std::vector<double>& scores, std::size_t i, int k) {
  require(k >= 1, "K must be at least 1");
  std::vector<int> ids;
  ids.reserve(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j != i) ids.push_back(static_cast<int>(j));
  }
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k), ids.size());
  std::partial_sort(ids.begin(), ids.begin() + keep, ids.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  ids.resize(keep);
  return ids;
}

bool MiningIndex::is_negative(int anchor, int other) const {
  const auto& ns = neg[anchor];
  return std::binary_search(ns.begin(), ns.end(), other);
}

void MiningIndex::validate() const {
  require(n >= 3, "mining index needs n >= 3");
  require(k >= 1, "mining index needs K >= 1");
  require(static_cast<int>(pos_audio.size()) == n && static_cast<int>(pos_vision.size()) == n &&
              static_cast<int>(neg.size()) == n,
          "mining index arrays must have n entries");
  const std::size_t expected = static_cast<std::size_t>(std::min(k, n - 1));
  std::vector<char> mark(n);
  for (int i = 0; i < n; ++i) {
    require(pos_audio[i].size() == expected && pos_vision[i].size() == expected,
            "positive sets must hold min(K, n-1) ids");
    std::fill(mark.begin(), mark.end(), 0);
    mark[i] = 1;
    for (const auto* set : {&pos_audio[i], &pos_vision[i]}) {
      std::vector<char> seen(n);
      for (int j : *set) {
        require(j >= 0 && j < n && j != i, "positive ids must be in range and exclude the anchor");
        require(!seen[j], "positive sets must not repeat ids");
        seen[j] = 1;
        mark[j] = 1;
      }
    }
    require(std::is_sorted(neg[i].begin(), neg[i].end()), "negative set must be sorted");
    std::size_t complement = 0;
    for (int j = 0; j < n; ++j) complement += mark[j] ? 0 : 1;
    require(neg[i].size() == complement, "negative set must be the complement of the positives");
    for (int j : neg[i]) {
      require(j >= 0 && j < n && !mark[j], "negative set must be disjoint from positives and anchor");
    }
  }
}

MiningIndex build_index(const std::vector<Embedding>& audio,
                        const std::vector<Embedding>& pooled_vision, int k) {
  require(audio.size() == pooled_vision.size(), "audio and vision counts differ");
  require(audio.size() >= 3, "mining needs at least 3 samples");
  require(k >= 1, "K must be at least 1");
  check_embeddings(audio);
  check_embeddings(pooled_vision);

  MiningIndex index;
  index.n = static_cast<int>(audio.size());
  index.k = k;
  std::vector<Embedding> ua, uv;
  for (const auto& x : audio) ua.push_back(normalized(x));
  for (const auto& x : pooled_vision) uv.push_back(normalized(x));
  index.pos_audio.resize(index.n);
  index.pos_vision.resize(index.n);
  for (int i = 0; i < index.n; ++i) {
    index.pos_audio[i] = top_k(scores_normalized(ua, i), i, k);
    index.pos_vision[i] = top_k(scores_normalized(uv, i), i, k);
  }
  fill_negatives(index);
  return index;
}

MiningIndex build_index(const FeatureSet& features, int k) {
  std::vector<Embedding> audio, pooled;
  for (std::size_t i = 0; i < features.size(); ++i) {
    audio.push_back(features.audio[i].values);
    pooled.push_back(pool_vision(features.vision[i]));
  }
  return build_index(audio, pooled, k);
}

MiningIndex random_index(int n, int k, std::uint64_t seed) {
  require(n >= 3, "mining needs at least 3 samples");
  require(k >= 1, "K must be at least 1");
  Rng rng(seed);
  MiningIndex index;
  index.n = n;
  index.k = k;
  index.pos_audio.resize(n);
  index.pos_vision.resize(n);
  const int keep = std::min(k, n - 1);
  std::vector<int> pool;
  auto draw = [&](int i) {
    pool.clear();
    for (int j = 0; j < n; ++j) {
      if (j != i) pool.push_back(j);
    }
    // Partial Fisher-Yates from the front.
    for (int t = 0; t < keep; ++t) {
      const auto r = t + static_cast<int>(rng.uniform_int(pool.size() - t));
      std::swap(pool[t], pool[r]);
    }
    return std::vector<int>(pool.begin(), pool.begin() + keep);
  };
  for (int i = 0; i < n; ++i) {
    index.pos_audio[i] = draw(i);
    index.pos_vision[i] = draw(i);
  }
  fill_negatives(index);
  return index;
}

double mining_precision(const MiningIndex& index, const std::vector<int>& classes) {
  if (static_cast<int>(classes.size()) != index.n) {
    fail(ErrorKind::kInvalidArgument, "class labels missing for some samples");
  }
  double total = 0.0;
  for (int i = 0; i < index.n; ++i) {
    double per_anchor = 0.0;
    for (const auto* set : {&index.pos_audio[i], &index.pos_vision[i]}) {
      if (set->empty()) continue;
      int hits = 0;
      for (int j : *set) hits += classes[j] == classes[i] ? 1 : 0;
      per_anchor += static_cast<double>(hits) / static_cast<double>(set->size());
    }
    total += per_anchor / 2.0;
  }
  return index.n > 0 ? total / index.n : 0.0;
}

void save_index(const MiningIndex& index, const std::filesystem::path& path) {
  index.validate();
  auto out = textio::open_out(path);
  out << "i,kind,j\n";
  for (int i = 0; i < index.n; ++i) {
    for (int j : index.pos_audio[i]) out << i + 1 << ",PA," << j + 1 << '\n';
    for (int j : index.pos_vision[i]) out << i + 1 << ",PV," << j + 1 << '\n';
    for (int j : index.neg[i]) out << i + 1 << ",N," << j + 1 << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

MiningIndex load_index(const std::filesystem::path& path) {
  const auto lines = textio::read_lines(path);
  if (lines.empty() || textio::trim(lines[0]) != "i,kind,j") {
    fail(ErrorKind::kMalformedHeader, "index file must start with 'i,kind,j'");
  }
  struct Row { int i; int kind; int j; };
  std::vector<Row> rows;
  int n = 0;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (textio::trim(lines[r]).empty()) continue;
    const auto f = textio::split_char(lines[r], ',');
    if (f.size() != 3) fail(ErrorKind::kShapeMismatch, "index row needs 3 fields");
    const int i = static_cast<int>(textio::parse_int(f[0], ErrorKind::kShapeMismatch));
    const int j = static_cast<int>(textio::parse_int(f[2], ErrorKind::kShapeMismatch));
    int kind = -1;
    if (f[1] == "PA") kind = 0;
    else if (f[1] == "PV") kind = 1;
    else if (f[1] == "N") kind = 2;
    if (kind < 0 || i < 1 || j < 1) fail(ErrorKind::kShapeMismatch, "bad index row");
    n = std::max({n, i, j});
    rows.push_back({i - 1, kind, j - 1});
  }
  MiningIndex index;
  index.n = n;
  index.pos_audio.resize(n);
  index.pos_vision.resize(n);
  index.neg.resize(n);
  for (const auto& row : rows) {
    auto& target = row.kind == 0 ? index.pos_audio : row.kind == 1 ? index.pos_vision : index.neg;
    target[row.i].push_back(row.j);
  }
  index.k = n > 0 ? static_cast<int>(index.pos_audio[0].size()) : 0;
  try {
    index.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kShapeMismatch, std::string("index file violates partition: ") + e.what());
  }
  return index;
}

}  // namespace avloc
