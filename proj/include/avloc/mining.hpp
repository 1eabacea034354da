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
#include <vector>

#include "avloc/synthdata.hpp"

namespace avloc {

using Embedding = std::vector<double>;

/// Channelwise mean of a vision feature over its h x w sites.
Embedding pool_vision(const VisionFeature& vision);

/// Cosine score of sample i against every sample (self included) on
/// L2-normalized vectors. Zero-norm vectors score -infinity against everything.
std::vector<double> similarity_scores(const std::vector<Embedding>& features, std::size_t i);

/// The min(k, n-1) best-scoring indices j != i, descending by score, ties by
/// ascending index.
std::vector<int> top_k(const std::vector<double>& scores, std::size_t i, int k);

/// Per-anchor positive and negative sets, 0-based internally (1-based in
/// files). neg[i] is the complement of pos_audio[i], pos_vision[i] and i.
struct MiningIndex {
  int n = 0;
  int k = 0;
  std::vector<std::vector<int>> pos_audio;
  std::vector<std::vector<int>> pos_vision;
  std::vector<std::vector<int>> neg;

  bool is_negative(int anchor, int other) const;
  /// Throws when the partition invariants do not hold.
  void validate() const;
  friend bool operator==(const MiningIndex&, const MiningIndex&) = default;
};

MiningIndex build_index(const std::vector<Embedding>& audio,
                        const std::vector<Embedding>& pooled_vision, int k);

MiningIndex build_index(const FeatureSet& features, int k);

/// Positive sets drawn uniformly without replacement from the other samples.
MiningIndex random_index(int n, int k, std::uint64_t seed);

/// Fraction of mined positives sharing the anchor's class, averaged over
/// anchors and both modalities. `classes` is indexed like the samples.
double mining_precision(const MiningIndex& index, const std::vector<int>& classes);

/// CSV rows `i,kind,j` (kind in PA, PV, N) after an `i,kind,j` header.
void save_index(const MiningIndex& index, const std::filesystem::path& path);
MiningIndex load_index(const std::filesystem::path& path);

}  // namespace avloc
