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

#include "avloc/metrics.hpp"

#include <algorithm>
#include <map>

#include "avloc/error.hpp"
#include "avloc/textio.hpp"

namespace avloc {

BinaryMask binarize_map(const Map2D& alpha, int image_height, int image_width,
                        double threshold) {
  require(alpha.height > 0 && alpha.width > 0, "empty response map");
  require(image_height > 0 && image_width > 0, "image size must be positive");
  const auto [lo_it, hi_it] = std::minmax_element(alpha.values.begin(), alpha.values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<std::uint8_t> site(alpha.size());
  for (std::size_t s = 0; s < alpha.size(); ++s) {
    const double normalized = hi > lo ? (alpha.values[s] - lo) / (hi - lo) : 0.5;
    site[s] = normalized >= threshold ? 1 : 0;
  }
  BinaryMask mask{image_height, image_width,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(image_height) * image_width)};
  for (int y = 0; y < image_height; ++y) {
    const int u = static_cast<int>(static_cast<long long>(y) * alpha.height / image_height);
    for (int x = 0; x < image_width; ++x) {
      const int v = static_cast<int>(static_cast<long long>(x) * alpha.width / image_width);
      mask.values[static_cast<std::size_t>(y) * image_width + x] =
          site[static_cast<std::size_t>(u) * alpha.width + v];
    }
  }
  return mask;
}

double iou(const BinaryMask& pred, const Box& box) {
  long long inter = 0, uni = 0;
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      const bool p = pred.at(y, x);
      const bool b = box.contains(x, y);
      inter += (p && b) ? 1 : 0;
      uni += (p || b) ? 1 : 0;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<double> auc_thresholds() {
  std::vector<double> t;
  for (int k = 1; k <= 19; ++k) t.push_back(k / 20.0);
  return t;
}

EvalReport summarize(std::vector<SampleIou> per_sample, const EvalProtocol& protocol) {
  std::sort(per_sample.begin(), per_sample.end(),
            [](const SampleIou& a, const SampleIou& b) { return a.id < b.id; });
  EvalReport r;
  r.binarize_threshold = protocol.binarize_threshold;
  r.success_threshold = protocol.success_threshold;
  r.n_eval = static_cast<int>(per_sample.size());
  if (!per_sample.empty()) {
    const double n = static_cast<double>(per_sample.size());
    auto success = [&](double t) {
      long long hits = 0;
      for (const auto& s : per_sample) hits += s.iou >= t ? 1 : 0;
      return static_cast<double>(hits) / n;
    };
    r.ciou = success(protocol.success_threshold);
    const auto ts = auc_thresholds();
    double acc = 0.0;
    for (double t : ts) acc += success(t);
    r.auc = acc / static_cast<double>(ts.size());
  }
  r.per_sample = std::move(per_sample);
  return r;
}

EvalReport evaluate(const EncoderParams& params, const Dataset& dataset,
                    const EvalProtocol& protocol) {
  dataset.validate();
  std::vector<SampleIou> ious;
  for (const auto& s : dataset.samples) {
    if (!s.gt_box) fail(ErrorKind::kInvalidArgument, "sample " + std::to_string(s.id) + " has no box");
    const ResponseMap alpha =
        response_map(encode_audio(params, s.audio), encode_vision(params, s.image));
    const BinaryMask pred = binarize_map(alpha, s.image.height, s.image.width,
                                         protocol.binarize_threshold);
    ious.push_back(SampleIou{s.id, iou(pred, *s.gt_box)});
  }
  return summarize(std::move(ious), protocol);
}

EvalReport evaluate_features(const FeatureSet& features,
                             std::span<const std::pair<int, Box>> boxes, int image_height,
                             int image_width, const EvalProtocol& protocol) {
  std::map<int, Box> by_id(boxes.begin(), boxes.end());
  std::vector<SampleIou> ious;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto it = by_id.find(features.ids[i]);
    if (it == by_id.end()) {
      fail(ErrorKind::kInvalidArgument, "no box for sample " + std::to_string(features.ids[i]));
    }
    const ResponseMap alpha = response_map(features.audio[i], features.vision[i]);
    const BinaryMask pred =
        binarize_map(alpha, image_height, image_width, protocol.binarize_threshold);
    ious.push_back(SampleIou{features.ids[i], iou(pred, it->second)});
  }
  return summarize(std::move(ious), protocol);
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
  auto out = textio::open_out(path);
  out << "id,iou\n";
  for (const auto& s : report.per_sample) {
    out << s.id << ',' << textio::format_real(s.iou) << '\n';
  }
  out << "ciou=" << textio::format_real(report.ciou) << ",auc="
      << textio::format_real(report.auc) << '\n';
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

std::vector<ResultRow> ablate_k(const Dataset& train, const Dataset& eval,
                                const TrainConfig& config, std::span<const int> k_list,
                                const EncoderParams& stage1) {
  require(!k_list.empty(), "K list is empty");
  std::vector<ResultRow> rows;
  for (int k : k_list) {
    require(k >= 1 && k <= static_cast<int>(train.size()) - 1, "K must lie in [1, n-1]");
    TrainConfig c = config;
    c.k = k;
    const TrainResult run = train_full(train, c, &stage1);
    if (run.diverged) fail(ErrorKind::kNumeric, "training diverged: " + run.message);
    const EvalReport rep = evaluate(run.params, eval);
    rows.push_back(ResultRow{std::to_string(k), rep.ciou, rep.auc});
  }
  return rows;
}

std::vector<ResultRow> compare_methods(const Dataset& train, const Dataset& eval,
                                       const TrainConfig& config,
                                       std::span<const TrainMode> modes,
                                       const EncoderParams& stage1) {
  require(!modes.empty(), "mode list is empty");
  std::vector<ResultRow> rows;
  for (TrainMode mode : modes) {
    TrainConfig c = config;
    c.mode = mode;
    const TrainResult run = train_full(train, c, &stage1);
    if (run.diverged) fail(ErrorKind::kNumeric, "training diverged: " + run.message);
    const EvalReport rep = evaluate(run.params, eval);
    rows.push_back(ResultRow{mode_name(mode), rep.ciou, rep.auc});
  }
  return rows;
}

void save_rows(const std::vector<ResultRow>& rows, const std::string& header,
               const std::filesystem::path& path) {
  auto out = textio::open_out(path);
  out << header << ",ciou,auc\n";
  for (const auto& r : rows) {
    out << r.label << ',' << textio::format_real(r.ciou) << ',' << textio::format_real(r.auc)
        << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace avloc
