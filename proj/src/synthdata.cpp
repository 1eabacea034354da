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

#include "avloc/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "avloc/error.hpp"
#include "avloc/rng.hpp"
#include "avloc/textio.hpp"

namespace avloc {

namespace {

using textio::format_real;

void check_shape(const Grid& g, int c, int h, int w, const char* what) {
  if (g.channels != c || g.height != h || g.width != w) {
    fail(ErrorKind::kShapeMismatch, std::string(what) + " has inconsistent shape");
  }
}

void write_reals(std::ostream& out, const std::vector<double>& values) {
  for (double v : values) out << ' ' << format_real(v);
}

// Shared reader for the two line-based record formats (AVF1 and AVD1).
struct RecordReader {
  std::vector<std::string> lines;
  std::size_t cursor = 1;

  std::vector<std::string_view> header(std::string_view magic, std::size_t fields) {
    if (lines.empty()) fail(ErrorKind::kMalformedHeader, "empty file");
    auto tokens = textio::split_ws(lines[0]);
    if (tokens.size() != fields || tokens[0] != magic) {
      fail(ErrorKind::kMalformedHeader,
           "expected header '" + std::string(magic) + "' with " +
               std::to_string(fields - 1) + " fields");
    }
    return tokens;
  }

  // Reads one record line `<tag> <id> <count reals>`.
  std::vector<double> record(std::string_view tag, int& id, std::size_t count) {
    while (cursor < lines.size() && textio::trim(lines[cursor]).empty()) ++cursor;
    if (cursor >= lines.size()) {
      fail(ErrorKind::kTruncatedPayload, "file ends before all declared records");
    }
    auto tokens = textio::split_ws(lines[cursor]);
    ++cursor;
    if (tokens.size() < 2 || tokens[0] != tag) {
      fail(ErrorKind::kShapeMismatch,
           "expected record '" + std::string(tag) + "' on line " + std::to_string(cursor));
    }
    id = static_cast<int>(textio::parse_int(tokens[1], ErrorKind::kShapeMismatch));
    if (tokens.size() - 2 != count) {
      fail(ErrorKind::kShapeMismatch,
           "record on line " + std::to_string(cursor) + " holds " +
               std::to_string(tokens.size() - 2) + " values, expected " +
               std::to_string(count));
    }
    std::vector<double> values(count);
    for (std::size_t k = 0; k < count; ++k) {
      values[k] = textio::parse_real(tokens[k + 2], ErrorKind::kShapeMismatch);
    }
    return values;
  }

  void expect_end() {
    while (cursor < lines.size() && textio::trim(lines[cursor]).empty()) ++cursor;
    if (cursor != lines.size()) {
      fail(ErrorKind::kShapeMismatch, "more records than declared in header");
    }
  }
};

int header_dim(std::string_view token, bool allow_zero) {
  const long long v = textio::parse_int(token, ErrorKind::kMalformedHeader);
  if (v < 0 || (!allow_zero && v == 0) || v > (1LL << 30)) {
    fail(ErrorKind::kMalformedHeader, "invalid dimension " + std::string(token));
  }
  return static_cast<int>(v);
}

}  // namespace

void SynthConfig::validate() const {
  require(n_samples >= 1, "n_samples must be positive");
  require(n_classes >= 2, "n_classes must be at least 2");
  require(position_stride >= 1, "position_stride must be positive");
  require(texture_period >= 1, "texture_period must be positive");
  require(n_classes <= 3 * texture_period * texture_period,
          "texture tile too small for class textures");
  require(image_height > 0 && image_width > 0, "image size must be positive");
  require(audio_height > 0 && audio_width > 0, "audio size must be positive");
  require(n_classes <= audio_height * audio_width, "audio grid too small for class templates");
  require(object_size >= 1, "object_size must be positive");
  require(object_size <= std::min(image_height, image_width),
          "object_size larger than image");
  require(noise_std >= 0.0, "noise_std must be nonnegative");
  require(distractors >= 0, "distractors must be nonnegative");
  require(distractor_size >= 0, "distractor_size must be nonnegative");
  if (distractors > 0) {
    const int d = distractor_size > 0 ? distractor_size : object_size;
    require(d <= std::min(image_height, image_width), "distractor_size larger than image");
    // Side-by-side packing must exist for the rejection sampler to terminate.
    const bool fits_row = object_size + distractors * d <= image_width;
    const bool fits_col = object_size + distractors * d <= image_height;
    require(fits_row || fits_col, "image cannot hold the requested distractors");
  }
}

Grid class_texture(int latent_class, int n_classes, int period) {
  require(latent_class >= 1 && latent_class <= n_classes, "latent class out of range");
  Grid g(3, period, period);
  for (std::size_t d = 0; d < g.size(); ++d) {
    if (static_cast<int>(d % n_classes) == latent_class - 1) g.values[d] = 1.0;
  }
  return g;
}

Grid class_audio_template(int latent_class, int n_classes, int height, int width) {
  Grid g(1, height, width);
  for (std::size_t f = 0; f < g.size(); ++f) {
    if (static_cast<int>(f % n_classes) == latent_class - 1) g.values[f] = 1.0;
  }
  return g;
}

Dataset generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const int H = config.image_height, W = config.image_width, s = config.object_size;
  const int ds_size = config.distractor_size > 0 ? config.distractor_size : s;

  const int t = config.texture_period;
  std::vector<Grid> textures;
  for (int z = 1; z <= config.n_classes; ++z) {
    textures.push_back(class_texture(z, config.n_classes, t));
  }
  auto paint = [&](Grid& image, const Box& box, int cls) {
    const Grid& tex = textures[cls - 1];
    for (int ch = 0; ch < 3; ++ch) {
      for (int y = box.y0; y < box.y1; ++y) {
        for (int x = box.x0; x < box.x1; ++x) image.at(ch, y, x) = tex.at(ch, y % t, x % t);
      }
    }
  };
  auto overlaps = [](const Box& a, const Box& b) {
    return a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1;
  };

  Dataset ds;
  ds.samples.reserve(config.n_samples);
  for (int i = 0; i < config.n_samples; ++i) {
    SamplePair sp;
    sp.id = i + 1;
    const int z = 1 + static_cast<int>(rng.uniform_int(config.n_classes));
    std::vector<int> other_classes;
    for (int d = 0; d < config.distractors; ++d) {
      const int offset = 1 + static_cast<int>(rng.uniform_int(config.n_classes - 1));
      other_classes.push_back(1 + (z - 1 + offset) % config.n_classes);
    }
    // Whole layouts are redrawn until no two objects overlap.
    Box box;
    std::vector<Box> others;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 100000) fail(ErrorKind::kInvalidArgument, "cannot place distractors");
      auto draw = [&](int size) {
        const int st = config.position_stride;
        const int y0 = st * static_cast<int>(rng.uniform_int((H - size) / st + 1));
        const int x0 = st * static_cast<int>(rng.uniform_int((W - size) / st + 1));
        return Box{x0, y0, x0 + size, y0 + size};
      };
      box = draw(s);
      others.clear();
      bool clash = false;
      for (int d = 0; d < config.distractors; ++d) {
        const Box b = draw(ds_size);
        clash = clash || overlaps(b, box);
        for (const Box& o : others) clash = clash || overlaps(b, o);
        others.push_back(b);
      }
      if (!clash) break;
    }

    sp.image = Grid(3, H, W);
    for (int d = 0; d < config.distractors; ++d) paint(sp.image, others[d], other_classes[d]);
    paint(sp.image, box, z);
    for (double& v : sp.image.values) v += config.noise_std * rng.normal();

    sp.audio = class_audio_template(z, config.n_classes, config.audio_height,
                                    config.audio_width);
    for (double& v : sp.audio.values) v += config.noise_std * rng.normal();

    sp.latent_class = z;
    sp.gt_box = box;
    ds.samples.push_back(std::move(sp));
  }
  return ds;
}

std::vector<int> class_labels(const Dataset& dataset) {
  std::vector<int> labels;
  labels.reserve(dataset.size());
  for (const auto& s : dataset.samples) {
    if (!s.latent_class) fail(ErrorKind::kInvalidArgument, "sample without class label");
    labels.push_back(*s.latent_class);
  }
  return labels;
}

void Dataset::validate() const {
  require(!samples.empty(), "dataset is empty");
  const auto& first = samples.front();
  require(first.image.channels == 3 && first.image.height > 0 && first.image.width > 0,
          "image must be 3 x H x W with positive size");
  require(first.audio.channels == 1 && first.audio.height > 0 && first.audio.width > 0,
          "audio must be 1 x H x W with positive size");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    require(s.id == static_cast<int>(i) + 1, "sample ids must run 1..n in order");
    check_shape(s.image, 3, first.image.height, first.image.width, "image");
    check_shape(s.audio, 1, first.audio.height, first.audio.width, "audio");
    if (s.image.values.size() != s.image.size() ||
        s.image.size() != static_cast<std::size_t>(3) * s.image.height * s.image.width ||
        s.audio.size() != static_cast<std::size_t>(s.audio.height) * s.audio.width) {
      fail(ErrorKind::kShapeMismatch, "sample payload does not match its declared shape");
    }
    if (s.gt_box) {
      const Box& b = *s.gt_box;
      require(b.x0 >= 0 && b.y0 >= 0 && b.x1 <= s.image.width && b.y1 <= s.image.height &&
                  b.x1 > b.x0 && b.y1 > b.y0,
              "gt_box of sample " + std::to_string(s.id) + " is outside the image or empty");
    }
  }
}

// ---------------------------------------------------------------------------

void save_features(const FeatureSet& f, const std::filesystem::path& path) {
  const std::size_t n = f.ids.size();
  if (f.audio.size() != n || f.vision.size() != n) {
    fail(ErrorKind::kShapeMismatch, "feature set arrays differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (f.audio[i].values.size() != static_cast<std::size_t>(f.channels)) {
      fail(ErrorKind::kShapeMismatch, "audio feature length differs from c");
    }
    check_shape(f.vision[i].values, f.channels, f.height, f.width, "vision feature");
  }
  auto out = textio::open_out(path);
  out << "AVF1 " << n << ' ' << f.channels << ' ' << f.height << ' ' << f.width << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << "A " << f.ids[i];
    write_reals(out, f.audio[i].values);
    out << "\nV " << f.ids[i];
    write_reals(out, f.vision[i].values.values);
    out << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

FeatureSet load_features(const std::filesystem::path& path) {
  RecordReader reader{textio::read_lines(path)};
  const auto header = reader.header("AVF1", 5);
  FeatureSet f;
  const int n = header_dim(header[1], true);
  f.channels = header_dim(header[2], false);
  f.height = header_dim(header[3], false);
  f.width = header_dim(header[4], false);
  const std::size_t vcount = static_cast<std::size_t>(f.channels) * f.height * f.width;
  for (int i = 0; i < n; ++i) {
    int aid = 0, vid = 0;
    auto a = reader.record("A", aid, f.channels);
    auto v = reader.record("V", vid, vcount);
    if (aid != vid) fail(ErrorKind::kShapeMismatch, "A and V record ids differ");
    f.ids.push_back(aid);
    f.audio.push_back(AudioFeature{std::move(a)});
    Grid g(f.channels, f.height, f.width);
    g.values = std::move(v);
    f.vision.push_back(VisionFeature{std::move(g)});
  }
  reader.expect_end();
  return f;
}

void save_boxes(const Dataset& dataset, const std::filesystem::path& path) {
  auto out = textio::open_out(path);
  out << "id,x0,y0,x1,y1\n";
  for (const auto& s : dataset.samples) {
    if (!s.gt_box) continue;
    const Box& b = *s.gt_box;
    out << s.id << ',' << b.x0 << ',' << b.y0 << ',' << b.x1 << ',' << b.y1 << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

std::vector<std::pair<int, Box>> load_boxes(const std::filesystem::path& path) {
  const auto lines = textio::read_lines(path);
  if (lines.empty() || textio::trim(lines[0]) != "id,x0,y0,x1,y1") {
    fail(ErrorKind::kMalformedHeader, "boxes file must start with 'id,x0,y0,x1,y1'");
  }
  std::vector<std::pair<int, Box>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (textio::trim(lines[i]).empty()) continue;
    const auto f = textio::split_char(lines[i], ',');
    if (f.size() != 5) fail(ErrorKind::kShapeMismatch, "boxes row needs 5 fields");
    auto num = [&](int k) {
      return static_cast<int>(textio::parse_int(f[k], ErrorKind::kShapeMismatch));
    };
    out.emplace_back(num(0), Box{num(1), num(2), num(3), num(4)});
  }
  return out;
}

void save_classes(const Dataset& dataset, const std::filesystem::path& path) {
  auto out = textio::open_out(path);
  out << "id,class\n";
  for (const auto& s : dataset.samples) {
    if (s.latent_class) out << s.id << ',' << *s.latent_class << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  dataset.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create directory '" + dir.string() + "'");
  {
    auto out = textio::open_out(dir / "samples.avd");
    out << "AVD1 " << dataset.size() << ' ' << dataset.image_height() << ' '
        << dataset.image_width() << ' ' << dataset.audio_height() << ' '
        << dataset.audio_width() << '\n';
    for (const auto& s : dataset.samples) {
      out << "I " << s.id;
      write_reals(out, s.image.values);
      out << "\nS " << s.id;
      write_reals(out, s.audio.values);
      out << '\n';
    }
    if (!out) fail(ErrorKind::kIo, "write failed for samples.avd");
  }
  save_boxes(dataset, dir / "boxes.csv");
  save_classes(dataset, dir / "classes.csv");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto samples_path = dir / "samples.avd";
  if (!std::filesystem::exists(samples_path)) {
    fail(ErrorKind::kIo, "no samples.avd in '" + dir.string() + "'");
  }
  RecordReader reader{textio::read_lines(samples_path)};
  const auto header = reader.header("AVD1", 6);
  const int n = header_dim(header[1], false);
  const int hv = header_dim(header[2], false), wv = header_dim(header[3], false);
  const int ha = header_dim(header[4], false), wa = header_dim(header[5], false);
  Dataset ds;
  for (int i = 0; i < n; ++i) {
    SamplePair sp;
    int iid = 0, sid = 0;
    sp.image = Grid(3, hv, wv);
    sp.image.values = reader.record("I", iid, sp.image.size());
    sp.audio = Grid(1, ha, wa);
    sp.audio.values = reader.record("S", sid, sp.audio.size());
    if (iid != sid || iid != i + 1) {
      fail(ErrorKind::kShapeMismatch, "sample records must carry ids 1..n in order");
    }
    sp.id = iid;
    ds.samples.push_back(std::move(sp));
  }
  reader.expect_end();

  if (std::filesystem::exists(dir / "boxes.csv")) {
    for (const auto& [id, box] : load_boxes(dir / "boxes.csv")) {
      if (id < 1 || id > n) fail(ErrorKind::kShapeMismatch, "box id out of range");
      ds.samples[id - 1].gt_box = box;
    }
  }
  if (std::filesystem::exists(dir / "classes.csv")) {
    const auto lines = textio::read_lines(dir / "classes.csv");
    if (lines.empty() || textio::trim(lines[0]) != "id,class") {
      fail(ErrorKind::kMalformedHeader, "classes file must start with 'id,class'");
    }
    for (std::size_t k = 1; k < lines.size(); ++k) {
      if (textio::trim(lines[k]).empty()) continue;
      const auto f = textio::split_char(lines[k], ',');
      if (f.size() != 2) fail(ErrorKind::kShapeMismatch, "classes row needs 2 fields");
      const auto id = textio::parse_int(f[0], ErrorKind::kShapeMismatch);
      if (id < 1 || id > n) fail(ErrorKind::kShapeMismatch, "class id out of range");
      ds.samples[id - 1].latent_class =
          static_cast<int>(textio::parse_int(f[1], ErrorKind::kShapeMismatch));
    }
  }
  ds.validate();
  return ds;
}

}  // namespace avloc
