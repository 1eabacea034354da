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


// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
// when any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "avloc/attention.hpp"
#include "avloc/encoders.hpp"
#include "avloc/error.hpp"
#include "avloc/metrics.hpp"
#include "avloc/mining.hpp"
#include "avloc/objective.hpp"
#include "avloc/rng.hpp"
#include "avloc/synthdata.hpp"
#include "avloc/trainer.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace avloc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << x;
  return s.str();
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

std::vector<std::vector<double>> rows_of(const Map2D& m) {
  std::vector<std::vector<double>> out(m.height, std::vector<double>(m.width));
  for (int u = 0; u < m.height; ++u)
    for (int v = 0; v < m.width; ++v) out[u][v] = m.values[u * m.width + v];
  return out;
}

// ---------------------------------------------------------------------------

Outcome grad_check_criterion() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  bool finite = true;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = make_grad_check_instance(seed);
    const auto r = grad_check(inst.params, inst.dataset, inst.plan, ObjectiveConfig{});
    worst = std::max(worst, r.max_rel_error);
    finite = finite && r.finite;
  }
  const double secs = seconds_since(t0);
  return {finite && worst < 1e-4 && secs < 60.0,
          "max_rel_err=" + num(worst, 3) + " seeds=1..20 time=" + num(secs, 3) + "s"};
}

Outcome attention_parity() {
  Rng rng(101);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int c = 1 + static_cast<int>(rng.uniform_int(16));
    const int h = 1 + static_cast<int>(rng.uniform_int(8));
    const int w = 1 + static_cast<int>(rng.uniform_int(8));
    AudioFeature a{std::vector<double>(c)};
    for (double& x : a.values) x = rng.uniform(-1, 1);
    VisionFeature v;
    v.values = Grid(c, h, w);
    for (double& x : v.values.values) x = rng.uniform(-1, 1);
    const double eps = rng.uniform(-0.5, 0.9);
    const double tau = rng.uniform(0.01, 0.5);

    const ResponseMap alpha = response_map(a, v);
    const auto oracle_alpha = avloc_oracle::cosine_map(a.values, v.values.values, c, h, w);
    const PseudoMask m = pseudo_mask(alpha, eps, tau);
    const auto oracle_m = avloc_oracle::mask(oracle_alpha, eps, tau);
    for (int u = 0; u < h; ++u) {
      for (int q = 0; q < w; ++q) {
        worst = std::max(worst, std::abs(alpha.values[u * w + q] - oracle_alpha[u][q]));
        worst = std::max(worst, std::abs(m.values[u * w + q] - oracle_m[u][q]));
      }
    }
    worst = std::max(worst, std::abs(masked_response(m, alpha) -
                                     avloc_oracle::weighted_mean(oracle_m, oracle_alpha)));
    worst = std::max(worst,
                     std::abs(mean_response(alpha) - avloc_oracle::plain_mean(oracle_alpha)));
  }
  return {worst <= 1e-12, "instances=100 max_abs_diff=" + num(worst, 3)};
}

Outcome mask_anchors() {
  // Reference values from 50-digit evaluation of 1 / (1 + exp(-(a - 0.65) / 0.03)).
  const double hi_ref = 0.99999142513442627782;
  const double lo_ref = 3.8930163282735117375e-10;
  const double mid = sigmoid((0.65 - 0.65) / 0.03);
  ResponseMap alpha(1, 3);
  alpha.values = {0.65, 1.0, 0.0};
  const PseudoMask m = pseudo_mask(alpha, 0.65, 0.03);
  const double e_hi = std::abs(m.values[1] - hi_ref);
  const double e_lo = std::abs(m.values[2] - lo_ref);
  return {mid == 0.5 && m.values[0] == 0.5 && e_hi <= 1e-9 && e_lo <= 1e-9,
          "m(eps)=" + num(m.values[0], 17) + " m(1.0)=" + num(m.values[1], 10) +
              " m(0.0)=" + num(m.values[2], 6)};
}

bool partition_ok(const MiningIndex& ix) {
  for (int i = 0; i < ix.n; ++i) {
    std::set<int> cover(ix.neg[i].begin(), ix.neg[i].end());
    for (int j : ix.neg[i]) {
      if (j == i) return false;
    }
    for (const auto* pos : {&ix.pos_audio[i], &ix.pos_vision[i]}) {
      if (static_cast<int>(pos->size()) != std::min(ix.k, ix.n - 1)) return false;
      for (int j : *pos) {
        if (j == i || cover.count(j)) return false;  // cover holds N_i here
      }
    }
    cover.insert(ix.pos_audio[i].begin(), ix.pos_audio[i].end());
    cover.insert(ix.pos_vision[i].begin(), ix.pos_vision[i].end());
    cover.insert(i);
    if (static_cast<int>(cover.size()) != ix.n) return false;
    if (ix.k >= ix.n - 1 && !ix.neg[i].empty()) return false;
  }
  return true;
}

Outcome mining_criterion(const TrainConfig& train) {
  Rng rng(202);
  int checked = 0;
  bool invariants = true;
  for (int t = 0; t < 20; ++t) {
    SynthConfig sc;
    sc.n_samples = 3 + static_cast<int>(rng.uniform_int(40));
    sc.n_classes = 2 + static_cast<int>(rng.uniform_int(5));
    sc.noise_std = rng.uniform(0.0, 1.0);
    sc.seed = rng.next();
    const Dataset ds = generate(sc);
    const auto params = init_params(shape_for(ds, 8, 4), rng.next());
    const FeatureSet f = encode_dataset(params, ds);
    for (int k : {1, 2, 5, sc.n_samples - 2, sc.n_samples - 1, sc.n_samples + 10}) {
      if (k < 1) continue;
      invariants = invariants && partition_ok(build_index(f, k));
      invariants = invariants && partition_ok(random_index(sc.n_samples, k, rng.next()));
      ++checked;
    }
  }

  SynthConfig zero;  // benchmark defaults
  zero.noise_std = 0.0;
  zero.distractors = 0;
  zero.seed = 1;
  const Dataset ds = generate(zero);
  const auto labels = class_labels(ds);
  std::vector<int> counts(zero.n_classes + 1, 0);
  for (int z : labels) ++counts[z];
  int smallest = zero.n_samples;
  for (int z = 1; z <= zero.n_classes; ++z) smallest = std::min(smallest, counts[z]);
  const TrainResult s1 = train_stage1(ds, train);
  const double precision =
      mining_precision(build_index(encode_dataset(s1.params, ds), smallest - 1), labels);
  return {invariants && !s1.diverged && precision == 1.0,
          "random_datasets=20 index_checks=" + std::to_string(2 * checked) +
              " invariants=" + (invariants ? "ok" : "violated") +
              " zero_noise_precision@K=" + std::to_string(smallest - 1) + "=" +
              num(precision, 6)};
}

Outcome loss_anchors() {
  const PositiveResponses zero{};
  const double empty = loss_hp(std::vector<ResponseBundle>{make_bundle(zero, 0.0, true)});
  const double four = loss_hp(std::vector<ResponseBundle>{make_bundle(zero, std::exp(0.0), true)});
  const double van =
      loss_vanilla(std::vector<ResponseBundle>{make_bundle(zero, std::exp(0.0), false)});
  const double e4 = std::abs(four + std::log(4.0 / 5.0));
  const double ev = std::abs(van - std::log(2.0));
  return {empty == 0.0 && e4 <= 1e-12 && ev <= 1e-12,
          "empty=" + num(empty) + " four_pos=" + num(four, 15) + " vanilla=" + num(van, 15)};
}

Outcome metric_parity() {
  Rng rng(303);
  int mismatches = 0;
  for (int t = 0; t < 50; ++t) {
    SynthConfig sc;
    sc.n_samples = 2 + static_cast<int>(rng.uniform_int(8));
    sc.n_classes = 2;
    sc.image_height = 4 * (1 + static_cast<int>(rng.uniform_int(4)));
    sc.image_width = 4 * (1 + static_cast<int>(rng.uniform_int(4)));
    sc.audio_height = 2;
    sc.audio_width = 3;
    sc.object_size = 1 + static_cast<int>(
                             rng.uniform_int(std::min(sc.image_height, sc.image_width)));
    sc.distractors = 0;
    sc.position_stride = 1;
    sc.noise_std = rng.uniform(0.0, 1.0);
    sc.seed = rng.next();
    const Dataset ds = generate(sc);
    const int patch = 1 << rng.uniform_int(3);
    const auto params = init_params(shape_for(ds, 3, patch), rng.next());
    const EvalReport rep = evaluate(params, ds);

    std::vector<double> ious;
    for (const auto& s : ds.samples) {
      const auto a = encode_audio(params, s.audio);
      const auto v = encode_vision(params, s.image);
      const auto& g = v.values;
      const auto alpha =
          avloc_oracle::cosine_map(a.values, g.values, g.channels, g.height, g.width);
      const Box& b = *s.gt_box;
      ious.push_back(avloc_oracle::map_iou(alpha, s.image.height, s.image.width, b.x0, b.y0,
                                           b.x1, b.y1));
    }
    if (rep.ciou != avloc_oracle::success_rate(ious, 0.5) || rep.auc != avloc_oracle::auc(ious)) {
      ++mismatches;
    }
  }
  return {mismatches == 0, "instances=50 mismatches=" + std::to_string(mismatches)};
}

// ---------------------------------------------------------------------------
// Benchmark runs shared by the ordering and K-sweep criteria.

struct SeedRun {
  std::uint64_t seed = 0;
  double hp = 0, vanilla = 0, random_hp = 0;
  std::vector<double> hp_k, random_k;  // per swept K
};

const std::vector<int> kSweep = {2, 19, 60, 150};

SeedRun run_seed(std::uint64_t seed, const TrainConfig& base) {
  SynthConfig sc;  // benchmark defaults
  sc.seed = seed;
  const Dataset train = generate(sc);
  sc.seed = seed + 1000;
  const Dataset eval = generate(sc);

  TrainConfig cfg = base;
  cfg.seed = seed;
  const TrainResult s1 = train_stage1(train, cfg);
  if (s1.diverged) fail(ErrorKind::kNumeric, "stage 1 diverged: " + s1.message);

  auto score = [&](TrainMode mode, int k) {
    TrainConfig c = cfg;
    c.mode = mode;
    c.k = k;
    const TrainResult r = train_full(train, c, &s1.params);
    if (r.diverged) fail(ErrorKind::kNumeric, "stage 2 diverged: " + r.message);
    return evaluate(r.params, eval).ciou;
  };

  SeedRun out;
  out.seed = seed;
  out.vanilla = score(TrainMode::kVanilla, cfg.k);
  for (int k : kSweep) {
    out.hp_k.push_back(score(TrainMode::kHardPositive, k));
    out.random_k.push_back(score(TrainMode::kRandomHardPositive, k));
    if (k == cfg.k) {
      out.hp = out.hp_k.back();
      out.random_hp = out.random_k.back();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome cli_determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no --cli given"};
  std::random_device rd;
  const fs::path root =
      fs::temp_directory_path() / ("avloc_accept_" + std::to_string(rd()) + std::to_string(rd()));
  const std::vector<std::string> steps = {
      "gen-data --n 48 --classes 4 --seed 3 --out {}/data",
      "gen-data --n 48 --classes 4 --seed 1003 --out {}/eval",
      "train --data {}/data --out {}/p.txt --log {}/log.csv --epochs-stage1 2 --epochs-stage2 2 "
      "--k 5 --seed 3",
      "train --data {}/data --out {}/pr.txt --mode random_hp --epochs-stage1 2 "
      "--epochs-stage2 2 --k 5 --seed 3",
      "mine --data {}/data --params {}/p.txt --k 5 --out {}/ix.csv",
      "mine --data {}/data --random --k 5 --seed 4 --out {}/rix.csv",
      "eval --params {}/p.txt --data {}/eval --out {}/report.csv",
      "gen-data --n 48 --classes 4 --seed 3 --out {}/f --params {}/p.txt --features {}/f.txt",
      "export-maps --params {}/p.txt --data {}/eval --ids 1,2 --cross --out {}/maps",
      "compare --data {}/data --eval-data {}/eval --init {}/p.txt --epochs-stage2 1 --k 5 "
      "--out {}/cmp.csv",
      "ablate-k --data {}/data --eval-data {}/eval --init {}/p.txt --epochs-stage2 1 --k 2,5 "
      "--out {}/abl.csv",
      "grad-check --seed 1..3 --out {}/grad.txt"};
  int failures = 0;
  std::size_t files = 0;
  for (const char* tag : {"a", "b"}) {
    const fs::path dir = root / tag;
    fs::create_directories(dir);
    for (std::string step : steps) {
      for (auto at = step.find("{}"); at != std::string::npos; at = step.find("{}")) {
        step.replace(at, 2, dir.string());
      }
      const std::string cmd = "'" + cli + "' " + step + " >>'" + (dir / "stdout.txt").string() +
                              "' 2>&1";
      if (run_command(cmd) != 0) ++failures;
    }
  }
  int differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    ++files;
    std::string a = slurp(entry.path());
    std::string b = slurp(root / "b" / rel);
    if (rel == "stdout.txt") {
      // Paths differ between the two runs; compare with the run directory masked.
      auto mask = [](std::string s, const std::string& dir) {
        for (auto at = s.find(dir); at != std::string::npos; at = s.find(dir)) {
          s.replace(at, dir.size(), "<dir>");
        }
        return s;
      };
      a = mask(a, (root / "a").string());
      b = mask(b, (root / "b").string());
    }
    if (!fs::exists(root / "b" / rel) || a != b) ++differing;
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  return {failures == 0 && differing == 0 && files > 0,
          "commands=" + std::to_string(steps.size()) + " files_compared=" +
              std::to_string(files) + " differing=" + std::to_string(differing) +
              " failed_commands=" + std::to_string(failures)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::string cli;
  int seeds = 5;
  app.add_option("--cli", cli, "path of the avloc binary for the determinism check");
  app.add_option("--seeds", seeds, "benchmark seeds")->check(CLI::Range(1, 1000));
  CLI11_PARSE(app, argc, argv);

  int failed = 0;
  auto report = [&](const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    if (!o.pass) ++failed;
  };
  auto guarded = [&](const std::string& name, const std::function<Outcome()>& fn) {
    try {
      report(name, fn());
    } catch (const std::exception& e) {
      report(name, {false, std::string("error: ") + e.what()});
    }
  };

  const TrainConfig bench;  // library defaults: 30 + 30 epochs, batch 16, lr 0.05, K 19

  guarded("gradient check", grad_check_criterion);
  guarded("attention oracle parity", attention_parity);
  guarded("mask anchors", mask_anchors);
  guarded("mining invariants and zero-noise precision", [&] { return mining_criterion(bench); });
  guarded("loss anchors", loss_anchors);
  guarded("metric oracle parity", metric_parity);

  std::vector<SeedRun> runs;
  double bench_secs = 0.0;
  std::string bench_error;
  try {
    const auto t0 = Clock::now();
    for (int s = 1; s <= seeds; ++s) {
      runs.push_back(run_seed(static_cast<std::uint64_t>(s), bench));
      const auto& r = runs.back();
      std::cout << "  seed " << s << ": hp=" << num(r.hp) << " vanilla=" << num(r.vanilla)
                << " random_hp=" << num(r.random_hp) << " | K";
      for (std::size_t q = 0; q < kSweep.size(); ++q) {
        std::cout << ' ' << kSweep[q] << ':' << num(r.hp_k[q]) << '/' << num(r.random_k[q]);
      }
      std::cout << std::endl;
    }
    bench_secs = seconds_since(t0);
  } catch (const std::exception& e) {
    bench_error = e.what();
  }

  if (!bench_error.empty()) {
    report("method ordering", {false, "error: " + bench_error});
    report("K sweep trend", {false, "error: " + bench_error});
  } else {
    std::vector<double> hp, van, rnd;
    for (const auto& r : runs) {
      hp.push_back(r.hp);
      van.push_back(r.vanilla);
      rnd.push_back(r.random_hp);
    }
    const double mh = median(hp), mv = median(van), mr = median(rnd);
    report("method ordering",
           {mh > mv && mv > mr && bench_secs < 900.0,
            "median cIoU hp=" + num(mh) + " vanilla=" + num(mv) + " random_hp=" + num(mr) +
                " seeds=" + std::to_string(seeds) + " time=" + num(bench_secs, 4) + "s"});

    const auto i19 = std::find(kSweep.begin(), kSweep.end(), 19) - kSweep.begin();
    const auto i150 = std::find(kSweep.begin(), kSweep.end(), 150) - kSweep.begin();
    int holds = 0;
    for (const auto& r : runs) holds += r.hp_k[i19] >= r.hp_k[i150] ? 1 : 0;
    bool beats = true;
    std::string per_k;
    for (std::size_t q = 0; q < kSweep.size(); ++q) {
      std::vector<double> a, b;
      for (const auto& r : runs) {
        a.push_back(r.hp_k[q]);
        b.push_back(r.random_k[q]);
      }
      const double ma = median(a), mb = median(b);
      beats = beats && ma > mb;
      per_k += " K" + std::to_string(kSweep[q]) + "=" + num(ma) + "/" + num(mb);
    }
    report("K sweep trend",
           {2 * holds > seeds && beats,
            "cIoU(19)>=cIoU(150) in " + std::to_string(holds) + "/" + std::to_string(seeds) +
                " seeds; median hp/random_hp" + per_k});
  }

  guarded("CLI determinism", [&] { return cli_determinism(cli); });

  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
