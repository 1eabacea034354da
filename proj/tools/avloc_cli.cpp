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


// avloc command-line front end. Every subcommand is a thin wrapper over the
// C API in avloc/avloc.h.
//
// Exit codes: 0 success, 2 bad flags or invalid configuration, 3 file
// errors (missing, unreadable or malformed input, unwritable output),
// 4 numeric failure (divergence, non-finite values, grad-check over
// tolerance), 1 anything else.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "avloc/avloc.h"

namespace {

constexpr int kExitOther = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct Failure {
  int code;
  std::string message;
};

int exit_code(avloc_status s) {
  switch (s) {
    case AVLOC_OK: return 0;
    case AVLOC_ERR_INVALID_ARGUMENT: return kExitUsage;
    case AVLOC_ERR_IO:
    case AVLOC_ERR_MALFORMED_HEADER:
    case AVLOC_ERR_SHAPE_MISMATCH:
    case AVLOC_ERR_TRUNCATED_PAYLOAD: return kExitIo;
    case AVLOC_ERR_NUMERIC: return kExitNumeric;
    case AVLOC_ERR_INTERNAL: return kExitOther;
  }
  return kExitOther;
}

void check(avloc_status s) {
  if (s != AVLOC_OK) {
    throw Failure{exit_code(s), std::string(avloc_status_string(s)) + ": " + avloc_last_error()};
  }
}

// Owning wrappers for the opaque handles.
template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Dataset = std::unique_ptr<avloc_dataset, Deleter<avloc_dataset, avloc_dataset_free>>;
using Params = std::unique_ptr<avloc_params, Deleter<avloc_params, avloc_params_free>>;
using Features = std::unique_ptr<avloc_features, Deleter<avloc_features, avloc_features_free>>;
using Index = std::unique_ptr<avloc_index, Deleter<avloc_index, avloc_index_free>>;
using Log = std::unique_ptr<avloc_train_log, Deleter<avloc_train_log, avloc_train_log_free>>;
using Report = std::unique_ptr<avloc_report, Deleter<avloc_report, avloc_report_free>>;
using Table = std::unique_ptr<avloc_table, Deleter<avloc_table, avloc_table_free>>;

Dataset load_dataset(const std::string& dir) {
  avloc_dataset* d = nullptr;
  check(avloc_dataset_load(dir.c_str(), &d));
  return Dataset(d);
}

Params load_params(const std::string& path) {
  avloc_params* p = nullptr;
  check(avloc_params_load(path.c_str(), &p));
  return Params(p);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Flags shared by every command that trains.
struct TrainFlags {
  avloc_train_config config{};
  std::string mode = "hp";

  TrainFlags() { avloc_train_config_default(&config); }

  void attach(CLI::App* app, bool with_mode) {
    auto& c = config;
    if (with_mode) {
      app->add_option("--mode", mode, "vanilla, hp or random_hp")->capture_default_str();
    }
    app->add_option("--epochs-stage1", c.epochs_stage1, "stage-1 epochs")->capture_default_str();
    app->add_option("--epochs-stage2", c.epochs_stage2, "stage-2 epochs")->capture_default_str();
    app->add_option("--batch-size", c.batch_size, "minibatch size")->capture_default_str();
    app->add_option("--lr", c.learning_rate, "SGD learning rate")->capture_default_str();
    app->add_option("--epsilon", c.epsilon, "mask threshold")->capture_default_str();
    app->add_option("--tau", c.tau, "mask temperature")->capture_default_str();
    app->add_option("--seed", c.seed, "run seed")->capture_default_str();
    app->add_option("--remine-every", c.remine_every, "stage-2 epochs between re-mining, 0 = never")
        ->capture_default_str();
    app->add_option("--channels", c.channels, "embedding channels")->capture_default_str();
    app->add_option("--patch", c.patch, "vision patch size")->capture_default_str();
    app->add_flag("--stop-grad-mask", stop_grad_mask, "treat the pseudo-mask as a constant");
  }

  avloc_train_config resolve() {
    check(avloc_mode_parse(mode.c_str(), &config.mode));
    config.stop_grad_mask = stop_grad_mask ? 1 : 0;
    return config;
  }

  bool stop_grad_mask = false;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int parse_int(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Failure{kExitUsage, std::string("invalid ") + what + " '" + s + "'"};
}

// Reads `key=value` lines; `#` starts a comment. Keys are flag names without
// the leading dashes.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{kExitIo, "cannot open config file '" + path + "'"};
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Failure{kExitUsage, path + ":" + std::to_string(lineno) + ": expected key=value"};
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      return s.substr(a, s.find_last_not_of(" \t") - a + 1);
    };
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return entries;
}

int run(int argc, char** argv) {
  CLI::App app{"avloc: audio-visual localization with hard positives"};
  app.require_subcommand(1);
  std::string config_path;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset dump");
  avloc_synth_config synth{};
  avloc_synth_config_default(&synth);
  int image_size = synth.image_height, audio_size = synth.audio_height;
  std::string gen_out, gen_features, gen_params;
  gen->add_option("--n", synth.n_samples, "number of samples")->capture_default_str();
  gen->add_option("--classes", synth.n_classes, "number of classes")->capture_default_str();
  gen->add_option("--image-size", image_size, "square image side")->capture_default_str();
  gen->add_option("--audio-size", audio_size, "square audio grid side")->capture_default_str();
  gen->add_option("--object-size", synth.object_size, "object side in pixels")->capture_default_str();
  gen->add_option("--noise", synth.noise_std, "noise standard deviation")->capture_default_str();
  gen->add_option("--distractors", synth.distractors, "silent objects per image")
      ->capture_default_str();
  gen->add_option("--distractor-size", synth.distractor_size, "distractor side, 0 = object size")
      ->capture_default_str();
  gen->add_option("--texture-period", synth.texture_period, "class texture tile side")
      ->capture_default_str();
  gen->add_option("--position-stride", synth.position_stride, "object placement grid")
      ->capture_default_str();
  gen->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->required();
  auto* gen_params_opt =
      gen->add_option("--params", gen_params, "encoder parameters for --features");
  gen->add_option("--features", gen_features, "also write encoded features here")
      ->needs(gen_params_opt);

  // train
  auto* train = app.add_subcommand("train", "two-stage training");
  TrainFlags train_flags;
  train_flags.attach(train, true);
  std::string train_data, train_out, train_log, train_init, train_index;
  train->add_option("--k", train_flags.config.k, "mined positives per modality")
      ->capture_default_str();
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "output parameter file")->required();
  train->add_option("--log", train_log, "training log CSV");
  train->add_option("--init", train_init, "stage-1 parameters; skips stage 1");
  train->add_option("--index", train_index, "mining index CSV used instead of mining");

  // mine
  auto* mine = app.add_subcommand("mine", "build a mining index");
  std::string mine_data, mine_params, mine_features, mine_out;
  int mine_k = train_flags.config.k;
  std::uint64_t mine_seed = 0;
  bool mine_random = false;
  mine->add_option("--data", mine_data, "dataset directory (with --params, or for precision)");
  mine->add_option("--params", mine_params, "encoder parameters");
  mine->add_option("--features", mine_features, "precomputed feature file");
  mine->add_option("--k", mine_k, "positives per modality")->capture_default_str();
  mine->add_flag("--random", mine_random, "draw positives uniformly instead of mining");
  mine->add_option("--seed", mine_seed, "seed for --random")->capture_default_str();
  mine->add_option("--out", mine_out, "index CSV")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "localization metrics");
  avloc_eval_protocol protocol{};
  avloc_eval_protocol_default(&protocol);
  std::string eval_params, eval_data, eval_features, eval_boxes, eval_out;
  int eval_h = 0, eval_w = 0;
  eval->add_option("--params", eval_params, "encoder parameters (with --data)");
  eval->add_option("--data", eval_data, "dataset directory");
  eval->add_option("--features", eval_features, "precomputed feature file (with --boxes)");
  eval->add_option("--boxes", eval_boxes, "ground-truth boxes CSV");
  eval->add_option("--image-height", eval_h, "image height for --features");
  eval->add_option("--image-width", eval_w, "image width for --features");
  eval->add_option("--binarize-threshold", protocol.binarize_threshold)->capture_default_str();
  eval->add_option("--success-threshold", protocol.success_threshold)->capture_default_str();
  eval->add_option("--out", eval_out, "report CSV");

  // ablate-k
  auto* ablate = app.add_subcommand("ablate-k", "sweep the number of mined positives");
  TrainFlags ablate_flags;
  ablate_flags.attach(ablate, false);
  std::string ablate_data, ablate_eval, ablate_init, ablate_out, ablate_ks = "2,19,60,150";
  ablate->add_option("--k", ablate_ks, "comma-separated K values")->capture_default_str();
  ablate->add_option("--data", ablate_data, "training dataset directory")->required();
  ablate->add_option("--eval-data", ablate_eval, "evaluation dataset directory")->required();
  ablate->add_option("--init", ablate_init, "shared stage-1 parameters");
  ablate->add_option("--out", ablate_out, "sweep CSV")->required();

  // compare
  auto* compare = app.add_subcommand("compare", "compare training modes");
  TrainFlags compare_flags;
  compare_flags.attach(compare, false);
  std::string compare_data, compare_eval, compare_init, compare_out;
  std::string compare_modes = "hp,vanilla,random_hp";
  compare->add_option("--k", compare_flags.config.k, "mined positives per modality")
      ->capture_default_str();
  compare->add_option("--modes", compare_modes, "comma-separated modes")->capture_default_str();
  compare->add_option("--data", compare_data, "training dataset directory")->required();
  compare->add_option("--eval-data", compare_eval, "evaluation dataset directory")->required();
  compare->add_option("--init", compare_init, "shared stage-1 parameters");
  compare->add_option("--out", compare_out, "comparison CSV")->required();

  // export-maps
  auto* maps = app.add_subcommand("export-maps", "write response maps as PGM images");
  std::string maps_params, maps_data, maps_ids = "1", maps_out;
  bool maps_cross = false;
  maps->add_option("--params", maps_params, "encoder parameters")->required();
  maps->add_option("--data", maps_data, "dataset directory")->required();
  maps->add_option("--ids", maps_ids, "comma-separated sample ids")->capture_default_str();
  maps->add_flag("--cross", maps_cross, "all audio/image pairs among --ids");
  maps->add_option("--out", maps_out, "output directory")->required();

  // grad-check
  auto* grad = app.add_subcommand("grad-check", "compare analytic and numeric gradients");
  std::string grad_seeds = "1..20";
  double grad_tol = 1e-4;
  bool grad_stop = false;
  std::string grad_out;
  grad->add_option("--seed", grad_seeds, "seed or inclusive range a..b")->capture_default_str();
  grad->add_option("--tolerance", grad_tol, "maximum accepted relative error")
      ->capture_default_str();
  grad->add_flag("--stop-grad-mask", grad_stop, "treat the pseudo-mask as a constant");
  grad->add_option("--out", grad_out, "write the per-seed report here as well");

  for (CLI::App* sub : {gen, train, mine, eval, ablate, compare, maps, grad}) {
    sub->add_option("--config", config_path,
                    "key=value file (# comments); command-line flags take precedence");
  }

  // Config-file entries become flags unless the command line already sets them.
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (!config_path.empty()) {
    CLI::App* sub = app.get_subcommands().front();
    std::vector<std::string> extra;
    for (const auto& [key, value] : read_config(config_path)) {
      const CLI::Option* opt = sub->get_option_no_throw("--" + key);
      if (opt == nullptr) throw Failure{kExitUsage, "unknown config key '" + key + "'"};
      if (opt->count() == 0) extra.push_back("--" + key + "=" + value);
    }
    if (!extra.empty()) {
      std::vector<std::string> rebuilt = args;
      rebuilt.insert(rebuilt.end(), extra.begin(), extra.end());
      std::reverse(rebuilt.begin(), rebuilt.end());
      app.clear();
      try {
        app.parse(rebuilt);
      } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
      }
    }
  }

  if (gen->parsed()) {
    synth.image_height = synth.image_width = image_size;
    synth.audio_height = synth.audio_width = audio_size;
    avloc_dataset* raw = nullptr;
    check(avloc_dataset_generate(&synth, &raw));
    Dataset ds(raw);
    Params params = gen_params.empty() ? Params() : load_params(gen_params);
    check(avloc_dataset_save(ds.get(), gen_out.c_str()));
    if (!gen_features.empty()) {
      avloc_features* f = nullptr;
      check(avloc_features_encode(params.get(), ds.get(), &f));
      Features feats(f);
      check(avloc_features_save(feats.get(), gen_features.c_str()));
    }
    std::cout << "wrote " << avloc_dataset_size(ds.get()) << " samples to " << gen_out << '\n';
    return 0;
  }

  if (train->parsed()) {
    const auto cfg = train_flags.resolve();
    auto ds = load_dataset(train_data);
    Params init = train_init.empty() ? Params() : load_params(train_init);
    Index index;
    if (!train_index.empty()) {
      avloc_index* ix = nullptr;
      check(avloc_index_load(train_index.c_str(), &ix));
      index.reset(ix);
    }
    avloc_params* out = nullptr;
    avloc_train_log* log = nullptr;
    const avloc_status status =
        avloc_train_full(ds.get(), &cfg, init.get(), index.get(), &out, &log);
    const std::string message = avloc_last_error();
    Params params(out);
    Log records(log);
    if (params) check(avloc_params_save(params.get(), train_out.c_str()));
    check(avloc_train_config_save(&cfg, (train_out + ".config").c_str()));
    if (records && !train_log.empty()) check(avloc_train_log_save(records.get(), train_log.c_str()));
    if (status != AVLOC_OK) throw Failure{exit_code(status), message};
    avloc_log_record last{};
    const std::size_t n = avloc_train_log_size(records.get());
    if (n > 0) check(avloc_train_log_get(records.get(), n - 1, &last));
    const char* source = cfg.mode == AVLOC_MODE_VANILLA ? "none"
                         : index                        ? "file"
                         : cfg.mode == AVLOC_MODE_HP    ? "mined"
                                                        : "random";
    std::cout << "mode=" << avloc_mode_name(cfg.mode) << " index=" << source << " steps=" << n
              << " final_loss=" << fmt(last.loss) << '\n';
    return 0;
  }

  if (mine->parsed()) {
    Dataset ds = mine_data.empty() ? Dataset() : load_dataset(mine_data);
    avloc_index* ix = nullptr;
    if (mine_random) {
      int n = 0;
      if (ds) {
        n = avloc_dataset_size(ds.get());
      } else if (!mine_features.empty()) {
        avloc_features* f = nullptr;
        check(avloc_features_load(mine_features.c_str(), &f));
        n = avloc_features_size(Features(f).get());
      } else {
        throw Failure{kExitUsage, "--random needs --data or --features for the sample count"};
      }
      check(avloc_index_random(n, mine_k, mine_seed, &ix));
    } else {
      Features feats;
      avloc_features* f = nullptr;
      if (!mine_features.empty()) {
        check(avloc_features_load(mine_features.c_str(), &f));
      } else if (!mine_params.empty() && ds) {
        auto params = load_params(mine_params);
        check(avloc_features_encode(params.get(), ds.get(), &f));
      } else {
        throw Failure{kExitUsage, "mine needs --features, or --params with --data"};
      }
      feats.reset(f);
      check(avloc_index_build(feats.get(), mine_k, &ix));
    }
    Index index(ix);
    check(avloc_index_save(index.get(), mine_out.c_str()));
    if (ds) {
      double precision = 0.0;
      check(avloc_index_precision(index.get(), ds.get(), &precision));
      std::cout << "precision=" << fmt(precision) << '\n';
    }
    return 0;
  }

  if (eval->parsed()) {
    avloc_report* r = nullptr;
    if (!eval_features.empty()) {
      if (eval_boxes.empty() || eval_h <= 0 || eval_w <= 0) {
        throw Failure{kExitUsage, "--features needs --boxes, --image-height and --image-width"};
      }
      avloc_features* f = nullptr;
      check(avloc_features_load(eval_features.c_str(), &f));
      Features feats(f);
      check(avloc_evaluate_features(feats.get(), eval_boxes.c_str(), eval_h, eval_w, &protocol,
                                    &r));
    } else if (!eval_params.empty() && !eval_data.empty()) {
      auto params = load_params(eval_params);
      auto ds = load_dataset(eval_data);
      check(avloc_evaluate(params.get(), ds.get(), &protocol, &r));
    } else {
      throw Failure{kExitUsage, "eval needs --params with --data, or --features with --boxes"};
    }
    Report report(r);
    if (!eval_out.empty()) check(avloc_report_save(report.get(), eval_out.c_str()));
    std::cout << "n=" << avloc_report_size(report.get())
              << " ciou=" << fmt(avloc_report_ciou(report.get()))
              << " auc=" << fmt(avloc_report_auc(report.get())) << '\n';
    return 0;
  }

  auto print_table = [](const avloc_table* t) {
    for (std::size_t i = 0; i < avloc_table_size(t); ++i) {
      const char* label = nullptr;
      double ciou = 0, auc = 0;
      check(avloc_table_get(t, i, &label, &ciou, &auc));
      std::cout << label << " ciou=" << fmt(ciou) << " auc=" << fmt(auc) << '\n';
    }
  };

  if (ablate->parsed()) {
    auto cfg = ablate_flags.resolve();
    cfg.mode = AVLOC_MODE_HP;
    std::vector<int> ks;
    for (const auto& item : split_list(ablate_ks)) ks.push_back(parse_int(item, "K"));
    if (ks.empty()) throw Failure{kExitUsage, "--k needs at least one value"};
    auto train_ds = load_dataset(ablate_data);
    auto eval_ds = load_dataset(ablate_eval);
    Params init = ablate_init.empty() ? Params() : load_params(ablate_init);
    avloc_table* t = nullptr;
    check(avloc_ablate_k(train_ds.get(), eval_ds.get(), &cfg, ks.data(), ks.size(), init.get(),
                         &t));
    Table table(t);
    check(avloc_table_save(table.get(), ablate_out.c_str()));
    print_table(table.get());
    return 0;
  }

  if (compare->parsed()) {
    const auto cfg = compare_flags.resolve();
    std::vector<avloc_mode> modes;
    for (const auto& name : split_list(compare_modes)) {
      avloc_mode m{};
      check(avloc_mode_parse(name.c_str(), &m));
      modes.push_back(m);
    }
    if (modes.empty()) throw Failure{kExitUsage, "--modes needs at least one mode"};
    auto train_ds = load_dataset(compare_data);
    auto eval_ds = load_dataset(compare_eval);
    Params init = compare_init.empty() ? Params() : load_params(compare_init);
    avloc_table* t = nullptr;
    check(avloc_compare(train_ds.get(), eval_ds.get(), &cfg, modes.data(), modes.size(),
                        init.get(), &t));
    Table table(t);
    check(avloc_table_save(table.get(), compare_out.c_str()));
    print_table(table.get());
    return 0;
  }

  if (maps->parsed()) {
    std::vector<int> ids;
    for (const auto& item : split_list(maps_ids)) ids.push_back(parse_int(item, "sample id"));
    auto params = load_params(maps_params);
    auto ds = load_dataset(maps_data);
    check(avloc_export_maps(params.get(), ds.get(), ids.data(), ids.size(), maps_cross ? 1 : 0,
                            maps_out.c_str()));
    std::cout << "wrote " << (maps_cross ? ids.size() * ids.size() : ids.size())
              << " maps to " << maps_out << '\n';
    return 0;
  }

  if (grad->parsed()) {
    long long first = 0, last = 0;
    if (const auto dots = grad_seeds.find(".."); dots != std::string::npos) {
      first = parse_int(grad_seeds.substr(0, dots), "seed");
      last = parse_int(grad_seeds.substr(dots + 2), "seed");
    } else {
      first = last = parse_int(grad_seeds, "seed");
    }
    if (first < 0 || last < first) throw Failure{kExitUsage, "invalid seed range " + grad_seeds};
    std::ostringstream report;
    double worst = 0.0;
    for (long long s = first; s <= last; ++s) {
      avloc_grad_check_result r{};
      check(avloc_grad_check(static_cast<std::uint64_t>(s), grad_stop ? 1 : 0, &r));
      char line[160];
      std::snprintf(line, sizeof line, "seed=%lld max_rel_err=%.3e entry=%zu\n", s,
                    r.max_rel_error, r.worst_entry);
      report << line;
      worst = std::max(worst, r.max_rel_error);
    }
    char summary[96];
    std::snprintf(summary, sizeof summary, "max_rel_err=%.3e %s\n", worst,
                  worst < grad_tol ? "PASS" : "FAIL");
    report << summary;
    std::cout << report.str();
    if (!grad_out.empty()) {
      std::ofstream out(grad_out);
      out << report.str();
      if (!out) throw Failure{kExitIo, "cannot write '" + grad_out + "'"};
    }
    return worst < grad_tol ? 0 : kExitNumeric;
  }
  return kExitOther;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Failure& f) {
    std::cerr << "avloc: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "avloc: " << e.what() << '\n';
    return kExitOther;
  }
}
