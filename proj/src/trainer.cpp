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

#include "avloc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "avloc/error.hpp"
#include "avloc/rng.hpp"
#include "avloc/textio.hpp"

namespace avloc {

const char* mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kVanilla: return "vanilla";
    case TrainMode::kHardPositive: return "hp";
    case TrainMode::kRandomHardPositive: return "random_hp";
  }
  return "?";
}

std::optional<TrainMode> parse_mode(std::string_view name) {
  if (name == "vanilla") return TrainMode::kVanilla;
  if (name == "hp") return TrainMode::kHardPositive;
  if (name == "random_hp") return TrainMode::kRandomHardPositive;
  return std::nullopt;
}

void TrainConfig::validate() const {
  require(epochs_stage1 >= 0 && epochs_stage2 >= 0, "epochs must be nonnegative");
  require(batch_size >= 3, "batch_size must be at least 3");
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning_rate must be >= 0");
  require(std::isfinite(epsilon), "epsilon must be finite");
  require(tau > 0.0 && std::isfinite(tau), "tau must be positive");
  require(k >= 1, "K must be at least 1");
  require(remine_every >= 0, "remine_every must be nonnegative");
  require(channels >= 1 && patch >= 1, "encoder sizes must be positive");
}

EncoderParams sgd_step(const EncoderParams& params, const EncoderParams& grads,
                       double learning_rate) {
  if (grads.shape != params.shape || grads.values.size() != params.values.size()) {
    fail(ErrorKind::kShapeMismatch, "gradient shape differs from parameters");
  }
  EncoderParams next = params;
  for (std::size_t t = 0; t < next.values.size(); ++t) {
    if (!std::isfinite(grads.values[t])) fail(ErrorKind::kNumeric, "non-finite gradient");
    next.values[t] -= learning_rate * grads.values[t];
  }
  return next;
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int clamp_k(int k, std::size_t n) {
  return std::max(1, std::min<int>(k, static_cast<int>(n) - 1));
}

MiningIndex mine_from(const EncoderParams& params, const Dataset& dataset, int k) {
  return build_index(encode_dataset(params, dataset), clamp_k(k, dataset.size()));
}

TrainResult run_stage(const Dataset& dataset, EncoderParams params, const MiningIndex* index,
                      const TrainConfig& config, int stage, bool hard, int epochs) {
  config.validate();
  params.validate();
  const int n = static_cast<int>(dataset.size());
  require(n >= config.batch_size, "dataset smaller than batch_size");
  if (hard) {
    require(index != nullptr, "hard-positive training needs a mining index");
    require(index->n == n, "mining index was built over a different dataset");
  }
  std::optional<MiningIndex> remined;

  ObjectiveConfig objective{config.epsilon, config.tau, config.stop_grad_mask,
                            hard ? LossKind::kHardPositive : LossKind::kVanilla};
  Rng rng(config.seed);
  TrainResult result;
  std::vector<int> order(n);
  const int batches = n / config.batch_size;
  int step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    if (hard && stage == 2 && config.remine_every > 0 && epoch > 0 &&
        epoch % config.remine_every == 0 && config.mode == TrainMode::kHardPositive) {
      remined = mine_from(params, dataset, config.k);
      index = &*remined;
    }
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<int>(order));
    for (int b = 0; b < batches; ++b) {
      const auto first = order.begin() + static_cast<std::ptrdiff_t>(b) * config.batch_size;
      std::vector<int> batch(first, first + config.batch_size);
      std::vector<AnchorPlan> plan;
      plan.reserve(batch.size());
      for (int i : batch) {
        AnchorPlan a;
        a.anchor = i;
        if (hard) {
          const auto& pa = index->pos_audio[i];
          const auto& pv = index->pos_vision[i];
          a.audio_pos = pa[rng.uniform_int(pa.size())];
          a.vision_pos = pv[rng.uniform_int(pv.size())];
        }
        for (int l : batch) {
          if (l == i) continue;
          if (hard && !index->is_negative(i, l)) continue;
          a.negatives.push_back(l);
        }
        plan.push_back(std::move(a));
      }

      LossAndGrad lg;
      try {
        lg = loss_grad(params, dataset, plan, objective);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kNumeric) throw;
        result.diverged = true;
        result.message = e.what();
      }
      double norm2 = 0.0;
      if (!result.diverged) {
        for (double g : lg.grad.values) norm2 += g * g;
        if (!std::isfinite(lg.loss) || !std::isfinite(norm2)) {
          result.diverged = true;
          result.message = "non-finite loss or gradient";
        }
      }
      if (result.diverged) {
        result.message += " at stage " + std::to_string(stage) + " epoch " +
                          std::to_string(epoch + 1) + " step " + std::to_string(step + 1);
        result.params = std::move(params);
        return result;
      }
      EncoderParams next = sgd_step(params, lg.grad, config.learning_rate);
      bool finite = true;
      for (double v : next.values) finite = finite && std::isfinite(v);
      if (!finite) {
        result.diverged = true;
        result.message = "parameters became non-finite";
        result.params = std::move(params);
        return result;
      }
      params = std::move(next);
      ++step;
      result.log.push_back(TrainLogRecord{stage, epoch + 1, step, lg.loss, std::sqrt(norm2)});
    }
  }
  result.params = std::move(params);
  return result;
}

}  // namespace

std::uint64_t init_seed(std::uint64_t run_seed) { return mix(run_seed ^ 0x1111); }
std::uint64_t random_index_seed(std::uint64_t run_seed) { return mix(run_seed ^ 0x2222); }

TrainResult train_stage1(const Dataset& dataset, const TrainConfig& config,
                         const EncoderParams* init) {
  config.validate();
  dataset.validate();
  EncoderParams params =
      init ? *init
           : init_params(shape_for(dataset, config.channels, config.patch), init_seed(config.seed));
  if (params.shape != shape_for(dataset, params.shape.channels, params.shape.patch)) {
    fail(ErrorKind::kShapeMismatch, "parameters do not fit the dataset");
  }
  return run_stage(dataset, std::move(params), nullptr, config, 1, false, config.epochs_stage1);
}

TrainResult train_stage2(const Dataset& dataset, const EncoderParams& stage1,
                         const MiningIndex* index, const TrainConfig& config) {
  config.validate();
  dataset.validate();
  if (stage1.shape != shape_for(dataset, stage1.shape.channels, stage1.shape.patch)) {
    fail(ErrorKind::kShapeMismatch, "parameters do not fit the dataset");
  }
  const bool hard = config.mode != TrainMode::kVanilla;
  return run_stage(dataset, stage1, hard ? index : nullptr, config, 2, hard,
                   config.epochs_stage2);
}

std::optional<MiningIndex> index_for_mode(const Dataset& dataset, const EncoderParams& params,
                                          const TrainConfig& config) {
  switch (config.mode) {
    case TrainMode::kVanilla:
      return std::nullopt;
    case TrainMode::kHardPositive:
      return mine_from(params, dataset, config.k);
    case TrainMode::kRandomHardPositive:
      return random_index(static_cast<int>(dataset.size()), clamp_k(config.k, dataset.size()),
                          random_index_seed(config.seed));
  }
  return std::nullopt;
}

TrainResult train_full(const Dataset& dataset, const TrainConfig& config,
                       const EncoderParams* stage1, const MiningIndex* index) {
  TrainResult first;
  if (stage1) {
    first.params = *stage1;
  } else {
    first = train_stage1(dataset, config);
    if (first.diverged) return first;
  }
  std::optional<MiningIndex> mined;
  if (!index && config.mode != TrainMode::kVanilla) {
    mined = index_for_mode(dataset, first.params, config);
    index = &*mined;
  }
  TrainResult second = train_stage2(dataset, first.params, index, config);
  first.log.insert(first.log.end(), second.log.begin(), second.log.end());
  second.log = std::move(first.log);
  return second;
}

GradCheckResult grad_check(const EncoderParams& params, const Dataset& dataset,
                           std::span<const AnchorPlan> plan, const ObjectiveConfig& config,
                           double step) {
  GradCheckResult r;
  const LossAndGrad analytic = loss_grad(params, dataset, plan, config);
  // With stop-grad the reference loss keeps the mask of the unperturbed point.
  ObjectiveConfig reference = config;
  if (config.stop_grad_mask) reference.frozen_mask = &params;
  EncoderParams probe = params;
  for (std::size_t t = 0; t < params.values.size(); ++t) {
    probe.values[t] = params.values[t] + step;
    const double up = loss_value(probe, dataset, plan, reference);
    probe.values[t] = params.values[t] - step;
    const double down = loss_value(probe, dataset, plan, reference);
    probe.values[t] = params.values[t];
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.grad.values[t];
    if (!std::isfinite(numeric) || !std::isfinite(a)) {
      r.finite = false;
      continue;
    }
    const double denom = std::max({std::abs(a), std::abs(numeric), 1.0});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > r.max_rel_error || t == 0) {
      r.max_rel_error = std::max(r.max_rel_error, rel);
      r.worst_entry = t;
      r.analytic = a;
      r.numeric = numeric;
    }
  }
  return r;
}

GradCheckInstance make_grad_check_instance(std::uint64_t seed) {
  SynthConfig sc;
  sc.n_samples = 4;
  sc.n_classes = 2;
  sc.image_height = 4;
  sc.image_width = 4;
  sc.audio_height = 2;
  sc.audio_width = 2;
  sc.object_size = 2;
  sc.noise_std = 0.5;
  sc.distractors = 0;
  sc.position_stride = 1;
  sc.seed = seed;
  GradCheckInstance inst;
  inst.dataset = generate(sc);
  EncoderShape shape = shape_for(inst.dataset, 4, 2);
  inst.params = EncoderParams(shape);
  Rng rng(mix(seed ^ 0x3333));
  for (double& v : inst.params.values) v = rng.uniform(-1.0, 1.0);
  const MiningIndex index = random_index(4, 1, mix(seed ^ 0x4444));
  for (int i = 0; i < 4; ++i) {
    inst.plan.push_back(AnchorPlan{i, index.pos_audio[i][0], index.pos_vision[i][0], index.neg[i]});
  }
  return inst;
}

void save_log(const std::vector<TrainLogRecord>& log, const std::filesystem::path& path) {
  auto out = textio::open_out(path);
  out << "stage,epoch,step,loss,grad_norm\n";
  for (const auto& r : log) {
    out << r.stage << ',' << r.epoch << ',' << r.step << ',' << textio::format_real(r.loss)
        << ',' << textio::format_real(r.grad_norm) << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

void save_config_echo(const TrainConfig& c, const std::filesystem::path& path) {
  auto out = textio::open_out(path);
  out << "mode=" << mode_name(c.mode) << '\n'
      << "epochs-stage1=" << c.epochs_stage1 << '\n'
      << "epochs-stage2=" << c.epochs_stage2 << '\n'
      << "batch-size=" << c.batch_size << '\n'
      << "lr=" << textio::format_real(c.learning_rate) << '\n'
      << "epsilon=" << textio::format_real(c.epsilon) << '\n'
      << "tau=" << textio::format_real(c.tau) << '\n'
      << "k=" << c.k << '\n'
      << "seed=" << c.seed << '\n'
      << "stop-grad-mask=" << (c.stop_grad_mask ? "true" : "false") << '\n'
      << "remine-every=" << c.remine_every << '\n'
      << "channels=" << c.channels << '\n'
      << "patch=" << c.patch << '\n';
  if (!out) fail(ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace avloc
