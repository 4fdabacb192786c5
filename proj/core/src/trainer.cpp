// SPDX-License-Identifier: Apache-2.0
#include "hiba/trainer.hpp"

#include <cmath>
#include <numbers>
#include <nlohmann/json.hpp>

#include "hiba/errors.hpp"

namespace hiba {

void TrainConfig::validate() const {
  require(lr_init > 0.0, "train: lr_init must be > 0");
  require(warmup_ratio >= 0.0 && warmup_ratio < 1.0, "train: warmup_ratio must be in [0, 1)");
  require(batch_size >= 1, "train: batch_size must be >= 1");
  require(grad_clip_norm > 0.0, "train: grad_clip_norm must be > 0");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "train: betas must be in [0, 1)");
  require(adam_eps > 0.0, "train: adam_eps must be > 0");
  require(augment_prob >= 0.0 && augment_prob <= 1.0, "train: augment_prob must be in [0, 1]");
  model.validate();
}

std::size_t TrainConfig::warmup_steps() const {
  return static_cast<std::size_t>(std::ceil(warmup_ratio * static_cast<double>(total_steps)));
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv, TrainConfig c) {
  c.lr_init = kv.get_double("train.lr_init", c.lr_init);
  c.warmup_ratio = kv.get_double("train.warmup_ratio", c.warmup_ratio);
  c.total_steps = kv.get_uint("train.total_steps", c.total_steps);
  c.batch_size = kv.get_uint("train.batch_size", c.batch_size);
  c.grad_clip_norm = kv.get_double("train.grad_clip_norm", c.grad_clip_norm);
  c.beta1 = kv.get_double("train.beta1", c.beta1);
  c.beta2 = kv.get_double("train.beta2", c.beta2);
  c.adam_eps = kv.get_double("train.adam_eps", c.adam_eps);
  c.augment_prob = kv.get_double("train.augment_prob", c.augment_prob);
  c.seed = kv.get_uint("train.seed", c.seed);
  c.model = ModelConfig::from_kv(kv, "model.", c.model);
  c.validate();
  return c;
}

void TrainConfig::to_kv(KeyValues& kv) const {
  kv.set("train.lr_init", format_double(lr_init));
  kv.set("train.warmup_ratio", format_double(warmup_ratio));
  kv.set("train.total_steps", std::to_string(total_steps));
  kv.set("train.batch_size", std::to_string(batch_size));
  kv.set("train.grad_clip_norm", format_double(grad_clip_norm));
  kv.set("train.beta1", format_double(beta1));
  kv.set("train.beta2", format_double(beta2));
  kv.set("train.adam_eps", format_double(adam_eps));
  kv.set("train.augment_prob", format_double(augment_prob));
  kv.set("train.seed", std::to_string(seed));
  model.to_kv(kv, "model.");
}

std::string TrainConfig::serialize() const {
  KeyValues kv;
  to_kv(kv);
  return kv.serialize();
}

double lr_schedule(std::size_t step, const TrainConfig& config) {
  require(step <= config.total_steps, "lr_schedule: step beyond total_steps");
  const std::size_t warmup = config.warmup_steps();
  if (step < warmup) {
    return config.lr_init * static_cast<double>(step) / static_cast<double>(warmup);
  }
  const double floor = 0.01 * config.lr_init;
  const std::size_t span = config.total_steps - warmup;
  if (span == 0) return config.lr_init;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(span);
  return floor + (config.lr_init - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
TrainState<T>::TrainState(TrainConfig cfg)
    : config((cfg.validate(), std::move(cfg))), model(config.model, config.seed), rng(config.seed) {
  for (const auto& [name, p] : model.parameters()) {
    moments.m.emplace_back(p.numel(), T(0));
    moments.v.emplace_back(p.numel(), T(0));
  }
}

template <typename T>
void prepare_batch(const Model<T>& model, std::span<const TrainingWindow> batch,
                   std::vector<PatchedInput>& inputs, std::vector<TargetTimeline>& timelines) {
  inputs.clear();
  timelines.clear();
  for (const auto& w : batch) {
    inputs.push_back(model.prepare(w.context));
    timelines.push_back(make_timeline(inputs.back(), w.future, w.future_observed));
  }
}

template <typename T>
double clip_global_norm(std::vector<std::span<T>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (const T x : g) sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grads) {
      for (T& x : g) x = static_cast<T>(static_cast<double>(x) * scale);
    }
  }
  return norm;
}

template <typename T>
StepMetrics train_step(TrainState<T>& state, std::span<const TrainingWindow> batch) {
  require(!batch.empty(), "train_step: empty batch");
  const TrainConfig& cfg = state.config;
  require(state.step < cfg.total_steps, "train_step: run already finished");

  std::vector<PatchedInput> inputs;
  std::vector<TargetTimeline> timelines;
  prepare_batch(state.model, batch, inputs, timelines);

  auto params = state.model.parameters();
  for (auto& [name, p] : params) p.zero_grad();
  const auto loss = state.model.loss(inputs, timelines);
  const double loss_value = static_cast<double>(loss.item());
  if (!std::isfinite(loss_value)) {
    throw NumericError("train step " + std::to_string(state.step + 1) + ": non-finite loss");
  }
  loss.backward();

  std::vector<std::span<T>> grads;
  for (auto& [name, p] : params) grads.push_back(p.mutable_grad());
  const double norm = clip_global_norm(grads, cfg.grad_clip_norm);
  if (!std::isfinite(norm)) {
    throw NumericError("train step " + std::to_string(state.step + 1) + ": non-finite gradient norm");
  }

  const std::uint64_t t = state.step + 1;
  const double lr = lr_schedule(t, cfg);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].second.mutable_data();
    auto& m = state.moments.m[i];
    auto& v = state.moments.v[i];
    const auto g = grads[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = static_cast<double>(g[j]);
      const double mj = cfg.beta1 * static_cast<double>(m[j]) + (1.0 - cfg.beta1) * gj;
      const double vj = cfg.beta2 * static_cast<double>(v[j]) + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg.adam_eps);
      w[j] = static_cast<T>(static_cast<double>(w[j]) - update);
    }
  }
  state.step = t;
  return StepMetrics{t, loss_value, norm, lr};
}

template <typename T>
std::vector<StepMetrics> train(TrainState<T>& state, const BatchStream& stream,
                               std::uint64_t until_step, const StepCallback& on_step) {
  const std::uint64_t end = std::min<std::uint64_t>(until_step, state.config.total_steps);
  std::vector<StepMetrics> log;
  while (state.step < end) {
    const auto batch = stream.batch(state.step, state.config.batch_size);
    log.push_back(train_step(state, batch));
    if (on_step) on_step(log.back());
  }
  return log;
}

std::string metrics_json(const StepMetrics& m) {
  return nlohmann::json{{"step", m.step}, {"loss", m.loss}, {"grad_norm", m.grad_norm}, {"lr", m.lr}}
      .dump();
}

#define HIBA_INSTANTIATE_TRAINER(T)                                                            \
  template struct TrainState<T>;                                                               \
  template void prepare_batch(const Model<T>&, std::span<const TrainingWindow>,               \
                              std::vector<PatchedInput>&, std::vector<TargetTimeline>&);       \
  template double clip_global_norm(std::vector<std::span<T>>&, double);                        \
  template StepMetrics train_step(TrainState<T>&, std::span<const TrainingWindow>);            \
  template std::vector<StepMetrics> train(TrainState<T>&, const BatchStream&, std::uint64_t,   \
                                          const StepCallback&);

HIBA_INSTANTIATE_TRAINER(float)
HIBA_INSTANTIATE_TRAINER(double)

}  // namespace hiba
