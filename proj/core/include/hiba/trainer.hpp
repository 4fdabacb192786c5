// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hiba/config.hpp"
#include "hiba/data_synth.hpp"
#include "hiba/model.hpp"
#include "hiba/random.hpp"

namespace hiba {

struct TrainConfig {
  double lr_init = 1e-4;
  double warmup_ratio = 0.01;
  std::size_t total_steps = 1000;
  std::size_t batch_size = 16;
  double grad_clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double augment_prob = 0.0;
  std::uint64_t seed = 0;
  ModelConfig model = ModelConfig::desk();

  void validate() const;
  [[nodiscard]] std::size_t warmup_steps() const;
  /// Keys "train.*" plus "model.*".
  static TrainConfig from_kv(const KeyValues& kv, TrainConfig base);
  static TrainConfig from_kv(const KeyValues& kv) { return from_kv(kv, TrainConfig{}); }
  void to_kv(KeyValues& kv) const;
  [[nodiscard]] std::string serialize() const;
};

/// Linear warmup from 0 to lr_init over ceil(warmup_ratio * total_steps)
/// steps, then cosine decay to 0.01 * lr_init at total_steps.
double lr_schedule(std::size_t step, const TrainConfig& config);

template <typename T>
struct AdamMoments {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

/// Everything a run needs to continue: parameters, optimizer moments, step
/// counter and the data stream's generator.
template <typename T>
struct TrainState {
  explicit TrainState(TrainConfig config);

  TrainConfig config;
  Model<T> model;
  AdamMoments<T> moments;
  std::uint64_t step = 0;
  CounterRng rng;
};

struct StepMetrics {
  std::uint64_t step = 0;  // 1-based index of the update just applied
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
  double lr = 0.0;
};

/// Tokenizes windows against the model's context and builds their target timelines.
template <typename T>
void prepare_batch(const Model<T>& model, std::span<const TrainingWindow> batch,
                   std::vector<PatchedInput>& inputs, std::vector<TargetTimeline>& timelines);

/// Forward, backward, global-norm clip, Adam update. Update number s uses
/// lr_schedule(s + 1). Throws NumericError on a non-finite loss or gradient.
template <typename T>
StepMetrics train_step(TrainState<T>& state, std::span<const TrainingWindow> batch);

/// Scales `grads` in place so their global L2 norm is at most max_norm;
/// returns the norm before scaling.
template <typename T>
double clip_global_norm(std::vector<std::span<T>>& grads, double max_norm);

using StepCallback = std::function<void(const StepMetrics&)>;

/// Runs steps until state.step == until_step (or config.total_steps).
/// Batch for step s is stream.batch(s, batch_size).
template <typename T>
std::vector<StepMetrics> train(TrainState<T>& state, const BatchStream& stream,
                               std::uint64_t until_step, const StepCallback& on_step = {});

std::string metrics_json(const StepMetrics& m);

extern template struct TrainState<float>;
extern template struct TrainState<double>;

}  // namespace hiba
