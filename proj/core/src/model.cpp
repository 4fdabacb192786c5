// SPDX-License-Identifier: Apache-2.0
#include "hiba/model.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "hiba/errors.hpp"

namespace hiba {

ModelConfig ModelConfig::tiny() { return ModelConfig{}; }

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.context_length = 168;
  c.d_model = 32;
  c.d_ff = 128;
  c.num_layers = 6;
  c.heads_q = 4;
  c.heads_kv = 2;
  c.horizons = {24, 48};
  return c;
}

BlockSchedule ModelConfig::schedule() const {
  if (uniform_block_size) return BlockSchedule{{uniform_block_size}};
  return BlockSchedule{block_sizes};
}

std::size_t ModelConfig::tokens() const {
  const std::size_t n = (context_length + patch_size - 1) / patch_size;
  const std::size_t m = schedule().lcm();
  return (n + m - 1) / m * m;
}

BlockToggles ModelConfig::toggles() const {
  return BlockToggles{standard_attention, causal_intra, prenorm};
}

std::vector<std::size_t> ModelConfig::active_heads() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < horizons.size(); ++k) {
    if (head_set.empty() ||
        std::find(head_set.begin(), head_set.end(), horizons[k]) != head_set.end()) {
      out.push_back(k);
    }
  }
  return out;
}

void ModelConfig::validate() const {
  require(patch_size >= 1, "model: patch_size must be >= 1");
  require(context_length >= 1, "model: context_length must be >= 1");
  require(d_model >= 2 && d_ff >= 1, "model: dimensions must be positive");
  require(heads_q >= 1 && heads_kv >= 1 && heads_q % heads_kv == 0,
          "model: heads_q must be divisible by heads_kv");
  require(d_model % heads_q == 0 && (d_model / heads_q) % 2 == 0,
          "model: d_model / heads_q must be an even head dimension");
  schedule().validate();
  validate_heads(horizons, quantiles);
  for (const auto h : head_set) {
    require(std::find(horizons.begin(), horizons.end(), h) != horizons.end(),
            "model: head_set entry " + std::to_string(h) + " is not one of the horizons");
  }
  require(!active_heads().empty(), "model: no active heads");
}

ModelConfig ModelConfig::from_kv(const KeyValues& kv, const std::string& prefix, ModelConfig c) {
  const auto key = [&](const char* name) { return prefix + name; };
  c.patch_size = kv.get_uint(key("patch_size"), c.patch_size);
  c.context_length = kv.get_uint(key("context_length"), c.context_length);
  c.d_model = kv.get_uint(key("d_model"), c.d_model);
  c.d_ff = kv.get_uint(key("d_ff"), c.d_ff);
  c.embed_hidden = kv.get_uint(key("embed_hidden"), c.embed_hidden);
  c.num_layers = kv.get_uint(key("num_layers"), c.num_layers);
  c.block_sizes = kv.get_sizes(key("block_sizes"), c.block_sizes);
  c.heads_q = kv.get_uint(key("heads_q"), c.heads_q);
  c.heads_kv = kv.get_uint(key("heads_kv"), c.heads_kv);
  c.horizons = kv.get_sizes(key("horizons"), c.horizons);
  c.quantiles = kv.get_doubles(key("quantiles"), c.quantiles);
  c.rope_base = kv.get_double(key("rope_base"), c.rope_base);
  c.standard_attention = kv.get_bool(key("standard_attention"), c.standard_attention);
  c.causal_intra = kv.get_bool(key("causal_intra"), c.causal_intra);
  c.prenorm = kv.get_bool(key("prenorm"), c.prenorm);
  c.uniform_block_size = kv.get_uint(key("uniform_block_size"), c.uniform_block_size);
  c.head_set = kv.get_sizes(key("head_set"), c.head_set);
  c.validate();
  return c;
}

void ModelConfig::to_kv(KeyValues& kv, const std::string& prefix) const {
  kv.set(prefix + "patch_size", std::to_string(patch_size));
  kv.set(prefix + "context_length", std::to_string(context_length));
  kv.set(prefix + "d_model", std::to_string(d_model));
  kv.set(prefix + "d_ff", std::to_string(d_ff));
  kv.set(prefix + "embed_hidden", std::to_string(embed_hidden));
  kv.set(prefix + "num_layers", std::to_string(num_layers));
  kv.set(prefix + "block_sizes", format_list(block_sizes));
  kv.set(prefix + "heads_q", std::to_string(heads_q));
  kv.set(prefix + "heads_kv", std::to_string(heads_kv));
  kv.set(prefix + "horizons", format_list(horizons));
  kv.set(prefix + "quantiles", format_list(quantiles));
  kv.set(prefix + "rope_base", format_double(rope_base));
  kv.set(prefix + "standard_attention", standard_attention ? "true" : "false");
  kv.set(prefix + "causal_intra", causal_intra ? "true" : "false");
  kv.set(prefix + "prenorm", prenorm ? "true" : "false");
  kv.set(prefix + "uniform_block_size", std::to_string(uniform_block_size));
  kv.set(prefix + "head_set", format_list(head_set));
}

std::string ModelConfig::describe() const {
  std::ostringstream os;
  os << "layers=" << num_layers << " d=" << d_model << " d_ff=" << d_ff
     << " heads=(" << heads_q << "," << heads_kv << ") patch=" << patch_size
     << " context=" << context_length << " tokens=" << tokens() << " attention=";
  if (standard_attention) {
    os << "dense_causal+dense_causal";
  } else {
    os << (causal_intra ? "intra_causal" : "intra_noncausal") << "+inter_strided_causal";
  }
  os << " schedule=" << format_list(schedule().sizes) << " norm=" << (prenorm ? "pre" : "post")
     << " horizons=" << format_list(horizons);
  std::vector<std::size_t> active;
  for (auto k : active_heads()) active.push_back(horizons[k]);
  os << " active_heads=" << format_list(active);
  return os.str();
}

void apply_ablation(ModelConfig& config, std::string_view name) {
  const auto eq = name.find('=');
  const std::string_view key = name.substr(0, eq);
  std::size_t arg = 0;
  if (eq != std::string_view::npos) {
    const auto text = name.substr(eq + 1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), arg);
    require(ec == std::errc{} && ptr == text.data() + text.size(),
            "ablation '" + std::string(name) + "': bad argument");
  }
  if (key == "standard_attention") {
    config.standard_attention = true;
  } else if (key == "causal_intra") {
    config.causal_intra = true;
  } else if (key == "uniform_block_size") {
    config.uniform_block_size = arg ? arg : 3;
  } else if (key == "single_head") {
    config.head_set = {arg ? arg : config.horizons.front()};
  } else if (key == "prenorm") {
    config.prenorm = true;
  } else {
    throw ContractViolation("unknown ablation '" + std::string(name) + "'");
  }
  config.validate();
}

template <typename T>
Model<T>::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const CounterRng root(seed);
  CounterRng rng = root.split(1);
  embedding = EmbedParams<T>::init(rng, config_.patch_size, config_.embed_width(), config_.d_model);
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    CounterRng layer_rng = root.split(100 + l);
    layers.push_back(HibaParams<T>::init(layer_rng, config_.d_model, config_.d_ff, config_.heads_q,
                                         config_.heads_kv));
    layers.back().intra_attn.rope_base = config_.rope_base;
    layers.back().inter_attn.rope_base = config_.rope_base;
  }
  CounterRng head_rng = root.split(2);
  heads = HeadParams<T>::init(head_rng, config_.d_model, config_.horizons, config_.quantiles);
}

template <typename T>
nn::ParamList<T> Model<T>::parameters() const {
  nn::ParamList<T> out;
  embedding.collect("embed", out);
  for (std::size_t l = 0; l < layers.size(); ++l) layers[l].collect("layer" + std::to_string(l), out);
  heads.collect("head", out);
  return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  return nn::parameter_count(parameters());
}

template <typename T>
PatchedInput Model<T>::prepare(const Series& context) const {
  const std::size_t t = context.length();
  require(t >= 1, "model: empty context");
  Series cropped = context;
  if (t > config_.context_length) {
    const auto drop = static_cast<long>(t - config_.context_length);
    cropped.values.erase(cropped.values.begin(), cropped.values.begin() + drop);
    cropped.observed.erase(cropped.observed.begin(), cropped.observed.begin() + drop);
  }
  return tokenize(cropped, config_.patch_size, config_.schedule().lcm(), config_.tokens());
}

template <typename T>
ad::Tensor<T> Model<T>::encode(std::span<const PatchedInput> inputs, PairCounter* counter) const {
  require(!inputs.empty(), "model: empty batch");
  const std::size_t n = inputs[0].n;
  for (const auto& in : inputs) require(in.n == n, "model: batch inputs differ in token count");
  const auto h0 = hiba::embed(embed_features<T>(inputs), embedding);
  return hiba_forward<T>(h0, layers, inputs.size(), n, config_.schedule(), config_.toggles(),
                         counter);
}

template <typename T>
ad::Tensor<T> Model<T>::loss(std::span<const PatchedInput> inputs,
                             std::span<const TargetTimeline> timelines) const {
  require(inputs.size() == timelines.size(), "model: one target timeline per input required");
  const auto hidden = encode(inputs);
  std::vector<ad::Tensor<T>> losses;
  for (const auto k : config_.active_heads()) {
    std::vector<double> targets;
    std::vector<std::uint8_t> valid;
    for (const auto& tl : timelines) append_head_targets(tl, config_.horizons[k], targets, valid);
    losses.push_back(quantile_loss(head_output(hidden, heads, k), targets, valid,
                                   config_.quantiles));
  }
  return total_loss<T>(losses);
}

template <typename T>
std::size_t Model<T>::route_horizon(std::size_t horizon) const {
  require(horizon >= 1, "forecast: horizon must be >= 1");
  for (const auto k : config_.active_heads()) {
    if (config_.horizons[k] >= horizon) return k;
  }
  throw ContractViolation("forecast: horizon " + std::to_string(horizon) +
                          " exceeds the longest head horizon");
}

template <typename T>
QuantileForecast Model<T>::forecast(const Series& context, std::size_t horizon) const {
  const std::size_t k = route_horizon(horizon);
  const PatchedInput input = prepare(context);
  ad::NoGradGuard no_grad;
  const auto hidden = encode(std::span<const PatchedInput>(&input, 1));
  const auto last = ad::slice(hidden, 0, input.n - 1, 1);
  const auto raw = head_output(last, heads, k);
  std::vector<double> row(raw.data().begin(), raw.data().end());
  return make_forecast(row, config_.horizons[k], horizon, config_.quantiles, input.mu, input.sigma,
                       input.n - 1);
}

template class Model<float>;
template class Model<double>;

}  // namespace hiba
