// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hiba/config.hpp"
#include "hiba/data_synth.hpp"
#include "hiba/trainer.hpp"

namespace hiba::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitContract = 1;
inline constexpr int kExitFormat = 2;

/// Every configurable value of every verb, with defaults filled in.
struct ResolvedConfig {
  std::uint64_t seed = 0;

  std::size_t synth_count = 1000;
  GeneratorSpec synth;

  std::string data_path;

  TrainConfig train;
  std::string train_precision = "float";
  std::size_t train_log_every = 50;
  std::string train_resume;

  std::string forecast_checkpoint;
  std::size_t forecast_horizon = 0;  // 0 = shortest head

  std::string eval_checkpoint;
  std::string eval_model = "checkpoint";  // or "seasonal_naive"
  std::size_t eval_horizon = 24;
  std::size_t eval_season = 0;

  std::size_t bench_tokens = 336;
  std::size_t bench_d_model = 64;
  std::size_t bench_layers = 6;
  std::size_t bench_heads_q = 4;
  std::size_t bench_heads_kv = 2;
  std::size_t bench_repeats = 3;

  std::string inspect_path;

  /// Reads every section, applies ablations to the model, rejects unknown keys.
  static ResolvedConfig resolve(const KeyValues& kv, const std::vector<std::string>& ablations);
  [[nodiscard]] KeyValues to_kv() const;
};

struct Invocation {
  std::string verb;
  std::optional<std::filesystem::path> config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::vector<std::string> ablations;
  std::filesystem::path out = "hiba_out";
};

/// Runs one verb. Errors propagate as exceptions.
void run(const Invocation& inv, std::ostream& log);

/// Parses argv, runs, and maps errors to exit codes (0 ok, 1 contract
/// violation or bad usage, 2 I/O or format error).
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hiba::cli
