// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hiba/trainer.hpp"

namespace hiba {

inline constexpr char kCheckpointMagic[8] = {'H', 'I', 'B', 'A', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout (all integers little-endian):
///   magic[8] | u32 version | u32 value bytes (4 or 8)
///   u64 len | config text
///   u64 step | u64 rng key | u64 rng counter
///   u64 tensor count, then per tensor: u32 name len | name | u32 ndim | u64 dims[ndim] | values
///   per tensor: adam m values | adam v values
///   u32 crc32 of everything above
template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const TrainState<T>& state);

/// Parses into a fresh state; throws FormatError on any mismatch without
/// touching existing state.
template <typename T>
TrainState<T> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const TrainState<T>& state);

template <typename T>
TrainState<T> load_checkpoint(const std::filesystem::path& path);

/// Value width recorded in a checkpoint header (4 or 8).
std::uint32_t checkpoint_value_bytes(const std::filesystem::path& path);

}  // namespace hiba
