// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hiba/data_synth.hpp"
#include "hiba/tokenizer.hpp"

namespace hiba {

/// One JSON object per line: {"id", "freq", "values", "observed"?}.
std::string to_json_line(const Series& series);
Series parse_json_line(std::string_view line);

std::vector<Series> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, std::span<const Series> series);

struct ManifestFile {
  std::string path;  // relative to the manifest's directory
  std::map<std::string, Tier> tier_overrides;
};

struct ProfileEntry {
  std::string id;
  QualityProfile profile;
};

/// Corpus manifest: files, per-file tier overrides, and the recorded profiles.
struct Manifest {
  std::vector<ManifestFile> files;
  std::vector<ProfileEntry> profiles;

  [[nodiscard]] std::map<Tier, std::size_t> tier_counts() const;
};

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

/// Profiles every series; overrides replace the scored tier.
std::vector<ProfileEntry> profile_corpus(std::span<const Series> series,
                                         const std::map<std::string, Tier>& overrides = {});

struct Corpus {
  std::vector<Series> series;
  std::vector<Tier> tiers;
};

/// Loads a manifest (JSON) or a bare JSONL file. Tiers come from overrides,
/// then recorded profiles, then fresh scoring.
Corpus load_corpus(const std::filesystem::path& path);

}  // namespace hiba
