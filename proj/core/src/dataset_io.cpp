// SPDX-License-Identifier: Apache-2.0
#include "hiba/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hiba/errors.hpp"

namespace hiba {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out.flush()) throw FormatError("write to '" + path.string() + "' failed");
}

std::size_t observed_count(const Series& s) {
  return static_cast<std::size_t>(std::count(s.observed.begin(), s.observed.end(), 1));
}

json profile_json(const ProfileEntry& e) {
  return json{{"id", e.id},
              {"periodicity_strength", e.profile.periodicity_strength},
              {"trend_strength", e.profile.trend_strength},
              {"noise_level", e.profile.noise_level},
              {"tier", std::string(to_string(e.profile.predictability_tier))},
              {"sampling_weight", e.profile.sampling_weight}};
}

}  // namespace

std::string to_json_line(const Series& series) {
  json j;
  j["id"] = series.id;
  j["freq"] = std::string(to_string(series.frequency));
  j["values"] = series.values;
  if (observed_count(series) != series.length()) {
    std::vector<int> obs(series.observed.begin(), series.observed.end());
    j["observed"] = obs;
  }
  return j.dump();
}

Series parse_json_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("id") || !j.contains("values")) {
    throw FormatError("series object needs \"id\" and \"values\"");
  }
  try {
    std::vector<double> values = j.at("values").get<std::vector<double>>();
    std::vector<std::uint8_t> observed;
    if (j.contains("observed")) {
      for (const auto& v : j.at("observed")) {
        const int o = v.is_boolean() ? static_cast<int>(v.get<bool>()) : v.get<int>();
        if (o != 0 && o != 1) throw FormatError("\"observed\" entries must be 0 or 1");
        observed.push_back(static_cast<std::uint8_t>(o));
      }
    }
    const Frequency freq = parse_frequency(j.value("freq", std::string("none")));
    return make_series(j.at("id").get<std::string>(), std::move(values), std::move(observed), freq);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad series field: ") + e.what());
  } catch (const ContractViolation& e) {
    throw FormatError(e.what());
  }
}

std::vector<Series> read_jsonl(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<Series> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_json_line(line));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const fs::path& path, std::span<const Series> series) {
  std::string text;
  for (const auto& s : series) text += to_json_line(s) + "\n";
  write_text(path, text);
}

std::map<Tier, std::size_t> Manifest::tier_counts() const {
  std::map<Tier, std::size_t> counts{{Tier::high, 0}, {Tier::mid, 0}, {Tier::low, 0}};
  for (const auto& p : profiles) ++counts[p.profile.predictability_tier];
  return counts;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  json j;
  j["files"] = json::array();
  for (const auto& f : manifest.files) {
    json overrides = json::object();
    for (const auto& [id, tier] : f.tier_overrides) overrides[id] = std::string(to_string(tier));
    j["files"].push_back(json{{"path", f.path}, {"tier_overrides", overrides}});
  }
  j["profiles"] = json::array();
  for (const auto& p : manifest.profiles) j["profiles"].push_back(profile_json(p));
  json counts = json::object();
  for (const auto& [tier, n] : manifest.tier_counts()) counts[std::string(to_string(tier))] = n;
  j["tier_counts"] = counts;
  write_text(path, j.dump(2) + "\n");
}

Manifest read_manifest(const fs::path& path) {
  Manifest m;
  try {
    const json j = json::parse(read_text(path));
    for (const auto& f : j.at("files")) {
      ManifestFile mf;
      mf.path = f.at("path").get<std::string>();
      if (f.contains("tier_overrides")) {
        for (const auto& [id, tier] : f.at("tier_overrides").items()) {
          mf.tier_overrides[id] = parse_tier(tier.get<std::string>());
        }
      }
      m.files.push_back(std::move(mf));
    }
    if (j.contains("profiles")) {
      for (const auto& p : j.at("profiles")) {
        ProfileEntry e;
        e.id = p.at("id").get<std::string>();
        e.profile.periodicity_strength = p.at("periodicity_strength").get<double>();
        e.profile.trend_strength = p.at("trend_strength").get<double>();
        e.profile.noise_level = p.at("noise_level").get<double>();
        e.profile.predictability_tier = parse_tier(p.at("tier").get<std::string>());
        e.profile.sampling_weight = p.value("sampling_weight", 0.0);
        m.profiles.push_back(std::move(e));
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad manifest: " + e.what());
  } catch (const ContractViolation& e) {
    throw FormatError(path.string() + ": bad manifest: " + e.what());
  }
  return m;
}

std::vector<ProfileEntry> profile_corpus(std::span<const Series> series,
                                         const std::map<std::string, Tier>& overrides) {
  std::vector<ProfileEntry> out;
  out.reserve(series.size());
  for (const auto& s : series) {
    ProfileEntry e{s.id, {}};
    if (observed_count(s) >= 16) e.profile = score_predictability(s);
    if (const auto it = overrides.find(s.id); it != overrides.end()) {
      e.profile.predictability_tier = it->second;
    }
    out.push_back(e);
  }
  std::vector<QualityProfile> profiles;
  for (const auto& e : out) profiles.push_back(e.profile);
  assign_sampling_weights(profiles);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].profile.sampling_weight = profiles[i].sampling_weight;
  return out;
}

Corpus load_corpus(const fs::path& path) {
  Corpus corpus;
  if (path.extension() == ".jsonl") {
    corpus.series = read_jsonl(path);
    for (const auto& e : profile_corpus(corpus.series)) corpus.tiers.push_back(e.profile.predictability_tier);
    return corpus;
  }
  const Manifest m = read_manifest(path);
  std::map<std::string, Tier> recorded;
  for (const auto& p : m.profiles) recorded[p.id] = p.profile.predictability_tier;
  for (const auto& f : m.files) {
    auto series = read_jsonl(path.parent_path() / f.path);
    for (auto& s : series) {
      Tier tier;
      if (const auto it = f.tier_overrides.find(s.id); it != f.tier_overrides.end()) {
        tier = it->second;
      } else if (const auto rt = recorded.find(s.id); rt != recorded.end()) {
        tier = rt->second;
      } else {
        tier = observed_count(s) >= 16 ? score_predictability(s).predictability_tier : Tier::mid;
      }
      corpus.tiers.push_back(tier);
      corpus.series.push_back(std::move(s));
    }
  }
  return corpus;
}

}  // namespace hiba
