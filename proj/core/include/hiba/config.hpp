// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace hiba {

/// Flat `key = value` configuration text. `#` starts a comment, `[section]`
/// prefixes following keys with `section.`, lists are `[a, b, c]`, strings may
/// be quoted. Lookups record which keys were consumed so unknown keys can be
/// rejected.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, std::string_view source = "<text>");
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  /// Applies a `key=value` override.
  void apply_override(std::string_view assignment);
  void merge(const KeyValues& other);

  [[nodiscard]] bool has(const std::string& key) const { return values_.contains(key); }
  [[nodiscard]] const std::map<std::string, std::string>& entries() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::size_t> get_sizes(const std::string& key,
                                     const std::vector<std::size_t>& fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  /// Keys present but never read through a getter.
  [[nodiscard]] std::vector<std::string> unconsumed() const;
  /// Throws ContractViolation listing unconsumed keys.
  void reject_unknown(std::string_view context) const;

  /// Canonical text: sorted `key = value` lines.
  [[nodiscard]] std::string serialize() const;

 private:
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

std::string format_list(const std::vector<std::size_t>& values);
std::string format_list(const std::vector<double>& values);
std::string format_double(double v);

}  // namespace hiba
