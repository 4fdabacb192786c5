// SPDX-License-Identifier: Apache-2.0
#include "hiba/config.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "hiba/errors.hpp"

namespace hiba {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\''))) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

// Strips a trailing comment that is not inside quotes.
std::string strip_comment(std::string_view line) {
  bool quoted = false;
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == quote) quoted = false;
    } else if (c == '"' || c == '\'') {
      quoted = true;
      quote = c;
    } else if (c == '#') {
      return std::string(line.substr(0, i));
    }
  }
  return std::string(line);
}

std::vector<std::string> split_list(const std::string& raw, const std::string& key) {
  std::string s = trim(raw);
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<std::string> items;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = unquote(trim(item));
    if (!item.empty()) items.push_back(item);
  }
  if (items.empty() && !trim(s).empty()) {
    throw ContractViolation("config key '" + key + "': cannot parse list '" + raw + "'");
  }
  return items;
}

template <typename N>
N parse_number(const std::string& text, const std::string& key) {
  N value{};
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ContractViolation("config key '" + key + "': '" + text + "' is not a valid number");
  }
  return value;
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text, std::string_view source) {
  KeyValues kv;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[' && body.back() == ']' && body.find('=') == std::string::npos) {
      section = trim(body.substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw FormatError(std::string(source) + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    std::string key = trim(body.substr(0, eq));
    if (key.empty()) {
      throw FormatError(std::string(source) + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!section.empty()) key = section + "." + key;
    kv.values_[key] = unquote(trim(body.substr(eq + 1)));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void KeyValues::set(const std::string& key, std::string value) { values_[key] = std::move(value); }

void KeyValues::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || trim(assignment.substr(0, eq)).empty()) {
    throw ContractViolation("override '" + std::string(assignment) + "' is not key=value");
  }
  set(trim(assignment.substr(0, eq)), unquote(trim(assignment.substr(eq + 1))));
}

void KeyValues::merge(const KeyValues& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

const std::string* KeyValues::find(const std::string& key) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  const auto* v = find(key);
  return v ? *v : fallback;
}

std::int64_t KeyValues::get_int(const std::string& key, std::int64_t fallback) const {
  const auto* v = find(key);
  return v ? parse_number<std::int64_t>(*v, key) : fallback;
}

std::uint64_t KeyValues::get_uint(const std::string& key, std::uint64_t fallback) const {
  const auto* v = find(key);
  return v ? parse_number<std::uint64_t>(*v, key) : fallback;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  const auto* v = find(key);
  return v ? parse_number<double>(*v, key) : fallback;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ContractViolation("config key '" + key + "': '" + *v + "' is not a boolean");
}

std::vector<std::size_t> KeyValues::get_sizes(const std::string& key,
                                              const std::vector<std::size_t>& fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::vector<std::size_t> out;
  for (const auto& item : split_list(*v, key)) out.push_back(parse_number<std::size_t>(item, key));
  return out;
}

std::vector<double> KeyValues::get_doubles(const std::string& key,
                                           const std::vector<double>& fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(*v, key)) out.push_back(parse_number<double>(item, key));
  return out;
}

std::vector<std::string> KeyValues::unconsumed() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!consumed_.contains(k)) out.push_back(k);
  }
  return out;
}

void KeyValues::reject_unknown(std::string_view context) const {
  const auto unknown = unconsumed();
  if (unknown.empty()) return;
  std::string msg = std::string(context) + ": unknown config key(s):";
  for (const auto& k : unknown) msg += " " + k;
  throw ContractViolation(msg);
}

std::string KeyValues::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

std::string format_list(const std::vector<std::size_t>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + std::to_string(values[i]);
  return out + "]";
}

std::string format_list(const std::vector<double>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + format_double(values[i]);
  return out + "]";
}

}  // namespace hiba
