#include "levytrace/config.hpp"

#include <fstream>
#include <sstream>

#include "levytrace/errors.hpp"

namespace levytrace {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\''))) {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

double to_number(const std::string& text, std::string_view section, std::string_view key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (trim(std::string_view(text).substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("[" + std::string(section) + "] " + std::string(key) + ": not a number: '" + text + "'");
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      cfg.data_[section];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    cfg.data_[section][key] = unquote(trim(std::string_view(t).substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse(in, path);
}

bool KeyValueConfig::has(std::string_view section, std::string_view key) const {
  return get(section, key).has_value();
}

std::optional<std::string> KeyValueConfig::get(std::string_view section, std::string_view key) const {
  const auto s = data_.find(section);
  if (s == data_.end()) return std::nullopt;
  const auto k = s->second.find(std::string(key));
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

std::string KeyValueConfig::require(std::string_view section, std::string_view key) const {
  auto v = get(section, key);
  if (!v) throw ConfigError("missing required key [" + std::string(section) + "] " + std::string(key));
  return *v;
}

double KeyValueConfig::number(std::string_view section, std::string_view key) const {
  return to_number(require(section, key), section, key);
}

double KeyValueConfig::number_or(std::string_view section, std::string_view key, double fallback) const {
  const auto v = get(section, key);
  return v ? to_number(*v, section, key) : fallback;
}

long long KeyValueConfig::integer_or(std::string_view section, std::string_view key, long long fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const long long n = std::stoll(*v, &used);
    if (used == v->size()) return n;
  } catch (const std::exception&) {
  }
  throw ConfigError("[" + std::string(section) + "] " + std::string(key) + ": not an integer: '" + *v + "'");
}

bool KeyValueConfig::flag_or(std::string_view section, std::string_view key, bool fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("[" + std::string(section) + "] " + std::string(key) + ": not a boolean: '" + *v + "'");
}

std::vector<double> KeyValueConfig::numbers(std::string_view section, std::string_view key) const {
  std::string text = require(section, key);
  for (char& c : text) {
    if (c == ',' || c == '[' || c == ']') c = ' ';
  }
  std::istringstream in(text);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(to_number(tok, section, key));
  if (out.empty()) throw ConfigError("[" + std::string(section) + "] " + std::string(key) + ": empty list");
  return out;
}

void KeyValueConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  data_[section][key] = value;
}

std::vector<std::string> KeyValueConfig::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : data_) out.push_back(name);
  return out;
}

}  // namespace levytrace
