#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace levytrace {

/// Plain-text sectioned key-value configuration:
///
///   # comment
///   [section]
///   key = value
///
/// Keys before the first section header belong to section "".
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& origin = "<config>");
  static KeyValueConfig load(const std::string& path);

  bool has(std::string_view section, std::string_view key) const;
  std::optional<std::string> get(std::string_view section, std::string_view key) const;
  std::string require(std::string_view section, std::string_view key) const;

  double number(std::string_view section, std::string_view key) const;
  double number_or(std::string_view section, std::string_view key, double fallback) const;
  long long integer_or(std::string_view section, std::string_view key, long long fallback) const;
  bool flag_or(std::string_view section, std::string_view key, bool fallback) const;
  /// Comma- or whitespace-separated list of numbers.
  std::vector<double> numbers(std::string_view section, std::string_view key) const;

  void set(const std::string& section, const std::string& key, const std::string& value);
  std::vector<std::string> sections() const;

 private:
  std::map<std::string, std::map<std::string, std::string>, std::less<>> data_;
  std::string origin_;
};

}  // namespace levytrace
