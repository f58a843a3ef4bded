#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cascade {

/// One parsed `key = value` entry. Values are scalars, arrays of scalars,
/// or bare strings; the source line is kept for error reporting.
struct ConfigValue {
  std::string raw;
  std::vector<double> numbers;  // filled when the value parses as numeric
  bool is_numeric = false;
  bool is_array = false;
  int line = 0;
};

/// A named block of key/value pairs, e.g. `[link] ...` in a model file.
struct ConfigSection {
  std::string name;
  int line = 0;
  std::map<std::string, ConfigValue> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  std::vector<double> array(const std::string& key) const;
  std::vector<double> array(const std::string& key,
                            const std::vector<double>& fallback) const;
  std::string text(const std::string& key) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const;

  std::string file;  // owning file, for error messages
};

/// Parsed structured text file: global keys plus ordered sections.
///
/// Grammar (line oriented):
///   key = value            value: number | [a, b, c] | text
///   [section]              starts a new section record
///   # ...                  comment (also allowed after a value)
struct ConfigFile {
  std::string path;
  ConfigSection globals;
  std::vector<ConfigSection> sections;

  std::vector<const ConfigSection*> all(const std::string& name) const;
};

ConfigFile parse_config_file(const std::string& path);
ConfigFile parse_config_text(const std::string& text, const std::string& path);

}  // namespace cascade
