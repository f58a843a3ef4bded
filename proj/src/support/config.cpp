#include "cascade/support/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cascade/support/error.hpp"

namespace cascade {

namespace {

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

bool parse_number(const std::string& s, double& out) {
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end != begin && strip(std::string(end)).empty();
}

ConfigValue parse_value(const std::string& file, int line, std::string text) {
  ConfigValue v;
  v.line = line;
  text = strip(text);
  v.raw = text;
  if (text.empty()) throw ModelError(file, line, "empty value");
  if (text.front() == '[') {
    if (text.back() != ']')
      throw ModelError(file, line, "unterminated array value");
    v.is_array = true;
    v.is_numeric = true;
    std::string inner = text.substr(1, text.size() - 2);
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = strip(item);
      if (item.empty()) continue;
      double d;
      if (!parse_number(item, d))
        throw ModelError(file, line, "bad array element '" + item + "'");
      v.numbers.push_back(d);
    }
    return v;
  }
  double d;
  if (parse_number(text, d)) {
    v.is_numeric = true;
    v.numbers.push_back(d);
  }
  return v;
}

}  // namespace

double ConfigSection::number(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end())
    throw ModelError(file, line, "missing key '" + key + "' in [" + name + "]");
  if (!it->second.is_numeric || it->second.is_array)
    throw ModelError(file, it->second.line, "key '" + key + "' is not a number");
  return it->second.numbers[0];
}

double ConfigSection::number(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::vector<double> ConfigSection::array(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end())
    throw ModelError(file, line, "missing key '" + key + "' in [" + name + "]");
  if (!it->second.is_numeric)
    throw ModelError(file, it->second.line, "key '" + key + "' is not numeric");
  return it->second.numbers;
}

std::vector<double> ConfigSection::array(
    const std::string& key, const std::vector<double>& fallback) const {
  return has(key) ? array(key) : fallback;
}

std::string ConfigSection::text(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end())
    throw ModelError(file, line, "missing key '" + key + "' in [" + name + "]");
  return it->second.raw;
}

std::string ConfigSection::text(const std::string& key,
                                const std::string& fallback) const {
  return has(key) ? text(key) : fallback;
}

bool ConfigSection::flag(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  std::string t = text(key);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  fail(key, "expected a boolean (true/false)");
}

void ConfigSection::fail(const std::string& key, const std::string& msg) const {
  int l = line;
  auto it = values.find(key);
  if (it != values.end()) l = it->second.line;
  throw ModelError(file, l, "key '" + key + "': " + msg);
}

std::vector<const ConfigSection*> ConfigFile::all(
    const std::string& name) const {
  std::vector<const ConfigSection*> out;
  for (const auto& s : sections)
    if (s.name == name) out.push_back(&s);
  return out;
}

ConfigFile parse_config_text(const std::string& text, const std::string& path) {
  ConfigFile cfg;
  cfg.path = path;
  cfg.globals.name = "globals";
  cfg.globals.file = path;
  ConfigSection* current = &cfg.globals;

  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ModelError(path, lineno, "unterminated section header");
      std::string name = strip(line.substr(1, line.size() - 2));
      if (name.empty()) throw ModelError(path, lineno, "empty section name");
      cfg.sections.push_back({});
      cfg.sections.back().name = name;
      cfg.sections.back().line = lineno;
      cfg.sections.back().file = path;
      current = &cfg.sections.back();
      continue;
    }

    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ModelError(path, lineno, "expected 'key = value'");
    std::string key = strip(line.substr(0, eq));
    if (key.empty()) throw ModelError(path, lineno, "empty key");
    if (current->values.count(key))
      throw ModelError(path, lineno, "duplicate key '" + key + "'");
    current->values[key] = parse_value(path, lineno, line.substr(eq + 1));
  }
  return cfg;
}

ConfigFile parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path);
}

}  // namespace cascade
