#pragma once

#include <map>
#include <string>

namespace cascade::sim {

/// Flat metrics record, computed over a completed (or fall-terminated)
/// episode. Values are pure functions of the logs.
struct Metrics {
  std::map<std::string, double> values;
  std::map<int, int> qp_hist_warm;
  std::map<int, int> qp_hist_cold;

  double get(const std::string& key, double fallback = 0.0) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }

  void write_json(const std::string& path) const;
};

}  // namespace cascade::sim
