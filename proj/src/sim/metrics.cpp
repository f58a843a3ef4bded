#include "cascade/sim/metrics.hpp"

#include <fstream>

#include <json.hpp>

#include "cascade/support/error.hpp"

namespace cascade::sim {

void Metrics::write_json(const std::string& path) const {
  nlohmann::json j;
  for (const auto& [k, v] : values) j[k] = v;
  nlohmann::json warm, cold;
  for (const auto& [iters, count] : qp_hist_warm) warm[std::to_string(iters)] = count;
  for (const auto& [iters, count] : qp_hist_cold) cold[std::to_string(iters)] = count;
  j["qp_hist_warm"] = warm;
  j["qp_hist_cold"] = cold;
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

}  // namespace cascade::sim
