#include "cascade/mpc/schedule.hpp"

#include <cmath>

namespace cascade::mpc {

namespace {
constexpr double kTimeEps = 1e-9;
}

void ContactSchedule::validate() const {
  if (modes.empty()) throw Error("contact schedule has no modes");
  for (size_t i = 0; i < modes.size(); ++i) {
    if (modes[i].t_end <= modes[i].t_start + kTimeEps)
      throw Error("contact schedule: mode '" + modes[i].name + "' has no duration");
    if (i > 0 && std::abs(modes[i].t_start - modes[i - 1].t_end) > kTimeEps)
      throw Error("contact schedule: modes must be contiguous");
  }
}

const ContactMode& ContactSchedule::mode_at(double t) const {
  double tq = t;
  if (periodic) {
    const double T = period();
    tq = std::fmod(t - start_time(), T);
    if (tq < 0) tq += T;
    tq += start_time();
  }
  for (const auto& m : modes)
    if (tq >= m.t_start - kTimeEps && tq < m.t_end - kTimeEps) return m;
  if (!periodic) {
    if (tq < modes.front().t_start) return modes.front();
    return modes.back();
  }
  return modes.back();
}

std::vector<double> ContactSchedule::transitions_in(double t0, double t1) const {
  std::vector<double> out;
  if (t1 <= t0) return out;
  if (!periodic) {
    for (size_t i = 1; i < modes.size(); ++i) {
      const double tb = modes[i].t_start;
      if (tb > t0 + kTimeEps && tb <= t1 + kTimeEps) out.push_back(tb);
    }
    return out;
  }
  const double T = period();
  // first cycle index whose transitions could fall in the window
  const long first = static_cast<long>(std::floor((t0 - start_time()) / T)) - 1;
  for (long c = first;; ++c) {
    const double base = start_time() + c * T;
    if (base > t1) break;
    for (size_t i = 0; i < modes.size(); ++i) {
      const double tb = base + (modes[i].t_start - start_time());
      if (tb > t0 + kTimeEps && tb <= t1 + kTimeEps) out.push_back(tb);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(),
                        [](double a, double b) { return std::abs(a - b) < kTimeEps; }),
            out.end());
  return out;
}

dyn::ContactSet ContactSchedule::touchdowns_at(double t) const {
  dyn::ContactSet before = contacts_at(t - 1e-6);
  dyn::ContactSet after = contacts_at(t + 1e-6);
  dyn::ContactSet touch = dyn::ContactSet::none(static_cast<int>(after.active.size()));
  for (size_t j = 0; j < after.active.size(); ++j)
    touch.active[j] = after.active[j] && !before.active[j];
  return touch;
}

ContactSchedule make_sequence(const std::vector<std::pair<dyn::ContactSet, double>>& seq,
                              double t0, bool periodic) {
  ContactSchedule s;
  s.periodic = periodic;
  double t = t0;
  for (const auto& [contacts, duration] : seq) {
    ContactMode m;
    m.contacts = contacts;
    m.t_start = t;
    m.t_end = t + duration;
    t = m.t_end;
    s.modes.push_back(std::move(m));
  }
  s.validate();
  return s;
}

ContactSchedule make_gait(const std::string& name, const dyn::KinematicTree& tree,
                          double t0) {
  const int n = tree.num_ees();
  auto both = dyn::ContactSet::all(n);
  auto none = dyn::ContactSet::none(n);
  auto front = dyn::ContactSet::none(n);
  auto hind = dyn::ContactSet::none(n);
  if (n >= 2) {
    front.active[0] = 1;
    hind.active[1] = 1;
  }
  if (name == "stand")
    return make_sequence({{both, 1.0}}, t0, true);
  if (name == "bound")
    return make_sequence({{hind, 0.12}, {none, 0.08}, {front, 0.12}, {none, 0.08}}, t0, true);
  if (name == "pronk")
    return make_sequence({{both, 0.18}, {none, 0.12}}, t0, true);
  if (name == "hop")
    return make_sequence({{both, 0.2}, {none, 0.25}, {both, 0.4}}, t0, false);
  throw Error("unknown gait '" + name + "'");
}

}  // namespace cascade::mpc
