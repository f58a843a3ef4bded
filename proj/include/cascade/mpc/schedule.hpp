#pragma once

#include <string>
#include <vector>

#include "cascade/dynamics/tree.hpp"

namespace cascade::mpc {

/// Horizon/resolution schedule: a whole-body segment of length T_w at step
/// dt_w followed by a single-rigid-body tail of length T_s at step dt_s.
struct ModelSchedule {
  double T_w = 0.25;
  double T_s = 0.0;
  double dt_w = 0.01;
  double dt_s = 0.05;

  int wb_steps() const { return static_cast<int>(std::lround(T_w / dt_w)); }
  int srb_steps() const { return T_s > 0 ? static_cast<int>(std::lround(T_s / dt_s)) : 0; }

  void validate() const {
    if (T_w <= 0 || dt_w <= 0 || T_s < 0 || dt_s <= 0)
      throw Error("model schedule: T_w > 0, T_s >= 0, dt > 0 required");
    auto divides = [](double T, double dt) {
      double steps = T / dt;
      return std::abs(steps - std::lround(steps)) < 1e-9;
    };
    if (!divides(T_w, dt_w))
      throw Error("model schedule: dt_w must divide T_w");
    if (T_s > 0 && !divides(T_s, dt_s))
      throw Error("model schedule: dt_s must divide T_s");
  }
};

/// One contact mode: per-leg stance flags over [t_start, t_end).
struct ContactMode {
  dyn::ContactSet contacts;
  double t_start = 0.0;
  double t_end = 0.0;
  std::string name;
};

/// Time-driven contact schedule; periodic schedules repeat their mode cycle.
struct ContactSchedule {
  std::vector<ContactMode> modes;
  bool periodic = false;

  double start_time() const { return modes.front().t_start; }
  double cycle_end() const { return modes.back().t_end; }
  double period() const { return cycle_end() - start_time(); }

  void validate() const;

  /// Active contacts at time t (half-open intervals [start, end)).
  const ContactMode& mode_at(double t) const;
  dyn::ContactSet contacts_at(double t) const { return mode_at(t).contacts; }

  /// Mode-change times in the open-closed window (t0, t1].
  std::vector<double> transitions_in(double t0, double t1) const;

  /// End effectors that newly enter stance at transition time t.
  dyn::ContactSet touchdowns_at(double t) const;
};

/// Builds a named gait for a tree (planar: 2 legs, order front, hind).
/// Names: stand, bound, pronk, hop.
ContactSchedule make_gait(const std::string& name, const dyn::KinematicTree& tree,
                          double t0 = 0.0);

/// A schedule from an explicit (mode flags, duration) sequence.
ContactSchedule make_sequence(const std::vector<std::pair<dyn::ContactSet, double>>& seq,
                              double t0, bool periodic);

}  // namespace cascade::mpc
