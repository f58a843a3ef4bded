#pragma once

#include "cascade/mpc/keyframe.hpp"
#include "cascade/sim/task.hpp"

namespace cascade::sim {

/// One episode from a task config; logs land in out_dir when set.
EpisodeResult simulate_task(const TaskConfig& task, const std::string& out_dir = "");

struct SweepRow {
  double T_s = 0.0;
  double dt_s = 0.0;
  Metrics metrics;
};

/// One episode per (T_s, dt_s) pair; falls are recorded, the sweep continues.
/// Writes a table mirroring the tracking-vs-horizon and time-vs-horizon axes.
std::vector<SweepRow> run_schedule_sweep(const TaskConfig& base,
                                         const std::vector<double>& ts_values,
                                         const std::vector<double>& dts_values,
                                         const std::string& out_dir = "");

struct DisturbanceReport {
  Metrics riccati;
  Metrics vwbc;
};

/// Two episodes differing only in controller mode, with the configured push.
DisturbanceReport run_disturbance_test(const TaskConfig& task,
                                       const std::string& out_dir = "");

struct FlipReport {
  Metrics controller;  // cascaded MPC
  Metrics ablation;    // SRB-only template MPC
  double max_rotation = 0.0;
  double ablation_max_rotation = 0.0;
  bool success = false;           // full rotation, landing, gait resumed
  bool ablation_success = false;  // expected to fail
  double flight_parabola_residual = 0.0;  // offline TO flight-phase fit
  double keyframe_rotation_rate = 0.0;
};

/// Offline flip TO + composed reference (gait, flip, recovery, gait) run in
/// closed loop, plus the template-MPC ablation on the same task.
FlipReport run_flip_task(const TaskConfig& task, const std::string& out_dir = "");

/// The offline flip reference alone (cached by run_flip_task).
mpc::KeyframeResult build_flip_reference(const dyn::KinematicTree& tree,
                                         const std::vector<double>& stand_joints,
                                         double stand_height);

}  // namespace cascade::sim
