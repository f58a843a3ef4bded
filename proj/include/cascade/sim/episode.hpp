#pragma once

#include "cascade/mpc/controller.hpp"
#include "cascade/sim/metrics.hpp"
#include "cascade/sim/world.hpp"
#include "cascade/wbc/vwbc.hpp"

namespace cascade::sim {

enum class ControlMode { Vwbc, Riccati, SrbOnly };

ControlMode parse_mode(const std::string& name);

struct EpisodeOptions {
  dyn::KinematicTree tree;
  mpc::ContactSchedule contacts;
  mpc::ReferenceTrajectory reference;
  mpc::MpcSettings mpc;
  ControlMode mode = ControlMode::Vwbc;

  double duration = 5.0;
  double sim_dt = 1e-3;
  double ctrl_dt = 2e-3;
  double mpc_period = 0.03;
  bool lockstep = true;

  VectorXd x_init;
  double stand_height = 0.2926;
  double ground_height = 0.0;
  std::vector<Disturbance> disturbances;

  double fall_height_fraction = 0.4;
  double fall_pitch = 1.2;

  wbc::VwbcSettings vwbc;
  bool compare_cold_qp = true;
  mpc::ReferenceProvider reference_provider;  // optional per-step regeneration

  // template-MPC ablation (SrbOnly): joint servo gains
  double servo_kp = 60.0;
  double servo_kd = 2.0;

  std::string out_dir;  // when set, columnar logs + metrics.json are written
  unsigned seed = 0;
};

struct EpisodeResult {
  Metrics metrics;
  bool fall = false;
  double fall_time = 0.0;
  double completed = 0.0;  // simulated seconds
};

/// Runs one closed-loop episode: simulation at sim_dt, controller at ctrl_dt,
/// MPC at mpc_period. Lockstep mode runs the three loops in one thread in a
/// fixed interleave (bitwise reproducible); otherwise the MPC runs in its own
/// thread connected through latest-value mailboxes.
EpisodeResult run_episode(const EpisodeOptions& options);

}  // namespace cascade::sim
