#pragma once

#include <optional>

#include "cascade/sim/episode.hpp"

namespace cascade::sim {

/// Episode description loaded from a task config file.
struct TaskConfig {
  std::string name = "task";
  std::string robot_path;
  std::string gait = "stand";
  std::string mode = "vwbc";
  double vx = 0.0;
  double height = 0.2926;
  std::vector<double> stand_joints;
  mpc::ModelSchedule schedule;
  double mpc_hz = 33.3333;
  double duration = 5.0;
  double lead_in = 0.4;  // standing segment before the gait engages
  double sim_dt = 1e-3;
  double ctrl_dt = 2e-3;
  bool lockstep = true;
  unsigned seed = 0;
  bool flip = false;
  double stance_time = -1.0;  // custom gait timings when > 0
  double foothold_clamp = 0.15;
  double capture_gain = 0.06;
  double flight_time = -1.0;

  std::vector<Disturbance> disturbances;

  // optional overrides of the cost/build defaults
  std::optional<std::vector<double>> w_q, w_qd, r_tau;
  std::optional<double> w_foot_pos, w_foot_vel, r_grf;
  std::optional<double> interior_terminal_scale, final_terminal_scale;
  std::optional<double> reb_weight, al_penalty;
  std::optional<double> first_solve_cost_tol;
  std::optional<int> step_max_iters;
  std::optional<double> mpc_wall_cap;  // seconds; enables the wall clock

  std::string source_path;

  static TaskConfig load(const std::string& path);
};

/// Resolves the task into runnable episode options (loads the robot, builds
/// the gait schedule and the heuristic reference, applies overrides).
EpisodeOptions make_episode_options(const TaskConfig& task);

dyn::KinematicTree load_task_robot(const TaskConfig& task);

}  // namespace cascade::sim
