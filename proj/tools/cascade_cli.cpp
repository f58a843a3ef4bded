// Command-line front end: single episodes, schedule sweeps, disturbance
// comparisons, the flip task and offline keyframe TO.

#include <CLI11.hpp>
#include <iostream>

#include "cascade/ocp/trajectory.hpp"
#include "cascade/sim/experiments.hpp"

using namespace cascade;

namespace {

struct CommonArgs {
  std::string task_config;
  std::string robot;
  double tw = -1, ts = -1, dts = -1, mpc_hz = -1;
  std::string mode;
  long seed = -1;
  std::string out;
  bool lockstep = true;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool need_task = true) {
  auto* opt = cmd->add_option("--task-config", args.task_config, "task config file");
  if (need_task) opt->required();
  cmd->add_option("--robot", args.robot, "robot model file (overrides the task)");
  cmd->add_option("--tw", args.tw, "whole-body horizon T_w [s]");
  cmd->add_option("--ts", args.ts, "SRB tail horizon T_s [s]");
  cmd->add_option("--dt-s", args.dts, "SRB integration step [s]");
  cmd->add_option("--mpc-hz", args.mpc_hz, "MPC update rate [Hz]");
  cmd->add_option("--mode", args.mode, "controller mode: vwbc | riccati | srb_only");
  cmd->add_option("--seed", args.seed, "episode seed");
  cmd->add_option("--out", args.out, "output directory for logs and metrics");
  cmd->add_flag("--lockstep,!--no-lockstep", args.lockstep,
                "single-thread deterministic interleave (default on)");
}

sim::TaskConfig resolve(const CommonArgs& args) {
  sim::TaskConfig task = sim::TaskConfig::load(args.task_config);
  if (!args.robot.empty()) task.robot_path = args.robot;
  if (args.tw > 0) task.schedule.T_w = args.tw;
  if (args.ts >= 0) task.schedule.T_s = args.ts;
  if (args.dts > 0) task.schedule.dt_s = args.dts;
  if (args.mpc_hz > 0) task.mpc_hz = args.mpc_hz;
  if (!args.mode.empty()) task.mode = args.mode;
  task.lockstep = args.lockstep;
  if (args.seed >= 0) task.seed = static_cast<unsigned>(args.seed);
  return task;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid trajectory optimization / MPC toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string ts_list = "0,0.1,0.2,0.3,0.4,0.5";
  std::string dts_list = "0.05";

  auto* sim_cmd = app.add_subcommand("sim", "run one closed-loop episode");
  add_common(sim_cmd, args);

  auto* sweep_cmd = app.add_subcommand("sweep", "model-schedule sweep");
  add_common(sweep_cmd, args);
  sweep_cmd->add_option("--ts-list", ts_list, "comma-separated T_s values");
  sweep_cmd->add_option("--dt-s-list", dts_list, "comma-separated dt_s values");

  auto* disturb_cmd = app.add_subcommand("disturb", "riccati-vs-vwbc push comparison");
  add_common(disturb_cmd, args);

  auto* flip_cmd = app.add_subcommand("flip", "mid-run flip with the SRB-only ablation");
  add_common(flip_cmd, args);

  auto* kf_cmd = app.add_subcommand("keyframe-to", "offline flip reference generation");
  add_common(kf_cmd, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim_cmd->parsed()) {
      auto task = resolve(args);
      auto result = sim::simulate_task(task, args.out);
      std::cout << "episode '" << task.name << "' completed " << result.completed
                << " s, fall=" << (result.fall ? "yes" : "no")
                << ", pitch_rms=" << result.metrics.get("pitch_rms") << "\n";
      return result.fall ? 2 : 0;
    }
    if (sweep_cmd->parsed()) {
      auto task = resolve(args);
      auto rows = sim::run_schedule_sweep(task, parse_list(ts_list), parse_list(dts_list),
                                          args.out);
      std::cout << "T_s dt_s pitch_rms time_per_iter fall\n";
      for (const auto& r : rows)
        std::cout << r.T_s << " " << r.dt_s << " " << r.metrics.get("pitch_rms") << " "
                  << r.metrics.get("solve_time_per_iteration") << " "
                  << r.metrics.get("fall") << "\n";
      return 0;
    }
    if (disturb_cmd->parsed()) {
      auto task = resolve(args);
      auto report = sim::run_disturbance_test(task, args.out);
      std::cout << "riccati: torque_violations=" << report.riccati.get("torque_violation_ticks")
                << " fall=" << report.riccati.get("fall") << "\n";
      std::cout << "vwbc:    torque_violations=" << report.vwbc.get("torque_violation_ticks")
                << " fall=" << report.vwbc.get("fall") << "\n";
      return 0;
    }
    if (flip_cmd->parsed()) {
      auto task = resolve(args);
      auto report = sim::run_flip_task(task, args.out);
      std::cout << "cascade: success=" << report.success
                << " rotation=" << report.max_rotation << "\n";
      std::cout << "srb_only: success=" << report.ablation_success
                << " rotation=" << report.ablation_max_rotation << "\n";
      return report.success ? 0 : 2;
    }
    if (kf_cmd->parsed()) {
      auto task = resolve(args);
      auto tree = sim::load_task_robot(task);
      auto flip = sim::build_flip_reference(tree, task.stand_joints, task.height);
      std::cout << "keyframe TO: " << solver::to_string(flip.report.status)
                << " cost=" << flip.report.final_cost
                << " constraint=" << flip.report.final_constraint << "\n";
      if (!args.out.empty()) {
        std::filesystem::create_directories(args.out);
        ocp::write_trajectory(args.out + "/flip_trajectory.txt", flip.problem, flip.traj);
        flip.report.write(args.out + "/flip_report.txt");
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
