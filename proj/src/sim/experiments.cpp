#include "cascade/sim/experiments.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>

#include "cascade/dynamics/kinematics.hpp"
#include "cascade/mpc/keyframe.hpp"

namespace cascade::sim {

using mpc::ReferenceTrajectory;

EpisodeResult simulate_task(const TaskConfig& task, const std::string& out_dir) {
  EpisodeOptions opt = make_episode_options(task);
  opt.out_dir = out_dir;
  return run_episode(opt);
}

std::vector<SweepRow> run_schedule_sweep(const TaskConfig& base,
                                         const std::vector<double>& ts_values,
                                         const std::vector<double>& dts_values,
                                         const std::string& out_dir) {
  std::vector<SweepRow> rows;
  for (double dts : dts_values) {
    for (double ts : ts_values) {
      TaskConfig task = base;
      task.schedule.T_s = ts;
      task.schedule.dt_s = dts;
      // snap T_s onto the dt_s grid
      if (ts > 0) task.schedule.T_s = std::max(1.0, std::round(ts / dts)) * dts;
      SweepRow row;
      row.T_s = task.schedule.T_s;
      row.dt_s = dts;
      std::string dir;
      if (!out_dir.empty()) {
        dir = out_dir + "/sweep_ts" + std::to_string(row.T_s) + "_dts" +
              std::to_string(dts);
      }
      row.metrics = simulate_task(task, dir).metrics;
      rows.push_back(std::move(row));
    }
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream table(out_dir + "/sweep.txt");
    table << "# T_s dt_s pitch_rms pitch_rate_rms solve_time_per_iter ls_per_solve fall\n";
    table << std::setprecision(8);
    for (const auto& r : rows)
      table << r.T_s << " " << r.dt_s << " " << r.metrics.get("pitch_rms") << " "
            << r.metrics.get("pitch_rate_rms") << " "
            << r.metrics.get("solve_time_per_iteration") << " "
            << r.metrics.get("ls_trials_per_solve") << " " << r.metrics.get("fall")
            << "\n";
  }
  return rows;
}

DisturbanceReport run_disturbance_test(const TaskConfig& task, const std::string& out_dir) {
  DisturbanceReport report;
  TaskConfig riccati = task;
  riccati.mode = "riccati";
  TaskConfig vwbc = task;
  vwbc.mode = "vwbc";
  report.riccati =
      simulate_task(riccati, out_dir.empty() ? "" : out_dir + "/riccati").metrics;
  report.vwbc = simulate_task(vwbc, out_dir.empty() ? "" : out_dir + "/vwbc").metrics;
  if (!out_dir.empty()) {
    std::ofstream f(out_dir + "/disturbance.txt");
    f << "# mode torque_violation_ticks fall fall_time pitch_rms\n";
    f << "riccati " << report.riccati.get("torque_violation_ticks") << " "
      << report.riccati.get("fall") << " " << report.riccati.get("fall_time") << " "
      << report.riccati.get("pitch_rms") << "\n";
    f << "vwbc " << report.vwbc.get("torque_violation_ticks") << " "
      << report.vwbc.get("fall") << " " << report.vwbc.get("fall_time") << " "
      << report.vwbc.get("pitch_rms") << "\n";
  }
  return report;
}

mpc::KeyframeResult build_flip_reference(const dyn::KinematicTree& tree,
                                         const std::vector<double>& stand_joints,
                                         double stand_height) {
  mpc::FlipParams fp;
  fp.stand_height = stand_height;
  VectorXd joints = Eigen::Map<const VectorXd>(stand_joints.data(), stand_joints.size());
  mpc::KeyframeTask kf_task = mpc::planar_flip_task(tree, fp, joints);
  solver::Settings s;
  s.max_inner_iters = 220;
  s.max_outer_al_iters = 8;
  s.cost_tol = 1e-8;
  s.defect_tol = 1e-8;
  s.constraint_tol = 1e-6;
  return mpc::keyframe_to(tree, kf_task, s);
}

namespace {

ReferenceTrajectory slice_reference(const ReferenceTrajectory& ref, double t0, double t1) {
  ReferenceTrajectory out;
  out.t0 = 0.0;
  out.dt = ref.dt;
  const int n = static_cast<int>(std::lround((t1 - t0) / ref.dt));
  for (int k = 0; k <= n; ++k) out.append(ref.at(t0 + k * ref.dt));
  return out;
}

}  // namespace

FlipReport run_flip_task(const TaskConfig& task, const std::string& out_dir) {
  FlipReport report;
  dyn::KinematicTree tree = load_task_robot(task);

  // offline reference for the in-place flip (cached per process would be
  // possible; one solve takes a few seconds and the CLI runs it once)
  auto flip = build_flip_reference(tree, task.stand_joints, task.height);
  mpc::FlipParams fp;
  report.keyframe_rotation_rate = 2 * M_PI / (fp.t_launch + fp.t_flight);

  // flight-phase ballistic check on the solved trajectory (phase 2): the
  // center of mass follows a parabola in free flight regardless of the leg
  // motion
  {
    std::vector<double> zs;
    for (int pi : {2, 3}) {  // both aerial phases share one free-flight arc
      const auto& ph = flip.traj.phases[pi];
      const size_t skip = (pi == 2) ? 0 : 1;  // boundary node shared
      for (size_t k = skip; k < ph.x.size(); ++k) {
        auto frames = dyn::compute_frames(tree, ph.x[k].head(tree.nq()));
        double zc = 0;
        for (int l = 0; l < tree.num_links(); ++l)
          zc += tree.links[l].mass * dyn::link_com_world(tree, frames, l)[1];
        zs.push_back(zc / tree.total_mass());
      }
    }
    const int n = static_cast<int>(zs.size());
    Eigen::MatrixXd A(n, 3);
    Eigen::VectorXd z(n);
    for (int k = 0; k < n; ++k) {
      const double t = k * 0.01;
      A.row(k) << 1.0, t, t * t;
      z[k] = zs[k];
    }
    Eigen::VectorXd coef = (A.transpose() * A).ldlt().solve(A.transpose() * z);
    report.flight_parabola_residual = (A * coef - z).cwiseAbs().maxCoeff();
  }

  // composed task: standing lead-in, gait cycles, the flip sequence, gait
  // cycles again. The composed reference is fixed for the whole episode (no
  // per-step regeneration): the splices are the point of the experiment.
  TaskConfig gait_task = task;
  gait_task.flip = false;
  EpisodeOptions opt = make_episode_options(gait_task);
  opt.reference_provider = nullptr;

  const auto cycle = mpc::make_gait(task.gait, tree);
  const double cycle_T = cycle.period();
  const double lead_in = std::max(task.lead_in, 0.2);
  const int pre_cycles = 2;
  const double t_pre = lead_in + pre_cycles * cycle_T;
  const double flip_T = flip.phase_end_times.back();
  const int post_cycles = 6;

  std::vector<std::pair<dyn::ContactSet, double>> seq;
  seq.push_back({dyn::ContactSet::all(tree.num_ees()), lead_in});
  for (int c = 0; c < pre_cycles; ++c)
    for (const auto& m : cycle.modes) seq.push_back({m.contacts, m.t_end - m.t_start});
  {
    mpc::FlipParams fparams;
    auto kf_task = mpc::planar_flip_task(tree, fparams,
                                         Eigen::Map<const VectorXd>(
                                             task.stand_joints.data(),
                                             task.stand_joints.size()));
    for (const auto& [mode, dur] : kf_task.sequence) seq.push_back({mode, dur});
  }
  for (int c = 0; c < post_cycles; ++c)
    for (const auto& m : cycle.modes) seq.push_back({m.contacts, m.t_end - m.t_start});
  opt.contacts = mpc::make_sequence(seq, 0.0, false);

  // composed reference with the deliberate splice discontinuities: the flip
  // segment is translated to the splice point; the resumed gait is unwrapped
  // by 2 pi in pitch and re-anchored where the flip ends
  mpc::UserCommand cmd;
  cmd.vx = task.vx;
  cmd.height = task.height;
  mpc::HeuristicParams hp;
  hp.stand_joints = Eigen::Map<const VectorXd>(task.stand_joints.data(),
                                               task.stand_joints.size());
  hp.foothold_clamp = task.foothold_clamp;
  hp.vx_start = lead_in;
  auto pre_schedule = opt.contacts;  // covers the lead-in correctly
  auto pre_gait = mpc::heuristic_reference(tree, cmd, pre_schedule, hp, 0.0, t_pre);
  const double x_splice = cmd.vx * (t_pre - lead_in);
  auto flip_seg = slice_reference(flip.reference, 0.0, flip_T);
  const double flip_end_x = flip_seg.samples.back().q[1];
  mpc::HeuristicParams hp_post = hp;
  hp_post.vx_start = 0.0;
  auto post_gait =
      mpc::heuristic_reference(tree, cmd, cycle, hp_post, 0.0,
                               post_cycles * cycle_T + task.schedule.T_w +
                                   task.schedule.T_s + 1.0);
  VectorXd shift_flip = VectorXd::Zero(tree.nq());
  shift_flip[1] = x_splice;
  VectorXd shift_post = VectorXd::Zero(tree.nq());
  shift_post[0] = 2 * M_PI;
  shift_post[1] = x_splice + flip_end_x;
  opt.reference =
      mpc::compose_references({pre_gait, flip_seg, post_gait},
                              {VectorXd(), shift_flip, shift_post});

  opt.duration = t_pre + flip_T + (post_cycles - 1) * cycle_T;
  // the maneuver legitimately dives low and rotates fast; the episode gates
  // catch genuine crashes while success additionally requires the full
  // rotation and a resumed gait
  opt.fall_pitch = 2.5;
  opt.fall_height_fraction = 0.22;

  EpisodeOptions cafe = opt;
  cafe.out_dir = out_dir.empty() ? "" : out_dir + "/cascade";
  auto cafe_result = run_episode(cafe);
  report.controller = cafe_result.metrics;

  EpisodeOptions ablation = opt;
  ablation.mode = ControlMode::SrbOnly;
  ablation.out_dir = out_dir.empty() ? "" : out_dir + "/srb_only";
  auto ablation_result = run_episode(ablation);
  report.ablation = ablation_result.metrics;

  report.max_rotation = report.controller.get("max_pitch");
  report.ablation_max_rotation = report.ablation.get("max_pitch");
  report.success = !cafe_result.fall &&
                   report.max_rotation > 0.95 * 2 * M_PI &&
                   cafe_result.completed >= opt.duration - 1e-6;
  report.ablation_success = !ablation_result.fall &&
                            report.ablation_max_rotation > 0.95 * 2 * M_PI &&
                            ablation_result.completed >= opt.duration - 1e-6;

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(out_dir + "/flip.txt");
    f << "# controller success max_rotation fall\n";
    f << "cascade " << report.success << " " << report.max_rotation << " "
      << cafe_result.fall << "\n";
    f << "srb_only " << report.ablation_success << " " << report.ablation_max_rotation
      << " " << ablation_result.fall << "\n";
    f << "# flight_parabola_residual " << report.flight_parabola_residual << "\n";
    f << "# keyframe_rotation_rate " << report.keyframe_rotation_rate << "\n";
  }
  return report;
}

}  // namespace cascade::sim
