#include "cascade/sim/episode.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <thread>

#include "cascade/dynamics/kinematics.hpp"
#include "cascade/sim/mailbox.hpp"

namespace cascade::sim {

using dyn::ContactSet;
using mpc::PolicyPacket;
using Eigen::MatrixXd;

ControlMode parse_mode(const std::string& name) {
  if (name == "vwbc") return ControlMode::Vwbc;
  if (name == "riccati") return ControlMode::Riccati;
  if (name == "srb_only") return ControlMode::SrbOnly;
  throw Error("unknown control mode '" + name + "'");
}

namespace {

constexpr double kTickEps = 1e-9;

// Template-MPC ablation: a single-phase SRB plan provides stance forces;
// legs track the reference joints with a PD servo, stance legs add the
// Jacobian-transpose force mapping.
class SrbOnlyController {
 public:
  SrbOnlyController(const EpisodeOptions& opt)
      : tree_(opt.tree),
        contacts_(opt.contacts),
        ref_(opt.reference),
        weights_(opt.mpc.weights),
        horizon_(std::max(opt.mpc.schedule.T_s, 0.3)),
        dt_(opt.mpc.schedule.dt_s),
        kp_(opt.servo_kp),
        kd_(opt.servo_kd) {}

  VectorXd command(const VectorXd& x, double t) {
    const int steps = static_cast<int>(std::lround(horizon_ / dt_));
    ocp::MultiPhaseProblem mp;
    mp.phases.push_back(
        mpc::make_srb_phase(tree_, contacts_, ref_, weights_, t, steps, dt_));
    mp.x0 = dyn::project_to_srb(tree_, x);
    mp.validate();

    solver::Settings s;
    s.max_inner_iters = solved_ ? 4 : 60;
    s.cost_tol = 1e-7;
    s.defect_tol = 1e-7;

    ocp::SolverTrajectory init;
    if (solved_ && static_cast<int>(last_.phases[0].x.size()) == steps + 1) {
      init = last_;
      init.phases[0].x[0] = mp.x0;
    } else {
      init = ocp::make_initial_trajectory(mp);
      for (int k = 0; k < steps; ++k)
        init.phases[0].u[k] = ref_.at(t + k * dt_).grf;
    }
    auto result = solver::solve(mp, init, s);
    last_ = result.traj;
    solved_ = true;
    grf_ = result.traj.phases[0].u.empty() ? VectorXd() : result.traj.phases[0].u[0];
    return whole_body_command(x, t);
  }

  VectorXd whole_body_command(const VectorXd& x, double t) const {
    const int nq = tree_.nq();
    const int na = tree_.num_joints();
    const int bd = tree_.base_dof();
    const auto r = ref_.at(t);
    VectorXd tau = kp_ * (r.q.tail(na) - x.segment(bd, na)) +
                   kd_ * (r.qd.tail(na) - x.segment(nq + bd, na));
    const ContactSet stance = contacts_.contacts_at(t);
    if (grf_.size() > 0) {
      dyn::FrameSet frames = dyn::compute_frames(tree_, x.head(nq));
      const int cd = tree_.contact_dim();
      for (int j = 0; j < tree_.num_ees(); ++j) {
        if (!stance.active[j]) continue;
        VectorXd p = dyn::ee_position(tree_, frames, j);
        MatrixXd J =
            dyn::point_jacobian(tree_, x.head(nq), frames, tree_.end_effectors[j].link, p);
        VectorXd f = grf_.segment(j * cd, cd);
        VectorXd gen = -J.transpose() * f;  // reaction on the robot
        tau += gen.tail(na);
      }
    }
    return tau.cwiseMax(tree_.tau_lower).cwiseMin(tree_.tau_upper);
  }

 private:
  dyn::KinematicTree tree_;
  mpc::ContactSchedule contacts_;
  mpc::ReferenceTrajectory ref_;
  mpc::CostWeights weights_;
  double horizon_, dt_, kp_, kd_;
  bool solved_ = false;
  ocp::SolverTrajectory last_;
  VectorXd grf_;
};

struct Accumulators {
  long ticks = 0;
  double pitch_sq = 0, pitch_rate_sq = 0, height_sq = 0;
  double max_height = -1e9;
  double max_pitch = -1e9;
  long torque_violations = 0;
  long force_violations = 0;
  long fallbacks = 0;
  long stale = 0;
  double max_stance_drift = 0;
  double max_impact_energy_gain = 0;
  long qp_ticks = 0, qp_warm_one = 0;
  long warm_exceeds_cold = 0;
  std::map<int, int> hist_warm, hist_cold;
  double solve_time_total = 0;
  long inner_iters_total = 0;
  long ls_trials_total = 0;
  long mpc_solves = 0;
  long degraded_packets = 0;
};

struct LogSink {
  std::ofstream sim, ctrl, mpc;
  bool enabled = false;

  void open(const std::string& dir) {
    std::filesystem::create_directories(dir);
    sim.open(dir + "/sim_state.txt");
    ctrl.open(dir + "/controller.txt");
    mpc.open(dir + "/mpc.txt");
    sim << "# t q.. qd.. contacts tau..\n";
    ctrl << "# t tau.. qp_warm qp_cold active_mask fallback stationarity feas\n";
    mpc << "# t status inner ls_total solve_time cost defect\n";
    sim << std::setprecision(17);
    ctrl << std::setprecision(17);
    mpc << std::setprecision(12);
    enabled = true;
  }
};

}  // namespace

EpisodeResult run_episode(const EpisodeOptions& options) {
  const auto& tree = options.tree;
  const int nq = tree.nq();
  const int na = tree.num_joints();

  SimWorld world(tree, options.contacts, options.sim_dt, options.vwbc.baumgarte,
                 options.ground_height);
  world.reset(options.x_init.head(nq), options.x_init.tail(nq));
  for (const auto& d : options.disturbances) world.add_disturbance(d);

  mpc::MpcSettings mpc_settings = options.mpc;
  mpc_settings.period = options.mpc_period;
  mpc::MpcController controller(tree, options.contacts, options.reference, mpc_settings);
  if (options.reference_provider)
    controller.set_reference_provider(options.reference_provider);
  SrbOnlyController srb_only(options);

  LogSink logs;
  if (!options.out_dir.empty()) logs.open(options.out_dir);

  Accumulators acc;
  EpisodeResult result;

  // threaded mode: the MPC consumes the freshest state and publishes packets
  Mailbox<std::pair<VectorXd, double>> state_box;
  Mailbox<PolicyPacket> packet_box;
  std::atomic<bool> stop_mpc{false};
  std::thread mpc_thread;
  if (!options.lockstep && options.mode != ControlMode::SrbOnly) {
    mpc_thread = std::thread([&] {
      unsigned long last_seq = 0;
      while (!stop_mpc.load()) {
        auto msg = state_box.read();
        if (!msg || msg->second == last_seq) {
          std::this_thread::sleep_for(std::chrono::microseconds(100));
          continue;
        }
        last_seq = msg->second;
        try {
          packet_box.publish(controller.step(msg->first.first, msg->first.second));
        } catch (const Error&) {
        }
      }
    });
  }

  PolicyPacket packet;
  VectorXd tau_hold = VectorXd::Zero(na);
  VectorXd tau_raw = tau_hold;
  std::vector<int> prev_active;
  dyn::ContactSet prev_qp_contacts;
  double next_mpc = 0.0, next_ctrl = 0.0;

  // stance-drift bookkeeping
  std::vector<VectorXd> stance_anchor(tree.num_ees());
  ContactSet prev_contacts = options.contacts.contacts_at(0.0);
  {
    auto ee = dyn::forward_kinematics(tree, world.q());
    for (int j = 0; j < tree.num_ees(); ++j)
      if (prev_contacts.active[j]) stance_anchor[j] = ee[j].position;
  }

  const long total_ticks = static_cast<long>(std::llround(options.duration / options.sim_dt));
  for (long tick = 0; tick < total_ticks; ++tick) {
    const double t = world.time();

    if (t + kTickEps >= next_mpc) {
      if (options.mode == ControlMode::SrbOnly) {
        tau_raw = srb_only.command(world.state(), t);
        tau_hold = tau_raw;
      } else if (options.lockstep) {
        packet = controller.step(world.state(), t);
        const auto& rep = controller.last_report();
        acc.solve_time_total += rep.solve_time;
        acc.inner_iters_total += rep.inner_iterations;
        for (const auto& it : rep.iterations) acc.ls_trials_total += it.ls_trials;
        ++acc.mpc_solves;
        if (packet.degraded) ++acc.degraded_packets;
        if (logs.enabled)
          logs.mpc << t << " " << solver::to_string(rep.status) << " "
                   << rep.inner_iterations << " " << acc.ls_trials_total << " "
                   << rep.solve_time << " " << rep.final_cost << " " << rep.final_defect
                   << "\n";
      } else {
        state_box.publish({world.state(), t});
      }
      next_mpc += options.mpc_period;
    }

    if (t + kTickEps >= next_ctrl) {
      if (options.mode != ControlMode::SrbOnly) {
        if (!options.lockstep) {
          auto msg = packet_box.read();
          if (msg) packet = msg->first;
        }
        if (!packet.empty()) {
          const double slack = 2.0 * options.mpc_period;
          try {
            if (options.mode == ControlMode::Vwbc) {
              // the active-set row indices only transfer between identical
              // contact configurations
              const auto& step_contacts =
                  packet.steps[packet.nearest_step(t, 2.0 * options.mpc_period)].contacts;
              if (!(step_contacts == prev_qp_contacts)) prev_active.clear();
              prev_qp_contacts = step_contacts;
              auto cmd = wbc::vwbc_command(packet, world.state(), tree, t, options.vwbc,
                                           prev_active);
              tau_raw = cmd.tau;
              tau_hold = tau_raw.cwiseMax(tree.tau_lower).cwiseMin(tree.tau_upper);
              prev_active = cmd.active_set;
              if (cmd.fallback) ++acc.fallbacks;
              ++acc.qp_ticks;
              acc.hist_warm[cmd.qp_iterations]++;
              if (cmd.qp_iterations == 1) ++acc.qp_warm_one;
              if (cmd.primal_feasibility > 1e-8) ++acc.force_violations;
              int cold_iters = cmd.qp_iterations;
              if (options.compare_cold_qp && !cmd.fallback) {
                auto qp = wbc::build_vwbc_qp(packet, world.state(), tree, t, options.vwbc);
                auto cold = wbc::solve_qp(qp);
                cold_iters = cold.iterations;
                acc.hist_cold[cold.iterations]++;
                if (cmd.qp_iterations > cold.iterations) ++acc.warm_exceeds_cold;
              }
              if (logs.enabled) {
                unsigned long mask = 0;
                for (int a : cmd.active_set)
                  if (a < 63) mask |= (1ull << a);
                logs.ctrl << t;
                for (int i = 0; i < na; ++i) logs.ctrl << " " << tau_hold[i];
                logs.ctrl << " " << cmd.qp_iterations << " " << cold_iters << " " << mask
                          << " " << (cmd.fallback ? 1 : 0) << " " << cmd.stationarity
                          << " " << cmd.primal_feasibility << "\n";
              }
            } else {  // Riccati feedback, applied through actuator saturation
              tau_raw = wbc::riccati_policy(packet, world.state(), t, slack);
              tau_hold = tau_raw.cwiseMax(tree.tau_lower).cwiseMin(tree.tau_upper);
              if (logs.enabled) {
                logs.ctrl << t;
                for (int i = 0; i < na; ++i) logs.ctrl << " " << tau_hold[i];
                logs.ctrl << " 0 0 0 0 0 0\n";
              }
            }
          } catch (const StalenessError&) {
            ++acc.stale;  // hold the previous command
          }
        }
      }
      for (int i = 0; i < na; ++i) {
        if (tau_raw[i] > tree.tau_upper[i] + 1e-9 || tau_raw[i] < tree.tau_lower[i] - 1e-9) {
          ++acc.torque_violations;
          break;
        }
      }
      next_ctrl += options.ctrl_dt;
    }

    world.step(tau_hold);

    // physics sanity accounting
    if (world.impact_occurred())
      acc.max_impact_energy_gain =
          std::max(acc.max_impact_energy_gain, world.last_impact_energy_gain());
    {
      const ContactSet now = world.contacts();
      auto ee = dyn::forward_kinematics(tree, world.q());
      for (int j = 0; j < tree.num_ees(); ++j) {
        if (now.active[j] && !prev_contacts.active[j]) stance_anchor[j] = ee[j].position;
        if (now.active[j] && stance_anchor[j].size() > 0)
          acc.max_stance_drift = std::max(
              acc.max_stance_drift, (ee[j].position - stance_anchor[j]).norm());
      }
      prev_contacts = now;
    }

    const double tnow = world.time();
    const auto rsample = options.reference.at(tnow);
    const double pitch_err = world.q()[0] - rsample.q[0];
    const double height = world.q()[2];
    acc.pitch_sq += pitch_err * pitch_err;
    acc.pitch_rate_sq += std::pow(world.qd()[0] - rsample.qd[0], 2);
    acc.height_sq += std::pow(height - rsample.q[2], 2);
    acc.max_height = std::max(acc.max_height, height);
    acc.max_pitch = std::max(acc.max_pitch, world.q()[0]);
    ++acc.ticks;

    if (logs.enabled) {
      logs.sim << tnow;
      for (int i = 0; i < nq; ++i) logs.sim << " " << world.q()[i];
      for (int i = 0; i < nq; ++i) logs.sim << " " << world.qd()[i];
      int cbits = 0;
      for (int j = 0; j < tree.num_ees(); ++j)
        if (world.contacts().active[j]) cbits |= (1 << j);
      logs.sim << " " << cbits;
      for (int i = 0; i < na; ++i) logs.sim << " " << tau_hold[i];
      logs.sim << "\n";
    }

    const bool nonfinite = !world.q().allFinite() || !world.qd().allFinite();
    if (nonfinite || height < options.fall_height_fraction * options.stand_height ||
        std::abs(pitch_err) > options.fall_pitch) {
      result.fall = true;
      result.fall_time = tnow;
      break;
    }
  }

  if (mpc_thread.joinable()) {
    stop_mpc.store(true);
    mpc_thread.join();
  }

  result.completed = world.time();
  Metrics& m = result.metrics;
  const double n = std::max<long>(acc.ticks, 1);
  m.values["pitch_rms"] = std::sqrt(acc.pitch_sq / n);
  m.values["pitch_rate_rms"] = std::sqrt(acc.pitch_rate_sq / n);
  m.values["height_rms"] = std::sqrt(acc.height_sq / n);
  m.values["max_height"] = acc.max_height;
  m.values["max_pitch"] = acc.max_pitch;
  m.values["fall"] = result.fall ? 1.0 : 0.0;
  m.values["fall_time"] = result.fall_time;
  m.values["completed"] = result.completed;
  m.values["torque_violation_ticks"] = static_cast<double>(acc.torque_violations);
  m.values["force_violation_ticks"] = static_cast<double>(acc.force_violations);
  m.values["fallback_ticks"] = static_cast<double>(acc.fallbacks);
  m.values["stale_ticks"] = static_cast<double>(acc.stale);
  m.values["max_stance_drift"] = acc.max_stance_drift;
  m.values["max_impact_energy_gain"] = acc.max_impact_energy_gain;
  m.values["mpc_solves"] = static_cast<double>(acc.mpc_solves);
  m.values["mpc_inner_iterations"] = static_cast<double>(acc.inner_iters_total);
  m.values["solve_time_per_iteration"] =
      acc.inner_iters_total > 0 ? acc.solve_time_total / acc.inner_iters_total : 0.0;
  m.values["ls_trials_per_solve"] =
      acc.mpc_solves > 0 ? static_cast<double>(acc.ls_trials_total) / acc.mpc_solves : 0.0;
  m.values["degraded_packets"] = static_cast<double>(acc.degraded_packets);
  m.values["qp_ticks"] = static_cast<double>(acc.qp_ticks);
  m.values["qp_warm_one_fraction"] =
      acc.qp_ticks > 0 ? static_cast<double>(acc.qp_warm_one) / acc.qp_ticks : 0.0;
  m.values["qp_warm_exceeds_cold_ticks"] = static_cast<double>(acc.warm_exceeds_cold);
  m.qp_hist_warm = acc.hist_warm;
  m.qp_hist_cold = acc.hist_cold;

  if (logs.enabled) m.write_json(options.out_dir + "/metrics.json");
  return result;
}

}  // namespace cascade::sim
