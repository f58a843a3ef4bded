#include "cascade/sim/task.hpp"

#include <filesystem>

#include "cascade/dynamics/model_io.hpp"
#include "cascade/support/config.hpp"

namespace cascade::sim {

TaskConfig TaskConfig::load(const std::string& path) {
  ConfigFile cfg = parse_config_file(path);
  const ConfigSection& g = cfg.globals;
  TaskConfig t;
  t.source_path = path;
  t.name = g.text("name", "task");
  t.robot_path = g.text("robot");
  t.gait = g.text("gait", "stand");
  t.mode = g.text("mode", "vwbc");
  t.vx = g.number("vx", 0.0);
  t.height = g.number("height", 0.2926);
  t.stand_joints = g.array("stand_joints", {0.8, -1.6, 0.8, -1.6});
  t.schedule.T_w = g.number("T_w", 0.25);
  t.schedule.T_s = g.number("T_s", 0.3);
  t.schedule.dt_w = g.number("dt_w", 0.01);
  t.schedule.dt_s = g.number("dt_s", 0.05);
  t.mpc_hz = g.number("mpc_hz", 33.3333);
  t.duration = g.number("duration", 5.0);
  t.lead_in = g.number("lead_in", 0.4);
  t.sim_dt = g.number("sim_dt", 1e-3);
  t.ctrl_dt = g.number("ctrl_dt", 2e-3);
  t.lockstep = g.flag("lockstep", true);
  t.seed = static_cast<unsigned>(g.number("seed", 0));
  t.flip = g.flag("flip", false);
  t.stance_time = g.number("stance_time", -1.0);
  t.foothold_clamp = g.number("foothold_clamp", 0.15);
  t.capture_gain = g.number("capture_gain", 0.06);
  t.flight_time = g.number("flight_time", -1.0);

  auto opt_num = [&](const char* key) -> std::optional<double> {
    if (!g.has(key)) return std::nullopt;
    return g.number(key);
  };
  auto opt_arr = [&](const char* key) -> std::optional<std::vector<double>> {
    if (!g.has(key)) return std::nullopt;
    return g.array(key);
  };
  t.w_q = opt_arr("w_q");
  t.w_qd = opt_arr("w_qd");
  t.r_tau = opt_arr("r_tau");
  t.w_foot_pos = opt_num("w_foot_pos");
  t.w_foot_vel = opt_num("w_foot_vel");
  t.r_grf = opt_num("r_grf");
  t.interior_terminal_scale = opt_num("interior_terminal_scale");
  t.final_terminal_scale = opt_num("final_terminal_scale");
  t.reb_weight = opt_num("reb_weight");
  t.al_penalty = opt_num("al_penalty");
  t.first_solve_cost_tol = opt_num("first_solve_cost_tol");
  if (g.has("step_max_iters")) t.step_max_iters = static_cast<int>(g.number("step_max_iters"));
  t.mpc_wall_cap = opt_num("mpc_wall_cap");

  for (const ConfigSection* s : cfg.all("disturbance")) {
    Disturbance d;
    d.time = s->number("time");
    d.window = s->number("window", 0.05);
    auto dv = s->array("delta_v");
    d.delta_v = Eigen::Map<Eigen::VectorXd>(dv.data(), dv.size());
    t.disturbances.push_back(d);
  }
  return t;
}

dyn::KinematicTree load_task_robot(const TaskConfig& task) {
  namespace fs = std::filesystem;
  fs::path robot(task.robot_path);
  if (!robot.is_absolute() && !task.source_path.empty()) {
    fs::path rel = fs::path(task.source_path).parent_path() / robot;
    if (fs::exists(rel)) return dyn::load_model(rel.string());
  }
  return dyn::load_model(robot.string());
}

EpisodeOptions make_episode_options(const TaskConfig& task) {
  EpisodeOptions opt;
  opt.tree = load_task_robot(task);
  const int nq = opt.tree.nq();
  const int na = opt.tree.num_joints();

  {
    mpc::ContactSchedule cycle;
    if (task.gait == "bound" && task.stance_time > 0 && task.flight_time > 0) {
      auto front = dyn::ContactSet({1, 0});
      auto hind = dyn::ContactSet({0, 1});
      auto none = dyn::ContactSet::none(2);
      cycle = mpc::make_sequence({{hind, task.stance_time},
                                  {none, task.flight_time},
                                  {front, task.stance_time},
                                  {none, task.flight_time}},
                                 0.0, true);
    } else {
      cycle = mpc::make_gait(task.gait, opt.tree);
    }
    const double horizon_pad = task.schedule.T_w + task.schedule.T_s + 1.0;
    if (task.gait != "stand" && task.lead_in > 0) {
      // standing lead-in, then enough gait cycles to cover the episode
      std::vector<std::pair<dyn::ContactSet, double>> seq;
      seq.push_back({dyn::ContactSet::all(opt.tree.num_ees()), task.lead_in});
      const int cycles = static_cast<int>(
          std::ceil((task.duration + horizon_pad) / cycle.period()));
      for (int c = 0; c < cycles; ++c)
        for (const auto& m : cycle.modes)
          seq.push_back({m.contacts, m.t_end - m.t_start});
      opt.contacts = mpc::make_sequence(seq, 0.0, false);
    } else {
      opt.contacts = cycle;
    }
  }
  opt.mode = parse_mode(task.mode);
  opt.duration = task.duration;
  opt.sim_dt = task.sim_dt;
  opt.ctrl_dt = task.ctrl_dt;
  opt.mpc_period = 1.0 / task.mpc_hz;
  opt.lockstep = task.lockstep;
  opt.seed = task.seed;
  opt.disturbances = task.disturbances;
  opt.stand_height = task.height;

  opt.mpc = mpc::MpcSettings::defaults(opt.tree);
  opt.mpc.schedule = task.schedule;
  opt.mpc.period = opt.mpc_period;
  auto& w = opt.mpc.weights;
  auto apply_vec = [&](const std::optional<std::vector<double>>& src, VectorXd& dst,
                       int expected) {
    if (!src) return;
    if (static_cast<int>(src->size()) != expected)
      throw Error("task '" + task.name + "': weight override has wrong size");
    dst = Eigen::Map<const Eigen::VectorXd>(src->data(), expected);
  };
  apply_vec(task.w_q, w.w_q, nq);
  apply_vec(task.w_qd, w.w_qd, nq);
  apply_vec(task.r_tau, w.r_tau, na);
  if (task.w_foot_pos) w.w_foot_pos = *task.w_foot_pos;
  if (task.w_foot_vel) w.w_foot_vel = *task.w_foot_vel;
  if (task.r_grf) w.r_grf = *task.r_grf;
  if (task.interior_terminal_scale) w.interior_terminal_scale = *task.interior_terminal_scale;
  if (task.final_terminal_scale) w.final_terminal_scale = *task.final_terminal_scale;
  if (task.reb_weight) opt.mpc.build.reb_weight = *task.reb_weight;
  if (task.al_penalty) opt.mpc.build.al_penalty = *task.al_penalty;
  if (task.first_solve_cost_tol) opt.mpc.first_solve.cost_tol = *task.first_solve_cost_tol;
  if (task.step_max_iters) opt.mpc.step_solve.max_inner_iters = *task.step_max_iters;
  if (task.mpc_wall_cap) {
    opt.mpc.use_wall_clock = true;
    opt.mpc.step_solve.max_wall_time = *task.mpc_wall_cap;
  }

  mpc::UserCommand cmd;
  cmd.vx = task.vx;
  cmd.height = task.height;
  mpc::HeuristicParams hp;
  hp.stand_joints = Eigen::Map<const Eigen::VectorXd>(task.stand_joints.data(),
                                                      task.stand_joints.size());
  hp.foothold_clamp = task.foothold_clamp;
  hp.capture_gain = task.capture_gain;
  hp.vx_start = (task.gait != "stand") ? task.lead_in : 0.0;
  const double horizon_pad = task.schedule.T_w + task.schedule.T_s + 1.0;
  opt.reference = mpc::heuristic_reference(opt.tree, cmd, opt.contacts, hp, 0.0,
                                           task.duration + horizon_pad);

  if (task.gait != "stand") {
    // Raibert-style anchoring: regenerate the reference each MPC step with
    // the base position taken from the measured state
    auto tree_copy = opt.tree;
    auto contacts_copy = opt.contacts;
    auto hp_copy = hp;
    const double lead_in = task.lead_in;
    const double horizon = task.schedule.T_w + task.schedule.T_s + 0.6;
    const int nq_cap = opt.tree.nq();
    opt.reference_provider = [tree_copy, contacts_copy, cmd, hp_copy, lead_in, horizon,
                              nq_cap](const VectorXd& x, double t) {
      mpc::HeuristicParams h2 = hp_copy;
      h2.x_offset = x[1];
      h2.vx_start = std::max(t, lead_in);
      if (t >= lead_in) h2.vx_measured = x[nq_cap + 1];
      return mpc::heuristic_reference(tree_copy, cmd, contacts_copy, h2, t, t + horizon);
    };
  }

  VectorXd x0 = VectorXd::Zero(2 * nq);
  x0[2] = task.height;
  x0.segment(opt.tree.base_dof(), na) = hp.stand_joints;
  if (hp.vx_start <= 0) x0[nq + 1] = task.vx;
  opt.x_init = x0;
  return opt;
}

}  // namespace cascade::sim
