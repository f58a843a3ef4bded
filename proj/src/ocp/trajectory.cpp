#include "cascade/ocp/trajectory.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace cascade::ocp {

double SolverTrajectory::max_defect() const {
  double m = 0;
  for (const auto& p : phases)
    for (const auto& d : p.defect)
      if (d.size()) m = std::max(m, d.cwiseAbs().maxCoeff());
  return m;
}

double SolverTrajectory::defect_l1() const {
  double s = 0;
  for (const auto& p : phases)
    for (const auto& d : p.defect) s += d.cwiseAbs().sum();
  return s;
}

bool SolverTrajectory::finite() const {
  for (const auto& p : phases) {
    for (const auto& v : p.x)
      if (!v.allFinite()) return false;
    for (const auto& v : p.u)
      if (!v.allFinite()) return false;
  }
  return true;
}

void check_dimensions(const MultiPhaseProblem& problem, const SolverTrajectory& traj) {
  if (static_cast<int>(traj.phases.size()) != problem.num_phases())
    throw DimensionError("trajectory phase count", problem.num_phases(),
                         static_cast<int>(traj.phases.size()));
  for (int i = 0; i < problem.num_phases(); ++i) {
    const Phase& p = problem.phases[i];
    const PhaseTrajectory& t = traj.phases[i];
    if (static_cast<int>(t.x.size()) != p.N + 1)
      throw DimensionError("states in phase " + std::to_string(i), p.N + 1,
                           static_cast<int>(t.x.size()));
    if (static_cast<int>(t.u.size()) != p.N)
      throw DimensionError("controls in phase " + std::to_string(i), p.N,
                           static_cast<int>(t.u.size()));
    for (const auto& x : t.x)
      if (x.size() != p.state_dim)
        throw DimensionError("state in phase " + std::to_string(i), p.state_dim,
                             static_cast<int>(x.size()));
    for (const auto& u : t.u)
      if (u.size() != p.control_dim)
        throw DimensionError("control in phase " + std::to_string(i), p.control_dim,
                             static_cast<int>(u.size()));
  }
}

SolverTrajectory make_initial_trajectory(const MultiPhaseProblem& problem) {
  SolverTrajectory traj;
  traj.phases.resize(problem.num_phases());
  VectorXd carry = problem.x0;
  for (int i = 0; i < problem.num_phases(); ++i) {
    const Phase& p = problem.phases[i];
    PhaseTrajectory& t = traj.phases[i];
    t.x.assign(p.N + 1, carry);
    t.u.assign(p.N, VectorXd::Zero(p.control_dim));
    t.defect.assign(p.N + 1, VectorXd::Zero(p.state_dim));
    t.shooting.assign(p.N + 1, 1);
    if (i == 0) t.shooting[0] = 0;  // pinned to x0
    carry = p.apply_reset(carry);
    if (carry.size() != p.next_state_dim) carry = VectorXd::Zero(p.next_state_dim);
  }
  evaluate_defects(problem, traj);
  return traj;
}

SolverTrajectory rollout(const MultiPhaseProblem& problem,
                         const std::vector<std::vector<VectorXd>>& controls) {
  SolverTrajectory traj;
  traj.phases.resize(problem.num_phases());
  VectorXd x = problem.x0;
  for (int i = 0; i < problem.num_phases(); ++i) {
    const Phase& p = problem.phases[i];
    PhaseTrajectory& t = traj.phases[i];
    t.x.resize(p.N + 1);
    t.u.resize(p.N);
    t.defect.assign(p.N + 1, VectorXd::Zero(p.state_dim));
    t.shooting.assign(p.N + 1, 0);
    t.x[0] = x;
    for (int k = 0; k < p.N; ++k) {
      t.u[k] = controls.empty() ? VectorXd::Zero(p.control_dim) : controls[i][k];
      t.x[k + 1] = p.dynamics(t.x[k], t.u[k], k);
    }
    x = p.apply_reset(t.x[p.N]);
  }
  evaluate_defects(problem, traj);
  return traj;
}

void evaluate_defects(const MultiPhaseProblem& problem, SolverTrajectory& traj) {
  check_dimensions(problem, traj);
  for (int i = 0; i < problem.num_phases(); ++i) {
    const Phase& p = problem.phases[i];
    PhaseTrajectory& t = traj.phases[i];
    t.defect.resize(p.N + 1);
    if (i == 0) {
      t.defect[0] = problem.x0 - t.x[0];
    } else {
      const Phase& prev = problem.phases[i - 1];
      t.defect[0] = prev.apply_reset(traj.phases[i - 1].x[prev.N]) - t.x[0];
    }
    for (int k = 0; k < p.N; ++k)
      t.defect[k + 1] = p.dynamics(t.x[k], t.u[k], k) - t.x[k + 1];
  }
}

void resimulate_rollout_nodes(const MultiPhaseProblem& problem, SolverTrajectory& traj) {
  check_dimensions(problem, traj);
  for (int i = 0; i < problem.num_phases(); ++i) {
    const Phase& p = problem.phases[i];
    PhaseTrajectory& t = traj.phases[i];
    if (!t.shooting[0]) {
      if (i == 0)
        t.x[0] = problem.x0;
      else {
        const Phase& prev = problem.phases[i - 1];
        t.x[0] = prev.apply_reset(traj.phases[i - 1].x[prev.N]);
      }
    }
    for (int k = 0; k < p.N; ++k)
      if (!t.shooting[k + 1]) t.x[k + 1] = p.dynamics(t.x[k], t.u[k], k);
  }
  evaluate_defects(problem, traj);
}

CostBreakdown total_cost(const MultiPhaseProblem& problem, const SolverTrajectory& traj) {
  CostBreakdown out;
  for (int i = 0; i < problem.num_phases(); ++i) {
    const Phase& p = problem.phases[i];
    const PhaseTrajectory& t = traj.phases[i];
    for (int k = 0; k < p.N; ++k) {
      out.stage += p.running_cost(t.x[k], t.u[k], k);
      if (p.ineq_dim > 0) {
        VectorXd h = p.path_ineq(t.x[k], t.u[k], k);
        for (int r = 0; r < h.size(); ++r)
          out.reb += problem.reb_weight * relaxed_barrier(h[r], problem.reb_delta);
      }
    }
    if (p.terminal_cost) out.stage += p.terminal_cost(t.x[p.N]);
    if (p.switch_dim > 0) {
      VectorXd g = p.switching_constraint(t.x[p.N]);
      out.al += problem.al_multipliers[i].dot(g) +
                0.5 * problem.al_penalty * g.squaredNorm();
    }
  }
  return out;
}

double switching_violation(const MultiPhaseProblem& problem, const SolverTrajectory& traj) {
  double v = 0;
  for (int i = 0; i < problem.num_phases(); ++i) {
    const Phase& p = problem.phases[i];
    if (p.switch_dim == 0) continue;
    VectorXd g = p.switching_constraint(traj.phases[i].x[p.N]);
    if (g.size()) v = std::max(v, g.cwiseAbs().maxCoeff());
  }
  return v;
}

double inequality_violation(const MultiPhaseProblem& problem, const SolverTrajectory& traj) {
  double worst = 0;
  for (int i = 0; i < problem.num_phases(); ++i) {
    const Phase& p = problem.phases[i];
    if (p.ineq_dim == 0) continue;
    const PhaseTrajectory& t = traj.phases[i];
    for (int k = 0; k < p.N; ++k) {
      VectorXd h = p.path_ineq(t.x[k], t.u[k], k);
      if (h.size()) worst = std::min(worst, h.minCoeff());
    }
  }
  return -std::min(worst, 0.0);
}

void write_trajectory(const std::string& path, const MultiPhaseProblem& problem,
                      const SolverTrajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "# phase k time x... u... defect_norm\n";
  out << std::setprecision(17);
  double t0 = 0;
  for (int i = 0; i < problem.num_phases(); ++i) {
    const Phase& p = problem.phases[i];
    const PhaseTrajectory& t = traj.phases[i];
    for (int k = 0; k <= p.N; ++k) {
      out << i << " " << k << " " << t0 + k * p.dt;
      for (int j = 0; j < t.x[k].size(); ++j) out << " " << t.x[k][j];
      if (k < p.N)
        for (int j = 0; j < t.u[k].size(); ++j) out << " " << t.u[k][j];
      out << " " << (t.defect[k].size() ? t.defect[k].norm() : 0.0) << "\n";
    }
    t0 += p.N * p.dt;
  }
}

}  // namespace cascade::ocp
