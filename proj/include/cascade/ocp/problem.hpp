#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "cascade/support/error.hpp"

namespace cascade::ocp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// One phase of a multi-phase optimal control problem: fixed dynamics, cost,
/// constraint structure and dimensions over N discrete steps. Dynamics are
/// discrete maps x_{k+1} = f(x_k, u_k, k); the reset map carries the terminal
/// state into the next phase's state space.
struct Phase {
  std::string name;
  int N = 0;
  double dt = 0.0;
  int state_dim = 0;
  int control_dim = 0;
  int next_state_dim = 0;  // dim of reset output; defaults to state_dim
  int ineq_dim = 0;        // rows of h(x, u, k) >= 0
  int switch_dim = 0;      // rows of g(x_N) = 0

  std::function<VectorXd(const VectorXd&, const VectorXd&, int)> dynamics;
  std::function<double(const VectorXd&, const VectorXd&, int)> running_cost;
  std::function<double(const VectorXd&)> terminal_cost;
  std::function<VectorXd(const VectorXd&, const VectorXd&, int)> path_ineq;
  std::function<VectorXd(const VectorXd&)> switching_constraint;
  std::function<VectorXd(const VectorXd&)> reset;  // identity when absent

  // Optional analytic derivative hooks; finite differences otherwise.
  std::function<void(const VectorXd&, const VectorXd&, int, MatrixXd&, MatrixXd&)>
      dynamics_jacobian;
  std::function<void(const VectorXd&, const VectorXd&, int, VectorXd&, VectorXd&,
                     MatrixXd&, MatrixXd&, MatrixXd&)>
      running_cost_expansion;  // lx, lu, lxx, luu, lux
  std::function<void(const VectorXd&, VectorXd&, MatrixXd&)> terminal_cost_expansion;
  std::function<void(const VectorXd&, const VectorXd&, int, MatrixXd&, MatrixXd&)>
      path_ineq_jacobian;  // hx, hu
  std::function<void(const VectorXd&, MatrixXd&)> switching_jacobian;
  std::function<void(const VectorXd&, MatrixXd&)> reset_jacobian;

  VectorXd apply_reset(const VectorXd& x) const { return reset ? reset(x) : x; }

  void validate() const {
    if (N < 1) throw Error("phase '" + name + "': N must be >= 1");
    if (dt <= 0) throw Error("phase '" + name + "': dt must be > 0");
    if (state_dim < 1 || control_dim < 0)
      throw Error("phase '" + name + "': bad dimensions");
    if (!dynamics) throw Error("phase '" + name + "': missing dynamics");
    if (!running_cost) throw Error("phase '" + name + "': missing running cost");
    if (ineq_dim > 0 && !path_ineq)
      throw Error("phase '" + name + "': ineq_dim set but no path_ineq");
    if (switch_dim > 0 && !switching_constraint)
      throw Error("phase '" + name + "': switch_dim set but no switching constraint");
  }
};

/// Multi-phase problem plus the outer-loop constraint state: augmented
/// Lagrangian multipliers/penalty for the switching constraints and the
/// relaxed-barrier parameters for the path inequalities.
struct MultiPhaseProblem {
  std::vector<Phase> phases;
  VectorXd x0;

  std::vector<VectorXd> al_multipliers;  // one per phase (size switch_dim)
  double al_penalty = 10.0;
  double reb_delta = 0.1;
  double reb_weight = 1.0;
  double fd_step = 1e-6;

  int num_phases() const { return static_cast<int>(phases.size()); }
  int total_steps() const {
    int n = 0;
    for (const auto& p : phases) n += p.N;
    return n;
  }

  void validate() {
    if (phases.empty()) throw Error("problem has no phases");
    if (al_penalty <= 0 || reb_delta <= 0) throw Error("AL/ReB parameters must be > 0");
    for (size_t i = 0; i < phases.size(); ++i) {
      Phase& p = phases[i];
      if (p.next_state_dim == 0) p.next_state_dim = p.state_dim;
      p.validate();
      if (i + 1 < phases.size() && p.next_state_dim != phases[i + 1].state_dim)
        throw Error("phase '" + p.name + "': reset output dim " +
                    std::to_string(p.next_state_dim) + " != next phase state dim " +
                    std::to_string(phases[i + 1].state_dim));
    }
    if (x0.size() != phases[0].state_dim)
      throw DimensionError("initial state", phases[0].state_dim,
                           static_cast<int>(x0.size()));
    if (al_multipliers.size() != phases.size()) {
      al_multipliers.assign(phases.size(), VectorXd());
      for (size_t i = 0; i < phases.size(); ++i)
        al_multipliers[i] = VectorXd::Zero(phases[i].switch_dim);
    }
    for (size_t i = 0; i < phases.size(); ++i)
      if (al_multipliers[i].size() != phases[i].switch_dim)
        throw DimensionError("AL multipliers of phase " + std::to_string(i),
                             phases[i].switch_dim,
                             static_cast<int>(al_multipliers[i].size()));
  }
};

/// Relaxed logarithmic barrier: -ln(z) above delta, quadratic extension with
/// C2 continuity below.
double relaxed_barrier(double z, double delta);
double relaxed_barrier_d1(double z, double delta);
double relaxed_barrier_d2(double z, double delta);

}  // namespace cascade::ocp
