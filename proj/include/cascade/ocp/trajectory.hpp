#pragma once

#include <string>

#include "cascade/ocp/problem.hpp"

namespace cascade::ocp {

/// States, controls and defects of one phase. x has N+1 entries, u has N,
/// defect has N+1: defect[0] is the incoming boundary defect (reset of the
/// previous phase, or x0 for the first phase), defect[k+1] the in-phase
/// defect f(x_k, u_k) - x_{k+1}. shooting[k] marks independent states; the
/// first node of the first phase is always dependent (pinned to x0).
struct PhaseTrajectory {
  std::vector<VectorXd> x;
  std::vector<VectorXd> u;
  std::vector<VectorXd> defect;
  std::vector<uint8_t> shooting;
};

struct SolverTrajectory {
  std::vector<PhaseTrajectory> phases;

  double max_defect() const;
  double defect_l1() const;
  bool finite() const;
};

/// Allocates a trajectory shaped like the problem: states at `hold`, controls
/// zero, all interior nodes shooting.
SolverTrajectory make_initial_trajectory(const MultiPhaseProblem& problem);

/// Nonlinear rollout from x0 with the given controls (defects become zero).
SolverTrajectory rollout(const MultiPhaseProblem& problem,
                         const std::vector<std::vector<VectorXd>>& controls);

/// Recomputes every defect in place. Roll-out nodes are NOT overwritten;
/// this is pure bookkeeping per the defect definition.
void evaluate_defects(const MultiPhaseProblem& problem, SolverTrajectory& traj);

/// Overwrites roll-out nodes by forward simulation (shooting nodes kept),
/// then refreshes defects: roll-out defects become identically zero.
void resimulate_rollout_nodes(const MultiPhaseProblem& problem, SolverTrajectory& traj);

struct CostBreakdown {
  double stage = 0.0;  // running + terminal costs
  double al = 0.0;     // switching-constraint Lagrangian + penalty
  double reb = 0.0;    // relaxed-barrier inequality penalty
  double total() const { return stage + al + reb; }
};

CostBreakdown total_cost(const MultiPhaseProblem& problem, const SolverTrajectory& traj);

/// Largest switching-constraint violation across phases.
double switching_violation(const MultiPhaseProblem& problem, const SolverTrajectory& traj);

/// Most negative path-inequality entry (0 when none or all feasible).
double inequality_violation(const MultiPhaseProblem& problem, const SolverTrajectory& traj);

/// Columnar text dump: one row per step with phase index, time, x, u and the
/// defect norm.
void write_trajectory(const std::string& path, const MultiPhaseProblem& problem,
                      const SolverTrajectory& traj);

void check_dimensions(const MultiPhaseProblem& problem, const SolverTrajectory& traj);

}  // namespace cascade::ocp
