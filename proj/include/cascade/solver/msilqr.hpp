#pragma once

#include <string>

#include "cascade/solver/derivatives.hpp"

namespace cascade::solver {

/// Per-step action-value expansion (Eq. blocks of the one-step Bellman
/// minimization). Quu is stored with the active regularization applied.
struct QExpansion {
  VectorXd Qx, Qu;
  MatrixXd Qxx, Quu, Qux;
};

/// Quadratic local value-function model at a node.
struct ValueExpansion {
  MatrixXd S;
  VectorXd s;
  double drift = 0.0;
};

struct PhaseBackward {
  std::vector<QExpansion> q;       // size N
  std::vector<ValueExpansion> v;   // size N+1
  std::vector<VectorXd> kff;       // feedforward, size N
  std::vector<MatrixXd> K;         // feedback, size N
};

struct BackwardPassResult {
  std::vector<PhaseBackward> phases;
  double delta1 = 0.0;  // sum Qu' dU
  double delta2 = 0.0;  // 0.5 sum dU' Quu dU
  double max_value_gradient = 0.0;  // max |s_k|_inf, drives the merit weight
  bool ok = false;
  double rho = 0.0;                 // regularization in effect
  double worst_eigenvalue = 0.0;    // most negative Quu eigenvalue on failure
};

BackwardPassResult backward_sweep(const MultiPhaseProblem& problem,
                                  const SolverTrajectory& traj,
                                  const ProblemDerivatives& derivs, double rho);

struct ForwardResult {
  SolverTrajectory traj;
  ocp::CostBreakdown cost;
  bool diverged = false;
};

ForwardResult forward_sweep(const MultiPhaseProblem& problem, const SolverTrajectory& traj,
                            const BackwardPassResult& bp, const ProblemDerivatives& derivs,
                            double alpha);

struct LineSearchResult {
  bool accepted = false;
  double alpha = 0.0;
  int trials = 0;
  ForwardResult forward;
  double merit_before = 0.0;
  double merit_after = 0.0;
};

LineSearchResult line_search(const MultiPhaseProblem& problem, const SolverTrajectory& traj,
                             const BackwardPassResult& bp, const ProblemDerivatives& derivs,
                             const ocp::CostBreakdown& current_cost, const Settings& settings);

enum class SolveStatus { Converged, MaxIterations, MaxWallTime, NoProgress };

const char* to_string(SolveStatus s);

struct IterationRecord {
  int outer = 0;
  int inner = 0;
  double cost = 0.0;
  double defect_inf = 0.0;
  double constraint_inf = 0.0;
  double alpha = 0.0;
  double rho = 0.0;
  double wall_time = 0.0;
  int ls_trials = 0;
  double merit_before = 0.0;
  double merit_after = 0.0;
};

struct SolveReport {
  SolveStatus status = SolveStatus::NoProgress;
  std::vector<IterationRecord> iterations;
  double solve_time = 0.0;
  double final_cost = 0.0;
  double final_defect = 0.0;
  double final_constraint = 0.0;
  int inner_iterations = 0;
  int outer_iterations = 0;

  void write(const std::string& path) const;
};

struct SolveResult {
  SolverTrajectory traj;
  BackwardPassResult bp;  // evaluated on the returned trajectory
  SolveReport report;
};

/// Multi-phase multiple-shooting iLQR with an outer AL/ReB loop. Updates the
/// problem's AL multipliers in place (they are warm-startable state).
SolveResult solve(MultiPhaseProblem& problem, const SolverTrajectory& initial,
                  const Settings& settings);

}  // namespace cascade::solver
