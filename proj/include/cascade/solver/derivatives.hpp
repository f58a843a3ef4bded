#pragma once

#include "cascade/ocp/trajectory.hpp"
#include "cascade/solver/settings.hpp"

namespace cascade::solver {

using cascade::ocp::MultiPhaseProblem;
using cascade::ocp::SolverTrajectory;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Expansions of dynamics and of the AL/ReB-augmented costs at one step.
struct StepDerivatives {
  MatrixXd A, B;            // dynamics Jacobians
  VectorXd lx, lu;          // augmented running-cost gradients
  MatrixXd lxx, luu, lux;   // augmented running-cost Hessian blocks
};

struct PhaseDerivatives {
  std::vector<StepDerivatives> steps;
  VectorXd phix;    // augmented terminal gradient (incl. AL terms)
  MatrixXd phixx;   // augmented terminal Hessian
  MatrixXd reset_jac;
  VectorXd g;       // switching-constraint value at x_N
};

struct ProblemDerivatives {
  std::vector<PhaseDerivatives> phases;
};

/// Evaluates all expansions along the trajectory. The relaxed barrier over
/// path inequalities folds into the running-cost expansion (Gauss-Newton
/// terms only) and the AL terms into the terminal expansion. The evaluation
/// is a pure map over steps; with `derivative_threads > 1` steps are
/// processed concurrently with results identical to the serial order.
ProblemDerivatives evaluate_derivatives(const MultiPhaseProblem& problem,
                                        const SolverTrajectory& traj,
                                        const Settings& settings);

}  // namespace cascade::solver
