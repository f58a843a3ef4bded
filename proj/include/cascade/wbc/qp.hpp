#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace cascade::wbc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Strictly convex quadratic program
///   min 0.5 z'Hz + g'z   s.t.  Aeq z = beq,  Cin z >= din.
/// H must be positive definite on the null space of Aeq.
struct QpProblem {
  MatrixXd H;
  VectorXd g;
  MatrixXd Aeq;
  VectorXd beq;
  MatrixXd Cin;
  VectorXd din;

  // block sizes when assembled by the whole-body controller
  int n_tau = 0, n_qdd = 0, n_force = 0;
  std::vector<std::string> ineq_labels;
  bool degraded = false;

  int num_vars() const { return static_cast<int>(H.rows()); }
  int num_eq() const { return static_cast<int>(Aeq.rows()); }
  int num_ineq() const { return static_cast<int>(Cin.rows()); }
};

struct QpWarmStart {
  VectorXd z0;               // optional primal guess (fast-path KKT check)
  std::vector<int> active;   // inequality rows believed active
};

struct QpSolution {
  VectorXd z;
  VectorXd eq_duals;
  VectorXd ineq_duals;           // full-length, zero off the active set
  std::vector<int> active_set;   // inequality rows active at the solution
  int iterations = 0;            // working-set recalculations + 1
  bool feasible = true;
  int infeasible_row = -1;       // certificate row when feasible == false
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  double complementarity = 0.0;
};

/// Dense active-set solve (dual iteration after equality elimination). The
/// warm start seeds the working set; starting at the optimum verifies in one
/// iteration. Deterministic: identical inputs take the identical path.
QpSolution solve_qp(const QpProblem& qp, const std::optional<QpWarmStart>& warm = {});

}  // namespace cascade::wbc
