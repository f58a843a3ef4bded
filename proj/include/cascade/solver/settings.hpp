#pragma once

#include <limits>

namespace cascade::solver {

struct Settings {
  // inner loop
  int max_inner_iters = 100;
  double max_wall_time = 0.0;  // seconds; <= 0 disables the cap
  double cost_tol = 1e-8;
  double defect_tol = 1e-8;

  // line search
  double armijo_c1 = 1e-4;
  double backtrack_factor = 0.5;
  int max_ls_trials = 10;

  // regularization of Quu
  double reg_init = 1e-6;
  double reg_up = 10.0;
  double reg_down = 0.5;
  double reg_max = 1e6;

  // outer constraint loop
  int max_outer_al_iters = 8;
  double constraint_tol = 1e-6;
  double al_growth = 10.0;
  double al_sigma_max = 1e8;
  double reb_shrink = 0.5;
  double reb_delta_floor = 1e-4;

  // derivative evaluation
  int derivative_threads = 1;

  // the final reported backward pass retries with rho = 0 for clean gains
  bool exact_final_gains = true;

  bool verbose = false;
};

}  // namespace cascade::solver
