#include "cascade/solver/msilqr.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace cascade::solver {

using cascade::ocp::CostBreakdown;
using cascade::ocp::Phase;

namespace {

double elapsed(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

BackwardPassResult backward_sweep(const MultiPhaseProblem& problem,
                                  const SolverTrajectory& traj,
                                  const ProblemDerivatives& derivs, double rho) {
  const int np = problem.num_phases();
  BackwardPassResult out;
  out.phases.resize(np);
  out.rho = rho;

  MatrixXd S_next;  // value at node 0 of the phase after the current one
  VectorXd s_next;
  double drift_next = 0.0;

  for (int i = np - 1; i >= 0; --i) {
    const Phase& p = problem.phases[i];
    const auto& t = traj.phases[i];
    const PhaseDerivatives& pd = derivs.phases[i];
    PhaseBackward& pb = out.phases[i];
    pb.q.resize(p.N);
    pb.v.resize(p.N + 1);
    pb.kff.resize(p.N);
    pb.K.resize(p.N);

    // terminal value of this phase
    ValueExpansion& vN = pb.v[p.N];
    if (i == np - 1) {
      vN.S = pd.phixx;
      vN.s = pd.phix;
      vN.drift = 0.0;
    } else {
      // impact-aware boundary step: propagate the next phase's node-0 value
      // through the reset Jacobian, defect-corrected.
      const VectorXd& d0 = traj.phases[i + 1].defect[0];
      const MatrixXd& Px = pd.reset_jac;
      VectorXd s_hat = s_next + S_next * d0;
      vN.s = pd.phix + Px.transpose() * s_hat;
      vN.S = pd.phixx + Px.transpose() * S_next * Px;
      vN.S = 0.5 * (vN.S + vN.S.transpose()).eval();
      vN.drift = drift_next;
    }

    for (int k = p.N - 1; k >= 0; --k) {
      const StepDerivatives& sd = pd.steps[k];
      const ValueExpansion& vn = pb.v[k + 1];
      QExpansion& q = pb.q[k];

      const VectorXd s_hat = vn.s + vn.S * t.defect[k + 1];
      q.Qx = sd.lx + sd.A.transpose() * s_hat;
      q.Qu = sd.lu + sd.B.transpose() * s_hat;
      q.Qxx = sd.lxx + sd.A.transpose() * vn.S * sd.A;
      q.Quu = sd.luu + sd.B.transpose() * vn.S * sd.B;
      q.Qux = sd.lux + sd.B.transpose() * vn.S * sd.A;
      q.Qxx = 0.5 * (q.Qxx + q.Qxx.transpose()).eval();
      q.Quu = 0.5 * (q.Quu + q.Quu.transpose()).eval();
      if (rho > 0)
        q.Quu += rho * MatrixXd::Identity(p.control_dim, p.control_dim);

      Eigen::LLT<MatrixXd> llt(q.Quu);
      if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(q.Quu);
        out.worst_eigenvalue = es.eigenvalues().minCoeff();
        out.ok = false;
        return out;
      }
      pb.kff[k] = -llt.solve(q.Qu);
      pb.K[k] = -llt.solve(q.Qux);

      ValueExpansion& v = pb.v[k];
      v.S = q.Qxx - q.Qux.transpose() * llt.solve(q.Qux);
      v.S = 0.5 * (v.S + v.S.transpose()).eval();
      v.s = q.Qx - q.Qux.transpose() * llt.solve(q.Qu);
      v.drift = vn.drift - 0.5 * q.Qu.dot(llt.solve(q.Qu));

      out.delta1 += q.Qu.dot(pb.kff[k]);
      out.delta2 += 0.5 * pb.kff[k].dot(q.Quu * pb.kff[k]);
      out.max_value_gradient =
          std::max(out.max_value_gradient, v.s.size() ? v.s.cwiseAbs().maxCoeff() : 0.0);
    }
    S_next = pb.v[0].S;
    s_next = pb.v[0].s;
    drift_next = pb.v[0].drift;
  }
  out.ok = true;
  return out;
}

ForwardResult forward_sweep(const MultiPhaseProblem& problem, const SolverTrajectory& traj,
                            const BackwardPassResult& bp, const ProblemDerivatives& derivs,
                            double alpha) {
  ForwardResult out;
  out.traj = traj;  // copies the shooting layout
  const int np = problem.num_phases();

  for (int i = 0; i < np; ++i) {
    const Phase& p = problem.phases[i];
    const auto& told = traj.phases[i];
    auto& tnew = out.traj.phases[i];

    if (i == 0) {
      tnew.x[0] = told.shooting[0] ? told.x[0] : problem.x0;
    } else {
      const Phase& prev = problem.phases[i - 1];
      const auto& prev_old = traj.phases[i - 1];
      const auto& prev_new = out.traj.phases[i - 1];
      if (told.shooting[0]) {
        const MatrixXd& Px = derivs.phases[i - 1].reset_jac;
        tnew.x[0] = told.x[0] + Px * (prev_new.x[prev.N] - prev_old.x[prev.N]) +
                    alpha * told.defect[0];
      } else {
        tnew.x[0] = prev.apply_reset(prev_new.x[prev.N]);
      }
    }

    for (int k = 0; k < p.N; ++k) {
      const VectorXd dx = tnew.x[k] - told.x[k];
      tnew.u[k] = told.u[k] + alpha * bp.phases[i].kff[k] + bp.phases[i].K[k] * dx;
      if (!tnew.u[k].allFinite()) {
        out.diverged = true;
        return out;
      }
      if (told.shooting[k + 1]) {
        // defects close at rate alpha: the full step absorbs them entirely,
        // shorter steps leave (1-alpha) of the gap for later iterations
        const StepDerivatives& sd = derivs.phases[i].steps[k];
        tnew.x[k + 1] = told.x[k + 1] + sd.A * dx + sd.B * (tnew.u[k] - told.u[k]) +
                        alpha * told.defect[k + 1];
      } else {
        tnew.x[k + 1] = p.dynamics(tnew.x[k], tnew.u[k], k);
      }
      if (!tnew.x[k + 1].allFinite()) {
        out.diverged = true;
        return out;
      }
    }
  }
  ocp::evaluate_defects(problem, out.traj);
  out.cost = ocp::total_cost(problem, out.traj);
  if (!std::isfinite(out.cost.total())) out.diverged = true;
  return out;
}

LineSearchResult line_search(const MultiPhaseProblem& problem, const SolverTrajectory& traj,
                             const BackwardPassResult& bp, const ProblemDerivatives& derivs,
                             const CostBreakdown& current_cost, const Settings& settings) {
  LineSearchResult out;
  // merit weight: at least the largest value-function gradient seen in the
  // sweep, so the L1 defect term dominates the linearized cost change
  const double nu = 1.01 * bp.max_value_gradient + 1e-8;
  out.merit_before = current_cost.total() + nu * traj.defect_l1();

  double alpha = 1.0;
  for (int trial = 0; trial < settings.max_ls_trials; ++trial) {
    ++out.trials;
    ForwardResult fr = forward_sweep(problem, traj, bp, derivs, alpha);
    if (!fr.diverged) {
      const double merit = fr.cost.total() + nu * fr.traj.defect_l1();
      const double expected = alpha * bp.delta1 + alpha * alpha * bp.delta2;
      const bool tiny_model = std::abs(expected) < 1e-16;
      const double reduction = out.merit_before - merit;
      // with a numerically null model the step is a no-op; accept on
      // non-increase up to roundoff
      const bool accept =
          tiny_model ? (reduction >= -1e-12 * std::max(1.0, std::abs(out.merit_before)))
                     : (reduction >= settings.armijo_c1 * std::abs(expected));
      if (accept) {
        out.accepted = true;
        out.alpha = alpha;
        out.merit_after = merit;
        out.forward = std::move(fr);
        return out;
      }
    }
    alpha *= settings.backtrack_factor;
  }
  return out;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::MaxWallTime: return "max-wall-time";
    case SolveStatus::NoProgress: return "no-progress";
  }
  return "unknown";
}

void SolveReport::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "# outer inner cost defect_inf g_inf alpha rho wall_time ls_trials\n";
  out << std::setprecision(12);
  for (const auto& r : iterations)
    out << r.outer << " " << r.inner << " " << r.cost << " " << r.defect_inf << " "
        << r.constraint_inf << " " << r.alpha << " " << r.rho << " " << r.wall_time
        << " " << r.ls_trials << "\n";
  out << "# status " << to_string(status) << " cost " << final_cost << " defect "
      << final_defect << " constraint " << final_constraint << " time " << solve_time
      << "\n";
}

SolveResult solve(MultiPhaseProblem& problem, const SolverTrajectory& initial,
                  const Settings& settings) {
  problem.validate();
  const auto t_start = std::chrono::steady_clock::now();

  SolveResult result;
  result.traj = initial;
  ocp::check_dimensions(problem, result.traj);
  // the first node is never independent: pin it to the initial state;
  // roll-out nodes are simulated up front so their defects start at zero
  result.traj.phases[0].shooting[0] = 0;
  result.traj.phases[0].x[0] = problem.x0;
  ocp::resimulate_rollout_nodes(problem, result.traj);

  double rho = settings.reg_init;
  bool out_of_time = false;

  auto inner_converged = [&](double dcost, double defect, double expected) {
    return (std::abs(dcost) < settings.cost_tol || std::abs(expected) < settings.cost_tol) &&
           defect < settings.defect_tol;
  };

  const bool has_switching = [&] {
    for (const auto& p : problem.phases)
      if (p.switch_dim > 0) return true;
    return false;
  }();
  const bool has_ineq = [&] {
    for (const auto& p : problem.phases)
      if (p.ineq_dim > 0) return true;
    return false;
  }();
  const int outer_iters = (has_switching || has_ineq) ? settings.max_outer_al_iters : 1;

  SolveStatus status = SolveStatus::MaxIterations;
  CostBreakdown cost = ocp::total_cost(problem, result.traj);
  int total_inner = 0;
  int outer_done = 0;

  for (int outer = 0; outer < outer_iters; ++outer) {
    ++outer_done;
    cost = ocp::total_cost(problem, result.traj);  // multipliers may have changed
    bool converged_inner = false;

    for (int inner = 0; inner < settings.max_inner_iters; ++inner) {
      if (settings.max_wall_time > 0 && elapsed(t_start) > settings.max_wall_time) {
        out_of_time = true;
        break;
      }
      ProblemDerivatives derivs = evaluate_derivatives(problem, result.traj, settings);

      BackwardPassResult bp;
      bool progressed = false;
      while (true) {
        bp = backward_sweep(problem, result.traj, derivs, rho);
        if (!bp.ok) {
          rho = std::max(rho * settings.reg_up, settings.reg_init);
          if (rho > settings.reg_max) break;
          continue;
        }
        LineSearchResult ls =
            line_search(problem, result.traj, bp, derivs, cost, settings);
        if (ls.accepted) {
          ++total_inner;
          const double dcost = cost.total() - ls.forward.cost.total();
          result.traj = std::move(ls.forward.traj);
          cost = ls.forward.cost;
          rho *= settings.reg_down;
          progressed = true;

          IterationRecord rec;
          rec.outer = outer;
          rec.inner = inner;
          rec.cost = cost.total();
          rec.defect_inf = result.traj.max_defect();
          rec.constraint_inf = ocp::switching_violation(problem, result.traj);
          rec.alpha = ls.alpha;
          rec.rho = rho;
          rec.wall_time = elapsed(t_start);
          rec.ls_trials = ls.trials;
          rec.merit_before = ls.merit_before;
          rec.merit_after = ls.merit_after;
          result.report.iterations.push_back(rec);
          if (settings.verbose)
            std::cout << "[msilqr] outer " << outer << " inner " << inner << " cost "
                      << rec.cost << " defect " << rec.defect_inf << " alpha "
                      << rec.alpha << " rho " << rec.rho << "\n";

          const double expected = bp.delta1 + bp.delta2;
          if (inner_converged(dcost, rec.defect_inf, expected)) converged_inner = true;
          break;
        }
        rho = std::max(rho * settings.reg_up, settings.reg_init);
        if (rho > settings.reg_max) break;
      }
      if (!progressed) {
        status = SolveStatus::NoProgress;
        break;
      }
      if (converged_inner) break;
    }

    if (out_of_time) {
      status = SolveStatus::MaxWallTime;
      break;
    }
    if (status == SolveStatus::NoProgress) break;

    const double gviol = ocp::switching_violation(problem, result.traj);
    if (converged_inner && gviol < settings.constraint_tol) {
      status = SolveStatus::Converged;
      break;
    }
    if (outer + 1 < outer_iters) {
      // AL multiplier/penalty update and barrier tightening
      for (int i = 0; i < problem.num_phases(); ++i) {
        const Phase& p = problem.phases[i];
        if (p.switch_dim == 0) continue;
        VectorXd g = p.switching_constraint(result.traj.phases[i].x[p.N]);
        problem.al_multipliers[i] += problem.al_penalty * g;
      }
      problem.al_penalty = std::min(problem.al_penalty * settings.al_growth,
                                    settings.al_sigma_max);
      problem.reb_delta = std::max(problem.reb_delta * settings.reb_shrink,
                                   settings.reb_delta_floor);
    } else if (converged_inner) {
      status = SolveStatus::MaxIterations;  // outer budget exhausted
    }
  }

  // final backward pass on the accepted trajectory so gains, value and
  // action-value expansions are consistent with what is returned
  ProblemDerivatives derivs = evaluate_derivatives(problem, result.traj, settings);
  if (settings.exact_final_gains) {
    result.bp = backward_sweep(problem, result.traj, derivs, 0.0);
    if (!result.bp.ok) result.bp = backward_sweep(problem, result.traj, derivs, rho);
  } else {
    result.bp = backward_sweep(problem, result.traj, derivs, rho);
  }
  if (!result.bp.ok) {
    double r = std::max(rho, settings.reg_init);
    while (!result.bp.ok && r <= settings.reg_max) {
      r *= settings.reg_up;
      result.bp = backward_sweep(problem, result.traj, derivs, r);
    }
  }

  result.report.status = status;
  result.report.solve_time = elapsed(t_start);
  result.report.final_cost = cost.total();
  result.report.final_defect = result.traj.max_defect();
  result.report.final_constraint = ocp::switching_violation(problem, result.traj);
  result.report.inner_iterations = total_inner;
  result.report.outer_iterations = outer_done;
  return result;
}

}  // namespace cascade::solver
