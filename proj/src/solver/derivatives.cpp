#include "cascade/solver/derivatives.hpp"

#include <thread>

namespace cascade::solver {

namespace {

using cascade::ocp::Phase;

double fd_h(double step, double ref) { return step * std::max(1.0, std::abs(ref)); }

void fd_dynamics_jacobian(const Phase& p, double step, const VectorXd& x,
                          const VectorXd& u, int k, MatrixXd& A, MatrixXd& B) {
  VectorXd xp = x, xm = x;
  VectorXd f0 = p.dynamics(x, u, k);
  A.resize(f0.size(), x.size());
  B.resize(f0.size(), u.size());
  for (int i = 0; i < x.size(); ++i) {
    const double h = fd_h(step, x[i]);
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    A.col(i) = (p.dynamics(xp, u, k) - p.dynamics(xm, u, k)) / (2 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  VectorXd up = u, um = u;
  for (int i = 0; i < u.size(); ++i) {
    const double h = fd_h(step, u[i]);
    up[i] = u[i] + h;
    um[i] = u[i] - h;
    B.col(i) = (p.dynamics(x, up, k) - p.dynamics(x, um, k)) / (2 * h);
    up[i] = u[i];
    um[i] = u[i];
  }
}

// Gradient and Hessian of a scalar function by central differences. Second
// differences use a coarser step: the cancellation noise of (f+ - 2f0 + f-)
// scales as eps/h^2, so h ~ step^(2/3) balances it against truncation.
template <typename F>
void fd_scalar_expansion(F&& f, double step, const VectorXd& z, VectorXd& grad,
                         MatrixXd& hess) {
  const int n = static_cast<int>(z.size());
  grad.resize(n);
  hess.resize(n, n);
  const double hess_step = std::pow(step, 2.0 / 3.0);
  VectorXd zp = z, zm = z;
  const double f0 = f(z);
  for (int i = 0; i < n; ++i) {
    const double h = fd_h(step, z[i]);
    zp[i] = z[i] + h;
    zm[i] = z[i] - h;
    grad[i] = (f(zp) - f(zm)) / (2 * h);
    zp[i] = z[i];
    zm[i] = z[i];
  }
  std::vector<double> h2(n);
  for (int i = 0; i < n; ++i) h2[i] = fd_h(hess_step, z[i]);
  for (int i = 0; i < n; ++i) {
    zp[i] = z[i] + h2[i];
    zm[i] = z[i] - h2[i];
    hess(i, i) = (f(zp) - 2 * f0 + f(zm)) / (h2[i] * h2[i]);
    zp[i] = z[i];
    zm[i] = z[i];
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      VectorXd zz = z;
      zz[i] += h2[i];
      zz[j] += h2[j];
      const double fpp = f(zz);
      zz[j] -= 2 * h2[j];
      const double fpm = f(zz);
      zz[i] -= 2 * h2[i];
      const double fmm = f(zz);
      zz[j] += 2 * h2[j];
      const double fmp = f(zz);
      hess(i, j) = hess(j, i) = (fpp - fpm - fmp + fmm) / (4 * h2[i] * h2[j]);
    }
  }
}

template <typename F>
MatrixXd fd_vector_jacobian(F&& f, double step, const VectorXd& z) {
  VectorXd f0 = f(z);
  MatrixXd J(f0.size(), z.size());
  VectorXd zp = z, zm = z;
  for (int i = 0; i < z.size(); ++i) {
    const double h = fd_h(step, z[i]);
    zp[i] = z[i] + h;
    zm[i] = z[i] - h;
    J.col(i) = (f(zp) - f(zm)) / (2 * h);
    zp[i] = z[i];
    zm[i] = z[i];
  }
  return J;
}

// Runs fn(i) for i in [0, n) over `threads` workers with static slabs.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int t = std::min(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (int w = 0; w < t; ++w) {
    const int lo = static_cast<int>(static_cast<long>(n) * w / t);
    const int hi = static_cast<int>(static_cast<long>(n) * (w + 1) / t);
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

ProblemDerivatives evaluate_derivatives(const MultiPhaseProblem& problem,
                                        const SolverTrajectory& traj,
                                        const Settings& settings) {
  ProblemDerivatives out;
  out.phases.resize(problem.num_phases());
  const double step = problem.fd_step;

  for (int i = 0; i < problem.num_phases(); ++i) {
    const Phase& p = problem.phases[i];
    const auto& t = traj.phases[i];
    PhaseDerivatives& pd = out.phases[i];
    pd.steps.resize(p.N);

    parallel_for(p.N, settings.derivative_threads, [&](int k) {
      StepDerivatives& sd = pd.steps[k];
      const VectorXd& x = t.x[k];
      const VectorXd& u = t.u[k];

      if (p.dynamics_jacobian)
        p.dynamics_jacobian(x, u, k, sd.A, sd.B);
      else
        fd_dynamics_jacobian(p, step, x, u, k, sd.A, sd.B);

      if (p.running_cost_expansion) {
        p.running_cost_expansion(x, u, k, sd.lx, sd.lu, sd.lxx, sd.luu, sd.lux);
      } else {
        VectorXd z(x.size() + u.size());
        z << x, u;
        VectorXd grad;
        MatrixXd hess;
        fd_scalar_expansion(
            [&](const VectorXd& zz) {
              return p.running_cost(zz.head(x.size()), zz.tail(u.size()), k);
            },
            step, z, grad, hess);
        sd.lx = grad.head(x.size());
        sd.lu = grad.tail(u.size());
        sd.lxx = hess.topLeftCorner(x.size(), x.size());
        sd.luu = hess.bottomRightCorner(u.size(), u.size());
        sd.lux = hess.bottomLeftCorner(u.size(), x.size());
      }

      if (p.ineq_dim > 0) {
        VectorXd h = p.path_ineq(x, u, k);
        MatrixXd hx, hu;
        if (p.path_ineq_jacobian) {
          p.path_ineq_jacobian(x, u, k, hx, hu);
        } else {
          MatrixXd J = fd_vector_jacobian(
              [&](const VectorXd& zz) {
                return p.path_ineq(zz.head(x.size()), zz.tail(u.size()), k);
              },
              step, (VectorXd(x.size() + u.size()) << x, u).finished());
          hx = J.leftCols(x.size());
          hu = J.rightCols(u.size());
        }
        VectorXd b1(h.size()), b2(h.size());
        for (int r = 0; r < h.size(); ++r) {
          b1[r] = problem.reb_weight * ocp::relaxed_barrier_d1(h[r], problem.reb_delta);
          b2[r] = problem.reb_weight * ocp::relaxed_barrier_d2(h[r], problem.reb_delta);
        }
        sd.lx.noalias() += hx.transpose() * b1;
        sd.lu.noalias() += hu.transpose() * b1;
        sd.lxx.noalias() += hx.transpose() * b2.asDiagonal() * hx;
        sd.luu.noalias() += hu.transpose() * b2.asDiagonal() * hu;
        sd.lux.noalias() += hu.transpose() * b2.asDiagonal() * hx;
      }
    });

    const VectorXd& xN = t.x[p.N];
    if (p.terminal_cost) {
      if (p.terminal_cost_expansion) {
        p.terminal_cost_expansion(xN, pd.phix, pd.phixx);
      } else {
        fd_scalar_expansion([&](const VectorXd& z) { return p.terminal_cost(z); }, step,
                            xN, pd.phix, pd.phixx);
      }
    } else {
      pd.phix = VectorXd::Zero(p.state_dim);
      pd.phixx = MatrixXd::Zero(p.state_dim, p.state_dim);
    }

    if (p.switch_dim > 0) {
      pd.g = p.switching_constraint(xN);
      MatrixXd gx;
      if (p.switching_jacobian)
        p.switching_jacobian(xN, gx);
      else
        gx = fd_vector_jacobian([&](const VectorXd& z) { return p.switching_constraint(z); },
                                step, xN);
      const VectorXd lam = problem.al_multipliers[i] + problem.al_penalty * pd.g;
      pd.phix.noalias() += gx.transpose() * lam;
      pd.phixx.noalias() += problem.al_penalty * gx.transpose() * gx;
    } else {
      pd.g = VectorXd::Zero(0);
    }

    if (i + 1 < problem.num_phases()) {
      if (p.reset_jacobian)
        p.reset_jacobian(xN, pd.reset_jac);
      else if (p.reset)
        pd.reset_jac = fd_vector_jacobian([&](const VectorXd& z) { return p.reset(z); },
                                          step, xN);
      else
        pd.reset_jac = MatrixXd::Identity(p.next_state_dim, p.state_dim);
    }
  }
  return out;
}

}  // namespace cascade::solver
