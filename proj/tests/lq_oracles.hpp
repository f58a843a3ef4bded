#pragma once

// Test-only oracles, independent of the solver implementation:
//  - finite-horizon discrete Riccati recursion
//  - dense KKT solve of linear-quadratic multi-phase transcriptions
//  - dense value function of the frozen linearized problem

#include <Eigen/Dense>
#include <vector>

#include "cascade/solver/derivatives.hpp"

namespace oracles {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LqrData {
  MatrixXd A, B, Q, R, Qf;
  VectorXd x0;
  int N = 0;
};

struct RiccatiSolution {
  std::vector<MatrixXd> K;  // u_k = -K_k x_k
  std::vector<MatrixXd> S;
  double optimal_cost = 0.0;
};

inline RiccatiSolution riccati_recursion(const LqrData& d) {
  RiccatiSolution out;
  out.S.resize(d.N + 1);
  out.K.resize(d.N);
  out.S[d.N] = d.Qf;
  for (int k = d.N - 1; k >= 0; --k) {
    const MatrixXd BtS = d.B.transpose() * out.S[k + 1];
    out.K[k] = (d.R + BtS * d.B).ldlt().solve(BtS * d.A);
    out.S[k] = d.Q + d.A.transpose() * out.S[k + 1] * (d.A - d.B * out.K[k]);
    out.S[k] = 0.5 * (out.S[k] + out.S[k].transpose()).eval();
  }
  out.optimal_cost = 0.5 * d.x0.dot(out.S[0] * d.x0);
  return out;
}

/// One phase of a linear-quadratic multi-phase problem:
/// x+ = A x + B u, cost 0.5 x'Qx + 0.5 u'Ru per step, 0.5 x'Qf x at the end,
/// reset x0_next = P x_N.
struct LqPhase {
  MatrixXd A, B, Q, R, Qf, P;
  int N = 0;
};

struct DenseSolution {
  std::vector<std::vector<VectorXd>> x;  // per phase
  std::vector<std::vector<VectorXd>> u;
  double cost = 0.0;
};

/// Monolithic equality-constrained QP over all states and controls, solved
/// by one dense KKT factorization.
inline DenseSolution dense_lq_solve(const std::vector<LqPhase>& phases, const VectorXd& x0) {
  int nz = 0, nc = 0;
  std::vector<int> xoff, uoff;
  for (const auto& p : phases) {
    const int nx = static_cast<int>(p.A.rows()), nu = static_cast<int>(p.B.cols());
    xoff.push_back(nz);
    uoff.push_back(nz + (p.N + 1) * nx);
    nz += (p.N + 1) * nx + p.N * nu;
    nc += p.N * nx;  // dynamics rows
  }
  nc += static_cast<int>(x0.size());  // initial condition
  for (size_t i = 0; i + 1 < phases.size(); ++i)
    nc += static_cast<int>(phases[i + 1].A.rows());  // reset rows

  MatrixXd H = MatrixXd::Zero(nz, nz);
  MatrixXd C = MatrixXd::Zero(nc, nz);
  VectorXd b = VectorXd::Zero(nc);

  int row = 0;
  for (size_t i = 0; i < phases.size(); ++i) {
    const auto& p = phases[i];
    const int nx = static_cast<int>(p.A.rows()), nu = static_cast<int>(p.B.cols());
    auto xat = [&](int k) { return xoff[i] + k * nx; };
    auto uat = [&](int k) { return uoff[i] + k * nu; };
    for (int k = 0; k < p.N; ++k) {
      H.block(xat(k), xat(k), nx, nx) += p.Q;
      H.block(uat(k), uat(k), nu, nu) += p.R;
      // dynamics x_{k+1} - A x_k - B u_k = 0
      C.block(row, xat(k + 1), nx, nx).setIdentity();
      C.block(row, xat(k), nx, nx) -= p.A;
      C.block(row, uat(k), nx, nu) -= p.B;
      row += nx;
    }
    H.block(xat(p.N), xat(p.N), nx, nx) += p.Qf;
    if (i + 1 < phases.size()) {
      const int nxn = static_cast<int>(phases[i + 1].A.rows());
      C.block(row, xoff[i + 1], nxn, nxn).setIdentity();
      C.block(row, xat(p.N), nxn, nx) -= p.P;
      row += nxn;
    }
  }
  const int nx0 = static_cast<int>(x0.size());
  C.block(row, 0, nx0, nx0).setIdentity();
  b.segment(row, nx0) = x0;
  row += nx0;

  MatrixXd kkt = MatrixXd::Zero(nz + nc, nz + nc);
  kkt.topLeftCorner(nz, nz) = H;
  kkt.topRightCorner(nz, nc) = C.transpose();
  kkt.bottomLeftCorner(nc, nz) = C;
  VectorXd rhs(nz + nc);
  rhs.head(nz).setZero();
  rhs.tail(nc) = b;
  VectorXd sol = kkt.fullPivLu().solve(rhs);
  VectorXd z = sol.head(nz);

  DenseSolution out;
  out.cost = 0.5 * z.dot(H * z);
  out.x.resize(phases.size());
  out.u.resize(phases.size());
  for (size_t i = 0; i < phases.size(); ++i) {
    const auto& p = phases[i];
    const int nx = static_cast<int>(p.A.rows()), nu = static_cast<int>(p.B.cols());
    for (int k = 0; k <= p.N; ++k) out.x[i].push_back(z.segment(xoff[i] + k * nx, nx));
    for (int k = 0; k < p.N; ++k) out.u[i].push_back(z.segment(uoff[i] + k * nu, nu));
  }
  return out;
}

/// Optimal value of the frozen linearized problem from step k with initial
/// perturbation dx: quadratic expansions from `derivs` along the nominal, the
/// defect-carrying linear dynamics as equality constraints. Single phase.
inline double frozen_lq_value(const cascade::solver::PhaseDerivatives& pd,
                              const std::vector<VectorXd>& defects, int k0,
                              const VectorXd& dx0, int N) {
  using cascade::solver::StepDerivatives;
  const int nx = static_cast<int>(dx0.size());
  const int steps = N - k0;
  if (steps == 0)
    return pd.phix.dot(dx0) + 0.5 * dx0.dot(pd.phixx * dx0);
  const int nu = static_cast<int>(pd.steps[k0].B.cols());
  const int nz = (steps + 1) * nx + steps * nu;
  const int nc = (steps + 1) * nx;  // pinned start + dynamics
  auto xat = [&](int j) { return j * nx; };
  auto uat = [&](int j) { return (steps + 1) * nx + j * nu; };

  MatrixXd H = MatrixXd::Zero(nz, nz);
  VectorXd f = VectorXd::Zero(nz);
  MatrixXd C = MatrixXd::Zero(nc, nz);
  VectorXd b = VectorXd::Zero(nc);

  for (int j = 0; j < steps; ++j) {
    const StepDerivatives& sd = pd.steps[k0 + j];
    H.block(xat(j), xat(j), nx, nx) += sd.lxx;
    H.block(uat(j), uat(j), nu, nu) += sd.luu;
    H.block(uat(j), xat(j), nu, nx) += sd.lux;
    H.block(xat(j), uat(j), nx, nu) += sd.lux.transpose();
    f.segment(xat(j), nx) += sd.lx;
    f.segment(uat(j), nu) += sd.lu;
    // dynamics j: dx_{j+1} - A dx_j - B du_j = d_{j+1}
    C.block(j * nx, xat(j + 1), nx, nx).setIdentity();
    C.block(j * nx, xat(j), nx, nx) -= sd.A;
    C.block(j * nx, uat(j), nx, nu) -= sd.B;
    b.segment(j * nx, nx) = defects[k0 + j + 1];
  }
  H.block(xat(steps), xat(steps), nx, nx) += pd.phixx;
  f.segment(xat(steps), nx) += pd.phix;
  C.block(steps * nx, xat(0), nx, nx).setIdentity();
  b.segment(steps * nx, nx) = dx0;

  MatrixXd kkt = MatrixXd::Zero(nz + nc, nz + nc);
  kkt.topLeftCorner(nz, nz) = H;
  kkt.topRightCorner(nz, nc) = C.transpose();
  kkt.bottomLeftCorner(nc, nz) = C;
  VectorXd rhs(nz + nc);
  rhs.head(nz) = -f;
  rhs.tail(nc) = b;
  VectorXd z = kkt.fullPivLu().solve(rhs).head(nz);
  return 0.5 * z.dot(H * z) + f.dot(z);
}

}  // namespace oracles
