#include "cascade/wbc/qp.hpp"

#include <cmath>

#include "cascade/support/error.hpp"

namespace cascade::wbc {

namespace {

constexpr double kDualTol = 1e-11;

struct ReducedProblem {
  VectorXd zp;   // particular equality solution
  MatrixXd Z;    // null basis of Aeq
  MatrixXd Hr;
  VectorXd gr;
  MatrixXd Cr;
  VectorXd dr;
  Eigen::LLT<MatrixXd> hr_llt;
  bool eq_consistent = true;
};

ReducedProblem reduce(const QpProblem& qp) {
  ReducedProblem red;
  const int n = qp.num_vars();
  if (qp.num_eq() == 0) {
    red.zp = VectorXd::Zero(n);
    red.Z = MatrixXd::Identity(n, n);
  } else {
    Eigen::JacobiSVD<MatrixXd> svd(qp.Aeq, Eigen::ComputeFullV | Eigen::ComputeThinU);
    svd.setThreshold(1e-12);
    red.zp = svd.solve(qp.beq);
    const double scale = std::max(1.0, qp.beq.cwiseAbs().maxCoeff());
    if ((qp.Aeq * red.zp - qp.beq).cwiseAbs().maxCoeff() > 1e-8 * scale) {
      red.eq_consistent = false;
      return red;
    }
    const auto rank = svd.rank();
    red.Z = svd.matrixV().rightCols(n - rank);
  }
  red.Hr = red.Z.transpose() * qp.H * red.Z;
  red.Hr = 0.5 * (red.Hr + red.Hr.transpose()).eval();
  red.gr = red.Z.transpose() * (qp.H * red.zp + qp.g);
  red.hr_llt.compute(red.Hr);
  if (red.hr_llt.info() != Eigen::Success)
    throw Error("QP Hessian not positive definite on the equality manifold");
  if (qp.num_ineq() > 0) {
    red.Cr = qp.Cin * red.Z;
    red.dr = qp.din - qp.Cin * red.zp;
  } else {
    red.Cr.resize(0, red.Z.cols());
    red.dr.resize(0);
  }
  return red;
}

struct WorkingSet {
  std::vector<int> rows;
  VectorXd lambda;

  int find(int row) const {
    for (size_t i = 0; i < rows.size(); ++i)
      if (rows[i] == row) return static_cast<int>(i);
    return -1;
  }
  void drop(int pos) {
    rows.erase(rows.begin() + pos);
    VectorXd nl(lambda.size() - 1);
    int j = 0;
    for (int i = 0; i < lambda.size(); ++i)
      if (i != pos) nl[j++] = lambda[i];
    lambda = nl;
  }
  void add(int row, double lam) {
    rows.push_back(row);
    VectorXd nl(lambda.size() + 1);
    nl.head(lambda.size()) = lambda;
    nl[lambda.size()] = lam;
    lambda = nl;
  }
};

// Equality-constrained solve with the current working set via the Schur
// complement on the (pre-factorized) reduced Hessian.
bool solve_working_set(const ReducedProblem& red, WorkingSet& ws, VectorXd& w) {
  const int k = static_cast<int>(ws.rows.size());
  if (k == 0) {
    w = red.hr_llt.solve(-red.gr);
    return true;
  }
  MatrixXd E(k, red.Hr.cols());
  VectorXd dW(k);
  for (int i = 0; i < k; ++i) {
    E.row(i) = red.Cr.row(ws.rows[i]);
    dW[i] = red.dr[ws.rows[i]];
  }
  MatrixXd HE = red.hr_llt.solve(E.transpose());
  MatrixXd S = E * HE;
  Eigen::LDLT<MatrixXd> sld(S);
  if (sld.info() != Eigen::Success) return false;
  VectorXd lam = sld.solve(dW + E * red.hr_llt.solve(red.gr));
  ws.lambda = lam;
  w = red.hr_llt.solve(E.transpose() * lam - red.gr);
  return true;
}

}  // namespace

QpSolution solve_qp(const QpProblem& qp, const std::optional<QpWarmStart>& warm) {
  QpSolution out;
  const int n = qp.num_vars();
  const int mi = qp.num_ineq();

  ReducedProblem red = reduce(qp);
  if (!red.eq_consistent) {
    out.feasible = false;
    out.z = VectorXd::Zero(n);
    out.iterations = 1;
    return out;
  }
  const int nr = static_cast<int>(red.Z.cols());

  int wsr = 0;  // working-set recalculations
  WorkingSet ws;
  ws.lambda.resize(0);

  // seed the working set from the warm start, keeping rows independent
  if (warm && !warm->active.empty()) {
    for (int row : warm->active) {
      if (row < 0 || row >= mi || ws.find(row) >= 0) continue;
      if (static_cast<int>(ws.rows.size()) >= nr) break;
      ws.add(row, 0.0);
      MatrixXd E(ws.rows.size(), nr);
      for (size_t i = 0; i < ws.rows.size(); ++i) E.row(i) = red.Cr.row(ws.rows[i]);
      Eigen::ColPivHouseholderQR<MatrixXd> qr(E.transpose());
      qr.setThreshold(1e-10);
      if (qr.rank() < static_cast<int>(ws.rows.size()))
        ws.drop(static_cast<int>(ws.rows.size()) - 1);
    }
  }

  VectorXd w;
  if (!solve_working_set(red, ws, w)) {
    ws.rows.clear();
    ws.lambda.resize(0);
    solve_working_set(red, ws, w);
  }
  // clean non-optimal warm duals
  while (!ws.rows.empty()) {
    int worst = -1;
    double most_negative = -kDualTol;
    for (int i = 0; i < ws.lambda.size(); ++i)
      if (ws.lambda[i] < most_negative) {
        most_negative = ws.lambda[i];
        worst = i;
      }
    if (worst < 0) break;
    ws.drop(worst);
    ++wsr;
    solve_working_set(red, ws, w);
  }

  const double feas_tol =
      1e-9 * (1.0 + (mi ? red.dr.cwiseAbs().maxCoeff() : 0.0));
  const int max_wsr = 50 + 10 * mi;

  while (true) {
    // most violated inequality
    int p = -1;
    double worst = -feas_tol;
    for (int row = 0; row < mi; ++row) {
      const double v = red.Cr.row(row).dot(w) - red.dr[row];
      if (v < worst) {
        worst = v;
        p = row;
      }
    }
    if (p < 0) break;  // primal feasible: optimal

    double lam_p = 0.0;
    while (true) {
      if (wsr > max_wsr) throw Error("QP active-set iteration limit exceeded");
      const VectorXd cp = red.Cr.row(p).transpose();
      const int k = static_cast<int>(ws.rows.size());
      VectorXd r(k), z(nr);
      if (k == 0) {
        z = red.hr_llt.solve(cp);
      } else {
        MatrixXd E(k, nr);
        for (int i = 0; i < k; ++i) E.row(i) = red.Cr.row(ws.rows[i]);
        MatrixXd HE = red.hr_llt.solve(E.transpose());
        Eigen::LDLT<MatrixXd> sld(MatrixXd(E * HE));
        r = sld.solve(E * red.hr_llt.solve(cp));
        z = red.hr_llt.solve(cp - E.transpose() * r);
      }

      const double viol = cp.dot(w) - red.dr[p];
      const double ctz = cp.dot(z);
      double t1 = std::numeric_limits<double>::infinity();
      int blocking = -1;
      for (int i = 0; i < static_cast<int>(ws.rows.size()); ++i)
        if (k > 0 && r[i] > kDualTol) {
          const double cand = ws.lambda[i] / r[i];
          if (cand < t1) {
            t1 = cand;
            blocking = i;
          }
        }
      const double t2 = (ctz > kDualTol) ? (-viol / ctz)
                                         : std::numeric_limits<double>::infinity();
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        out.feasible = false;
        out.infeasible_row = p;
        out.z = red.zp + red.Z * w;
        out.iterations = wsr + 1;
        return out;
      }
      w += t * z;
      if (k > 0) ws.lambda -= t * r;
      lam_p += t;
      if (t2 <= t1) {
        ws.add(p, lam_p);
        ++wsr;
        break;  // p satisfied and active; rescan
      }
      ws.drop(blocking);
      ++wsr;
    }
  }

  out.z = red.zp + red.Z * w;
  out.iterations = wsr + 1;
  out.active_set = ws.rows;
  out.ineq_duals = VectorXd::Zero(mi);
  for (size_t i = 0; i < ws.rows.size(); ++i) out.ineq_duals[ws.rows[i]] = ws.lambda[i];

  // full-space KKT residuals
  VectorXd grad = qp.H * out.z + qp.g;
  if (mi > 0) grad -= qp.Cin.transpose() * out.ineq_duals;
  if (qp.num_eq() > 0) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(qp.Aeq.transpose());
    out.eq_duals = cod.solve(grad);
    grad -= qp.Aeq.transpose() * out.eq_duals;
  } else {
    out.eq_duals.resize(0);
  }
  out.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  double pf = 0.0;
  if (qp.num_eq() > 0)
    pf = std::max(pf, (qp.Aeq * out.z - qp.beq).cwiseAbs().maxCoeff());
  double comp = 0.0;
  for (int row = 0; row < mi; ++row) {
    const double slack = qp.Cin.row(row).dot(out.z) - qp.din[row];
    pf = std::max(pf, -slack);
    comp = std::max(comp, std::abs(slack * out.ineq_duals[row]));
  }
  out.primal_feasibility = pf;
  out.complementarity = comp;
  return out;
}

}  // namespace cascade::wbc
