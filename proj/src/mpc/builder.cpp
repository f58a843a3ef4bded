#include "cascade/mpc/builder.hpp"

#include <cmath>
#include <memory>

#include "cascade/dynamics/kinematics.hpp"
#include "cascade/dynamics/rigid_body.hpp"
#include "kkt_cache.hpp"

namespace cascade::mpc {

using dyn::ContactSet;
using dyn::KinematicTree;
using ocp::Phase;

CostWeights CostWeights::defaults(const KinematicTree& tree) {
  CostWeights w;
  const int nq = tree.nq();
  const int na = tree.num_joints();
  w.w_q = VectorXd::Constant(nq, 1.0);
  w.w_q[0] = 80.0;                        // pitch
  w.w_q[1] = 10.0;                        // x
  w.w_q[2] = 150.0;                       // z
  w.w_q.tail(na).setConstant(0.4);
  w.w_qd = VectorXd::Constant(nq, 0.1);
  w.w_qd[0] = 2.0;
  w.w_qd[1] = 2.0;
  w.w_qd[2] = 2.0;
  w.w_qd.tail(na).setConstant(0.01);
  w.w_foot_pos = 300.0;
  w.w_foot_vel = 1.0;
  w.r_tau = VectorXd::Constant(na, 1e-4);
  w.r_grf = 1e-5;
  w.interior_terminal_scale = 0.01;
  w.final_terminal_scale = 0.4;
  return w;
}

std::pair<int, int> BuiltProblem::wb_step(int global) const {
  int acc = 0;
  for (size_t i = 0; i < info.size(); ++i) {
    if (info[i].is_srb) break;
    const int n = problem.phases[i].N;
    if (global < acc + n || (global == acc + n && i + 1 >= info.size()))
      return {static_cast<int>(i), global - acc};
    acc += n;
  }
  // landed exactly on a later boundary: prefer the next phase's first node
  acc = 0;
  for (size_t i = 0; i < info.size(); ++i) {
    if (info[i].is_srb) break;
    const int n = problem.phases[i].N;
    if (global <= acc + n) {
      if (global == acc + n && i + 1 < info.size() && !info[i + 1].is_srb)
        return {static_cast<int>(i + 1), 0};
      return {static_cast<int>(i), global - acc};
    }
    acc += n;
  }
  throw Error("whole-body step index out of range");
}

namespace {

VectorXd nan_state(int n) {
  return VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
}

struct SharedContext {
  KinematicTree tree;
  ReferenceTrajectory ref;
  CostWeights weights;
  BuildOptions options;
  mutable internal::KktCache kkt;
};

// d(J qd)/dq by central differences, for the swing-velocity gradient
MatrixXd foot_vel_q_jacobian(const KinematicTree& tree, const VectorXd& q,
                             const VectorXd& qd, int ee) {
  const int nq = tree.nq();
  MatrixXd out(tree.contact_dim(), nq);
  VectorXd qp = q, qm = q;
  for (int k = 0; k < nq; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(q[k]));
    qp[k] = q[k] + h;
    qm[k] = q[k] - h;
    out.col(k) = (dyn::ee_velocity(tree, qp, qd, ee) - dyn::ee_velocity(tree, qm, qd, ee)) /
                 (2 * h);
    qp[k] = q[k];
    qm[k] = q[k];
  }
  return out;
}

Phase make_wb_phase(const std::shared_ptr<SharedContext>& ctx, const ContactSet& mode,
                    double t_start, int steps, double dt, const ContactSet& touchdown,
                    const ContactSet& next_mode, bool is_last_wb, bool srb_follows) {
  const KinematicTree& tree = ctx->tree;
  const int nq = tree.nq();
  const int na = tree.num_joints();
  const int nx = 2 * nq;

  Phase p;
  p.N = steps;
  p.dt = dt;
  p.state_dim = nx;
  p.control_dim = na;

  const double alpha = ctx->options.baumgarte;
  p.dynamics = [ctx, mode, dt, alpha, nq, nx](const VectorXd& x, const VectorXd& u, int) {
    try {
      auto dynres = ctx->kkt.eval(ctx->tree, x.head(nq), x.tail(nq), u, mode, alpha);
      VectorXd next(nx);
      next.head(nq) = x.head(nq) + dt * x.tail(nq);
      next.tail(nq) = x.tail(nq) + dt * dynres.qdd;
      return next;
    } catch (const Error&) {
      return nan_state(nx);
    }
  };

  // swing legs for the tracking terms (Eq.-16 style selector)
  std::vector<int> swing;
  for (int j = 0; j < tree.num_ees(); ++j)
    if (!mode.active[j]) swing.push_back(j);

  auto tracking_cost = [ctx, swing, t_start, nq](const VectorXd& x, double t_local,
                                                 bool with_feet) {
    const auto& w = ctx->weights;
    ReferenceSample r = ctx->ref.at(t_start + t_local);
    const VectorXd dq = x.head(nq) - r.q;
    const VectorXd dqd = x.tail(nq) - r.qd;
    double c = dq.dot(w.w_q.asDiagonal() * dq) + dqd.dot(w.w_qd.asDiagonal() * dqd);
    if (with_feet && !swing.empty()) {
      auto ee = dyn::forward_kinematics(ctx->tree, x.head(nq));
      for (int j : swing) {
        c += w.w_foot_pos * (ee[j].position - r.foot_pos[j]).squaredNorm();
        VectorXd v = dyn::ee_velocity(ctx->tree, x.head(nq), x.tail(nq), j);
        c += w.w_foot_vel * (v - r.foot_vel[j]).squaredNorm();
      }
    }
    return c;
  };

  p.running_cost = [ctx, tracking_cost, dt](const VectorXd& x, const VectorXd& u, int k) {
    const double tc = tracking_cost(x, (k + 0.0) * dt, true);
    return dt * (tc + u.dot(ctx->weights.r_tau.asDiagonal() * u));
  };

  p.running_cost_expansion = [ctx, swing, t_start, dt, nq, na](
                                 const VectorXd& x, const VectorXd& u, int k, VectorXd& lx,
                                 VectorXd& lu, MatrixXd& lxx, MatrixXd& luu,
                                 MatrixXd& lux) {
    const auto& w = ctx->weights;
    const KinematicTree& tree = ctx->tree;
    ReferenceSample r = ctx->ref.at(t_start + k * dt);
    const VectorXd q = x.head(nq), qd = x.tail(nq);
    const int nx2 = 2 * nq;
    lx = VectorXd::Zero(nx2);
    lxx = MatrixXd::Zero(nx2, nx2);
    lx.head(nq) = 2.0 * (w.w_q.asDiagonal() * (q - r.q));
    lx.tail(nq) = 2.0 * (w.w_qd.asDiagonal() * (qd - r.qd));
    lxx.topLeftCorner(nq, nq) = 2.0 * w.w_q.asDiagonal().toDenseMatrix();
    lxx.bottomRightCorner(nq, nq) = 2.0 * w.w_qd.asDiagonal().toDenseMatrix();
    if (!swing.empty()) {
      dyn::FrameSet frames = dyn::compute_frames(tree, q);
      for (int j : swing) {
        const VectorXd pj = dyn::ee_position(tree, frames, j);
        const MatrixXd J =
            dyn::point_jacobian(tree, q, frames, tree.end_effectors[j].link, pj);
        const VectorXd dp = pj - r.foot_pos[j];
        lx.head(nq) += 2.0 * w.w_foot_pos * (J.transpose() * dp);
        lxx.topLeftCorner(nq, nq) += 2.0 * w.w_foot_pos * (J.transpose() * J);

        const VectorXd v = J * qd;
        const VectorXd dv = v - r.foot_vel[j];
        const MatrixXd Vq = foot_vel_q_jacobian(tree, q, qd, j);
        lx.head(nq) += 2.0 * w.w_foot_vel * (Vq.transpose() * dv);
        lx.tail(nq) += 2.0 * w.w_foot_vel * (J.transpose() * dv);
        lxx.topLeftCorner(nq, nq) += 2.0 * w.w_foot_vel * (Vq.transpose() * Vq);
        lxx.bottomRightCorner(nq, nq) += 2.0 * w.w_foot_vel * (J.transpose() * J);
        lxx.topRightCorner(nq, nq) += 2.0 * w.w_foot_vel * (Vq.transpose() * J);
        lxx.bottomLeftCorner(nq, nq) += 2.0 * w.w_foot_vel * (J.transpose() * Vq);
      }
    }
    lx *= dt;
    lxx *= dt;
    lu = dt * 2.0 * (w.r_tau.asDiagonal() * u);
    luu = dt * 2.0 * w.r_tau.asDiagonal().toDenseMatrix();
    lux = MatrixXd::Zero(na, nx2);
  };

  const double term_scale = (is_last_wb && !srb_follows)
                                ? ctx->weights.final_terminal_scale
                                : ctx->weights.interior_terminal_scale;
  const double t_term = steps * dt;
  p.terminal_cost = [tracking_cost, term_scale, t_term](const VectorXd& x) {
    return term_scale * tracking_cost(x, t_term, false);
  };
  p.terminal_cost_expansion = [ctx, t_start, t_term, term_scale, nq](
                                  const VectorXd& x, VectorXd& g, MatrixXd& H) {
    const auto& w = ctx->weights;
    ReferenceSample r = ctx->ref.at(t_start + t_term);
    g = VectorXd::Zero(2 * nq);
    H = MatrixXd::Zero(2 * nq, 2 * nq);
    g.head(nq) = 2.0 * term_scale * (w.w_q.asDiagonal() * (x.head(nq) - r.q));
    g.tail(nq) = 2.0 * term_scale * (w.w_qd.asDiagonal() * (x.tail(nq) - r.qd));
    H.topLeftCorner(nq, nq) = 2.0 * term_scale * w.w_q.asDiagonal().toDenseMatrix();
    H.bottomRightCorner(nq, nq) = 2.0 * term_scale * w.w_qd.asDiagonal().toDenseMatrix();
  };

  // path inequalities: torque box, joint box, speed box, friction pyramid
  const int n_stance = mode.count();
  p.ineq_dim = 6 * na + 2 * n_stance * (tree.contact_dim() - 1);
  p.path_ineq = [ctx, mode, nq, na, alpha](const VectorXd& x, const VectorXd& u, int) {
    const KinematicTree& tree = ctx->tree;
    const int pyr = 2 * mode.count() * (tree.contact_dim() - 1);
    VectorXd h(6 * na + pyr);
    const VectorXd qj = x.segment(tree.base_dof(), na);
    const VectorXd qdj = x.segment(nq + tree.base_dof(), na);
    h.segment(0, na) = u - tree.tau_lower;
    h.segment(na, na) = tree.tau_upper - u;
    h.segment(2 * na, na) = qj - tree.qj_lower;
    h.segment(3 * na, na) = tree.qj_upper - qj;
    h.segment(4 * na, na) = qdj - tree.qdj_lower;
    h.segment(5 * na, na) = tree.qdj_upper - qdj;
    if (pyr > 0) {
      try {
        auto dynres = ctx->kkt.eval(tree, x.head(nq), x.tail(nq), u, mode, alpha);
        const int cd = tree.contact_dim();
        int row = 6 * na;
        for (int c = 0; c < mode.count(); ++c) {
          const double fz = dynres.contact_forces[c * cd + cd - 1];
          for (int axis = 0; axis < cd - 1; ++axis) {
            const double ft = dynres.contact_forces[c * cd + axis];
            h[row++] = tree.friction_mu * fz - ft;
            h[row++] = tree.friction_mu * fz + ft;
          }
        }
      } catch (const Error&) {
        h.tail(pyr).setConstant(std::numeric_limits<double>::quiet_NaN());
      }
    }
    return h;
  };

  // touchdown switching constraint and reset into the next phase
  if (touchdown.count() > 0) {
    p.switch_dim = touchdown.count();
    const double hc = ctx->options.ground_height;
    p.switching_constraint = [ctx, touchdown, nq, hc](const VectorXd& x) {
      auto ee = dyn::forward_kinematics(ctx->tree, x.head(nq));
      VectorXd g(touchdown.count());
      int i = 0;
      for (int j = 0; j < ctx->tree.num_ees(); ++j)
        if (touchdown.active[j]) g[i++] = ee[j].position[ctx->tree.linear_dim() - 1] - hc;
      return g;
    };
  }

  if (!is_last_wb || srb_follows) {
    const bool impact = touchdown.count() > 0;
    if (!srb_follows || !is_last_wb) {
      p.next_state_dim = nx;
      if (impact) {
        p.reset = [ctx, next_mode, nq, nx](const VectorXd& x) {
          try {
            auto imp = dyn::impact_map(ctx->tree, x.head(nq), x.tail(nq), next_mode);
            VectorXd out(nx);
            out.head(nq) = x.head(nq);
            out.tail(nq) = imp.qd_plus;
            return out;
          } catch (const Error&) {
            return nan_state(nx);
          }
        };
      }
      // takeoff or same-mode split: identity reset (default)
    } else {
      // boundary into the SRB tail: impact (if any) then state projection
      const int bd = ctx->tree.base_dof();
      p.next_state_dim = 2 * bd;
      p.reset = [ctx, next_mode, impact, nq, bd](const VectorXd& x) {
        VectorXd qd = x.tail(nq);
        if (impact) {
          try {
            qd = dyn::impact_map(ctx->tree, x.head(nq), qd, next_mode).qd_plus;
          } catch (const Error&) {
            return nan_state(2 * bd);
          }
        }
        VectorXd out(2 * bd);
        out.head(bd) = x.head(bd);
        out.tail(bd) = qd.head(bd);
        return out;
      };
    }
  }
  return p;
}

Phase make_srb_phase_impl(const std::shared_ptr<SharedContext>& ctx,
                          const ContactSchedule& contacts, double t_start, int steps,
                          double dt) {
  const KinematicTree& tree = ctx->tree;
  const dyn::SrbParams params = dyn::SrbParams::from_tree(tree);
  const int nx = params.state_dim();
  const int nu = params.control_dim();
  const int cd = params.linear_dim();
  const int ad = params.angular_dim();

  // contact flags and footholds are time-varying parameters, sampled per step
  std::vector<ContactSet> flags(steps);
  std::vector<std::vector<VectorXd>> feet(steps);
  std::vector<VectorXd> grf_ref(steps);
  for (int k = 0; k < steps; ++k) {
    const double t = t_start + (k + 0.5) * dt;
    flags[k] = contacts.contacts_at(t);
    ReferenceSample r = ctx->ref.at(t);
    feet[k] = r.foot_pos;
    grf_ref[k] = r.grf;
  }

  Phase p;
  p.name = "srb";
  p.N = steps;
  p.dt = dt;
  p.state_dim = nx;
  p.control_dim = nu;

  p.dynamics = [params, flags, feet, dt, nx](const VectorXd& x, const VectorXd& u, int k) {
    try {
      return dyn::srb_step(params, x, u, feet[k], flags[k], dt);
    } catch (const Error&) {
      return nan_state(nx);
    }
  };

  // SRB weights: base-coordinate components of the whole-body weights
  const int bd = tree.base_dof();
  VectorXd wx(nx);
  wx.head(bd) = ctx->weights.w_q.head(bd);
  wx.tail(bd) = ctx->weights.w_qd.head(bd);
  const double r_grf = ctx->weights.r_grf;

  auto srb_ref = [ctx, ad, cd, bd, nx](double t) {
    ReferenceSample r = ctx->ref.at(t);
    VectorXd xr(nx);
    xr.head(bd) = r.q.head(bd);
    xr.tail(bd) = r.qd.head(bd);
    return xr;
  };

  p.running_cost = [ctx, srb_ref, wx, r_grf, grf_ref, flags, t_start, dt, cd](
                       const VectorXd& x, const VectorXd& u, int k) {
    const VectorXd dx = x - srb_ref(t_start + k * dt);
    double c = dx.dot(wx.asDiagonal() * dx);
    for (size_t j = 0; j < flags[k].active.size(); ++j) {
      if (!flags[k].active[j]) continue;
      c += r_grf * (u.segment(j * cd, cd) - grf_ref[k].segment(j * cd, cd)).squaredNorm();
    }
    return dt * c;
  };
  p.running_cost_expansion = [srb_ref, wx, r_grf, grf_ref, flags, t_start, dt, cd, nx, nu](
                                 const VectorXd& x, const VectorXd& u, int k, VectorXd& lx,
                                 VectorXd& lu, MatrixXd& lxx, MatrixXd& luu,
                                 MatrixXd& lux) {
    const VectorXd dx = x - srb_ref(t_start + k * dt);
    lx = dt * 2.0 * (wx.asDiagonal() * dx);
    lxx = dt * 2.0 * wx.asDiagonal().toDenseMatrix();
    lu = VectorXd::Zero(nu);
    luu = MatrixXd::Zero(nu, nu);
    for (size_t j = 0; j < flags[k].active.size(); ++j) {
      if (!flags[k].active[j]) continue;
      lu.segment(j * cd, cd) =
          dt * 2.0 * r_grf * (u.segment(j * cd, cd) - grf_ref[k].segment(j * cd, cd));
      luu.block(j * cd, j * cd, cd, cd) =
          dt * 2.0 * r_grf * MatrixXd::Identity(cd, cd);
    }
    // inactive-leg forces are free variables; a small regularizer keeps the
    // Gauss-Newton subproblem well posed
    for (size_t j = 0; j < flags[k].active.size(); ++j)
      if (!flags[k].active[j])
        luu.block(j * cd, j * cd, cd, cd) = dt * 2e-6 * MatrixXd::Identity(cd, cd);
    lux = MatrixXd::Zero(nu, nx);
  };

  const double fscale = ctx->weights.final_terminal_scale;
  const double t_term = steps * dt;
  p.terminal_cost = [srb_ref, wx, fscale, t_start, t_term](const VectorXd& x) {
    const VectorXd dx = x - srb_ref(t_start + t_term);
    return fscale * dx.dot(wx.asDiagonal() * dx);
  };
  p.terminal_cost_expansion = [srb_ref, wx, fscale, t_start, t_term, nx](
                                  const VectorXd& x, VectorXd& g, MatrixXd& H) {
    g = 2.0 * fscale * (wx.asDiagonal() * (x - srb_ref(t_start + t_term)));
    H = 2.0 * fscale * wx.asDiagonal().toDenseMatrix();
  };
  return p;
}

}  // namespace

BuiltProblem build_problem(const KinematicTree& tree, const ModelSchedule& schedule,
                           const ContactSchedule& contacts, const ReferenceTrajectory& ref,
                           const VectorXd& x0, double t0, const CostWeights& weights,
                           const BuildOptions& options) {
  schedule.validate();
  contacts.validate();
  const double t_end_wb = t0 + schedule.T_w;
  const double t_end_all = t_end_wb + schedule.T_s;
  if (ref.samples.empty() || ref.t0 > t0 + 1e-9 || ref.end_time() < t_end_all - 1e-9)
    throw Error("reference does not cover the prediction window");

  auto ctx = std::make_shared<SharedContext>();
  ctx->tree = tree;
  ctx->ref = ref;
  ctx->weights = weights;
  ctx->options = options;

  // whole-body phase boundaries on the dt_w grid
  std::vector<double> bounds = {t0};
  for (double tb : contacts.transitions_in(t0, t_end_wb - 0.5 * schedule.dt_w)) {
    const double snapped = t0 + std::lround((tb - t0) / schedule.dt_w) * schedule.dt_w;
    if (snapped > bounds.back() + 0.5 * schedule.dt_w &&
        snapped < t_end_wb - 0.5 * schedule.dt_w)
      bounds.push_back(snapped);
  }
  bounds.push_back(t_end_wb);

  BuiltProblem built;
  built.t0 = t0;
  built.schedule = schedule;

  const bool srb_follows = schedule.srb_steps() > 0;
  const int n_wb = static_cast<int>(bounds.size()) - 1;
  for (int i = 0; i < n_wb; ++i) {
    const double ta = bounds[i], tb = bounds[i + 1];
    const int steps = static_cast<int>(std::lround((tb - ta) / schedule.dt_w));
    const ContactSet mode = contacts.contacts_at(0.5 * (ta + tb));
    const bool last_wb = (i == n_wb - 1);

    ContactSet touchdown = contacts.touchdowns_at(tb);
    ContactSet next_mode = contacts.contacts_at(tb + 1e-6);
    if (last_wb && !srb_follows) {
      touchdown = ContactSet::none(tree.num_ees());
    }

    Phase p = make_wb_phase(ctx, mode, ta, steps, schedule.dt_w, touchdown, next_mode,
                            last_wb, srb_follows);
    p.name = "wb" + std::to_string(i);
    built.problem.phases.push_back(std::move(p));

    PhaseInfo pi;
    pi.t_start = ta;
    pi.t_end = tb;
    pi.contacts = mode;
    pi.touchdown = touchdown;
    pi.impact_at_end = touchdown.count() > 0;
    built.info.push_back(pi);
    built.wb_steps += steps;
  }

  if (srb_follows) {
    Phase p = make_srb_phase_impl(ctx, contacts, t_end_wb, schedule.srb_steps(),
                                  schedule.dt_s);
    built.problem.phases.push_back(std::move(p));
    PhaseInfo pi;
    pi.t_start = t_end_wb;
    pi.t_end = t_end_all;
    pi.is_srb = true;
    built.info.push_back(pi);
  }

  built.problem.x0 = x0;
  built.problem.al_penalty = options.al_penalty;
  built.problem.reb_delta = options.reb_delta;
  built.problem.reb_weight = options.reb_weight;
  built.problem.fd_step = options.fd_step;
  built.problem.validate();
  return built;
}

Phase make_srb_phase(const KinematicTree& tree, const ContactSchedule& contacts,
                     const ReferenceTrajectory& ref, const CostWeights& weights,
                     double t_start, int steps, double dt) {
  auto ctx = std::make_shared<SharedContext>();
  ctx->tree = tree;
  ctx->ref = ref;
  ctx->weights = weights;
  return make_srb_phase_impl(ctx, contacts, t_start, steps, dt);
}

}  // namespace cascade::mpc
