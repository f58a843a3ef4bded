#include "cascade/mpc/reference.hpp"

#include <cmath>
#include <limits>

#include "cascade/dynamics/kinematics.hpp"

namespace cascade::mpc {

ReferenceSample ReferenceTrajectory::at(double t) const {
  if (samples.empty()) throw Error("empty reference trajectory");
  const double s = (t - t0) / dt;
  const int lo = std::clamp(static_cast<int>(std::floor(s)), 0,
                            static_cast<int>(samples.size()) - 1);
  const int hi = std::min(lo + 1, static_cast<int>(samples.size()) - 1);
  const double w = std::clamp(s - lo, 0.0, 1.0);
  const ReferenceSample& a = samples[lo];
  const ReferenceSample& b = samples[hi];
  ReferenceSample out;
  out.q = (1 - w) * a.q + w * b.q;
  out.qd = (1 - w) * a.qd + w * b.qd;
  out.grf = (1 - w) * a.grf + w * b.grf;
  out.foot_pos.resize(a.foot_pos.size());
  out.foot_vel.resize(a.foot_vel.size());
  for (size_t j = 0; j < a.foot_pos.size(); ++j) {
    out.foot_pos[j] = (1 - w) * a.foot_pos[j] + w * b.foot_pos[j];
    out.foot_vel[j] = (1 - w) * a.foot_vel[j] + w * b.foot_vel[j];
  }
  return out;
}

VectorXd bezier_point(const std::vector<VectorXd>& c, double s) {
  const double t = s, u = 1 - s;
  return u * u * u * c[0] + 3 * u * u * t * c[1] + 3 * u * t * t * c[2] + t * t * t * c[3];
}

VectorXd bezier_velocity(const std::vector<VectorXd>& c, double s) {
  const double t = s, u = 1 - s;
  return 3 * u * u * (c[1] - c[0]) + 6 * u * t * (c[2] - c[1]) + 3 * t * t * (c[3] - c[2]);
}

void swing_arc(const VectorXd& liftoff, const VectorXd& touchdown, double apex_height,
               double duration, double s, VectorXd& pos, VectorXd& vel) {
  s = std::clamp(s, 0.0, 1.0);
  const int zi = static_cast<int>(liftoff.size()) - 1;  // vertical component last
  VectorXd apex = 0.5 * (liftoff + touchdown);
  apex[zi] = std::max(liftoff[zi], touchdown[zi]) + apex_height;
  // horizontal pace carried through the apex keeps velocity continuous
  VectorXd through = 0.25 * (touchdown - liftoff);
  through[zi] = 0.0;

  std::vector<VectorXd> ctrl(4);
  double local;
  if (s < 0.5) {
    local = 2 * s;
    ctrl[0] = liftoff;
    ctrl[1] = liftoff;  // zero liftoff velocity
    ctrl[2] = apex - through;
    ctrl[3] = apex;
  } else {
    local = 2 * s - 1;
    ctrl[0] = apex;
    ctrl[1] = apex + through;
    ctrl[2] = touchdown;  // zero touchdown velocity
    ctrl[3] = touchdown;
  }
  pos = bezier_point(ctrl, local);
  vel = bezier_velocity(ctrl, local) * (2.0 / duration);
}

namespace {

// world x of the hip of leg j when the base is at (x, z) with zero pitch
double hip_projection_x(const dyn::KinematicTree& tree, int leg, double base_x) {
  // the hip joint is the first joint of the leg chain; its placement in the
  // torso frame gives the forward offset
  int link = tree.end_effectors[leg].link;
  while (tree.joints[link].parent > 0) link = tree.joints[link].parent;
  return base_x + tree.joints[link].placement_pos[0];
}

struct StanceInterval {
  double t_start, t_end;
  double foothold_x;
};

}  // namespace

ReferenceTrajectory heuristic_reference(const dyn::KinematicTree& tree,
                                        const UserCommand& command,
                                        const ContactSchedule& contacts,
                                        const HeuristicParams& params, double t_begin,
                                        double t_end, double dt) {
  if (!tree.planar()) throw Error("heuristic reference: planar trees only");
  const int n_ee = tree.num_ees();
  const int nq = tree.nq();
  const double weight = tree.total_mass() * (-tree.gravity[tree.linear_dim() - 1]);

  auto base_x = [&](double t) {
    return params.x_offset +
           command.vx * std::max(0.0, t - std::max(t_begin, params.vx_start));
  };
  auto base_vx = [&](double t) {
    return t >= std::max(t_begin, params.vx_start) ? command.vx : 0.0;
  };

  // per-leg stance intervals over the window, with footholds from the
  // stance-time heuristic, clamped around the hip projection at touchdown
  std::vector<std::vector<StanceInterval>> stances(n_ee);
  {
    std::vector<double> marks = contacts.transitions_in(t_begin - 2.0, t_end + 2.0);
    marks.insert(marks.begin(), t_begin - 2.0);
    for (int j = 0; j < n_ee; ++j) {
      for (size_t i = 0; i < marks.size(); ++i) {
        const double ts = marks[i];
        if (!contacts.contacts_at(ts + 1e-6).active[j]) continue;
        if (i > 0 && contacts.contacts_at(ts - 1e-6).active[j]) continue;  // continuation
        double te = t_end + 2.0;
        for (size_t k = i + 1; k < marks.size(); ++k)
          if (!contacts.contacts_at(marks[k] + 1e-6).active[j]) {
            te = marks[k];
            break;
          }
        StanceInterval si;
        si.t_start = ts;
        si.t_end = te;
        const double hip = hip_projection_x(tree, j, base_x(ts));
        double raw;
        if (std::isfinite(params.vx_measured)) {
          raw = hip + 0.5 * (te - ts) * params.vx_measured +
                params.capture_gain * (params.vx_measured - command.vx);
        } else {
          raw = hip + 0.5 * (te - ts) * command.vx;
        }
        si.foothold_x = std::clamp(raw, hip - params.foothold_clamp,
                                   hip + params.foothold_clamp);
        stances[j].push_back(si);
      }
    }
  }

  auto stance_at = [&](int j, double t) -> const StanceInterval* {
    for (const auto& s : stances[j])
      if (t >= s.t_start - 1e-9 && t < s.t_end - 1e-9) return &s;
    return nullptr;
  };
  auto next_stance = [&](int j, double t) -> const StanceInterval* {
    for (const auto& s : stances[j])
      if (s.t_start >= t - 1e-9) return &s;
    return nullptr;
  };
  auto prev_stance = [&](int j, double t) -> const StanceInterval* {
    const StanceInterval* best = nullptr;
    for (const auto& s : stances[j])
      if (s.t_end <= t + 1e-9) best = &s;
    return best;
  };

  ReferenceTrajectory ref;
  ref.t0 = t_begin;
  ref.dt = dt;
  const int n_samples = static_cast<int>(std::ceil((t_end - t_begin) / dt)) + 1;
  for (int i = 0; i < n_samples; ++i) {
    const double t = t_begin + i * dt;
    ReferenceSample s;
    s.q = VectorXd::Zero(nq);
    s.qd = VectorXd::Zero(nq);
    s.q[1] = base_x(t);
    s.q[2] = command.height;
    s.qd[1] = base_vx(t);
    s.q.tail(tree.num_joints()) = params.stand_joints;

    const dyn::ContactSet active = contacts.contacts_at(t);
    const int n_active = active.count();
    s.grf = VectorXd::Zero(n_ee * tree.contact_dim());
    s.foot_pos.resize(n_ee);
    s.foot_vel.resize(n_ee);
    for (int j = 0; j < n_ee; ++j) {
      const StanceInterval* cur = stance_at(j, t);
      if (cur) {
        s.foot_pos[j] = Eigen::Vector2d(cur->foothold_x, params.ground_height);
        s.foot_vel[j] = Eigen::Vector2d::Zero();
        if (active.active[j] && n_active > 0)
          s.grf[j * tree.contact_dim() + tree.contact_dim() - 1] = weight / n_active;
      } else {
        const StanceInterval* from = prev_stance(j, t);
        const StanceInterval* to = next_stance(j, t);
        const double t_lo = from ? from->t_end : t_begin - 0.2;
        const double t_td = to ? to->t_start : t_end + 0.2;
        const double from_x =
            from ? from->foothold_x : hip_projection_x(tree, j, base_x(t_lo));
        const double to_x = to ? to->foothold_x : hip_projection_x(tree, j, base_x(t_td));
        VectorXd p, v;
        swing_arc(Eigen::Vector2d(from_x, params.ground_height),
                  Eigen::Vector2d(to_x, params.ground_height), params.swing_apex,
                  t_td - t_lo, (t - t_lo) / (t_td - t_lo), p, v);
        s.foot_pos[j] = p;
        s.foot_vel[j] = v;
      }
    }
    ref.append(s);
  }
  return ref;
}

ReferenceTrajectory compose_references(const std::vector<ReferenceTrajectory>& segments,
                                       const std::vector<VectorXd>& shifts) {
  if (segments.empty()) throw Error("compose_references: no segments");
  ReferenceTrajectory out;
  out.t0 = segments[0].t0;
  out.dt = segments[0].dt;
  for (size_t i = 0; i < segments.size(); ++i) {
    const ReferenceTrajectory& seg = segments[i];
    const VectorXd* shift =
        (i < shifts.size() && shifts[i].size() > 0) ? &shifts[i] : nullptr;
    const size_t skip = (i == 0) ? 0 : 1;  // splice point owned by the earlier segment
    for (size_t k = skip; k < seg.samples.size(); ++k) {
      ReferenceSample s = seg.samples[k];
      if (shift) {
        s.q += *shift;
        // base translation components move the foot targets rigidly; angle
        // shifts (2pi unwraps) leave them alone
        for (auto& p : s.foot_pos) {
          const int ld = static_cast<int>(p.size());
          const int ad = (ld == 2) ? 1 : 3;
          p += shift->segment(ad, ld);
        }
      }
      out.append(s);
    }
  }
  return out;
}

}  // namespace cascade::mpc
