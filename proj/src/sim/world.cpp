#include "cascade/sim/world.hpp"

#include "cascade/dynamics/kinematics.hpp"

namespace cascade::sim {

SimWorld::SimWorld(const dyn::KinematicTree& tree, const mpc::ContactSchedule& schedule,
                   double sim_dt, double baumgarte, double ground_height)
    : tree_(tree),
      schedule_(schedule),
      dt_(sim_dt),
      baumgarte_(baumgarte),
      ground_(ground_height) {
  schedule_.validate();
  contacts_ = schedule_.contacts_at(0.0);
  q_ = VectorXd::Zero(tree_.nq());
  qd_ = VectorXd::Zero(tree_.nq());
}

void SimWorld::reset(const VectorXd& q, const VectorXd& qd, double t) {
  tree_.check_coordinates(q);
  tree_.check_coordinates(qd);
  q_ = q;
  qd_ = qd;
  t_ = t;
  contacts_ = schedule_.contacts_at(t);
}

void SimWorld::step(const VectorXd& tau) {
  impact_occurred_ = false;
  impact_energy_gain_ = 0.0;
  touchdown_height_error_ = 0.0;

  // schedule-driven contact switching; impacts at touchdowns
  const dyn::ContactSet now = schedule_.contacts_at(t_);
  if (!(now == contacts_)) {
    dyn::ContactSet touchdown = dyn::ContactSet::none(tree_.num_ees());
    for (int j = 0; j < tree_.num_ees(); ++j)
      touchdown.active[j] = now.active[j] && !contacts_.active[j];
    if (touchdown.count() > 0) {
      const double before = dyn::kinetic_energy(tree_, q_, qd_);
      auto imp = dyn::impact_map(tree_, q_, qd_, now);
      qd_ = imp.qd_plus;
      impact_occurred_ = true;
      impact_energy_gain_ = dyn::kinetic_energy(tree_, q_, qd_) - before;
      auto ee = dyn::forward_kinematics(tree_, q_);
      for (int j = 0; j < tree_.num_ees(); ++j)
        if (touchdown.active[j])
          touchdown_height_error_ =
              std::max(touchdown_height_error_,
                       std::abs(ee[j].position[tree_.linear_dim() - 1] - ground_));
    }
    contacts_ = now;
  }

  // disturbances spread their velocity change over the window
  for (const auto& d : disturbances_) {
    if (t_ >= d.time && t_ < d.time + d.window) {
      const int base_lin = tree_.angular_dim();
      for (int i = 0; i < d.delta_v.size() && i < tree_.linear_dim(); ++i)
        qd_[base_lin + i] += d.delta_v[i] * (dt_ / d.window);
    }
  }

  auto dynres = dyn::kkt_contact_dynamics(tree_, q_, qd_, tau, contacts_, baumgarte_);
  qd_ += dt_ * dynres.qdd;  // semi-implicit: velocity first
  q_ += dt_ * qd_;
  t_ += dt_;
}

}  // namespace cascade::sim
