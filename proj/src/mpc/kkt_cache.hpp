#pragma once

// Internal: memoized KKT contact dynamics. Finite differencing of the phase
// dynamics and of the force-dependent constraint rows evaluates the same
// perturbed points; the cache collapses the duplicate saddle solves. One
// cache lives per problem build, so growth is bounded by a single solve.

#include <mutex>
#include <string>
#include <unordered_map>

#include "cascade/dynamics/rigid_body.hpp"

namespace cascade::mpc::internal {

class KktCache {
 public:
  dyn::ContactDynamics eval(const dyn::KinematicTree& tree, const Eigen::VectorXd& q,
                            const Eigen::VectorXd& qd, const Eigen::VectorXd& tau,
                            const dyn::ContactSet& contacts, double alpha) {
    std::string key;
    key.reserve((q.size() + qd.size() + tau.size()) * sizeof(double) +
                contacts.active.size() + sizeof(double));
    auto put = [&key](const void* p, size_t n) {
      key.append(static_cast<const char*>(p), n);
    };
    put(q.data(), q.size() * sizeof(double));
    put(qd.data(), qd.size() * sizeof(double));
    put(tau.data(), tau.size() * sizeof(double));
    put(contacts.active.data(), contacts.active.size());
    put(&alpha, sizeof(double));

    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto it = map_.find(key);
      if (it != map_.end()) return it->second;
    }
    dyn::ContactDynamics result = dyn::kkt_contact_dynamics(tree, q, qd, tau, contacts, alpha);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (map_.size() > 400000) map_.clear();
      map_.emplace(std::move(key), result);
    }
    return result;
  }

 private:
  std::mutex mutex_;
  std::unordered_map<std::string, dyn::ContactDynamics> map_;
};

}  // namespace cascade::mpc::internal
