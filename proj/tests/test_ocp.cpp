#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "cascade/ocp/trajectory.hpp"

using namespace cascade;
using namespace cascade::ocp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

// f(x, u) = x + u, one step
MultiPhaseProblem scalar_problem(int N = 1) {
  MultiPhaseProblem mp;
  Phase p;
  p.name = "scalar";
  p.N = N;
  p.dt = 1.0;
  p.state_dim = 1;
  p.control_dim = 1;
  p.dynamics = [](const VectorXd& x, const VectorXd& u, int) { return x + u; };
  p.running_cost = [](const VectorXd& x, const VectorXd& u, int) {
    return 0.5 * (x.squaredNorm() + u.squaredNorm());
  };
  p.terminal_cost = [](const VectorXd& x) { return 0.5 * x.squaredNorm(); };
  mp.phases.push_back(p);
  mp.x0 = scalar(1.0);
  mp.validate();
  return mp;
}

}  // namespace

TEST_CASE("defects: pure forward simulation gives zero defects") {
  auto mp = scalar_problem(5);
  std::vector<std::vector<VectorXd>> controls(1);
  for (int k = 0; k < 5; ++k) controls[0].push_back(scalar(0.1 * k));
  auto traj = rollout(mp, controls);
  CHECK(traj.max_defect() == 0.0);
}

TEST_CASE("defects: perturbing a stored state moves only its own defect") {
  auto mp = scalar_problem(5);
  std::vector<std::vector<VectorXd>> controls(1, std::vector<VectorXd>(5, scalar(0.0)));
  auto traj = rollout(mp, controls);
  traj.phases[0].x[1][0] += 0.1;
  evaluate_defects(mp, traj);
  CHECK(traj.phases[0].defect[1][0] == doctest::Approx(-0.1));
  // the next defect shifts too (x1 feeds f), all others stay zero
  CHECK(traj.phases[0].defect[2][0] == doctest::Approx(0.1));
  CHECK(traj.phases[0].defect[3].cwiseAbs().maxCoeff() == 0.0);
  CHECK(traj.phases[0].defect[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("defects: hand-computed one-step value") {
  auto mp = scalar_problem(1);
  auto traj = make_initial_trajectory(mp);
  traj.phases[0].x[0] = scalar(1.0);
  traj.phases[0].u[0] = scalar(0.0);
  traj.phases[0].x[1] = scalar(0.0);
  evaluate_defects(mp, traj);
  CHECK(traj.phases[0].defect[1][0] == doctest::Approx(1.0));
}

TEST_CASE("defects: reset boundary defect") {
  MultiPhaseProblem mp;
  for (int i = 0; i < 2; ++i) {
    Phase p;
    p.name = "p" + std::to_string(i);
    p.N = 1;
    p.dt = 1.0;
    p.state_dim = 1;
    p.control_dim = 1;
    p.dynamics = [](const VectorXd& x, const VectorXd& u, int) { return x + u; };
    p.running_cost = [](const VectorXd&, const VectorXd&, int) { return 0.0; };
    if (i == 0) p.reset = [](const VectorXd& x) { return 0.5 * x; };
    mp.phases.push_back(p);
  }
  mp.x0 = scalar(2.0);
  mp.validate();
  auto traj = make_initial_trajectory(mp);
  traj.phases[0].x = {scalar(2.0), scalar(4.0)};
  traj.phases[0].u = {scalar(0.0)};
  traj.phases[1].x = {scalar(1.0), scalar(1.0)};
  traj.phases[1].u = {scalar(0.0)};
  evaluate_defects(mp, traj);
  // P(x_N) - x_0^{next} = 0.5*4 - 1 = 1
  CHECK(traj.phases[1].defect[0][0] == doctest::Approx(1.0));
}

TEST_CASE("cost: zero everything") {
  MultiPhaseProblem mp;
  Phase p;
  p.name = "zero";
  p.N = 3;
  p.dt = 0.1;
  p.state_dim = 2;
  p.control_dim = 1;
  p.dynamics = [](const VectorXd& x, const VectorXd&, int) { return x; };
  p.running_cost = [](const VectorXd&, const VectorXd&, int) { return 0.0; };
  mp.phases.push_back(p);
  mp.x0 = VectorXd::Zero(2);
  mp.validate();
  auto traj = make_initial_trajectory(mp);
  auto cost = total_cost(mp, traj);
  CHECK(cost.total() == 0.0);
}

TEST_CASE("cost: AL term vanishes when g = 0") {
  auto mp = scalar_problem(2);
  mp.phases[0].switch_dim = 1;
  mp.phases[0].switching_constraint = [](const VectorXd&) { return VectorXd::Zero(1); };
  mp.al_multipliers.clear();
  mp.validate();
  mp.al_multipliers[0] = scalar(123.0);
  mp.al_penalty = 77.0;
  auto traj = make_initial_trajectory(mp);
  auto cost = total_cost(mp, traj);
  CHECK(cost.al == 0.0);
}

TEST_CASE("cost: relaxed barrier at unit slack is zero") {
  auto mp = scalar_problem(1);
  mp.phases[0].ineq_dim = 1;
  mp.phases[0].path_ineq = [](const VectorXd&, const VectorXd&, int) {
    return VectorXd::Constant(1, 1.0);
  };
  mp.reb_delta = 0.1;
  auto traj = make_initial_trajectory(mp);
  auto cost = total_cost(mp, traj);
  CHECK(cost.reb == doctest::Approx(0.0));
}

TEST_CASE("cost: itemization sums to total") {
  auto mp = scalar_problem(3);
  mp.phases[0].switch_dim = 1;
  mp.phases[0].switching_constraint = [](const VectorXd& x) { return (x - scalar(0.3)).eval(); };
  mp.phases[0].ineq_dim = 1;
  mp.phases[0].path_ineq = [](const VectorXd& x, const VectorXd&, int) {
    return (x + scalar(0.5)).eval();
  };
  mp.al_multipliers.clear();
  mp.validate();
  mp.al_multipliers[0] = scalar(2.0);
  auto traj = make_initial_trajectory(mp);
  auto cost = total_cost(mp, traj);
  CHECK(cost.stage != 0.0);
  CHECK(cost.al != 0.0);
  CHECK(cost.reb != 0.0);
  CHECK(cost.total() == doctest::Approx(cost.stage + cost.al + cost.reb));
}

TEST_CASE("relaxed barrier: values, C2 continuity, convexity") {
  const double delta = 0.1;
  CHECK(relaxed_barrier(1.0, delta) == doctest::Approx(0.0));
  // continuity of value and first two derivatives at z = delta
  const double eps = 1e-9;
  CHECK(relaxed_barrier(delta + eps, delta) ==
        doctest::Approx(relaxed_barrier(delta - eps, delta)).epsilon(1e-6));
  CHECK(relaxed_barrier_d1(delta + eps, delta) ==
        doctest::Approx(relaxed_barrier_d1(delta - eps, delta)).epsilon(1e-6));
  CHECK(relaxed_barrier_d2(delta + eps, delta) ==
        doctest::Approx(relaxed_barrier_d2(delta - eps, delta)).epsilon(1e-6));
  // quadratic extension penalizes violations and stays convex
  CHECK(relaxed_barrier(-0.5, delta) > relaxed_barrier(0.0, delta));
  for (double z = -1.0; z < 2.0; z += 0.05) CHECK(relaxed_barrier_d2(z, delta) > 0.0);
  // finite-difference agreement of the derivatives
  for (double z : {-0.3, 0.05, 0.1 + 1e-6, 0.5, 2.0}) {
    double h = 1e-6;
    double fd = (relaxed_barrier(z + h, delta) - relaxed_barrier(z - h, delta)) / (2 * h);
    CHECK(relaxed_barrier_d1(z, delta) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("resimulation reproduces roll-out states exactly") {
  auto mp = scalar_problem(6);
  auto traj = make_initial_trajectory(mp);
  for (int k = 0; k < 6; ++k) traj.phases[0].u[k] = scalar(0.01 * (k - 2));
  traj.phases[0].shooting = {0, 1, 0, 0, 1, 0, 0};
  traj.phases[0].x[1] = scalar(0.7);
  traj.phases[0].x[4] = scalar(0.3);
  resimulate_rollout_nodes(mp, traj);
  auto copy = traj;
  resimulate_rollout_nodes(mp, traj);
  for (int k = 0; k <= 6; ++k) {
    CHECK(traj.phases[0].x[k][0] == copy.phases[0].x[k][0]);  // bit-for-bit
    if (!traj.phases[0].shooting[k])
      CHECK(traj.phases[0].defect[k].cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("trajectory serialization writes one row per step") {
  auto mp = scalar_problem(3);
  auto traj = make_initial_trajectory(mp);
  std::string path = "/tmp/cascade_test_traj.txt";
  write_trajectory(path, mp, traj);
  std::ifstream in(path);
  REQUIRE(in.good());
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++rows;
  CHECK(rows == 4);
}
