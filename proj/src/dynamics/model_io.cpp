#include "cascade/dynamics/model_io.hpp"

#include <map>

#include "cascade/dynamics/euler.hpp"
#include "cascade/support/config.hpp"

namespace cascade::dyn {

namespace {

VectorXd to_vec(const std::vector<double>& v) {
  VectorXd out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

}  // namespace

KinematicTree build_model(const ConfigFile& cfg) {
  KinematicTree tree;
  tree.name = cfg.globals.text("name", "robot");
  const std::string type = cfg.globals.text("type", "planar");
  const bool planar = type == "planar";
  if (!planar && type != "spatial")
    cfg.globals.fail("type", "must be 'planar' or 'spatial'");
  const int ld = planar ? 2 : 3;

  tree.gravity = to_vec(cfg.globals.array("gravity"));
  tree.friction_mu = cfg.globals.number("friction_mu");

  std::map<std::string, int> link_index;
  for (const ConfigSection* s : cfg.all("link")) {
    Link link;
    link.name = s->text("name");
    if (link_index.count(link.name)) s->fail("name", "duplicate link name");
    link.mass = s->number("mass");
    link.com = to_vec(s->array("com"));
    std::vector<double> inertia = s->array("inertia");
    if (planar) {
      if (inertia.size() != 1) s->fail("inertia", "planar links use a scalar inertia");
      link.inertia = MatrixXd::Constant(1, 1, inertia[0]);
    } else {
      if (inertia.size() == 3) {
        link.inertia = Eigen::Vector3d(inertia[0], inertia[1], inertia[2]).asDiagonal();
      } else if (inertia.size() == 9) {
        link.inertia = Eigen::Map<Eigen::Matrix3d>(inertia.data()).transpose();
      } else {
        s->fail("inertia", "expected diagonal [Ixx,Iyy,Izz] or 9 row-major entries");
      }
    }

    Joint joint;
    const bool is_base = tree.links.empty();
    if (is_base) {
      if (s->has("parent")) s->fail("parent", "base link cannot have a parent");
      joint.type = planar ? JointType::FloatingBasePlanar : JointType::FloatingBaseEuler;
      joint.parent = -1;
    } else {
      joint.type = JointType::Revolute;
      const std::string parent = s->text("parent");
      auto it = link_index.find(parent);
      if (it == link_index.end()) s->fail("parent", "unknown parent link '" + parent + "'");
      joint.parent = it->second;
    }
    std::vector<double> placement = s->array("placement", std::vector<double>(ld, 0.0));
    if (static_cast<int>(placement.size()) != ld)
      s->fail("placement", "expected " + std::to_string(ld) + " entries");
    joint.placement_pos = to_vec(placement);
    if (planar) {
      joint.placement_rot = rot_planar(s->number("placement_angle", 0.0));
    } else {
      std::vector<double> rpy = s->array("placement_rpy", {0, 0, 0});
      if (rpy.size() != 3) s->fail("placement_rpy", "expected 3 entries");
      joint.placement_rot = rot_zyx(Eigen::Vector3d(rpy[0], rpy[1], rpy[2]));
      std::vector<double> axis = s->array("axis", {0, 1, 0});
      if (axis.size() != 3) s->fail("axis", "expected 3 entries");
      joint.axis = Eigen::Vector3d(axis[0], axis[1], axis[2]);
    }

    link_index[link.name] = static_cast<int>(tree.links.size());
    tree.links.push_back(std::move(link));
    tree.joints.push_back(std::move(joint));
  }
  if (tree.links.empty())
    throw ModelError(cfg.path, 1, "model defines no [link] sections");

  for (const ConfigSection* s : cfg.all("end_effector")) {
    EndEffector ee;
    ee.name = s->text("name");
    const std::string link = s->text("link");
    auto it = link_index.find(link);
    if (it == link_index.end()) s->fail("link", "unknown link '" + link + "'");
    ee.link = it->second;
    ee.offset = to_vec(s->array("offset"));
    tree.end_effectors.push_back(std::move(ee));
  }

  auto limits = cfg.all("limits");
  if (limits.size() != 1)
    throw ModelError(cfg.path, 1, "model needs exactly one [limits] section");
  const ConfigSection* lim = limits[0];
  tree.tau_lower = to_vec(lim->array("tau_lower"));
  tree.tau_upper = to_vec(lim->array("tau_upper"));
  tree.qj_lower = to_vec(lim->array("qj_lower"));
  tree.qj_upper = to_vec(lim->array("qj_upper"));
  tree.qdj_lower = to_vec(lim->array("qdj_lower"));
  tree.qdj_upper = to_vec(lim->array("qdj_upper"));

  tree.finalize();
  return tree;
}

KinematicTree load_model(const std::string& path) {
  return build_model(parse_config_file(path));
}

KinematicTree parse_model_text(const std::string& text, const std::string& path) {
  return build_model(parse_config_text(text, path));
}

}  // namespace cascade::dyn
