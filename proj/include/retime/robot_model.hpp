#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "retime/common.hpp"

namespace retime {

struct JointSpec {
  int parent = -1;  // -1 attaches to the base
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d origin_translation = Eigen::Vector3d::Zero();
  Eigen::Matrix3d origin_rotation = Eigen::Matrix3d::Identity();
};

// One link per joint (the body the joint moves).
struct LinkInertial {
  double mass = 0.0;
  Eigen::Vector3d com = Eigen::Vector3d::Zero();  // in link frame
  double joint_inertia = 0.0;                     // I_i about the joint axis, kg m^2
};

struct ActuationSpec {
  double kp = 100.0;           // N m / rad
  double kd = 4.0;             // N m s / rad
  double torque_limit = 120.0; // N m
  double rotor_inertia = 0.1;  // J_i, joint-space reflected inertia, kg m^2
};

struct BaseInertial {
  double mass = 0.0;
  Eigen::Vector3d com = Eigen::Vector3d::Zero();   // in base frame
  Eigen::Vector3d inertia_diag = Eigen::Vector3d::Ones();  // I_B about the pivot
};

struct AnkleCompliance {
  double stiffness = 600.0;    // N m / rad
  double damping = 100.0;      // N m s / rad
  double pivot_height = 0.05;  // ankle pivot above ground, m
};

struct RobotModel {
  std::string name;
  std::vector<JointSpec> joints;
  std::vector<LinkInertial> links;
  std::vector<ActuationSpec> actuation;
  BaseInertial base;
  AnkleCompliance ankle;
  std::vector<Eigen::Vector3d> foot_contacts;  // foot frame; z dropped for support

  int njoints() const { return static_cast<int>(joints.size()); }

  double total_mass() const {
    double m = base.mass;
    for (const auto& l : links) m += l.mass;
    return m;
  }

  // Joint axes expressed in the base frame at the zero configuration;
  // this is the fixed axis set used by the momentum-reaction relation.
  std::vector<Eigen::Vector3d> zero_config_axes() const {
    std::vector<Eigen::Matrix3d> rot(joints.size());
    std::vector<Eigen::Vector3d> axes(joints.size());
    for (size_t i = 0; i < joints.size(); ++i) {
      const Eigen::Matrix3d parent_rot =
          joints[i].parent < 0 ? Eigen::Matrix3d::Identity() : rot[static_cast<size_t>(joints[i].parent)];
      rot[i] = parent_rot * joints[i].origin_rotation;
      axes[i] = rot[i] * joints[i].axis;
    }
    return axes;
  }

  // Links with no children.
  std::vector<int> end_effectors() const {
    std::vector<bool> has_child(joints.size(), false);
    for (const auto& j : joints) {
      if (j.parent >= 0) has_child[static_cast<size_t>(j.parent)] = true;
    }
    std::vector<int> out;
    for (size_t i = 0; i < joints.size(); ++i) {
      if (!has_child[i]) out.push_back(static_cast<int>(i));
    }
    return out;
  }

  void validate() const {
    if (joints.size() != links.size() || joints.size() != actuation.size()) {
      throw DimensionError("model '" + name + "': joints/links/actuation counts differ");
    }
    if (!(base.mass > 0.0)) {
      throw ValidationError("model '" + name + "': base mass must be positive");
    }
    if ((base.inertia_diag.array() <= 0.0).any()) {
      throw ValidationError("model '" + name + "': base inertia must be positive");
    }
    for (size_t i = 0; i < joints.size(); ++i) {
      const auto& j = joints[i];
      if (j.parent >= static_cast<int>(i)) {
        throw ValidationError("model '" + name + "': joint " + std::to_string(i) +
                              " parent must precede it");
      }
      if (std::abs(j.axis.norm() - 1.0) > 1e-9) {
        throw ValidationError("model '" + name + "': joint " + std::to_string(i) +
                              " axis is not unit norm");
      }
      if (!(links[i].mass > 0.0)) {
        throw ValidationError("model '" + name + "': link " + std::to_string(i) +
                              " mass must be positive");
      }
      if (!(actuation[i].kp > 0.0) || !(actuation[i].kd > 0.0) ||
          !(actuation[i].rotor_inertia > 0.0)) {
        throw ValidationError("model '" + name + "': actuation gains/inertia must be positive");
      }
    }
    if (foot_contacts.size() < 3) {
      throw ValidationError("model '" + name + "': need at least 3 foot contact points");
    }
  }
};

}  // namespace retime
