#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "retime/common.hpp"
#include "retime/robot_model.hpp"
#include "retime/rotation.hpp"

namespace retime {

struct KinematicState {
  Eigen::Vector3d base_position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d base_rotation = Eigen::Matrix3d::Identity();
  Eigen::VectorXd q;
  Eigen::VectorXd dq;
  Eigen::VectorXd ddq;  // optional; empty means zero
};

struct LinkPose {
  Eigen::Vector3d position;  // joint frame origin, world
  Eigen::Matrix3d rotation;
};

struct ForwardKinematicsResult {
  std::vector<LinkPose> links;
  std::vector<Eigen::Vector3d> world_axes;  // joint axis in world, per joint
  std::vector<int> end_effectors;
};

// Poses composed parent-to-child from origin transforms and axis-angle joint
// rotations. The q sanity bound rejects wildly wrapped inputs.
inline ForwardKinematicsResult forward_kinematics(const RobotModel& model,
                                                  const KinematicState& s) {
  const int nj = model.njoints();
  if (s.q.size() != nj) {
    throw DimensionError("forward_kinematics: q size does not match model");
  }
  if (s.q.size() > 0 && s.q.cwiseAbs().maxCoeff() > 8.0 * M_PI) {
    throw RangeError("forward_kinematics: joint angle outside sanity bound");
  }
  ForwardKinematicsResult fk;
  fk.links.resize(static_cast<size_t>(nj));
  fk.world_axes.resize(static_cast<size_t>(nj));
  for (int i = 0; i < nj; ++i) {
    const auto& j = model.joints[static_cast<size_t>(i)];
    const Eigen::Matrix3d& parent_rot =
        j.parent < 0 ? s.base_rotation : fk.links[static_cast<size_t>(j.parent)].rotation;
    const Eigen::Vector3d& parent_pos =
        j.parent < 0 ? s.base_position : fk.links[static_cast<size_t>(j.parent)].position;
    const Eigen::Matrix3d pre = parent_rot * j.origin_rotation;
    fk.links[static_cast<size_t>(i)].position = parent_pos + parent_rot * j.origin_translation;
    fk.world_axes[static_cast<size_t>(i)] = pre * j.axis;
    fk.links[static_cast<size_t>(i)].rotation = pre * axis_angle(j.axis, s.q[i]);
  }
  fk.end_effectors = model.end_effectors();
  return fk;
}

// Mass-weighted mean of link CoMs including the base; returns (p_com, M).
inline std::pair<Eigen::Vector3d, double> center_of_mass(const RobotModel& model,
                                                         const ForwardKinematicsResult& fk,
                                                         const KinematicState& s) {
  Eigen::Vector3d weighted = model.base.mass * (s.base_position + s.base_rotation * model.base.com);
  double mass = model.base.mass;
  for (size_t i = 0; i < model.links.size(); ++i) {
    const auto& link = model.links[i];
    weighted += link.mass * (fk.links[i].position + fk.links[i].rotation * link.com);
    mass += link.mass;
  }
  return {weighted / mass, mass};
}

struct MomentumState {
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();   // P, kg m/s
  Eigen::Vector3d angular = Eigen::Vector3d::Zero();  // L about CoM, kg m^2/s
  Eigen::Vector3d linear_rate = Eigen::Vector3d::Zero();   // Pdot, N
  Eigen::Vector3d angular_rate = Eigen::Vector3d::Zero();  // Ldot, N m
  Eigen::Vector3d com = Eigen::Vector3d::Zero();
  double mass = 0.0;
};

// Centroidal momentum with the simplified axis-projected joint inertia form:
//   P = sum m_k v_k
//   L = I_B w_B + sum a_i I_i dq_i + sum m_k (p_k - p_com) x v_k
// Link velocities are propagated analytically down the chain so both P and L
// are exactly linear in the velocities.
inline MomentumState centroidal_momentum(const RobotModel& model, const KinematicState& s,
                                         const Eigen::Vector3d& base_ang_vel = Eigen::Vector3d::Zero(),
                                         const Eigen::Vector3d& base_lin_vel = Eigen::Vector3d::Zero()) {
  const int nj = model.njoints();
  if (s.dq.size() != nj) {
    throw DimensionError("centroidal_momentum: dq size does not match model");
  }
  if (!s.dq.allFinite()) {
    throw NonFiniteError("centroidal_momentum: non-finite dq");
  }
  const ForwardKinematicsResult fk = forward_kinematics(model, s);

  std::vector<Eigen::Vector3d> omega(static_cast<size_t>(nj));
  std::vector<Eigen::Vector3d> v_origin(static_cast<size_t>(nj));
  for (int i = 0; i < nj; ++i) {
    const auto& j = model.joints[static_cast<size_t>(i)];
    const Eigen::Vector3d& w_parent = j.parent < 0 ? base_ang_vel : omega[static_cast<size_t>(j.parent)];
    const Eigen::Vector3d& v_parent = j.parent < 0 ? base_lin_vel : v_origin[static_cast<size_t>(j.parent)];
    const Eigen::Vector3d& p_parent =
        j.parent < 0 ? s.base_position : fk.links[static_cast<size_t>(j.parent)].position;
    const Eigen::Vector3d& p_i = fk.links[static_cast<size_t>(i)].position;
    v_origin[static_cast<size_t>(i)] = v_parent + w_parent.cross(p_i - p_parent);
    omega[static_cast<size_t>(i)] = w_parent + fk.world_axes[static_cast<size_t>(i)] * s.dq[i];
  }

  MomentumState m;
  auto [com, mass] = center_of_mass(model, fk, s);
  m.com = com;
  m.mass = mass;

  // Base body.
  const Eigen::Vector3d base_com_world = s.base_position + s.base_rotation * model.base.com;
  const Eigen::Vector3d base_com_vel =
      base_lin_vel + base_ang_vel.cross(base_com_world - s.base_position);
  m.linear = model.base.mass * base_com_vel;
  m.angular = model.base.inertia_diag.cwiseProduct(base_ang_vel) +
              model.base.mass * (base_com_world - com).cross(base_com_vel);

  for (int i = 0; i < nj; ++i) {
    const auto& link = model.links[static_cast<size_t>(i)];
    const Eigen::Vector3d com_world =
        fk.links[static_cast<size_t>(i)].position + fk.links[static_cast<size_t>(i)].rotation * link.com;
    const Eigen::Vector3d v_com =
        v_origin[static_cast<size_t>(i)] + omega[static_cast<size_t>(i)].cross(
                                               com_world - fk.links[static_cast<size_t>(i)].position);
    m.linear += link.mass * v_com;
    m.angular += fk.world_axes[static_cast<size_t>(i)] * (link.joint_inertia * s.dq[i]) +
                 link.mass * (com_world - com).cross(v_com);
  }
  return m;
}

struct MomentumRates {
  Eigen::Vector3d linear_rate;
  Eigen::Vector3d angular_rate;
  bool one_sided = false;  // boundary tick, one-sided difference
};

// Central finite difference (X_{t+1} - X_{t-1}) / (2 dt); at the series
// boundaries a one-sided difference is used and flagged.
inline MomentumRates momentum_rates(const std::vector<MomentumState>& series, int t, double dt) {
  if (!(dt > 0.0)) {
    throw RangeError("momentum_rates: dt must be positive");
  }
  const int n = static_cast<int>(series.size());
  if (n < 2 || t < 0 || t >= n) {
    throw RangeError("momentum_rates: index out of range");
  }
  MomentumRates r;
  if (t == 0) {
    r.linear_rate = (series[1].linear - series[0].linear) / dt;
    r.angular_rate = (series[1].angular - series[0].angular) / dt;
    r.one_sided = true;
  } else if (t == n - 1) {
    r.linear_rate = (series[static_cast<size_t>(t)].linear - series[static_cast<size_t>(t - 1)].linear) / dt;
    r.angular_rate =
        (series[static_cast<size_t>(t)].angular - series[static_cast<size_t>(t - 1)].angular) / dt;
    r.one_sided = true;
  } else {
    r.linear_rate =
        (series[static_cast<size_t>(t + 1)].linear - series[static_cast<size_t>(t - 1)].linear) / (2.0 * dt);
    r.angular_rate =
        (series[static_cast<size_t>(t + 1)].angular - series[static_cast<size_t>(t - 1)].angular) /
        (2.0 * dt);
  }
  return r;
}

// Momentum reaction on the base: I_B wdot_B = -sum a0_i I_i ddq_i, with the
// fixed zero-configuration axes.
inline Eigen::Vector3d base_reaction(const RobotModel& model, const Eigen::VectorXd& ddq) {
  if (ddq.size() != model.njoints()) {
    throw DimensionError("base_reaction: ddq size does not match model");
  }
  if ((model.base.inertia_diag.array() <= 0.0).any()) {
    throw ValidationError("base_reaction: base inertia must be positive");
  }
  const std::vector<Eigen::Vector3d> axes = model.zero_config_axes();
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();
  for (int i = 0; i < model.njoints(); ++i) {
    torque -= axes[static_cast<size_t>(i)] * (model.links[static_cast<size_t>(i)].joint_inertia * ddq[i]);
  }
  return torque.cwiseQuotient(model.base.inertia_diag);
}

}  // namespace retime
