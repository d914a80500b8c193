#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "retime/common.hpp"
#include "retime/motion.hpp"
#include "retime/robot_model.hpp"
#include "retime/rotation.hpp"

namespace retime {

// Reduced 60 kg balancing base: waist pitch plus two 7-DoF arms hanging
// from the shoulders, base frame at the ankle pivot. Everything is laid
// out in the x = 0 plane with left/right mirrored masses, so the zero
// posture is an exact equilibrium of the tilt mode.
inline RobotModel bundled_model() {
  RobotModel m;
  m.name = "biped60";
  m.base.mass = 45.0;
  m.base.com = Eigen::Vector3d(0, 0, 0.55);
  m.base.inertia_diag = Eigen::Vector3d(15.0, 15.0, 8.0);
  // Near-critically damped tilt mode (zeta ~ 0.75 about upright): its
  // acceleration transfer is monotone in excitation frequency, so slowing
  // a motion always tilts less, while the ~0.3 s settling time keeps the
  // momentum history visible across several retimed frames.
  m.ankle = {600.0, 100.0, 0.05};
  // two feet, four corners each
  for (double x : {-0.12, 0.12}) {
    for (double y : {-0.16, -0.06, 0.06, 0.16}) {
      m.foot_contacts.emplace_back(x, y, 0.0);
    }
  }

  const auto add_joint = [&](int parent, const Eigen::Vector3d& axis, const Eigen::Vector3d& off,
                             double mass, const Eigen::Vector3d& com, double inertia,
                             double rotor) {
    JointSpec j;
    j.parent = parent;
    j.axis = axis;
    j.origin_translation = off;
    m.joints.push_back(j);
    m.links.push_back({mass, com, inertia});
    ActuationSpec a;
    a.rotor_inertia = rotor;
    m.actuation.push_back(a);
  };

  const Eigen::Vector3d x = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d y = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d z = Eigen::Vector3d::UnitZ();

  // waist pitch carrying the torso
  add_joint(-1, y, {0, 0, 0.30}, 3.0, {0, 0, 0.25}, 0.50, 0.12);

  for (double side : {1.0, -1.0}) {
    const int shoulder = static_cast<int>(m.joints.size());
    add_joint(0, y, {0, side * 0.22, 0.45}, 1.6, {0, 0, -0.06}, 0.35, 0.12);  // shoulder pitch
    add_joint(shoulder, x, {0, 0, 0.0}, 1.4, {0, 0, -0.06}, 0.30, 0.12);      // shoulder roll
    add_joint(shoulder + 1, z, {0, 0, -0.12}, 1.2, {0, 0, -0.07}, 0.06, 0.12);  // shoulder yaw
    add_joint(shoulder + 2, y, {0, 0, -0.14}, 0.8, {0, 0, -0.06}, 0.12, 0.08);  // elbow pitch
    add_joint(shoulder + 3, z, {0, 0, -0.12}, 0.5, {0, 0, -0.06}, 0.02, 0.03);  // wrist yaw
    add_joint(shoulder + 4, y, {0, 0, -0.13}, 0.3, {0, 0, -0.03}, 0.015, 0.03); // wrist pitch
    add_joint(shoulder + 5, x, {0, 0, -0.05}, 0.2, {0, 0, -0.04}, 0.01, 0.03);  // wrist roll
  }
  m.validate();
  return m;
}

namespace detail {

// Additive closed-form channels with exact analytic derivatives.
struct Channel {
  enum Kind { kCosWave, kRaise, kGauss, kSine } kind = kCosWave;
  int joint = 0;
  double amp = 0.0;   // rad
  double freq = 0.0;  // Hz (kCosWave, kSine) or ramp duration fraction (kRaise)
  double phase = 0.0;
  double center = 0.5;  // kGauss: pulse center, fraction of duration
  double width = 0.06;  // kGauss: sigma, s
};

struct MotionSpec {
  std::string name;
  std::vector<Channel> channels;
};

inline void eval_channel(const Channel& c, double t, double duration, double* q, double* dq) {
  switch (c.kind) {
    case Channel::kCosWave: {
      // starts at zero position and zero velocity
      const double w = 2.0 * M_PI * c.freq;
      *q = 0.5 * c.amp * (1.0 - std::cos(w * t + c.phase));
      *dq = 0.5 * c.amp * w * std::sin(w * t + c.phase);
      return;
    }
    case Channel::kSine: {
      const double w = 2.0 * M_PI * c.freq;
      *q = c.amp * std::sin(w * t + c.phase);
      *dq = c.amp * w * std::cos(w * t + c.phase);
      return;
    }
    case Channel::kRaise: {
      // half-cosine rise over the first freq-fraction of the clip, then hold
      const double ramp = c.freq * duration;
      if (t >= ramp) {
        *q = c.amp;
        *dq = 0.0;
      } else {
        const double w = M_PI / ramp;
        *q = 0.5 * c.amp * (1.0 - std::cos(w * t));
        *dq = 0.5 * c.amp * w * std::sin(w * t);
      }
      return;
    }
    case Channel::kGauss: {
      const double t0 = c.center * duration;
      const double s2 = c.width * c.width;
      const double g = std::exp(-0.5 * (t - t0) * (t - t0) / s2);
      *q = c.amp * g;
      *dq = -c.amp * g * (t - t0) / s2;
      return;
    }
  }
}

// Joint index map: 0 waist; 1..7 left arm; 8..14 right arm
// (pitch, roll, yaw, elbow, wrist yaw, wrist pitch, wrist roll).
inline const std::vector<MotionSpec>& motion_specs() {
  constexpr int kWaist = 0;
  constexpr int kLsp = 1, kLsr = 2, kLel = 4, kLwp = 6;
  constexpr int kRsp = 8, kRsr = 9, kRel = 11, kRwp = 13;
  static const std::vector<MotionSpec> specs = {
      {"quiescent", {}},
      {"slow_reach",
       {{Channel::kRaise, kLsp, -1.1, 0.8}, {Channel::kRaise, kLel, 0.9, 0.8}}},
      {"fast_swing",
       {{Channel::kCosWave, kLsp, 1.0, 2.0},
        {Channel::kCosWave, kRsp, 1.0, 2.0},
        {Channel::kCosWave, kLel, 0.6, 2.0},
        {Channel::kCosWave, kRel, 0.6, 2.0}}},
      {"bimanual_raise",
       {{Channel::kRaise, kLsp, -1.8, 0.6}, {Channel::kRaise, kRsp, -1.8, 0.6}}},
      {"spike",
       {{Channel::kGauss, kRsp, 1.0, 0, 0, 0.5, 0.07},
        {Channel::kGauss, kRel, 0.8, 0, 0, 0.5, 0.07}}},
      {"wave_left",
       {{Channel::kCosWave, kLel, 0.7, 1.5}, {Channel::kCosWave, kLwp, 0.5, 1.5}}},
      {"wave_right",
       {{Channel::kCosWave, kRel, 0.7, 1.5}, {Channel::kCosWave, kRwp, 0.5, 1.5}}},
      {"pump",
       {{Channel::kCosWave, kLel, 0.8, 1.2}, {Channel::kCosWave, kRel, 0.8, 1.2}}},
      {"waist_sway",
       {{Channel::kCosWave, kWaist, 0.35, 0.8},
        {Channel::kCosWave, kLsp, -0.3, 0.8},
        {Channel::kCosWave, kRsp, -0.3, 0.8}}},
      {"asymmetric",
       {{Channel::kCosWave, kLsr, 0.8, 0.9}, {Channel::kCosWave, kRsp, 0.9, 1.4}}},
      {"chop",
       {{Channel::kCosWave, kRsp, 1.1, 1.6}, {Channel::kCosWave, kRwp, 0.6, 1.6}}},
      {"reach_low",
       {{Channel::kRaise, kLsp, 0.9, 0.7},
        {Channel::kRaise, kRsp, 0.9, 0.7},
        {Channel::kRaise, kWaist, 0.25, 0.7}}},
      {"arm_circles",
       {{Channel::kCosWave, kLsp, 0.7, 1.0},
        {Channel::kSine, kLsr, 0.7, 1.0},
        {Channel::kCosWave, kRsp, 0.7, 1.0},
        {Channel::kSine, kRsr, -0.7, 1.0}}},
      {"shake",
       {{Channel::kCosWave, kLwp, 0.3, 4.0}, {Channel::kCosWave, kRwp, 0.3, 4.0}}},
      {"slow_bilateral",
       {{Channel::kCosWave, kLsp, 0.5, 0.3},
        {Channel::kCosWave, kRsp, 0.5, 0.3},
        {Channel::kCosWave, kLel, 0.4, 0.3},
        {Channel::kCosWave, kRel, 0.4, 0.3}}},
      {"medium_swing",
       {{Channel::kCosWave, kLsp, 0.8, 1.2},
        {Channel::kCosWave, kRsp, 0.8, 1.2},
        {Channel::kCosWave, kLel, 0.5, 1.2},
        {Channel::kCosWave, kRel, 0.5, 1.2}}},
      {"jerk",
       {{Channel::kCosWave, kRsp, 0.7, 1.3},
        {Channel::kCosWave, kRsp, 0.35, 3.1},
        {Channel::kCosWave, kRel, 0.5, 2.2}}},
      {"lift_hold",
       {{Channel::kRaise, kLsp, -1.2, 0.35}, {Channel::kRaise, kLel, 0.8, 0.35}}},
      {"pendulum_arms",
       {{Channel::kCosWave, kLsr, 0.9, 1.4}, {Channel::kCosWave, kRsr, 0.9, 1.4}}},
      {"waist_bend", {{Channel::kCosWave, kWaist, 0.5, 0.5}}},
  };
  return specs;
}

}  // namespace detail

inline std::vector<std::string> bundled_motion_names() {
  std::vector<std::string> names;
  for (const auto& s : detail::motion_specs()) names.push_back(s.name);
  return names;
}

// Synthetic desk-scale stand-ins for the retargeted mocap clips; every
// channel is a documented closed form with an exact analytic velocity.
inline MotionTrajectory bundled_motion(const std::string& name, int frames = 240,
                                       double frame_period = 0.01, int njoints = 15) {
  const detail::MotionSpec* spec = nullptr;
  for (const auto& s : detail::motion_specs()) {
    if (s.name == name) {
      spec = &s;
      break;
    }
  }
  if (spec == nullptr) {
    throw ValidationError("unknown bundled motion '" + name + "'");
  }
  if (frames < 2) throw ValidationError("bundled_motion: need at least 2 frames");
  const double duration = frame_period * (frames - 1);
  MotionTrajectory traj;
  traj.name = name;
  traj.frame_period = frame_period;
  traj.frames.reserve(static_cast<size_t>(frames));
  for (int f = 0; f < frames; ++f) {
    const double t = frame_period * f;
    MotionClip clip;
    clip.r = Eigen::Vector3d(0, 0, 0.05);  // base frame sits at the ankle pivot
    clip.q = Eigen::VectorXd::Zero(njoints);
    clip.dq = Eigen::VectorXd::Zero(njoints);
    for (const auto& ch : spec->channels) {
      double q = 0.0, dq = 0.0;
      detail::eval_channel(ch, t, duration, &q, &dq);
      clip.q[ch.joint] += q;
      clip.dq[ch.joint] += dq;
    }
    traj.frames.push_back(std::move(clip));
  }
  return traj;
}

}  // namespace retime
