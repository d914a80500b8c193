#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "retime/common.hpp"
#include "retime/kinodyn.hpp"
#include "retime/motion.hpp"
#include "retime/retimer.hpp"
#include "retime/robot_model.hpp"
#include "retime/stability.hpp"

namespace retime {

struct SimOptions {
  double dt_ctrl = 0.005;      // s
  double gravity = 9.81;       // m/s^2
  bool gravity_term = true;    // pendulum toppling torque on the base
  bool literal_pd = false;     // the printed tau = kp(q_ref - q) + kd dq form
  double motor_delay_s = 0.0;  // applied torque lags by round(delay/dt_ctrl) ticks
  double tilt_max = 0.5;       // rad, fall threshold
  int fall_persist = 10;       // consecutive exited ticks that count as a fall
  StabilityThresholds thresholds;

  void validate() const {
    if (dt_ctrl < 1e-4 || dt_ctrl > 1e-2) {
      throw RangeError("sim: dt_ctrl outside [1e-4, 1e-2] s");
    }
    if (fall_persist < 1) throw RangeError("sim: fall_persist must be >= 1");
  }
};

struct SimState {
  Eigen::VectorXd q;
  Eigen::VectorXd dq;
  Eigen::Vector2d tilt = Eigen::Vector2d::Zero();       // roll, pitch
  Eigen::Vector2d tilt_rate = Eigen::Vector2d::Zero();  // rad/s
  double time = 0.0;
  std::vector<Eigen::VectorXd> torque_queue;  // pending delayed torques, oldest first
};

struct DisturbanceRanges {
  double mass_scale_lo = 1.0, mass_scale_hi = 1.0;
  double gain_scale_lo = 1.0, gain_scale_hi = 1.0;        // kp and kd, sampled separately
  double motor_delay_ms_lo = 0.0, motor_delay_ms_hi = 0.0;
  double com_offset_lo = 0.0, com_offset_hi = 0.0;        // m, per base CoM component
};

struct DisturbanceConfig {
  double push_interval = 5.0;  // s between push events; <= 0 disables
  double push_torque_lo = 0.0, push_torque_hi = 0.0;  // N m, per tilt axis
  double payload_mass = 0.0;   // kg added at each end effector
  DisturbanceRanges randomization;
  std::uint64_t seed = 0;

  void validate() const {
    const auto& r = randomization;
    if (r.mass_scale_lo > r.mass_scale_hi || r.gain_scale_lo > r.gain_scale_hi ||
        r.motor_delay_ms_lo > r.motor_delay_ms_hi || r.com_offset_lo > r.com_offset_hi ||
        push_torque_lo > push_torque_hi) {
      throw RangeError("disturbance: range bounds out of order");
    }
    if (payload_mass < 0.0) throw RangeError("disturbance: negative payload");
  }
};

struct ModelPerturbation {
  double mass_scale = 1.0;
  double kp_scale = 1.0;
  double kd_scale = 1.0;
  double motor_delay_s = 0.0;
  Eigen::Vector3d base_com_offset = Eigen::Vector3d::Zero();
};

// Uniform samples in a fixed draw order (mass, kp, kd, delay, com x/y/z),
// so a seed pins the whole perturbation.
inline ModelPerturbation sample_randomization(const DisturbanceConfig& d, std::uint64_t seed) {
  d.validate();
  Rng rng(seed);
  const auto& r = d.randomization;
  ModelPerturbation p;
  p.mass_scale = rng.uniform(r.mass_scale_lo, r.mass_scale_hi);
  p.kp_scale = rng.uniform(r.gain_scale_lo, r.gain_scale_hi);
  p.kd_scale = rng.uniform(r.gain_scale_lo, r.gain_scale_hi);
  p.motor_delay_s = rng.uniform(r.motor_delay_ms_lo, r.motor_delay_ms_hi) * 1e-3;
  for (int i = 0; i < 3; ++i) {
    p.base_com_offset[i] = rng.uniform(r.com_offset_lo, r.com_offset_hi);
  }
  return p;
}

inline RobotModel apply_perturbation(const RobotModel& model, const ModelPerturbation& p) {
  RobotModel out = model;
  out.base.mass *= p.mass_scale;
  out.base.com += p.base_com_offset;
  for (auto& l : out.links) l.mass *= p.mass_scale;
  for (auto& a : out.actuation) {
    a.kp *= p.kp_scale;
    a.kd *= p.kd_scale;
  }
  return out;
}

// Adds a point mass at each end-effector CoM and folds its axis-distance
// contribution into the joint inertias along the supporting chain
// (distances taken at the zero configuration).
inline RobotModel apply_payload(const RobotModel& model, double mass) {
  if (mass < 0.0) throw RangeError("apply_payload: negative mass");
  if (mass == 0.0) return model;
  RobotModel out = model;
  KinematicState zero;
  zero.q = Eigen::VectorXd::Zero(model.njoints());
  zero.dq = Eigen::VectorXd::Zero(model.njoints());
  const ForwardKinematicsResult fk = forward_kinematics(model, zero);
  for (int ee : model.end_effectors()) {
    const Eigen::Vector3d payload_point =
        fk.links[static_cast<size_t>(ee)].position +
        fk.links[static_cast<size_t>(ee)].rotation * model.links[static_cast<size_t>(ee)].com;
    out.links[static_cast<size_t>(ee)].mass += mass;
    for (int j = ee; j >= 0; j = model.joints[static_cast<size_t>(j)].parent) {
      const Eigen::Vector3d rel = payload_point - fk.links[static_cast<size_t>(j)].position;
      const Eigen::Vector3d& axis = fk.world_axes[static_cast<size_t>(j)];
      const double r_perp_sq = (rel - rel.dot(axis) * axis).squaredNorm();
      out.links[static_cast<size_t>(j)].joint_inertia += mass * r_perp_sq;
    }
  }
  return out;
}

// tau = clamp(kp (q_ref - q) + kd (dq_ref - dq), +-limit), per joint.
inline Eigen::VectorXd pd_torque(const Eigen::VectorXd& kp, const Eigen::VectorXd& kd,
                                 const Eigen::VectorXd& q_ref, const Eigen::VectorXd& dq_ref,
                                 const Eigen::VectorXd& q, const Eigen::VectorXd& dq,
                                 const Eigen::VectorXd& limit) {
  const Eigen::VectorXd raw = kp.cwiseProduct(q_ref - q) + kd.cwiseProduct(dq_ref - dq);
  return raw.cwiseMin(limit).cwiseMax(-limit);
}

struct StepResult {
  SimState next;
  Eigen::VectorXd ddq;            // joint accelerations applied this tick
  Eigen::Vector3d com_pre;        // world CoM of the pre-step state
  Eigen::Vector2d pg_post;        // projected gravity of the post-step tilt
};

inline Eigen::Matrix3d tilt_rotation(const Eigen::Vector2d& tilt) {
  return (Eigen::AngleAxisd(tilt.x(), Eigen::Vector3d::UnitX()) *
          Eigen::AngleAxisd(tilt.y(), Eigen::Vector3d::UnitY()))
      .toRotationMatrix();
}

// Gravity direction expressed in the tilted base frame; the horizontal
// components measure how far the base leans.
inline Eigen::Vector2d projected_gravity(const Eigen::Vector2d& tilt) {
  const Eigen::Vector3d pg = tilt_rotation(tilt).transpose() * Eigen::Vector3d(0, 0, -1);
  return {pg.x(), pg.y()};
}

// World angular velocity of the composed Rx(roll) Ry(pitch) tilt rotation.
inline Eigen::Vector3d tilt_angular_velocity(const Eigen::Vector2d& tilt,
                                             const Eigen::Vector2d& tilt_rate) {
  return Eigen::Vector3d(tilt_rate.x(), 0, 0) +
         Eigen::AngleAxisd(tilt.x(), Eigen::Vector3d::UnitX()) *
             Eigen::Vector3d(0, tilt_rate.y(), 0);
}

// Deterministic reduced-model simulator: upper-body joints integrate the
// delayed PD torque against their reflected inertias; the base is a
// spring-damper tilt mode about the ankle pivot driven by the momentum
// reaction of the joint accelerations, the pendulum toppling torque, and
// push torques. Integration is semi-implicit Euler. Instances are
// immutable after construction, so one Simulator can serve many
// concurrent rollouts.
class Simulator {
 public:
  Simulator(RobotModel model, SimOptions opts = {})
      : model_(std::move(model)), opts_(opts) {
    model_.validate();
    opts_.validate();
    axes0_ = model_.zero_config_axes();
    support_ = support_polygon(model_.foot_contacts);
    kp_.resize(model_.njoints());
    kd_.resize(model_.njoints());
    limit_.resize(model_.njoints());
    inv_rotor_.resize(model_.njoints());
    for (int i = 0; i < model_.njoints(); ++i) {
      const auto& a = model_.actuation[static_cast<size_t>(i)];
      kp_[i] = a.kp;
      kd_[i] = a.kd;
      limit_[i] = a.torque_limit;
      inv_rotor_[i] = 1.0 / a.rotor_inertia;
    }
    pivot_ = Eigen::Vector3d(0, 0, model_.ankle.pivot_height);
    delay_ticks_ = static_cast<int>(std::llround(opts_.motor_delay_s / opts_.dt_ctrl));
    // The stabilizing ankle torque is bounded by where the CoP can go:
    // M g times the support extent about the centroid (roll is limited by
    // the y extent, pitch by the x extent). Beyond it the foot would tip.
    double ext_x = 0.0, ext_y = 0.0;
    for (const auto& v : support_.vertices) {
      ext_x = std::max(ext_x, std::abs(v.x() - support_.centroid.x()));
      ext_y = std::max(ext_y, std::abs(v.y() - support_.centroid.y()));
    }
    const double weight = model_.total_mass() * opts_.gravity;
    ankle_torque_max_ = Eigen::Vector2d(weight * ext_y, weight * ext_x);

    // Natural frequency of the tilt mode about upright (gravity-softened),
    // used to convert a tilt rate into its ring-down amplitude.
    KinematicState zero;
    zero.q = Eigen::VectorXd::Zero(model_.njoints());
    zero.dq = Eigen::VectorXd::Zero(model_.njoints());
    const auto [com0, mass0] = center_of_mass(model_, forward_kinematics(model_, zero), zero);
    const double lever0 = (com0 - pivot_).norm();
    for (int axis = 0; axis < 2; ++axis) {
      const double k_net =
          model_.ankle.stiffness -
          (opts_.gravity_term ? mass0 * opts_.gravity * lever0 : 0.0);
      tilt_omega_[axis] =
          k_net > 0.0 ? std::sqrt(k_net / model_.base.inertia_diag[axis]) : 0.0;
    }
  }

  // Amplitude the free tilt mode will still reach from this state; zero
  // when the mode has no restoring stiffness.
  Eigen::Vector2d tilt_envelope(const SimState& s) const {
    Eigen::Vector2d env = Eigen::Vector2d::Zero();
    for (int axis = 0; axis < 2; ++axis) {
      if (tilt_omega_[axis] <= 0.0) return Eigen::Vector2d::Zero();
      const double rate_part = s.tilt_rate[axis] / tilt_omega_[axis];
      env[axis] = std::sqrt(s.tilt[axis] * s.tilt[axis] + rate_part * rate_part);
    }
    return env;
  }

  const RobotModel& model() const { return model_; }
  const SimOptions& options() const { return opts_; }
  const SupportPolygon& support() const { return support_; }
  int delay_ticks() const { return delay_ticks_; }

  // Rollouts start at rest at the first reference posture.
  SimState initial_state(const MotionClip& first) const {
    SimState s;
    s.q = first.q;
    s.dq = Eigen::VectorXd::Zero(first.njoints());
    s.torque_queue.assign(static_cast<size_t>(delay_ticks_),
                          Eigen::VectorXd::Zero(first.njoints()));
    return s;
  }

  KinematicState kinematic_state(const SimState& s) const {
    KinematicState ks;
    ks.base_position = pivot_;
    ks.base_rotation = tilt_rotation(s.tilt);
    ks.q = s.q;
    ks.dq = s.dq;
    return ks;
  }

  StepResult step(const SimState& s, const MotionClip& ref, const Eigen::Vector2d& push) const {
    if (!s.q.allFinite() || !s.dq.allFinite() || !s.tilt.allFinite()) {
      throw std::runtime_error("sim step: state blew up (non-finite)");
    }
    const double dt = opts_.dt_ctrl;
    return step_dt(s, ref, push, dt);
  }

  // One integration step of an explicit duration (the horizon evaluator
  // uses this for a trailing partial tick).
  StepResult step_dt(const SimState& s, const MotionClip& ref, const Eigen::Vector2d& push,
                     double dt) const {
    StepResult out;
    Eigen::VectorXd tau_raw =
        opts_.literal_pd
            ? (kp_.cwiseProduct(ref.q - s.q) + kd_.cwiseProduct(s.dq)).cwiseMin(limit_).cwiseMax(-limit_)
            : pd_torque(kp_, kd_, ref.q, ref.dq, s.q, s.dq, limit_);

    SimState next;
    next.torque_queue = s.torque_queue;
    Eigen::VectorXd tau_applied;
    if (next.torque_queue.empty()) {
      tau_applied = std::move(tau_raw);
    } else {
      tau_applied = next.torque_queue.front();
      next.torque_queue.erase(next.torque_queue.begin());
      next.torque_queue.push_back(std::move(tau_raw));
    }

    out.ddq = tau_applied.cwiseProduct(inv_rotor_);
    next.dq = s.dq + out.ddq * dt;
    next.q = s.q + next.dq * dt;

    // Momentum reaction of the joint accelerations about the fixed axes.
    Eigen::Vector3d reaction = Eigen::Vector3d::Zero();
    for (int i = 0; i < model_.njoints(); ++i) {
      reaction -= axes0_[static_cast<size_t>(i)] *
                  (model_.links[static_cast<size_t>(i)].joint_inertia * out.ddq[i]);
    }

    const ForwardKinematicsResult fk = forward_kinematics(model_, kinematic_state(s));
    const auto [com, mass] = center_of_mass(model_, fk, kinematic_state(s));
    out.com_pre = com;

    // Inverted-pendulum toppling torque M g l_com sin(tilt) per axis, with
    // the pivot-to-CoM distance taken from the current posture.
    Eigen::Vector2d gravity_torque = Eigen::Vector2d::Zero();
    if (opts_.gravity_term) {
      const double lever = (com - pivot_).norm();
      gravity_torque.x() = mass * opts_.gravity * lever * std::sin(s.tilt.x());
      gravity_torque.y() = mass * opts_.gravity * lever * std::sin(s.tilt.y());
    }

    const auto& ank = model_.ankle;
    for (int axis = 0; axis < 2; ++axis) {
      const double inertia = model_.base.inertia_diag[axis];
      const double stabilizing = std::clamp(
          -ank.stiffness * s.tilt[axis] - ank.damping * s.tilt_rate[axis],
          -ankle_torque_max_[axis], ankle_torque_max_[axis]);
      const double acc =
          (stabilizing + gravity_torque[axis] + reaction[axis] + push[axis]) / inertia;
      next.tilt_rate[axis] = s.tilt_rate[axis] + acc * dt;
      next.tilt[axis] = s.tilt[axis] + next.tilt_rate[axis] * dt;
    }
    next.time = s.time + dt;
    out.pg_post = projected_gravity(next.tilt);
    out.next = std::move(next);
    return out;
  }

  Eigen::Vector2d feet_center() const { return support_.centroid; }

  double d_support(const Eigen::Vector3d& com) const {
    return (support_.centroid - com.head<2>()).norm();
  }

 private:
  RobotModel model_;
  SimOptions opts_;
  std::vector<Eigen::Vector3d> axes0_;
  SupportPolygon support_;
  Eigen::VectorXd kp_, kd_, limit_, inv_rotor_;
  Eigen::Vector3d pivot_;
  Eigen::Vector2d ankle_torque_max_ = Eigen::Vector2d::Zero();
  Eigen::Vector2d tilt_omega_ = Eigen::Vector2d::Zero();
  int delay_ticks_ = 0;
};

struct RolloutTrace {
  double dt_ctrl = 0.005;
  std::vector<double> time;
  std::vector<Eigen::VectorXd> q, dq, ddq;
  std::vector<Eigen::Vector2d> tilt, tilt_rate, pg, zmp_xy, com_proj;
  std::vector<Eigen::Vector3d> com, linear_momentum, angular_momentum, linear_rate, angular_rate;
  std::vector<double> d;
  std::vector<BalanceClass> classification;
  std::optional<double> fall_time;
  bool success = true;

  int tick_count() const { return static_cast<int>(time.size()); }
};

// Integrates the executed reference tick by tick, then fills the per-tick
// momentum and stability fields. A fall is declared when the margin class
// stays "exited" for fall_persist consecutive ticks or the tilt exceeds
// tilt_max; the trace is truncated at the fall tick.
inline RolloutTrace rollout(const Simulator& sim, const ExecutedReference& ref,
                            const DisturbanceConfig& dist = {}) {
  if (ref.clips.empty()) throw ValidationError("rollout: empty reference");
  dist.validate();
  const SimOptions& opts = sim.options();
  const double dt = opts.dt_ctrl;
  const int ticks = ref.tick_count();

  // Pre-sample all push events so the draw sequence is independent of the
  // dynamics.
  Rng rng(dist.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::pair<int, Eigen::Vector2d>> pushes;
  if (dist.push_interval > 0.0 && dist.push_torque_hi != 0.0) {
    for (double t = dist.push_interval; t < ref.total_time; t += dist.push_interval) {
      Eigen::Vector2d tau;
      tau.x() = rng.uniform(dist.push_torque_lo, dist.push_torque_hi);
      tau.y() = rng.uniform(dist.push_torque_lo, dist.push_torque_hi);
      pushes.emplace_back(static_cast<int>(std::llround(t / dt)), tau);
    }
  }

  RolloutTrace trace;
  trace.dt_ctrl = dt;
  SimState state = sim.initial_state(ref.clips.front());

  int tilt_fall_tick = -1;
  for (int j = 0; j < ticks; ++j) {
    Eigen::Vector2d push = Eigen::Vector2d::Zero();
    for (const auto& [tick, tau] : pushes) {
      if (tick == j) push += tau;
    }
    const StepResult res = sim.step(state, ref.clips[static_cast<size_t>(j)], push);

    trace.time.push_back(static_cast<double>(j) * dt);
    trace.q.push_back(state.q);
    trace.dq.push_back(state.dq);
    trace.ddq.push_back(res.ddq);
    trace.tilt.push_back(state.tilt);
    trace.tilt_rate.push_back(state.tilt_rate);
    trace.pg.push_back(projected_gravity(state.tilt));
    trace.com.push_back(res.com_pre);
    trace.com_proj.push_back(res.com_pre.head<2>());

    if (state.tilt.cwiseAbs().maxCoeff() > opts.tilt_max) {
      tilt_fall_tick = j;
      break;
    }
    state = res.next;
  }

  // Momentum and stability post-pass over the recorded rows.
  const int rows = static_cast<int>(trace.time.size());
  std::vector<MomentumState> momenta(static_cast<size_t>(rows));
  for (int j = 0; j < rows; ++j) {
    SimState row_state;
    row_state.q = trace.q[static_cast<size_t>(j)];
    row_state.dq = trace.dq[static_cast<size_t>(j)];
    row_state.tilt = trace.tilt[static_cast<size_t>(j)];
    KinematicState ks = sim.kinematic_state(row_state);
    const Eigen::Vector3d omega_base = tilt_angular_velocity(
        trace.tilt[static_cast<size_t>(j)], trace.tilt_rate[static_cast<size_t>(j)]);
    momenta[static_cast<size_t>(j)] =
        centroidal_momentum(sim.model(), ks, omega_base, Eigen::Vector3d::Zero());
  }
  int persist = 0;
  int class_fall_tick = -1;
  for (int j = 0; j < rows; ++j) {
    MomentumState m = momenta[static_cast<size_t>(j)];
    if (rows >= 2) {
      const MomentumRates r = momentum_rates(momenta, j, dt);
      m.linear_rate = r.linear_rate;
      m.angular_rate = r.angular_rate;
    }
    trace.linear_momentum.push_back(m.linear);
    trace.angular_momentum.push_back(m.angular);
    trace.linear_rate.push_back(m.linear_rate);
    trace.angular_rate.push_back(m.angular_rate);

    Eigen::Vector2d zmp_pt;
    BalanceClass cls;
    double margin;
    const double denom = m.mass * opts.gravity + m.linear_rate.z();
    if (denom > kZmpDenominatorFloor) {
      zmp_pt = zmp(m, opts.gravity);
      margin = (sim.support().centroid - zmp_pt).norm();
      cls = classify_margin(margin, opts.thresholds);
    } else {
      // near free fall: treat as exited, report the CoM projection
      zmp_pt = m.com.head<2>();
      margin = (sim.support().centroid - zmp_pt).norm();
      cls = BalanceClass::kExited;
    }
    trace.zmp_xy.push_back(zmp_pt);
    trace.d.push_back(margin);
    trace.classification.push_back(cls);

    if (class_fall_tick < 0) {
      persist = (cls == BalanceClass::kExited) ? persist + 1 : 0;
      if (persist >= opts.fall_persist) class_fall_tick = j;
    }
  }

  int fall_tick = -1;
  if (class_fall_tick >= 0) fall_tick = class_fall_tick;
  if (tilt_fall_tick >= 0 && (fall_tick < 0 || tilt_fall_tick < fall_tick)) {
    fall_tick = tilt_fall_tick;
  }
  if (fall_tick >= 0) {
    const size_t keep = static_cast<size_t>(fall_tick) + 1;
    trace.time.resize(keep);
    trace.q.resize(keep);
    trace.dq.resize(keep);
    trace.ddq.resize(keep);
    trace.tilt.resize(keep);
    trace.tilt_rate.resize(keep);
    trace.pg.resize(keep);
    trace.com.resize(keep);
    trace.com_proj.resize(keep);
    trace.linear_momentum.resize(keep);
    trace.angular_momentum.resize(keep);
    trace.linear_rate.resize(keep);
    trace.angular_rate.resize(keep);
    trace.zmp_xy.resize(keep);
    trace.d.resize(keep);
    trace.classification.resize(keep);
    trace.fall_time = trace.time.back();
    trace.success = false;
  }
  return trace;
}

// Adapter that lets the retimer evaluate candidate durations: one advance
// simulates tracking the stretched frame interval and reports the worst
// projected gravity and feet-center-to-CoM distance seen in it. The same
// fall conditions as the full rollout (margin exited for fall_persist
// consecutive ticks, or tilt beyond tilt_max) are checked along the way;
// once a candidate falls, its remaining frames report a flat-on-the-ground
// summary (|pg| = 1), which the balance penalty prices out of the search.
// Pure state transition, reentrant, no disturbances (plans are made on the
// nominal model; robustness enters at evaluation time).
class HorizonSim {
 public:
  struct State {
    SimState sim;
    MomentumState momentum;  // of sim, for margin rates across frame edges
    int exit_streak = 0;
    bool fallen = false;
  };

  HorizonSim(const Simulator& sim, const MotionTrajectory& traj) : sim_(sim), traj_(traj) {
    traj.validate();
    if (traj.njoints() != sim.model().njoints()) {
      throw DimensionError("HorizonSim: trajectory/model joint count mismatch");
    }
  }

  int frame_intervals() const { return traj_.frame_count() - 1; }

  State initial_state() const {
    State s;
    s.sim = sim_.initial_state(traj_.frames.front());
    s.momentum = momentum_of(s.sim);
    return s;
  }

  State advance(const State& s, int frame, double dt, FrameSummary* out) const {
    if (s.fallen) {
      if (out) {
        out->pg_xy = Eigen::Vector2d(1.0, 0.0);
        out->d_support = kFallenSupportDistance;
      }
      return s;
    }
    const MotionClip& a = traj_.frames[static_cast<size_t>(frame)];
    const MotionClip& b = traj_.frames[static_cast<size_t>(frame) + 1];
    const double scale = traj_.frame_period / dt;
    const SimOptions& opts = sim_.options();
    const double dt_ctrl = opts.dt_ctrl;
    const int full = static_cast<int>(std::floor(dt / dt_ctrl + 1e-9));
    const double rem = dt - static_cast<double>(full) * dt_ctrl;

    State cur = s;
    double worst_pg = -1.0;
    Eigen::Vector2d worst_pg_xy = Eigen::Vector2d::Zero();
    double worst_support = 0.0;
    double local = 0.0;
    const int steps = full + (rem > 1e-9 ? 1 : 0);
    for (int j = 0; j < steps && !cur.fallen; ++j) {
      const double step_dt = (j < full) ? dt_ctrl : rem;
      MotionClip ref = lerp_clip(a, b, std::clamp(local / dt, 0.0, 1.0));
      ref.dq *= scale;
      const StepResult res = sim_.step_dt(cur.sim, ref, Eigen::Vector2d::Zero(), step_dt);
      if (out) {
        const double pg_norm = res.pg_post.norm();
        if (pg_norm > worst_pg) {
          worst_pg = pg_norm;
          worst_pg_xy = res.pg_post;
        }
        worst_support = std::max(worst_support, sim_.d_support(res.com_pre));
      }

      // margin bookkeeping with backward-difference momentum rates
      MomentumState next_momentum = momentum_of(res.next);
      next_momentum.linear_rate = (next_momentum.linear - cur.momentum.linear) / step_dt;
      next_momentum.angular_rate = (next_momentum.angular - cur.momentum.angular) / step_dt;
      const double denom = next_momentum.mass * opts.gravity + next_momentum.linear_rate.z();
      BalanceClass cls = BalanceClass::kExited;
      if (denom > kZmpDenominatorFloor) {
        cls = classify_margin((sim_.support().centroid - zmp(next_momentum, opts.gravity)).norm(),
                              opts.thresholds);
      }
      cur.exit_streak = (cls == BalanceClass::kExited) ? cur.exit_streak + 1 : 0;
      if (cur.exit_streak >= opts.fall_persist ||
          res.next.tilt.cwiseAbs().maxCoeff() > opts.tilt_max) {
        cur.fallen = true;
      }
      cur.sim = res.next;
      cur.momentum = std::move(next_momentum);
      local += step_dt;
    }
    if (out) {
      if (cur.fallen) {
        out->pg_xy = Eigen::Vector2d(1.0, 0.0);
        out->d_support = kFallenSupportDistance;
      } else {
        // bill the frame for the ring-down its end state still owes, so a
        // short frame cannot park its disturbance in the next interval
        const Eigen::Vector2d env = sim_.tilt_envelope(cur.sim);
        const Eigen::Vector2d env_pg(std::sin(std::min(env.y(), M_PI / 2)),
                                     std::sin(std::min(env.x(), M_PI / 2)));
        out->pg_xy = env_pg.norm() > worst_pg ? env_pg : worst_pg_xy;
        out->d_support = worst_support;
      }
    }
    return cur;
  }

 private:
  static constexpr double kFallenSupportDistance = 1.0;  // m

  MomentumState momentum_of(const SimState& s) const {
    KinematicState ks = sim_.kinematic_state(s);
    return centroidal_momentum(sim_.model(), ks, tilt_angular_velocity(s.tilt, s.tilt_rate),
                               Eigen::Vector3d::Zero());
  }

  const Simulator& sim_;
  const MotionTrajectory& traj_;
};

}  // namespace retime
