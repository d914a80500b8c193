#include <cmath>

#include <gtest/gtest.h>

#include "retime/bundled.hpp"
#include "retime/kinodyn.hpp"
#include "retime/simharness.hpp"
#include "test_helpers.hpp"

namespace retime {
namespace {

ExecutedReference quiescent_ref(int frames, double dt, double dt_ctrl = 0.005) {
  const MotionTrajectory traj = bundled_motion("quiescent", frames);
  return resample(traj, uniform_plan(frames, dt), dt_ctrl);
}

TEST(PdTorque, GainClampAndZero) {
  const auto vec = [](double v) { return Eigen::VectorXd::Constant(1, v); };
  EXPECT_DOUBLE_EQ(pd_torque(vec(100), vec(4), vec(0.1), vec(0), vec(0), vec(0), vec(120))[0],
                   10.0);
  EXPECT_DOUBLE_EQ(pd_torque(vec(100), vec(4), vec(5.0), vec(0), vec(0), vec(0), vec(120))[0],
                   120.0);
  EXPECT_DOUBLE_EQ(pd_torque(vec(100), vec(4), vec(0.3), vec(1), vec(0.3), vec(1), vec(120))[0],
                   0.0);
}

TEST(Step, QuiescentEquilibriumIsAFixedPoint) {
  const Simulator sim(bundled_model());
  const MotionClip ref = bundled_motion("quiescent", 2).frames[0];
  SimState s = sim.initial_state(ref);
  for (int i = 0; i < 10000; ++i) {
    s = sim.step(s, ref, Eigen::Vector2d::Zero()).next;
    ASSERT_EQ(s.q.cwiseAbs().maxCoeff(), 0.0);
    ASSERT_EQ(s.dq.cwiseAbs().maxCoeff(), 0.0);
    // the mirrored-mass CoM cancels to rounding dust; the tilt mode parks
    // at the matching micro-equilibrium
    ASSERT_LT(s.tilt.cwiseAbs().maxCoeff(), 1e-12);
    ASSERT_LT(s.tilt_rate.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Step, BlownUpStateIsRejected) {
  const Simulator sim(bundled_model());
  const MotionClip ref = bundled_motion("quiescent", 2).frames[0];
  SimState s = sim.initial_state(ref);
  s.q[0] = std::nan("");
  EXPECT_THROW(sim.step(s, ref, Eigen::Vector2d::Zero()), std::runtime_error);
}

TEST(Step, PushImpulseBookkeeping) {
  const RobotModel model = bundled_model();
  const Simulator sim(model);
  const MotionClip ref = bundled_motion("quiescent", 2).frames[0];
  SimState s = sim.initial_state(ref);
  const Eigen::Vector2d push(12.0, -7.0);
  const SimState next = sim.step(s, ref, push).next;
  EXPECT_DOUBLE_EQ(next.tilt_rate.x(), 12.0 / model.base.inertia_diag.x() * 0.005);
  EXPECT_DOUBLE_EQ(next.tilt_rate.y(), -7.0 / model.base.inertia_diag.y() * 0.005);
}

TEST(Rollout, PushEventLandsAtItsTick) {
  DisturbanceConfig dist;
  dist.push_interval = 0.5;
  dist.push_torque_lo = 12.0;
  dist.push_torque_hi = 12.0;  // degenerate range samples exactly 12
  const Simulator sim(bundled_model());
  const RolloutTrace trace = rollout(sim, quiescent_ref(60, 0.02), dist);
  const int tick = 100;  // 0.5 s / 0.005 s
  EXPECT_LT(trace.tilt_rate[static_cast<size_t>(tick)].norm(), 1e-12);
  EXPECT_NEAR(trace.tilt_rate[static_cast<size_t>(tick + 1)].x(), 12.0 / 15.0 * 0.005, 1e-12);
}

// Free base (no spring, no damping, gravity term off): the tilt-rate drift
// must equal the time integral of the momentum-reaction relation.
TEST(Step, ReactionIntegralMatchesKinodynOracle) {
  RobotModel model = bundled_model();
  model.ankle.stiffness = 0.0;
  model.ankle.damping = 0.0;
  SimOptions opts;
  opts.gravity_term = false;
  opts.dt_ctrl = 2e-4;
  opts.tilt_max = 10.0;  // keep the free base from tripping the fall checks
  opts.fall_persist = 1 << 30;
  const Simulator sim(model, opts);
  const MotionTrajectory traj = bundled_motion("medium_swing", 60);
  const ExecutedReference ref = resample(traj, uniform_plan(60, 0.02), opts.dt_ctrl);
  DisturbanceConfig no_dist;
  no_dist.push_interval = 0.0;
  const RolloutTrace trace = rollout(sim, ref, no_dist);
  ASSERT_TRUE(trace.success);

  double max_err = 0.0, max_drift = 0.0;
  Eigen::Vector2d integral = Eigen::Vector2d::Zero();
  Eigen::Vector2d prev = base_reaction(model, trace.ddq[0]).head<2>();
  for (int j = 1; j < trace.tick_count(); ++j) {
    const Eigen::Vector2d cur = base_reaction(model, trace.ddq[static_cast<size_t>(j)]).head<2>();
    integral += 0.5 * (prev + cur) * opts.dt_ctrl;
    prev = cur;
    max_drift = std::max(max_drift, trace.tilt_rate[static_cast<size_t>(j)].norm());
    max_err = std::max(max_err, (integral - trace.tilt_rate[static_cast<size_t>(j)]).norm());
  }
  ASSERT_GT(max_drift, 1e-4);  // the motion actually excites the base
  EXPECT_LT(max_err / max_drift, 1e-3);
}

TEST(Rollout, QuiescentSucceedsWithFlatMargins) {
  const Simulator sim(bundled_model());
  const RolloutTrace trace = rollout(sim, quiescent_ref(100, 0.01));
  EXPECT_TRUE(trace.success);
  EXPECT_FALSE(trace.fall_time.has_value());
  for (int j = 0; j < trace.tick_count(); ++j) {
    EXPECT_LT(trace.pg[static_cast<size_t>(j)].norm(), 1e-12);
    EXPECT_NEAR(trace.d[static_cast<size_t>(j)], trace.d[0], 1e-9);
    EXPECT_EQ(trace.classification[static_cast<size_t>(j)], BalanceClass::kInside);
  }
}

TEST(Rollout, BitIdenticalUnderSameSeed) {
  DisturbanceConfig dist;
  dist.seed = 99;
  dist.randomization.mass_scale_lo = 0.9;
  dist.randomization.mass_scale_hi = 1.1;
  dist.randomization.motor_delay_ms_lo = 0.0;
  dist.randomization.motor_delay_ms_hi = 8.0;
  dist.push_interval = 0.3;
  dist.push_torque_lo = -20.0;
  dist.push_torque_hi = 20.0;
  const RobotModel model = bundled_model();
  const MotionTrajectory traj = bundled_motion("fast_swing", 80);
  const ExecutedReference ref = resample(traj, uniform_plan(80, 0.02), 0.005);

  const auto run = [&]() {
    const ModelPerturbation pert = sample_randomization(dist, dist.seed);
    SimOptions opts;
    opts.motor_delay_s = pert.motor_delay_s;
    const Simulator sim(apply_perturbation(model, pert), opts);
    return rollout(sim, ref, dist);
  };
  const RolloutTrace a = run();
  const RolloutTrace b = run();
  ASSERT_EQ(a.tick_count(), b.tick_count());
  EXPECT_EQ(a.success, b.success);
  for (int j = 0; j < a.tick_count(); ++j) {
    const auto k = static_cast<size_t>(j);
    ASSERT_TRUE(a.q[k] == b.q[k]);
    ASSERT_TRUE(a.tilt[k] == b.tilt[k]);
    ASSERT_TRUE(a.zmp_xy[k] == b.zmp_xy[k]);
    ASSERT_EQ(a.d[k], b.d[k]);
  }
}

TEST(Rollout, SlowerReplayTiltsLess) {
  const Simulator sim(bundled_model());
  for (const auto& name : bundled_motion_names()) {
    const MotionTrajectory traj = bundled_motion(name, 120);
    const auto peak_pg = [&](double dt) {
      const RolloutTrace t = rollout(sim, resample(traj, uniform_plan(120, dt), 0.005));
      double peak = 0.0;
      for (const auto& pg : t.pg) peak = std::max(peak, pg.norm());
      return peak;
    };
    EXPECT_LE(peak_pg(0.05), peak_pg(0.01) + 1e-15) << name;
  }
}

TEST(Randomization, RangesAndReproducibility) {
  DisturbanceConfig d;
  d.randomization.mass_scale_lo = 1.0;
  d.randomization.mass_scale_hi = 1.0;
  d.randomization.com_offset_lo = -0.05;
  d.randomization.com_offset_hi = 0.05;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const ModelPerturbation p = sample_randomization(d, seed);
    EXPECT_EQ(p.mass_scale, 1.0);
    for (int i = 0; i < 3; ++i) {
      EXPECT_GE(p.base_com_offset[i], -0.05);
      EXPECT_LT(p.base_com_offset[i], 0.05);
    }
  }
  const ModelPerturbation a = sample_randomization(d, 1234);
  const ModelPerturbation b = sample_randomization(d, 1234);
  EXPECT_EQ(a.kp_scale, b.kp_scale);
  EXPECT_TRUE(a.base_com_offset == b.base_com_offset);
  d.randomization.com_offset_lo = 0.1;  // inverted range
  d.randomization.com_offset_hi = -0.1;
  EXPECT_THROW(sample_randomization(d, 1), RangeError);
}

// Spring-damper tilt mode with no drive: mechanical energy never rises.
TEST(Step, TiltEnergyIsNonIncreasing) {
  RobotModel model = bundled_model();
  SimOptions opts;
  opts.gravity_term = false;
  const Simulator sim(model, opts);
  const MotionClip ref = bundled_motion("quiescent", 2).frames[0];
  SimState s = sim.initial_state(ref);
  s.tilt = Eigen::Vector2d(0.08, -0.05);  // inside the ankle torque budget
  const auto energy = [&](const SimState& st) {
    double e = 0.0;
    for (int axis = 0; axis < 2; ++axis) {
      e += 0.5 * model.base.inertia_diag[axis] * st.tilt_rate[axis] * st.tilt_rate[axis] +
           0.5 * model.ankle.stiffness * st.tilt[axis] * st.tilt[axis];
    }
    return e;
  };
  double prev = energy(s);
  for (int i = 0; i < 4000; ++i) {
    s = sim.step(s, ref, Eigen::Vector2d::Zero()).next;
    const double e = energy(s);
    ASSERT_LE(e, prev + 1e-9) << "tick " << i;
    prev = e;
  }
  EXPECT_LT(prev, 1e-4);  // damped out
}

TEST(Rollout, StepSizeConvergenceIsFirstOrder) {
  const RobotModel model = bundled_model();
  const MotionTrajectory traj = bundled_motion("slow_bilateral", 61);
  const auto final_state = [&](double dt_ctrl) {
    SimOptions opts;
    opts.dt_ctrl = dt_ctrl;
    const Simulator sim(model, opts);
    const RolloutTrace t = rollout(sim, resample(traj, uniform_plan(61, 0.01), dt_ctrl));
    Eigen::VectorXd x(t.q.back().size() * 2 + 4);
    x << t.q.back(), t.dq.back(), t.tilt.back(), t.tilt_rate.back();
    return x;
  };
  const Eigen::VectorXd coarse = final_state(0.004);
  const Eigen::VectorXd mid = final_state(0.002);
  const Eigen::VectorXd fine = final_state(0.001);
  const double e1 = (coarse - mid).norm();
  const double e2 = (mid - fine).norm();
  ASSERT_GT(e2, 0.0);
  const double ratio = e1 / e2;
  EXPECT_GE(ratio, 1.5);
  EXPECT_LE(ratio, 2.5);
}

// The delay queue shifts the applied torque stream by exactly n ticks. A
// huge rotor inertia freezes the state so the raw stream is an impulse.
TEST(Step, TorqueDelayShiftsApplication) {
  RobotModel model = bundled_model();
  for (auto& a : model.actuation) a.rotor_inertia = 1e9;
  const int delay = 3;
  SimOptions opts;
  opts.motor_delay_s = delay * opts.dt_ctrl;
  const Simulator sim(model, opts);
  MotionClip rest = bundled_motion("quiescent", 2).frames[0];
  MotionClip kick = rest;
  kick.q[0] = 1.0;

  SimState s = sim.initial_state(rest);
  std::vector<double> applied;
  for (int j = 0; j < 10; ++j) {
    const StepResult r = sim.step(s, j == 0 ? kick : rest, Eigen::Vector2d::Zero());
    applied.push_back(r.ddq[0] * 1e9);
    s = r.next;
  }
  int argmax = 0;
  for (int j = 1; j < 10; ++j) {
    if (std::abs(applied[static_cast<size_t>(j)]) > std::abs(applied[static_cast<size_t>(argmax)])) {
      argmax = j;
    }
  }
  EXPECT_EQ(argmax, delay);
  EXPECT_NEAR(applied[delay], 100.0, 1e-6);  // kp * 1 rad
  for (int j = 0; j < delay; ++j) EXPECT_EQ(applied[static_cast<size_t>(j)], 0.0);
}

TEST(Payload, AddsMassAndChainInertia) {
  const RobotModel base = bundled_model();
  const RobotModel loaded = apply_payload(base, 1.0);
  EXPECT_NEAR(loaded.total_mass(), base.total_mass() + 2.0, 1e-12);  // one per arm
  for (int ee : base.end_effectors()) {
    EXPECT_GT(loaded.links[static_cast<size_t>(ee)].mass,
              base.links[static_cast<size_t>(ee)].mass);
  }
  // shoulder pitch inertia grows by roughly m * reach^2
  EXPECT_GT(loaded.links[1].joint_inertia, base.links[1].joint_inertia + 0.2);
  EXPECT_TRUE(apply_payload(base, 0.0).links[1].joint_inertia == base.links[1].joint_inertia);
  EXPECT_THROW(apply_payload(base, -1.0), RangeError);
}

TEST(Payload, HeavierLoadDegradesBalanceMonotonically) {
  const RobotModel model = bundled_model();
  const MotionTrajectory traj = bundled_motion("fast_swing", 100);
  const ExecutedReference ref = resample(traj, uniform_plan(100, 0.03), 0.005);
  double prev_peak = 0.0, prev_eg = 0.0;
  bool prev_success = true;
  for (double payload : {0.5, 1.0, 3.0}) {
    const Simulator sim(apply_payload(model, payload), SimOptions{});
    const RolloutTrace t = rollout(sim, ref);
    double peak = 0.0, eg = 0.0;
    for (int j = 0; j < t.tick_count(); ++j) {
      peak = std::max(peak, t.d[static_cast<size_t>(j)]);
      eg += t.pg[static_cast<size_t>(j)].norm();
    }
    eg /= t.tick_count();
    EXPECT_GE(peak, prev_peak);
    EXPECT_GE(eg, prev_eg);
    EXPECT_LE(static_cast<int>(t.success), static_cast<int>(prev_success));
    prev_peak = peak;
    prev_eg = eg;
    prev_success = t.success;
  }
}

TEST(Step, LiteralPdFormIsAvailable) {
  SimOptions literal;
  literal.literal_pd = true;
  const Simulator corrected(bundled_model());
  const Simulator printed(bundled_model(), literal);
  MotionClip ref = bundled_motion("quiescent", 2).frames[0];
  ref.q[0] = 0.4;
  SimState s = corrected.initial_state(bundled_motion("quiescent", 2).frames[0]);
  s.dq[0] = 1.0;
  const double tau_corrected = corrected.step(s, ref, Eigen::Vector2d::Zero()).ddq[0];
  const double tau_printed = printed.step(s, ref, Eigen::Vector2d::Zero()).ddq[0];
  // corrected: kp*0.4 - kd*1; printed: kp*0.4 + kd*1
  EXPECT_NE(tau_corrected, tau_printed);
  EXPECT_GT(tau_printed, tau_corrected);
}

}  // namespace
}  // namespace retime
