#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "retime/common.hpp"
#include "retime/kinodyn.hpp"
#include "retime/retimer.hpp"
#include "retime/robot_model.hpp"
#include "retime/rotation.hpp"
#include "retime/simharness.hpp"

namespace retime {

struct MetricsReport {
  double time_cost = 0.0;  // s, the plan total
  bool success = true;
  double e_jpe = 0.0;        // rad, mean ||q_ref - q|| / sqrt(n_j)
  double e_eepe = 0.0;       // m, mean end-effector position error
  double e_eeoe = 0.0;       // rad, mean end-effector geodesic orientation error
  double e_g = 0.0;          // mean ||pg_xy||, dimensionless
  double e_acc_upper = 0.0;  // rad/s^2, mean ||finite-difference ddq||
  double e_acc_base = 0.0;   // rad/s^2, base tilt acceleration proxy (no legs here)
  double e_action_upper = 0.0;  // rad, mean ||q_ref_t - q_ref_{t-1}||
  double peak_d = 0.0;          // m, worst stability margin
  std::string trajectory;
  std::string plan_hash;
  std::uint64_t seed = 0;
};

// Evaluation metrics over a rollout against its executed reference.
// End-effector errors compare the tilted actual state with the nominal
// (untilted) reference pose, so base lean shows up in them.
inline MetricsReport compute_metrics(const RolloutTrace& trace, const ExecutedReference& ref,
                                     const RobotModel& model) {
  if (trace.tick_count() > ref.tick_count()) {
    throw DimensionError("compute_metrics: trace longer than reference");
  }
  const int n = trace.tick_count();
  if (n == 0) throw ValidationError("compute_metrics: empty trace");
  const int nj = model.njoints();
  const double inv_sqrt_nj = 1.0 / std::sqrt(static_cast<double>(nj));
  const std::vector<int> ees = model.end_effectors();

  MetricsReport rep;
  rep.time_cost = ref.total_time;
  rep.success = trace.success;
  rep.trajectory = ref.trajectory;

  double jpe = 0.0, eepe = 0.0, eeoe = 0.0, eg = 0.0, acc_u = 0.0, acc_b = 0.0, action = 0.0;
  double peak_d = 0.0;
  for (int t = 0; t < n; ++t) {
    const MotionClip& c = ref.clips[static_cast<size_t>(t)];
    jpe += (c.q - trace.q[static_cast<size_t>(t)]).norm() * inv_sqrt_nj;
    eg += trace.pg[static_cast<size_t>(t)].norm();
    peak_d = std::max(peak_d, trace.d[static_cast<size_t>(t)]);

    KinematicState ref_state;
    ref_state.base_position = c.r;
    ref_state.base_rotation = rot6d_to_matrix(c.theta6);
    ref_state.q = c.q;
    ref_state.dq = c.dq;
    const ForwardKinematicsResult ref_fk = forward_kinematics(model, ref_state);

    KinematicState act_state;
    act_state.base_position = c.r;
    act_state.base_rotation = tilt_rotation(trace.tilt[static_cast<size_t>(t)]) * ref_state.base_rotation;
    act_state.q = trace.q[static_cast<size_t>(t)];
    act_state.dq = trace.dq[static_cast<size_t>(t)];
    const ForwardKinematicsResult act_fk = forward_kinematics(model, act_state);

    for (int ee : ees) {
      eepe += (ref_fk.links[static_cast<size_t>(ee)].position -
               act_fk.links[static_cast<size_t>(ee)].position)
                  .norm();
      eeoe += geodesic_angle(ref_fk.links[static_cast<size_t>(ee)].rotation,
                             act_fk.links[static_cast<size_t>(ee)].rotation);
    }

    if (t > 0) {
      action += (ref.clips[static_cast<size_t>(t)].q - ref.clips[static_cast<size_t>(t) - 1].q).norm();
      acc_u += ((trace.dq[static_cast<size_t>(t)] - trace.dq[static_cast<size_t>(t) - 1]) /
                trace.dt_ctrl)
                   .norm();
      acc_b += ((trace.tilt_rate[static_cast<size_t>(t)] - trace.tilt_rate[static_cast<size_t>(t) - 1]) /
                trace.dt_ctrl)
                   .norm();
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  rep.e_jpe = jpe * inv_n;
  rep.e_g = eg * inv_n;
  rep.e_eepe = eepe * inv_n / static_cast<double>(ees.size());
  rep.e_eeoe = eeoe * inv_n / static_cast<double>(ees.size());
  rep.peak_d = peak_d;
  if (n > 1) {
    const double inv_n1 = 1.0 / static_cast<double>(n - 1);
    rep.e_action_upper = action * inv_n1;
    rep.e_acc_upper = acc_u * inv_n1;
    rep.e_acc_base = acc_b * inv_n1;
  }
  return rep;
}

// Momentum of the reference itself, base bolted at each clip's pose, with
// central-difference rates filled in.
inline std::vector<MomentumState> open_loop_momentum(const RobotModel& model,
                                                     const ExecutedReference& ref) {
  if (ref.clips.size() < 2) throw ValidationError("open_loop_momentum: need >= 2 ticks");
  std::vector<MomentumState> series;
  series.reserve(ref.clips.size());
  for (const auto& c : ref.clips) {
    KinematicState ks;
    ks.base_position = c.r;
    ks.base_rotation = rot6d_to_matrix(c.theta6);
    ks.q = c.q;
    ks.dq = c.dq;
    series.push_back(centroidal_momentum(model, ks));
  }
  std::vector<MomentumState> out = series;
  for (size_t t = 0; t < series.size(); ++t) {
    const MomentumRates r = momentum_rates(series, static_cast<int>(t), ref.dt_ctrl);
    out[t].linear_rate = r.linear_rate;
    out[t].angular_rate = r.angular_rate;
  }
  return out;
}

struct StabilitySeries {
  std::vector<double> time;
  std::vector<Eigen::Vector2d> zmp;
  std::vector<double> d;
  std::vector<BalanceClass> classification;
};

// ZMP trace of the reference under bolted-base kinematics.
inline StabilitySeries open_loop_stability(const RobotModel& model, const ExecutedReference& ref,
                                           double gravity = 9.81,
                                           const StabilityThresholds& th = {}) {
  const SupportPolygon sp = support_polygon(model.foot_contacts);
  const std::vector<MomentumState> momenta = open_loop_momentum(model, ref);
  StabilitySeries s;
  for (size_t t = 0; t < momenta.size(); ++t) {
    const Eigen::Vector2d z = zmp(momenta[t], gravity);
    s.time.push_back(ref.time_at(t));
    s.zmp.push_back(z);
    s.d.push_back((sp.centroid - z).norm());
    s.classification.push_back(classify_margin(s.d.back(), th));
  }
  return s;
}

struct ParetoPoint {
  double time_cost = 0.0;
  double e_g = 0.0;
  double e_eepe = 0.0;
  std::string tag;

  bool operator==(const ParetoPoint& o) const {
    return time_cost == o.time_cost && e_g == o.e_g && e_eepe == o.e_eepe;
  }
};

// Weak dominance: a beats b when a <= b everywhere and a < b somewhere.
inline bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
  const bool le = a.time_cost <= b.time_cost && a.e_g <= b.e_g && a.e_eepe <= b.e_eepe;
  const bool lt = a.time_cost < b.time_cost || a.e_g < b.e_g || a.e_eepe < b.e_eepe;
  return le && lt;
}

struct ParetoSet {
  std::vector<ParetoPoint> front;      // non-dominated, ordered by time_cost
  std::vector<ParetoPoint> dominated;  // the remainder
};

// All objectives are minimized. Duplicated points are both kept (neither
// weakly dominates the other).
inline ParetoSet pareto_front(const std::vector<ParetoPoint>& points) {
  if (points.empty()) throw ValidationError("pareto_front: no points");
  ParetoSet out;
  for (size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (size_t j = 0; j < points.size(); ++j) {
      if (i != j && dominates(points[j], points[i])) {
        dominated = true;
        break;
      }
    }
    (dominated ? out.dominated : out.front).push_back(points[i]);
  }
  std::stable_sort(out.front.begin(), out.front.end(),
                   [](const ParetoPoint& a, const ParetoPoint& b) { return a.time_cost < b.time_cost; });
  return out;
}

struct RegressionFit {
  int degree = 0;
  Eigen::VectorXd coefficients;  // ascending powers; bivariate: 1,x,y,x^2,xy,y^2
  double residual_rms = 0.0;
  std::string input_label;
  std::string target_label;
};

namespace detail {

inline RegressionFit solve_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& ys,
                                         int degree) {
  // Normal equations with column scaling to tame the Vandermonde conditioning.
  Eigen::VectorXd scale(design.cols());
  for (int c = 0; c < design.cols(); ++c) {
    const double norm = design.col(c).norm();
    scale[c] = norm > 0.0 ? norm : 1.0;
  }
  const Eigen::MatrixXd scaled = design * scale.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd gram = scaled.transpose() * scaled;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array().abs() < 1e-13).any()) {
    throw DegenerateInputError("polyfit: rank-deficient design matrix");
  }
  RegressionFit fit;
  fit.degree = degree;
  fit.coefficients = scale.cwiseInverse().asDiagonal() * ldlt.solve(scaled.transpose() * ys);
  fit.residual_rms =
      std::sqrt((design * fit.coefficients - ys).squaredNorm() / static_cast<double>(ys.size()));
  return fit;
}

}  // namespace detail

inline RegressionFit polyfit(const std::vector<double>& xs, const std::vector<double>& ys,
                             int degree) {
  if (degree < 0) throw RangeError("polyfit: negative degree");
  if (xs.size() != ys.size()) throw DimensionError("polyfit: xs/ys length mismatch");
  std::vector<double> distinct = xs;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (static_cast<int>(distinct.size()) < degree + 1) {
    throw DegenerateInputError("polyfit: need degree+1 distinct xs");
  }
  const int n = static_cast<int>(xs.size());
  Eigen::MatrixXd design(n, degree + 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    double p = 1.0;
    for (int c = 0; c <= degree; ++c) {
      design(i, c) = p;
      p *= xs[static_cast<size_t>(i)];
    }
    y[i] = ys[static_cast<size_t>(i)];
  }
  return detail::solve_least_squares(design, y, degree);
}

// Full quadratic basis {1, x, y, x^2, xy, y^2} in two inputs.
inline RegressionFit polyfit2(const std::vector<double>& xs, const std::vector<double>& ys,
                              const std::vector<double>& zs) {
  if (xs.size() != ys.size() || xs.size() != zs.size()) {
    throw DimensionError("polyfit2: input length mismatch");
  }
  if (xs.size() < 6) throw DegenerateInputError("polyfit2: need at least 6 samples");
  const int n = static_cast<int>(xs.size());
  Eigen::MatrixXd design(n, 6);
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) {
    const double x = xs[static_cast<size_t>(i)];
    const double y = ys[static_cast<size_t>(i)];
    design.row(i) << 1.0, x, y, x * x, x * y, y * y;
    z[i] = zs[static_cast<size_t>(i)];
  }
  return detail::solve_least_squares(design, z, 2);
}

}  // namespace retime
