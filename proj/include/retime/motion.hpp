#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "retime/common.hpp"
#include "retime/rotation.hpp"

namespace retime {

// One reference frame: base pose (position + continuous 6D orientation) and
// upper-body joint positions/velocities.
struct MotionClip {
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  Vector6d theta6 = (Vector6d() << 1, 0, 0, 0, 1, 0).finished();
  Eigen::VectorXd q;
  Eigen::VectorXd dq;

  int njoints() const { return static_cast<int>(q.size()); }

  void validate() const {
    if (q.size() != dq.size()) {
      throw DimensionError("clip: q and dq sizes differ");
    }
    if (!r.allFinite() || !theta6.allFinite() || !q.allFinite() || !dq.allFinite()) {
      throw NonFiniteError("clip: non-finite entry");
    }
  }
};

// Dimension layout of a flattened clip: [r(3), theta6(6), q(n), dq(n)].
inline int clip_dims(int njoints) { return 9 + 2 * njoints; }

inline Eigen::VectorXd clip_to_vector(const MotionClip& c) {
  Eigen::VectorXd v(clip_dims(c.njoints()));
  v.head<3>() = c.r;
  v.segment<6>(3) = c.theta6;
  v.segment(9, c.njoints()) = c.q;
  v.tail(c.njoints()) = c.dq;
  return v;
}

inline MotionClip vector_to_clip(const Eigen::Ref<const Eigen::VectorXd>& v, int njoints) {
  if (v.size() != clip_dims(njoints)) {
    throw DimensionError("vector_to_clip: size mismatch");
  }
  MotionClip c;
  c.r = v.head<3>();
  c.theta6 = v.segment<6>(3);
  c.q = v.segment(9, njoints);
  c.dq = v.tail(njoints);
  return c;
}

struct MotionTrajectory {
  std::vector<MotionClip> frames;
  double frame_period = 0.01;  // native spacing of the source clips, seconds
  std::string name;

  int njoints() const { return frames.empty() ? 0 : frames.front().njoints(); }
  int frame_count() const { return static_cast<int>(frames.size()); }
  double native_duration() const { return frame_period * (frame_count() - 1); }

  void validate() const {
    if (frames.size() < 2) {
      throw ValidationError("trajectory '" + name + "': needs at least 2 frames");
    }
    if (!(frame_period > 0.0)) {
      throw ValidationError("trajectory '" + name + "': frame period must be positive");
    }
    const int nj = frames.front().njoints();
    for (size_t i = 0; i < frames.size(); ++i) {
      if (frames[i].njoints() != nj) {
        throw DimensionError("trajectory '" + name + "': frame " + std::to_string(i) +
                             " has inconsistent joint count");
      }
      frames[i].validate();
    }
  }
};

// Centered sequence of 2W+1 clips around a frame.
struct MotionWindow {
  std::vector<MotionClip> clips;
  int center_index = 0;
  int half_width = 0;
};

struct NormalizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  std::vector<int> excluded_dims;  // orientation dims, untouched by normalization
};

struct CurriculumConfig {
  double alpha = 1.0;
  Eigen::VectorXd default_posture;
};

inline constexpr double kEpsilonStd = 1e-8;

// The six theta6 slots in the flattened clip layout.
inline std::vector<int> orientation_dims() { return {3, 4, 5, 6, 7, 8}; }

// Per-dimension mean and population standard deviation over all frames of
// all trajectories. Zero-variance dims are floored at kEpsilonStd.
inline NormalizationStats compute_stats(const std::vector<MotionTrajectory>& trajectories) {
  if (trajectories.empty()) {
    throw ValidationError("compute_stats: no trajectories");
  }
  const int nj = trajectories.front().njoints();
  const int dims = clip_dims(nj);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dims);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(dims);
  long count = 0;
  for (const auto& traj : trajectories) {
    if (traj.njoints() != nj) {
      throw DimensionError("compute_stats: mixed joint counts");
    }
    for (const auto& f : traj.frames) {
      const Eigen::VectorXd v = clip_to_vector(f);
      sum += v;
      sumsq += v.cwiseProduct(v);
      ++count;
    }
  }
  NormalizationStats s;
  s.mean = sum / static_cast<double>(count);
  Eigen::VectorXd var = sumsq / static_cast<double>(count) - s.mean.cwiseProduct(s.mean);
  s.stddev = var.cwiseMax(0.0).cwiseSqrt().cwiseMax(kEpsilonStd);
  s.excluded_dims = orientation_dims();
  return s;
}

namespace detail {

inline void check_stats_dims(const MotionWindow& w, const NormalizationStats& s) {
  if (w.clips.empty()) {
    throw ValidationError("window is empty");
  }
  if (s.mean.size() != clip_dims(w.clips.front().njoints()) ||
      s.stddev.size() != s.mean.size()) {
    throw DimensionError("stats/window dimension mismatch");
  }
}

}  // namespace detail

inline MotionWindow normalize_window(const MotionWindow& w, const NormalizationStats& s) {
  detail::check_stats_dims(w, s);
  std::vector<bool> excluded(static_cast<size_t>(s.mean.size()), false);
  for (int d : s.excluded_dims) excluded[static_cast<size_t>(d)] = true;
  MotionWindow out = w;
  for (auto& clip : out.clips) {
    Eigen::VectorXd v = clip_to_vector(clip);
    for (int d = 0; d < v.size(); ++d) {
      if (!excluded[static_cast<size_t>(d)]) v[d] = (v[d] - s.mean[d]) / s.stddev[d];
    }
    clip = vector_to_clip(v, clip.njoints());
  }
  return out;
}

inline MotionWindow denormalize_window(const MotionWindow& w, const NormalizationStats& s) {
  detail::check_stats_dims(w, s);
  std::vector<bool> excluded(static_cast<size_t>(s.mean.size()), false);
  for (int d : s.excluded_dims) excluded[static_cast<size_t>(d)] = true;
  MotionWindow out = w;
  for (auto& clip : out.clips) {
    Eigen::VectorXd v = clip_to_vector(clip);
    for (int d = 0; d < v.size(); ++d) {
      if (!excluded[static_cast<size_t>(d)]) v[d] = v[d] * s.stddev[d] + s.mean[d];
    }
    clip = vector_to_clip(v, clip.njoints());
  }
  return out;
}

// Clips [t-W, t+W], with indices clamped to the trajectory ends so the
// window length is always exactly 2W+1.
inline MotionWindow extract_window(const MotionTrajectory& traj, int t, int half_width) {
  if (half_width < 0) {
    throw RangeError("extract_window: negative half width");
  }
  if (traj.frames.empty()) {
    throw ValidationError("extract_window: empty trajectory");
  }
  const int last = traj.frame_count() - 1;
  MotionWindow w;
  w.center_index = t;
  w.half_width = half_width;
  w.clips.reserve(static_cast<size_t>(2 * half_width + 1));
  for (int i = t - half_width; i <= t + half_width; ++i) {
    w.clips.push_back(traj.frames[static_cast<size_t>(std::clamp(i, 0, last))]);
  }
  return w;
}

// Reconstruction-style distance between two clips: Frobenius norm of the
// rotation difference plus Euclidean norms of the joint position, joint
// velocity, and base position differences, summed unweighted.
inline double clip_distance(const MotionClip& a, const MotionClip& b) {
  if (a.njoints() != b.njoints()) {
    throw DimensionError("clip_distance: joint count mismatch");
  }
  const Eigen::Matrix3d ra = rot6d_to_matrix(a.theta6);
  const Eigen::Matrix3d rb = rot6d_to_matrix(b.theta6);
  return (ra - rb).norm() + (a.q - b.q).norm() + (a.dq - b.dq).norm() + (a.r - b.r).norm();
}

// Mean clip distance over two index-aligned windows.
inline double window_distance(const MotionWindow& a, const MotionWindow& b) {
  if (a.clips.size() != b.clips.size()) {
    throw DimensionError("window_distance: length mismatch");
  }
  if (a.clips.empty()) {
    throw ValidationError("window_distance: empty windows");
  }
  double sum = 0.0;
  for (size_t i = 0; i < a.clips.size(); ++i) {
    sum += clip_distance(a.clips[i], b.clips[i]);
  }
  return sum / static_cast<double>(a.clips.size());
}

// Curriculum amplitude scaling: q -> q_default + alpha (q - q_default),
// dq -> alpha dq. Base pose is untouched.
inline MotionTrajectory scale_amplitude(const MotionTrajectory& traj, const CurriculumConfig& c) {
  if (c.alpha < 0.0 || c.alpha > 1.0) {
    throw RangeError("scale_amplitude: alpha outside [0,1]");
  }
  if (c.default_posture.size() != traj.njoints()) {
    throw DimensionError("scale_amplitude: default posture size mismatch");
  }
  MotionTrajectory out = traj;
  for (auto& f : out.frames) {
    f.q = c.default_posture + c.alpha * (f.q - c.default_posture);
    f.dq = c.alpha * f.dq;
  }
  return out;
}

// Componentwise linear interpolation. theta6 is interpolated linearly; its
// re-orthogonalization happens wherever rot6d_to_matrix consumes it.
inline MotionClip lerp_clip(const MotionClip& a, const MotionClip& b, double u) {
  if (u < 0.0 || u > 1.0) {
    throw RangeError("lerp_clip: u outside [0,1]");
  }
  if (a.njoints() != b.njoints()) {
    throw DimensionError("lerp_clip: joint count mismatch");
  }
  if (u == 0.0) return a;
  if (u == 1.0) return b;
  MotionClip out;
  out.r = (1.0 - u) * a.r + u * b.r;
  out.theta6 = (1.0 - u) * a.theta6 + u * b.theta6;
  out.q = (1.0 - u) * a.q + u * b.q;
  out.dq = (1.0 - u) * a.dq + u * b.dq;
  return out;
}

}  // namespace retime
