#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "retime/common.hpp"
#include "retime/motion.hpp"

namespace retime {

// Per-frame durations with cumulative time knots; knots[0] = 0 and
// total_time = knots.back().
struct RetimingPlan {
  std::vector<double> dts;    // length = frame count - 1
  std::vector<double> knots;  // length = frame count
  double total_time = 0.0;
};

// Knots accumulate in index order. Plans with one repeated duration use
// multiplicative knots instead, so a fixed-dt execution of N clip
// intervals costs exactly N * dt (the comparison-table arithmetic) and its
// knots land exactly on aligned control ticks.
inline RetimingPlan make_plan(std::vector<double> dts) {
  RetimingPlan p;
  for (double dt : dts) {
    if (!std::isfinite(dt) || dt <= 0.0) {
      throw ValidationError("plan: durations must be positive and finite");
    }
  }
  p.knots.resize(dts.size() + 1);
  p.knots[0] = 0.0;
  const bool uniform =
      !dts.empty() && std::all_of(dts.begin(), dts.end(), [&](double d) { return d == dts[0]; });
  if (uniform) {
    for (size_t i = 1; i <= dts.size(); ++i) {
      p.knots[i] = static_cast<double>(i) * dts[0];
    }
  } else {
    for (size_t i = 0; i < dts.size(); ++i) {
      p.knots[i + 1] = p.knots[i] + dts[i];
    }
  }
  p.total_time = p.knots.back();
  p.dts = std::move(dts);
  return p;
}

inline RetimingPlan uniform_plan(int frame_count, double dt) {
  if (frame_count < 2) {
    throw ValidationError("uniform_plan: need at least 2 frames");
  }
  return make_plan(std::vector<double>(static_cast<size_t>(frame_count - 1), dt));
}

struct ChunkingConfig {
  double k = 0.5;   // exponential decay coefficient
  int horizon = 10; // prediction horizon N, frames
  int buffer = 10;  // chunk buffer capacity, at most N+1

  void validate() const {
    if (k < 0.0) throw RangeError("chunking: k must be >= 0");
    if (horizon < 1) throw RangeError("chunking: horizon must be >= 1");
    if (buffer < 1 || buffer > horizon + 1) {
      throw RangeError("chunking: buffer must be in [1, horizon+1]");
    }
  }
};

struct RetimeCostWeights {
  double gravity_projection = 2.5;
  double balance_penalty = -1.0;
  double support_constraint = -5.0;
  double small_dt = 5.0;
  double dt_smooth = -0.1;
  double dt_norm = 0.1;
};

struct RetimeCostConfig {
  RetimeCostWeights weights;
  double sigma = 0.5;                 // s, width of the small-dt bonus
  double dt_min = 0.01;               // s
  double dt_max = 0.1;                // s
  std::vector<double> grid = {0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10};
  double support_floor = 1e-3;        // m, avoids log(0)
  int beam_width = 16;
  long long exhaustive_cap = 100000;  // max enumerated sequences for exact search

  void validate() const {
    if (!(dt_min > 0.0) || !(dt_max >= dt_min)) throw RangeError("cost config: bad dt bounds");
    if (!(sigma > 0.0)) throw RangeError("cost config: sigma must be positive");
    if (grid.empty()) throw ValidationError("cost config: empty grid");
    for (double g : grid) {
      if (g < dt_min - 1e-12 || g > dt_max + 1e-12) {
        throw RangeError("cost config: grid value outside dt bounds");
      }
    }
    if (beam_width < 1) throw RangeError("cost config: beam width must be >= 1");
  }
};

// What the rollout hands back per reference frame: the projected gravity at
// the worst tick of the frame interval and the largest feet-center-to-CoM
// horizontal distance seen in the interval.
struct FrameSummary {
  Eigen::Vector2d pg_xy = Eigen::Vector2d::Zero();
  double d_support = 0.0;
};

// Exponential chunk weights w_i = exp(-k i) / sum_j exp(-k j); index 0 is
// the oldest prediction and carries the largest weight.
inline std::vector<double> chunk_weights(double k, int n) {
  if (n < 1) throw RangeError("chunk_weights: need n >= 1");
  std::vector<double> w(static_cast<size_t>(n));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    w[static_cast<size_t>(i)] = std::exp(-k * static_cast<double>(i));
    sum += w[static_cast<size_t>(i)];
  }
  for (auto& x : w) x /= sum;
  return w;
}

inline std::vector<double> chunk_weights(const ChunkingConfig& cfg) {
  cfg.validate();
  return chunk_weights(cfg.k, cfg.buffer);
}

// Weighted average of the buffered predictions for the current frame
// (oldest first), truncated/renormalized to the buffer length and clamped
// to the duration bounds.
inline double blend_chunks(const std::vector<double>& values_oldest_first, double k,
                           double dt_min, double dt_max) {
  if (values_oldest_first.empty()) {
    throw ValidationError("blend_chunks: empty buffer");
  }
  // an agreeing buffer passes its value through exactly
  if (std::all_of(values_oldest_first.begin(), values_oldest_first.end(),
                  [&](double v) { return v == values_oldest_first[0]; })) {
    return std::clamp(values_oldest_first[0], dt_min, dt_max);
  }
  const std::vector<double> w = chunk_weights(k, static_cast<int>(values_oldest_first.size()));
  double out = 0.0;
  for (size_t i = 0; i < values_oldest_first.size(); ++i) {
    out += w[i] * values_oldest_first[i];
  }
  return std::clamp(out, dt_min, dt_max);
}

// Negated reward over a candidate duration sequence. Lower is better.
inline double retime_cost(const std::vector<double>& dts, const std::vector<FrameSummary>& summary,
                          const RetimeCostConfig& cfg) {
  if (dts.size() != summary.size()) {
    throw DimensionError("retime_cost: dts/summary length mismatch");
  }
  const double inv_two_sigma_sq = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
  double gravity = 0.0, balance = 0.0, support= 0.0, small = 0.0;
  for (size_t i = 0; i < dts.size(); ++i) {
    const double pg = summary[i].pg_xy.norm();
    const double ds = std::max(summary[i].d_support, cfg.support_floor);
    if (!std::isfinite(pg) || !std::isfinite(ds) || !std::isfinite(dts[i])) {
      throw NonFiniteError("retime_cost: non-finite input");
    }
    gravity += std::exp(-20.0 * pg);
    balance += std::exp(20.0 * pg) - 1.0;
    support += std::log10(7.0 * ds);
    small += std::exp(-(dts[i] * dts[i]) * inv_two_sigma_sq);
  }
  double smooth = 0.0;
  for (size_t i = 0; i + 1 < dts.size(); ++i) smooth += std::abs(dts[i + 1] - dts[i]);
  double total = 0.0;
  for (double d : dts) total += d;

  const auto& w = cfg.weights;
  const double reward = w.gravity_projection * gravity + w.balance_penalty * balance +
                        w.support_constraint * support + w.small_dt * small +
                        w.dt_smooth * smooth + w.dt_norm * std::abs(total);
  return -reward;
}

namespace detail {

inline std::vector<double> sorted_grid(const RetimeCostConfig& cfg) {
  std::vector<double> g = cfg.grid;
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

inline bool sequences_fit_cap(size_t grid_size, int n, long long cap) {
  long long count = 1;
  for (int i = 0; i < n; ++i) {
    count *= static_cast<long long>(grid_size);
    if (count > cap) return false;
  }
  return true;
}

}  // namespace detail

// Exact grid optimum over all |grid|^n duration sequences, evaluated with a
// fresh rollout per sequence. Ties break to the lexicographically smallest
// sequence. This is the verification oracle for optimize_horizon; it stays
// deliberately simple.
template <class Sim>
std::pair<std::vector<double>, double> brute_force_plan(const Sim& sim,
                                                        const typename Sim::State& start,
                                                        int start_frame, int n,
                                                        const RetimeCostConfig& cfg) {
  cfg.validate();
  const std::vector<double> grid = detail::sorted_grid(cfg);
  if (n < 1) throw RangeError("brute_force_plan: need n >= 1");
  if (!detail::sequences_fit_cap(grid.size(), n, 1000000)) {
    throw RangeError("brute_force_plan: instance too large");
  }
  std::vector<size_t> digits(static_cast<size_t>(n), 0);
  std::vector<double> best;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<double> dts(static_cast<size_t>(n));
  std::vector<FrameSummary> sums(static_cast<size_t>(n));
  while (true) {
    typename Sim::State st = start;
    for (int j = 0; j < n; ++j) {
      dts[static_cast<size_t>(j)] = grid[digits[static_cast<size_t>(j)]];
      st = sim.advance(st, start_frame + j, dts[static_cast<size_t>(j)], &sums[static_cast<size_t>(j)]);
    }
    const double cost = retime_cost(dts, sums, cfg);
    if (cost < best_cost) {
      best_cost = cost;
      best = dts;
    }
    // odometer, last digit fastest: enumeration is lexicographic
    int j = n - 1;
    while (j >= 0 && digits[static_cast<size_t>(j)] + 1 == grid.size()) {
      digits[static_cast<size_t>(j)] = 0;
      --j;
    }
    if (j < 0) break;
    ++digits[static_cast<size_t>(j)];
  }
  return {best, best_cost};
}

namespace detail {

// Depth-first enumeration with cached prefix states; leaf costs are
// computed by the same retime_cost call the oracle uses.
template <class Sim>
void exhaustive_search(const Sim& sim, const typename Sim::State& start, int start_frame, int n,
                       const std::vector<double>& grid, const RetimeCostConfig& cfg,
                       std::vector<double>& best, double& best_cost) {
  std::vector<typename Sim::State> states;
  states.reserve(static_cast<size_t>(n) + 1);
  states.push_back(start);
  std::vector<double> dts(static_cast<size_t>(n));
  std::vector<FrameSummary> sums(static_cast<size_t>(n));
  std::vector<size_t> digits(static_cast<size_t>(n), 0);

  int depth = 0;
  while (true) {
    if (depth == n) {
      const double cost = retime_cost(dts, sums, cfg);
      if (cost < best_cost) {
        best_cost = cost;
        best = dts;
      }
      // backtrack to the deepest level with an unexplored branch
      --depth;
      while (depth >= 0 && digits[static_cast<size_t>(depth)] + 1 == grid.size()) --depth;
      if (depth < 0) return;
      ++digits[static_cast<size_t>(depth)];
      for (int j = depth + 1; j < n; ++j) digits[static_cast<size_t>(j)] = 0;
      states.resize(static_cast<size_t>(depth) + 1);
    }
    const double dt = grid[digits[static_cast<size_t>(depth)]];
    dts[static_cast<size_t>(depth)] = dt;
    states.push_back(sim.advance(states.back(), start_frame + depth, dt,
                                 &sums[static_cast<size_t>(depth)]));
    ++depth;
  }
}

template <class Sim>
struct BeamCandidate {
  typename Sim::State state;
  std::vector<double> dts;
  std::vector<FrameSummary> sums;
  double score = 0.0;
};

template <class Sim>
std::vector<double> beam_search(const Sim& sim, const typename Sim::State& start, int start_frame,
                                int n, const std::vector<double>& grid,
                                const RetimeCostConfig& cfg) {
  using Cand = BeamCandidate<Sim>;
  std::vector<Cand> beam;
  beam.push_back(Cand{start, {}, {}, 0.0});
  const auto lex_less = [](const std::vector<double>& a, const std::vector<double>& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  };
  for (int j = 0; j < n; ++j) {
    std::vector<Cand> next;
    next.reserve(beam.size() * grid.size());
    for (const auto& c : beam) {
      for (double g : grid) {
        Cand nc;
        nc.dts = c.dts;
        nc.dts.push_back(g);
        nc.sums = c.sums;
        nc.sums.emplace_back();
        nc.state = sim.advance(c.state, start_frame + j, g, &nc.sums.back());
        nc.score = retime_cost(nc.dts, nc.sums, cfg);
        next.push_back(std::move(nc));
      }
    }
    std::sort(next.begin(), next.end(), [&](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score < b.score;
      return lex_less(a.dts, b.dts);
    });
    if (static_cast<int>(next.size()) > cfg.beam_width) {
      next.resize(static_cast<size_t>(cfg.beam_width));
    }
    beam = std::move(next);
  }
  return beam.front().dts;
}

}  // namespace detail

// Minimizes retime_cost over duration sequences from the grid for the next
// n = min(horizon, frames remaining) frames. Below the exhaustive cap the
// search enumerates every sequence and returns the exact grid optimum;
// above it a beam search of the configured width is used.
template <class Sim>
std::vector<double> optimize_horizon(const Sim& sim, const typename Sim::State& start,
                                     int start_frame, const RetimeCostConfig& cfg,
                                     const ChunkingConfig& chunk) {
  cfg.validate();
  chunk.validate();
  const int remaining = sim.frame_intervals() - start_frame;
  const int n = std::min(chunk.horizon, remaining);
  if (n <= 0) return {};
  const std::vector<double> grid = detail::sorted_grid(cfg);
  if (detail::sequences_fit_cap(grid.size(), n, cfg.exhaustive_cap)) {
    std::vector<double> best;
    double best_cost = std::numeric_limits<double>::infinity();
    detail::exhaustive_search(sim, start, start_frame, n, grid, cfg, best, best_cost);
    return best;
  }
  return detail::beam_search(sim, start, start_frame, n, grid, cfg);
}

// Receding-horizon planning: at every frame, optimize a horizon, push the
// prediction into the chunk buffer, commit the blended duration for the
// current frame, and advance the committed state with it. A buffer of one
// disables chunking (each step commits its newest prediction directly).
template <class Sim>
RetimingPlan retime_trajectory(const Sim& sim, const RetimeCostConfig& cfg,
                               const ChunkingConfig& chunk) {
  cfg.validate();
  chunk.validate();
  const int intervals = sim.frame_intervals();
  if (intervals < 1) throw ValidationError("retime_trajectory: trajectory too short");

  typename Sim::State state = sim.initial_state();
  std::deque<std::vector<double>> buffer;
  std::vector<double> dts;
  dts.reserve(static_cast<size_t>(intervals));
  for (int i = 0; i < intervals; ++i) {
    std::vector<double> pred = optimize_horizon(sim, state, i, cfg, chunk);
    buffer.push_back(std::move(pred));
    if (static_cast<int>(buffer.size()) > chunk.buffer) buffer.pop_front();

    // buffer[p] was made at frame i - (len-1-p); its element (len-1-p) is
    // its prediction for the current frame.
    std::vector<double> values;
    values.reserve(buffer.size());
    for (size_t p = 0; p < buffer.size(); ++p) {
      const size_t age = buffer.size() - 1 - p;
      if (age < buffer[p].size()) values.push_back(buffer[p][age]);
    }
    const double committed = blend_chunks(values, chunk.k, cfg.dt_min, cfg.dt_max);
    dts.push_back(committed);
    state = sim.advance(state, i, committed, nullptr);
  }
  return make_plan(dts);
}

// The no-ensembling ablation: re-plan every horizon and commit the whole
// chunk open-loop, so a fresh duration sequence cuts in abruptly at each
// chunk boundary. Blended plans are measured against this executor's
// total variation.
template <class Sim>
RetimingPlan retime_trajectory_blockwise(const Sim& sim, const RetimeCostConfig& cfg,
                                         const ChunkingConfig& chunk) {
  cfg.validate();
  chunk.validate();
  const int intervals = sim.frame_intervals();
  if (intervals < 1) throw ValidationError("retime_trajectory_blockwise: trajectory too short");
  typename Sim::State state = sim.initial_state();
  std::vector<double> dts;
  dts.reserve(static_cast<size_t>(intervals));
  int i = 0;
  while (i < intervals) {
    const std::vector<double> pred = optimize_horizon(sim, state, i, cfg, chunk);
    for (double dt : pred) {
      dts.push_back(dt);
      state = sim.advance(state, i, dt, nullptr);
      if (++i >= intervals) break;
    }
  }
  return make_plan(dts);
}

// A time-stamped reference resampled onto the control grid.
struct ExecutedReference {
  std::vector<MotionClip> clips;  // one per control tick, starting at t = 0
  double dt_ctrl = 0.005;
  double total_time = 0.0;
  std::string trajectory;

  double time_at(size_t tick) const { return static_cast<double>(tick) * dt_ctrl; }
  int tick_count() const { return static_cast<int>(clips.size()); }
};

// Linear resampling of the reference onto control ticks: each tick time is
// located in its knot interval, the bracketing frames are linearly
// interpolated, and the velocity field is rescaled by h / dt_i.
inline ExecutedReference resample(const MotionTrajectory& traj, const RetimingPlan& plan,
                                  double dt_ctrl) {
  if (!(dt_ctrl > 0.0)) throw RangeError("resample: dt_ctrl must be positive");
  if (static_cast<int>(plan.dts.size()) != traj.frame_count() - 1) {
    throw DimensionError("resample: plan does not match trajectory length");
  }
  constexpr double kSnap = 5e-10;  // s, absorbs accumulated knot rounding
  ExecutedReference out;
  out.dt_ctrl = dt_ctrl;
  out.total_time = plan.total_time;
  out.trajectory = traj.name;
  const int last_interval = static_cast<int>(plan.dts.size()) - 1;
  const int ticks = static_cast<int>(std::floor(plan.total_time / dt_ctrl + kSnap)) + 1;
  out.clips.reserve(static_cast<size_t>(ticks));
  for (int i = 0; i < ticks; ++i) {
    const double tau = static_cast<double>(i) * dt_ctrl;
    auto it = std::upper_bound(plan.knots.begin(), plan.knots.end(), tau);
    int interval = std::clamp(static_cast<int>(it - plan.knots.begin()) - 1, 0, last_interval);
    double u = (tau - plan.knots[static_cast<size_t>(interval)]) / plan.dts[static_cast<size_t>(interval)];
    if (std::abs(tau - plan.knots[static_cast<size_t>(interval)]) < kSnap) u = 0.0;
    if (std::abs(tau - plan.knots[static_cast<size_t>(interval) + 1]) < kSnap) u = 1.0;
    u = std::clamp(u, 0.0, 1.0);
    MotionClip clip = lerp_clip(traj.frames[static_cast<size_t>(interval)],
                                traj.frames[static_cast<size_t>(interval) + 1], u);
    clip.dq *= traj.frame_period / plan.dts[static_cast<size_t>(interval)];
    out.clips.push_back(std::move(clip));
  }
  return out;
}

}  // namespace retime
