#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "retime/bundled.hpp"
#include "retime/common.hpp"
#include "retime/io.hpp"
#include "retime/metrics.hpp"
#include "retime/retimer.hpp"
#include "retime/simharness.hpp"

namespace retime {

struct SuiteConfig {
  std::vector<std::string> motions = bundled_motion_names();
  int frames = 240;
  double frame_period = 0.01;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<double> fixed_dts = {0.01, 0.03, 0.05};
  std::vector<double> k_values = {0.0, 0.2, 0.5, 0.8, 1.5, 3.0};
  std::vector<double> payloads = {0.5, 1.0, 3.0};
  std::string payload_motion = "fast_swing";
  double payload_fixed_dt = 0.03;
  RetimeCostConfig cost;
  ChunkingConfig chunking;
  SimOptions sim;
  DisturbanceConfig disturbance;  // per-cell seed is derived from (motion, seed)
  int threads = 0;                // 0: hardware concurrency

  SuiteConfig() {
    // mild evaluation-time randomization; pushes stay off by default
    disturbance.randomization.mass_scale_lo = 0.95;
    disturbance.randomization.mass_scale_hi = 1.05;
    disturbance.randomization.gain_scale_lo = 0.9;
    disturbance.randomization.gain_scale_hi = 1.1;
    disturbance.randomization.motor_delay_ms_lo = 0.0;
    disturbance.randomization.motor_delay_ms_hi = 5.0;
    disturbance.randomization.com_offset_lo = -0.02;
    disturbance.randomization.com_offset_hi = 0.02;
  }
};

inline void sim_options_from_json(const ojson& j, SimOptions* opts) {
  opts->dt_ctrl = j.value("dt_ctrl", opts->dt_ctrl);
  opts->gravity = j.value("gravity", opts->gravity);
  opts->gravity_term = j.value("gravity_term", opts->gravity_term);
  opts->literal_pd = j.value("literal_pd", opts->literal_pd);
  opts->tilt_max = j.value("tilt_max", opts->tilt_max);
  opts->fall_persist = j.value("fall_persist", opts->fall_persist);
  opts->thresholds.inside = j.value("threshold_inside", opts->thresholds.inside);
  opts->thresholds.edge = j.value("threshold_edge", opts->thresholds.edge);
  opts->validate();
}

inline void disturbance_from_json(const ojson& j, DisturbanceConfig* d) {
  d->push_interval = j.value("push_interval", d->push_interval);
  if (j.contains("push_torque")) {
    d->push_torque_lo = j.at("push_torque").at(0).get<double>();
    d->push_torque_hi = j.at("push_torque").at(1).get<double>();
  }
  d->payload_mass = j.value("payload_mass", d->payload_mass);
  auto range = [&](const char* key, double* lo, double* hi) {
    if (j.contains(key)) {
      *lo = j.at(key).at(0).get<double>();
      *hi = j.at(key).at(1).get<double>();
    }
  };
  range("mass_scale", &d->randomization.mass_scale_lo, &d->randomization.mass_scale_hi);
  range("gain_scale", &d->randomization.gain_scale_lo, &d->randomization.gain_scale_hi);
  range("motor_delay_ms", &d->randomization.motor_delay_ms_lo, &d->randomization.motor_delay_ms_hi);
  range("com_offset", &d->randomization.com_offset_lo, &d->randomization.com_offset_hi);
  d->seed = j.value("seed", d->seed);
  d->validate();
}

inline SuiteConfig suite_config_from_json(const ojson& j) {
  SuiteConfig cfg;
  try {
    if (j.contains("motions")) cfg.motions = j.at("motions").get<std::vector<std::string>>();
    cfg.frames = j.value("frames", cfg.frames);
    cfg.frame_period = j.value("frame_period_s", cfg.frame_period);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("fixed_dts")) cfg.fixed_dts = j.at("fixed_dts").get<std::vector<double>>();
    if (j.contains("k_values")) cfg.k_values = j.at("k_values").get<std::vector<double>>();
    if (j.contains("payloads")) cfg.payloads = j.at("payloads").get<std::vector<double>>();
    cfg.payload_motion = j.value("payload_motion", cfg.payload_motion);
    cfg.payload_fixed_dt = j.value("payload_fixed_dt", cfg.payload_fixed_dt);
    if (j.contains("retime")) retime_config_from_json(j.at("retime"), &cfg.cost, &cfg.chunking);
    if (j.contains("sim")) sim_options_from_json(j.at("sim"), &cfg.sim);
    if (j.contains("disturbance")) disturbance_from_json(j.at("disturbance"), &cfg.disturbance);
    cfg.threads = j.value("threads", cfg.threads);
  } catch (const ojson::exception& e) {
    throw ParseError(std::string("suite config json: ") + e.what());
  }
  if (cfg.frames < 2) throw ValidationError("suite: frames must be >= 2");
  if (cfg.seeds.empty()) throw ValidationError("suite: need at least one seed");
  return cfg;
}

inline SuiteConfig load_suite_config(const std::string& path) {
  return suite_config_from_json(detail::parse_json(read_text_file(path), path));
}

struct RunRecord {
  std::string motion;
  std::string method;
  std::uint64_t seed = 0;
  MetricsReport metrics;
};

struct MethodSummary {
  std::string method;
  double success_rate = 0.0;
  int cells = 0;
  // means over the successful cells (falls are excluded, as in the
  // evaluation protocol); time_cost averages over all cells
  MetricsReport mean;
};

struct ComparisonResult {
  std::vector<MethodSummary> rows;
  std::vector<RunRecord> cells;
  std::map<std::string, RetimingPlan> plans;  // "<motion>/<method>"
};

namespace detail {

inline std::uint64_t cell_seed(const std::string& motion, std::uint64_t seed) {
  return fnv1a(motion) ^ (seed * 0x9e3779b97f4a7c15ull + 0x632be59bd9b4e019ull);
}

struct SuiteCell {
  std::string motion;
  std::string method;
  std::uint64_t seed;
  const MotionTrajectory* traj;
  const RetimingPlan* plan;
  double payload = 0.0;
};

// Independent cells may run concurrently; results land in a pre-sized
// vector so the output order never depends on scheduling.
template <class Fn>
void run_cells(int n, int threads, Fn&& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w]() {
      for (int i = w; i < n; i += threads) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline MethodSummary summarize(const std::string& method, const std::vector<RunRecord>& cells) {
  MethodSummary s;
  s.method = method;
  MetricsReport acc;
  int successes = 0;
  double time_acc = 0.0;
  for (const auto& c : cells) {
    if (c.method != method) continue;
    ++s.cells;
    time_acc += c.metrics.time_cost;
    if (!c.metrics.success) continue;
    ++successes;
    acc.e_jpe += c.metrics.e_jpe;
    acc.e_eepe += c.metrics.e_eepe;
    acc.e_eeoe += c.metrics.e_eeoe;
    acc.e_g += c.metrics.e_g;
    acc.e_acc_upper += c.metrics.e_acc_upper;
    acc.e_acc_base += c.metrics.e_acc_base;
    acc.e_action_upper += c.metrics.e_action_upper;
    acc.peak_d = std::max(acc.peak_d, c.metrics.peak_d);
  }
  if (s.cells == 0) return s;
  s.success_rate = static_cast<double>(successes) / static_cast<double>(s.cells);
  s.mean = acc;
  s.mean.time_cost = time_acc / static_cast<double>(s.cells);
  if (successes > 0) {
    const double inv = 1.0 / static_cast<double>(successes);
    s.mean.e_jpe *= inv;
    s.mean.e_eepe *= inv;
    s.mean.e_eeoe *= inv;
    s.mean.e_g *= inv;
    s.mean.e_acc_upper *= inv;
    s.mean.e_acc_base *= inv;
    s.mean.e_action_upper *= inv;
  }
  s.mean.success = successes == s.cells;
  return s;
}

}  // namespace detail

inline std::string fixed_method_name(double dt) {
  return "fixed_dt=" + fmt_g(dt, 3);
}

// Runs one (trajectory, plan, seed, payload) cell and reduces it to metrics.
inline RunRecord run_cell(const RobotModel& model, const MotionTrajectory& traj,
                          const RetimingPlan& plan, const std::string& method,
                          std::uint64_t seed, const SuiteConfig& cfg, double payload = 0.0) {
  DisturbanceConfig dist = cfg.disturbance;
  dist.seed = detail::cell_seed(traj.name, seed);
  dist.payload_mass = payload;
  const ModelPerturbation pert = sample_randomization(dist, dist.seed);
  RobotModel run_model = apply_payload(apply_perturbation(model, pert), payload);
  SimOptions opts = cfg.sim;
  opts.motor_delay_s = pert.motor_delay_s;
  const Simulator sim(std::move(run_model), opts);
  const ExecutedReference ref = resample(traj, plan, opts.dt_ctrl);
  const RolloutTrace trace = rollout(sim, ref, dist);
  RunRecord rec;
  rec.motion = traj.name;
  rec.method = method;
  rec.seed = seed;
  rec.metrics = compute_metrics(trace, ref, sim.model());
  rec.metrics.seed = seed;
  rec.metrics.plan_hash = plan_hash(plan);
  return rec;
}

// Fixed-dt baselines vs the optimized retimer over the bundled motion set.
inline ComparisonResult run_comparison(const RobotModel& model, const SuiteConfig& cfg) {
  if (cfg.motions.empty()) throw ValidationError("suite: no motions");
  ComparisonResult result;
  std::vector<MotionTrajectory> trajs;
  trajs.reserve(cfg.motions.size());
  for (const auto& name : cfg.motions) {
    trajs.push_back(bundled_motion(name, cfg.frames, cfg.frame_period));
  }

  // Plans are made on the nominal model; randomization enters per cell.
  const Simulator nominal(model, cfg.sim);
  std::vector<RetimingPlan> optimized(trajs.size());
  detail::run_cells(static_cast<int>(trajs.size()), cfg.threads, [&](int i) {
    const HorizonSim hsim(nominal, trajs[static_cast<size_t>(i)]);
    optimized[static_cast<size_t>(i)] = retime_trajectory(hsim, cfg.cost, cfg.chunking);
  });
  for (size_t i = 0; i < trajs.size(); ++i) {
    result.plans[trajs[i].name + "/optimized"] = optimized[i];
  }

  std::vector<detail::SuiteCell> cells;
  std::vector<RetimingPlan> fixed_plans;
  fixed_plans.reserve(cfg.fixed_dts.size());
  for (double dt : cfg.fixed_dts) fixed_plans.push_back(uniform_plan(cfg.frames, dt));
  for (size_t ti = 0; ti < trajs.size(); ++ti) {
    for (std::uint64_t seed : cfg.seeds) {
      for (size_t di = 0; di < cfg.fixed_dts.size(); ++di) {
        cells.push_back({trajs[ti].name, fixed_method_name(cfg.fixed_dts[di]), seed, &trajs[ti],
                         &fixed_plans[di]});
      }
      cells.push_back({trajs[ti].name, "optimized", seed, &trajs[ti], &optimized[ti]});
    }
  }

  result.cells.resize(cells.size());
  detail::run_cells(static_cast<int>(cells.size()), cfg.threads, [&](int i) {
    const auto& c = cells[static_cast<size_t>(i)];
    result.cells[static_cast<size_t>(i)] =
        run_cell(model, *c.traj, *c.plan, c.method, c.seed, cfg);
  });

  for (double dt : cfg.fixed_dts) {
    result.rows.push_back(detail::summarize(fixed_method_name(dt), result.cells));
  }
  result.rows.push_back(detail::summarize("optimized", result.cells));
  return result;
}

struct KSweepRow {
  double k = 0.0;
  std::vector<double> weights;  // chunk weight diagnostics at the buffer size
  MethodSummary summary;
};

// One optimized comparison row per decay coefficient.
inline std::vector<KSweepRow> run_k_sweep(const RobotModel& model, const SuiteConfig& cfg) {
  std::vector<KSweepRow> rows;
  for (double k : cfg.k_values) {
    SuiteConfig kcfg = cfg;
    kcfg.chunking.k = k;
    ComparisonResult res;
    std::vector<MotionTrajectory> trajs;
    for (const auto& name : kcfg.motions) {
      trajs.push_back(bundled_motion(name, kcfg.frames, kcfg.frame_period));
    }
    const Simulator nominal(model, kcfg.sim);
    std::vector<RetimingPlan> plans(trajs.size());
    detail::run_cells(static_cast<int>(trajs.size()), kcfg.threads, [&](int i) {
      const HorizonSim hsim(nominal, trajs[static_cast<size_t>(i)]);
      plans[static_cast<size_t>(i)] = retime_trajectory(hsim, kcfg.cost, kcfg.chunking);
    });
    std::vector<detail::SuiteCell> cells;
    for (size_t ti = 0; ti < trajs.size(); ++ti) {
      for (std::uint64_t seed : kcfg.seeds) {
        cells.push_back({trajs[ti].name, "optimized", seed, &trajs[ti], &plans[ti]});
      }
    }
    res.cells.resize(cells.size());
    detail::run_cells(static_cast<int>(cells.size()), kcfg.threads, [&](int i) {
      const auto& c = cells[static_cast<size_t>(i)];
      res.cells[static_cast<size_t>(i)] = run_cell(model, *c.traj, *c.plan, c.method, c.seed, kcfg);
    });
    KSweepRow row;
    row.k = k;
    row.weights = chunk_weights(k, kcfg.chunking.buffer);
    row.summary = detail::summarize("optimized", res.cells);
    row.summary.method = "k=" + fmt_g(k, 3);
    rows.push_back(std::move(row));
  }
  return rows;
}

struct PayloadRow {
  double payload = 0.0;
  bool success = true;      // deterministic nominal run
  double peak_d = 0.0;
  double e_g = 0.0;
  MethodSummary summary;    // randomized cells, for the report
};

// Payload adaptability: the same motion replayed under the same moderate
// fixed-dt plan while the attached load grows, so the rows isolate the
// load's effect on balance. The trend row comes from a deterministic
// unrandomized rollout; the summary aggregates seeded cells.
inline std::vector<PayloadRow> run_payload_sweep(const RobotModel& model, const SuiteConfig& cfg) {
  const MotionTrajectory traj = bundled_motion(cfg.payload_motion, cfg.frames, cfg.frame_period);
  const RetimingPlan plan = uniform_plan(cfg.frames, cfg.payload_fixed_dt);

  std::vector<PayloadRow> rows;
  for (double payload : cfg.payloads) {
    PayloadRow row;
    row.payload = payload;

    const Simulator sim(apply_payload(model, payload), cfg.sim);
    const ExecutedReference ref = resample(traj, plan, cfg.sim.dt_ctrl);
    const RolloutTrace trace = rollout(sim, ref, DisturbanceConfig{});
    const MetricsReport m = compute_metrics(trace, ref, sim.model());
    row.success = m.success;
    row.peak_d = m.peak_d;
    row.e_g = m.e_g;

    std::vector<RunRecord> cells(cfg.seeds.size());
    detail::run_cells(static_cast<int>(cfg.seeds.size()), cfg.threads, [&](int i) {
      cells[static_cast<size_t>(i)] = run_cell(model, traj, plan, "payload", cfg.seeds[static_cast<size_t>(i)],
                                               cfg, payload);
    });
    row.summary = detail::summarize("payload", cells);
    row.summary.method = "payload=" + fmt_g(payload, 3);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace retime
