// Command-line front end: retiming, simulation, metrics, and the
// comparison / sweep / Pareto protocols over the bundled assets.
//
// Exit codes: 0 success, 1 validation error (bad arguments or files),
// 2 runtime error.

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "retime/bundled.hpp"
#include "retime/io.hpp"
#include "retime/metrics.hpp"
#include "retime/report.hpp"
#include "retime/retimer.hpp"
#include "retime/simharness.hpp"
#include "retime/suite.hpp"

namespace {

namespace fs = std::filesystem;
using namespace retime;

// Trajectory arguments accept a file path or bundled:<name>.
MotionTrajectory resolve_trajectory(const std::string& arg, int frames, double frame_period) {
  constexpr const char* kPrefix = "bundled:";
  if (arg.rfind(kPrefix, 0) == 0) {
    return bundled_motion(arg.substr(std::string(kPrefix).size()), frames, frame_period);
  }
  return load_trajectory(arg);
}

RobotModel resolve_model(const std::string& path) {
  return path.empty() ? bundled_model() : load_model(path);
}

RetimingPlan resolve_plan(const std::string& plan_path, double fixed_dt,
                          const MotionTrajectory& traj) {
  if (!plan_path.empty()) {
    const RetimingPlan plan = load_plan(plan_path);
    if (static_cast<int>(plan.dts.size()) != traj.frame_count() - 1) {
      throw ValidationError("plan length does not match trajectory");
    }
    return plan;
  }
  return uniform_plan(traj.frame_count(), fixed_dt > 0.0 ? fixed_dt : traj.frame_period);
}

std::vector<ParetoPoint> pareto_points_from_cells_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("cells csv: empty file");
  const auto header = retime::detail::split_csv_line(line);
  const auto col = [&](const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ParseError("cells csv: missing column '" + name + "'");
  };
  const size_t c_time = col("time_cost_s"), c_eg = col("e_g"), c_eepe = col("e_eepe");
  const size_t c_motion = col("motion"), c_method = col("method"), c_seed = col("seed");
  std::vector<ParetoPoint> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = retime::detail::split_csv_line(line);
    if (cells.size() != header.size()) throw ParseError("cells csv: ragged row");
    ParetoPoint p;
    p.time_cost = std::stod(cells[c_time]);
    p.e_g = std::stod(cells[c_eg]);
    p.e_eepe = std::stod(cells[c_eepe]);
    p.tag = cells[c_motion] + "/" + cells[c_method] + "/" + cells[c_seed];
    points.push_back(std::move(p));
  }
  return points;
}

int run(int argc, char** argv) {
  CLI::App app{"balance-aware trajectory retiming toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  std::string model_path;
  app.add_option("--model", model_path, "robot model json (default: bundled 60 kg model)");

  int frames = 240;
  double frame_period = 0.01;
  app.add_option("--frames", frames, "frame count for bundled:<name> trajectories");
  app.add_option("--frame-period", frame_period, "native frame period for bundled trajectories");

  // retime
  auto* c_retime = app.add_subcommand("retime", "optimize per-frame durations for a trajectory");
  std::string rt_traj, rt_config, rt_out = "plan.json", rt_profile_svg;
  c_retime->add_option("traj", rt_traj, "trajectory file or bundled:<name>")->required();
  c_retime->add_option("--config", rt_config, "retiming config json");
  c_retime->add_option("--out", rt_out, "output plan json");
  c_retime->add_option("--profile-svg", rt_profile_svg, "also plot the committed durations");

  // simulate
  auto* c_sim = app.add_subcommand("simulate", "roll out a plan on the reduced model");
  std::string sm_traj, sm_plan, sm_trace = "trace.csv";
  double sm_fixed_dt = 0.0, sm_payload = 0.0, sm_push_interval = 5.0;
  std::vector<double> sm_push_torque;
  std::uint64_t sm_seed = 0;
  bool sm_randomize = false;
  double sm_dt_ctrl = 0.005;
  c_sim->add_option("traj", sm_traj)->required();
  c_sim->add_option("--plan", sm_plan, "plan json from the retime subcommand");
  c_sim->add_option("--fixed-dt", sm_fixed_dt, "uniform frame duration instead of a plan");
  c_sim->add_option("--seed", sm_seed, "disturbance seed");
  c_sim->add_option("--trace", sm_trace, "output trace csv");
  c_sim->add_option("--payload", sm_payload, "payload mass at each end effector, kg");
  c_sim->add_flag("--randomize", sm_randomize, "apply the default domain randomization ranges");
  c_sim->add_option("--push-interval", sm_push_interval, "seconds between push events");
  c_sim->add_option("--push-torque", sm_push_torque, "push torque range lo hi, N m")
      ->expected(2);
  c_sim->add_option("--dt-ctrl", sm_dt_ctrl, "control period, s");

  // metrics
  auto* c_metrics = app.add_subcommand("metrics", "evaluation metrics for a recorded trace");
  std::string mt_trace, mt_ref, mt_plan, mt_out = "metrics.json";
  double mt_fixed_dt = 0.0;
  c_metrics->add_option("--trace", mt_trace)->required();
  c_metrics->add_option("--ref", mt_ref, "reference trajectory")->required();
  c_metrics->add_option("--plan", mt_plan, "plan used for the rollout");
  c_metrics->add_option("--fixed-dt", mt_fixed_dt, "uniform duration used for the rollout");
  c_metrics->add_option("--out", mt_out);

  // compare
  auto* c_compare = app.add_subcommand("compare", "fixed-dt baselines vs optimized retiming");
  std::string cp_suite, cp_out = "comparison";
  c_compare->add_option("--suite", cp_suite, "suite config json (default: bundled suite)");
  c_compare->add_option("--out", cp_out, "output directory")->required();

  // sweep-k
  auto* c_sweepk = app.add_subcommand("sweep-k", "chunking decay coefficient sweep");
  std::string sk_suite, sk_out = "k_sweep";
  c_sweepk->add_option("--suite", sk_suite);
  c_sweepk->add_option("--out", sk_out, "output directory");

  // sweep-payload
  auto* c_sweepp = app.add_subcommand("sweep-payload", "payload adaptability sweep");
  std::string sp_suite, sp_out = "payload_sweep", sp_masses, sp_motion;
  c_sweepp->add_option("--suite", sp_suite);
  c_sweepp->add_option("--masses", sp_masses, "comma-separated payload masses, kg");
  c_sweepp->add_option("--motion", sp_motion, "bundled motion name");
  c_sweepp->add_option("--out", sp_out, "output directory");

  // pareto
  auto* c_pareto = app.add_subcommand("pareto", "extract the non-dominated front from runs");
  std::string pr_runs, pr_out = "front.svg";
  c_pareto->add_option("--runs", pr_runs, "directory containing cells.csv")->required();
  c_pareto->add_option("--out", pr_out, "output svg");

  // zmp-trace
  auto* c_zmp = app.add_subcommand("zmp-trace", "open-loop ZMP/margin trace of a reference");
  std::string zt_traj, zt_out = "zmp_trace.csv";
  double zt_fixed_dt = 0.0, zt_dt_ctrl = 0.005;
  c_zmp->add_option("traj", zt_traj)->required();
  c_zmp->add_option("--fixed-dt", zt_fixed_dt, "uniform frame duration");
  c_zmp->add_option("--dt-ctrl", zt_dt_ctrl);
  c_zmp->add_option("--out", zt_out);

  // bundle
  auto* c_bundle = app.add_subcommand("bundle", "write the bundled model and motions to disk");
  std::string bd_out = "bundle";
  c_bundle->add_option("--out", bd_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (c_retime->parsed()) {
    const MotionTrajectory traj = resolve_trajectory(rt_traj, frames, frame_period);
    const RobotModel model = resolve_model(model_path);
    RetimeCostConfig cost;
    ChunkingConfig chunk;
    if (!rt_config.empty()) {
      retime_config_from_json(detail::parse_json(read_text_file(rt_config), rt_config), &cost,
                              &chunk);
    }
    const Simulator sim(model, SimOptions{});
    const HorizonSim hsim(sim, traj);
    const RetimingPlan plan = retime_trajectory(hsim, cost, chunk);
    write_text_file(rt_out, plan_to_json(plan, traj.name, retime_config_hash(cost, chunk)).dump(2) + "\n");
    if (!rt_profile_svg.empty()) {
      write_text_file(rt_profile_svg, svg_dt_profile(plan, cost.dt_min, cost.dt_max));
    }
    std::cout << "plan: " << plan.dts.size() << " durations, total " << fmt_g(plan.total_time, 6)
              << " s -> " << rt_out << "\n";
    return 0;
  }

  if (c_sim->parsed()) {
    const MotionTrajectory traj = resolve_trajectory(sm_traj, frames, frame_period);
    const RobotModel model = resolve_model(model_path);
    const RetimingPlan plan = resolve_plan(sm_plan, sm_fixed_dt, traj);
    DisturbanceConfig dist;
    dist.seed = sm_seed;
    dist.payload_mass = sm_payload;
    dist.push_interval = sm_push_interval;
    if (!sm_push_torque.empty()) {
      dist.push_torque_lo = sm_push_torque[0];
      dist.push_torque_hi = sm_push_torque[1];
    }
    if (sm_randomize) dist.randomization = SuiteConfig{}.disturbance.randomization;
    const ModelPerturbation pert = sample_randomization(dist, dist.seed);
    SimOptions opts;
    opts.dt_ctrl = sm_dt_ctrl;
    opts.motor_delay_s = pert.motor_delay_s;
    const Simulator sim(apply_payload(apply_perturbation(model, pert), sm_payload), opts);
    const ExecutedReference ref = resample(traj, plan, opts.dt_ctrl);
    const RolloutTrace trace = rollout(sim, ref, dist);
    write_text_file(sm_trace, trace_to_csv(trace));
    std::cout << (trace.success ? "success" : "fall") << ", " << trace.tick_count()
              << " ticks -> " << sm_trace << "\n";
    if (trace.fall_time) std::cout << "fall_time: " << fmt_g(*trace.fall_time, 6) << " s\n";
    return 0;
  }

  if (c_metrics->parsed()) {
    const MotionTrajectory traj = resolve_trajectory(mt_ref, frames, frame_period);
    const RobotModel model = resolve_model(model_path);
    const RolloutTrace trace = trace_from_csv(read_text_file(mt_trace));
    const RetimingPlan plan = resolve_plan(mt_plan, mt_fixed_dt, traj);
    const ExecutedReference ref = resample(traj, plan, trace.dt_ctrl);
    MetricsReport rep = compute_metrics(trace, ref, model);
    rep.plan_hash = plan_hash(plan);
    write_text_file(mt_out, metrics_to_json(rep).dump(2) + "\n");
    std::cout << "metrics -> " << mt_out << "\n";
    return 0;
  }

  if (c_compare->parsed()) {
    const RobotModel model = resolve_model(model_path);
    const SuiteConfig cfg = cp_suite.empty() ? SuiteConfig{} : load_suite_config(cp_suite);
    const ComparisonResult res = run_comparison(model, cfg);
    write_text_file((fs::path(cp_out) / "comparison.csv").string(), comparison_to_csv(res));
    write_text_file((fs::path(cp_out) / "comparison.json").string(),
                    comparison_to_json(res).dump(2) + "\n");
    write_text_file((fs::path(cp_out) / "cells.csv").string(), cells_to_csv(res.cells));
    std::cout << comparison_to_csv(res);
    return 0;
  }

  if (c_sweepk->parsed()) {
    const RobotModel model = resolve_model(model_path);
    const SuiteConfig cfg = sk_suite.empty() ? SuiteConfig{} : load_suite_config(sk_suite);
    const std::vector<KSweepRow> rows = run_k_sweep(model, cfg);
    write_text_file((fs::path(sk_out) / "k_sweep.csv").string(), k_sweep_to_csv(rows));
    std::cout << k_sweep_to_csv(rows);
    return 0;
  }

  if (c_sweepp->parsed()) {
    const RobotModel model = resolve_model(model_path);
    SuiteConfig cfg = sp_suite.empty() ? SuiteConfig{} : load_suite_config(sp_suite);
    if (!sp_masses.empty()) {
      cfg.payloads.clear();
      std::istringstream ss(sp_masses);
      std::string tok;
      while (std::getline(ss, tok, ',')) cfg.payloads.push_back(std::stod(tok));
    }
    if (!sp_motion.empty()) cfg.payload_motion = sp_motion;
    const std::vector<PayloadRow> rows = run_payload_sweep(model, cfg);
    write_text_file((fs::path(sp_out) / "payload_sweep.csv").string(), payload_sweep_to_csv(rows));
    std::cout << payload_sweep_to_csv(rows);
    return 0;
  }

  if (c_pareto->parsed()) {
    const std::string cells_path = (fs::path(pr_runs) / "cells.csv").string();
    const std::vector<ParetoPoint> points = pareto_points_from_cells_csv(read_text_file(cells_path));
    const ParetoSet set = pareto_front(points);
    write_text_file(pr_out, svg_pareto(set));
    ojson fj;
    ojson front = ojson::array();
    for (const auto& p : set.front) {
      front.push_back({{"time_cost_s", p.time_cost}, {"e_g", p.e_g}, {"e_eepe", p.e_eepe},
                       {"tag", p.tag}});
    }
    fj["front"] = std::move(front);
    fj["evaluated"] = points.size();
    // regression fits of the trade-off surfaces
    std::vector<double> ts, egs, eepes;
    for (const auto& p : points) {
      ts.push_back(p.time_cost);
      egs.push_back(p.e_g);
      eepes.push_back(p.e_eepe);
    }
    const auto fit_json = [](const RegressionFit& f) {
      ojson j;
      j["degree"] = f.degree;
      j["coefficients"] = std::vector<double>(f.coefficients.data(),
                                              f.coefficients.data() + f.coefficients.size());
      j["residual_rms"] = f.residual_rms;
      return j;
    };
    std::vector<double> distinct = ts;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() >= 3) {
      RegressionFit eg_fit = polyfit(ts, egs, 2);
      eg_fit.input_label = "time_cost_s";
      eg_fit.target_label = "e_g";
      fj["e_g_fit"] = fit_json(eg_fit);
      RegressionFit pe_fit = polyfit(ts, eepes, 2);
      fj["e_eepe_fit"] = fit_json(pe_fit);
      if (points.size() >= 6) fj["e_eepe_surface"] = fit_json(polyfit2(ts, egs, eepes));
    }
    const std::string front_json = (fs::path(pr_out).parent_path() /
                                    (fs::path(pr_out).stem().string() + ".json")).string();
    write_text_file(front_json, fj.dump(2) + "\n");
    std::cout << "front: " << set.front.size() << "/" << points.size() << " points -> " << pr_out
              << "\n";
    return 0;
  }

  if (c_zmp->parsed()) {
    const MotionTrajectory traj = resolve_trajectory(zt_traj, frames, frame_period);
    const RobotModel model = resolve_model(model_path);
    const RetimingPlan plan =
        uniform_plan(traj.frame_count(), zt_fixed_dt > 0.0 ? zt_fixed_dt : traj.frame_period);
    const ExecutedReference ref = resample(traj, plan, zt_dt_ctrl);
    const StabilitySeries series = open_loop_stability(model, ref);
    write_text_file(zt_out, stability_trace_csv(series));
    const std::string svg_path = (fs::path(zt_out).parent_path() /
                                  (fs::path(zt_out).stem().string() + ".svg")).string();
    write_text_file(svg_path, svg_margin_trace(series.time, series.d));
    std::cout << "zmp trace: " << series.time.size() << " ticks -> " << zt_out << "\n";
    return 0;
  }

  if (c_bundle->parsed()) {
    write_text_file((fs::path(bd_out) / "model.json").string(),
                    model_to_json(bundled_model()).dump(2) + "\n");
    write_text_file((fs::path(bd_out) / "retime_config.json").string(),
                    retime_config_to_json(RetimeCostConfig{}, ChunkingConfig{}).dump(2) + "\n");
    for (const auto& name : bundled_motion_names()) {
      const MotionTrajectory traj = bundled_motion(name, frames, frame_period);
      write_text_file((fs::path(bd_out) / (name + ".json")).string(),
                      trajectory_to_json(traj).dump(2) + "\n");
    }
    std::cout << "bundle -> " << bd_out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const retime::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}
