#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "retime/bundled.hpp"
#include "retime/io.hpp"
#include "retime/suite.hpp"
#include "test_helpers.hpp"

namespace retime {
namespace {

namespace fs = std::filesystem;

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("retime_io_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(IoTest, TrajectoryJsonRoundTrip) {
  const MotionTrajectory traj = bundled_motion("fast_swing", 30);
  write_text_file(path("t.json"), trajectory_to_json(traj).dump());
  const MotionTrajectory back = load_trajectory(path("t.json"));
  ASSERT_EQ(back.frame_count(), traj.frame_count());
  EXPECT_EQ(back.name, traj.name);
  EXPECT_DOUBLE_EQ(back.frame_period, traj.frame_period);
  for (int f = 0; f < traj.frame_count(); ++f) {
    EXPECT_TRUE(clip_to_vector(back.frames[static_cast<size_t>(f)]) ==
                clip_to_vector(traj.frames[static_cast<size_t>(f)]));
  }
}

TEST_F(IoTest, WellFormedThreeFrameFile) {
  ojson j;
  j["name"] = "tiny";
  j["frame_period_s"] = 0.01;
  j["n_joints"] = 15;
  ojson frames = ojson::array();
  for (int f = 0; f < 3; ++f) {
    ojson fr;
    fr["r"] = {0.0, 0.0, 0.05};
    fr["theta6"] = {1, 0, 0, 0, 1, 0};
    fr["q"] = std::vector<double>(15, 0.1 * f);
    fr["dq"] = std::vector<double>(15, 0.0);
    frames.push_back(fr);
  }
  j["frames"] = frames;
  write_text_file(path("tiny.json"), j.dump());
  const MotionTrajectory traj = load_trajectory(path("tiny.json"));
  EXPECT_EQ(traj.frame_count(), 3);
  EXPECT_EQ(traj.njoints(), 15);
  EXPECT_DOUBLE_EQ(traj.frame_period, 0.01);
}

TEST_F(IoTest, NanVelocityIsRejected) {
  ojson j = trajectory_to_json(bundled_motion("quiescent", 3));
  j["frames"][1]["dq"][0] = "nan";  // json can't carry NaN literally; inject via string
  write_text_file(path("bad.json"), j.dump());
  EXPECT_THROW(load_trajectory(path("bad.json")), ValidationError);

  // and through the csv path, where nan parses fine but validation trips
  MotionTrajectory t = bundled_motion("quiescent", 3);
  t.frames[1].dq[0] = std::nan("");
  write_text_file(path("bad.csv"), trajectory_to_csv(t));
  EXPECT_THROW(load_trajectory(path("bad.csv")), NonFiniteError);
}

TEST_F(IoTest, MixedJointCountsAreRejected) {
  ojson j = trajectory_to_json(bundled_motion("quiescent", 3));
  j["frames"][2]["q"] = std::vector<double>(14, 0.0);
  write_text_file(path("mixed.json"), j.dump());
  EXPECT_THROW(load_trajectory(path("mixed.json")), DimensionError);
}

TEST_F(IoTest, TrajectoryCsvRoundTripAndUniformityCheck) {
  const MotionTrajectory traj = bundled_motion("medium_swing", 12);
  write_text_file(path("t.csv"), trajectory_to_csv(traj));
  const MotionTrajectory back = load_trajectory(path("t.csv"));
  ASSERT_EQ(back.frame_count(), 12);
  EXPECT_NEAR(back.frame_period, 0.01, 1e-12);
  for (int f = 0; f < 12; ++f) {
    EXPECT_LT((clip_to_vector(back.frames[static_cast<size_t>(f)]) -
               clip_to_vector(traj.frames[static_cast<size_t>(f)]))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-6);
  }

  std::string csv = trajectory_to_csv(traj);
  csv.replace(csv.find("\n0.1,"), 5, "\n0.17,");  // break t spacing
  write_text_file(path("warped.csv"), csv);
  EXPECT_THROW(load_trajectory(path("warped.csv")), ParseError);
}

TEST_F(IoTest, MissingFileAndGarbage) {
  EXPECT_THROW(load_trajectory(path("absent.json")), ParseError);
  write_text_file(path("garbage.json"), "{not json");
  EXPECT_THROW(load_trajectory(path("garbage.json")), ParseError);
}

TEST_F(IoTest, ModelJsonRoundTrip) {
  const RobotModel m = bundled_model();
  write_text_file(path("m.json"), model_to_json(m).dump(2));
  const RobotModel back = load_model(path("m.json"));
  EXPECT_EQ(back.njoints(), m.njoints());
  EXPECT_NEAR(back.total_mass(), 60.0, 1e-9);
  EXPECT_DOUBLE_EQ(back.ankle.stiffness, m.ankle.stiffness);
  EXPECT_EQ(back.foot_contacts.size(), m.foot_contacts.size());
  for (int i = 0; i < m.njoints(); ++i) {
    EXPECT_EQ(back.joints[static_cast<size_t>(i)].parent, m.joints[static_cast<size_t>(i)].parent);
    EXPECT_TRUE(back.joints[static_cast<size_t>(i)].axis == m.joints[static_cast<size_t>(i)].axis);
    EXPECT_DOUBLE_EQ(back.links[static_cast<size_t>(i)].joint_inertia,
                     m.links[static_cast<size_t>(i)].joint_inertia);
  }

  ojson bad = model_to_json(m);
  bad["links"][0]["mass"] = -1.0;
  write_text_file(path("bad_model.json"), bad.dump());
  EXPECT_THROW(load_model(path("bad_model.json")), ValidationError);
}

TEST_F(IoTest, PlanRoundTripAndConfigHash) {
  const RetimingPlan plan = uniform_plan(50, 0.03);
  const RetimeCostConfig cfg;
  const ChunkingConfig chunk;
  const std::string hash = retime_config_hash(cfg, chunk);
  EXPECT_EQ(hash.size(), 16u);
  EXPECT_EQ(hash, retime_config_hash(cfg, chunk));
  RetimeCostConfig other = cfg;
  other.sigma = 0.6;
  EXPECT_NE(hash, retime_config_hash(other, chunk));

  write_text_file(path("p.json"), plan_to_json(plan, "fast_swing", hash).dump());
  std::string traj_name;
  const RetimingPlan back = load_plan(path("p.json"), &traj_name);
  EXPECT_EQ(traj_name, "fast_swing");
  ASSERT_EQ(back.dts.size(), plan.dts.size());
  EXPECT_DOUBLE_EQ(back.total_time, plan.total_time);
}

TEST_F(IoTest, TraceCsvRoundTrip) {
  const Simulator sim(bundled_model());
  const MotionTrajectory traj = bundled_motion("fast_swing", 30);
  const ExecutedReference ref = resample(traj, uniform_plan(30, 0.02), 0.005);
  const RolloutTrace trace = rollout(sim, ref);
  const std::string csv = trace_to_csv(trace);
  const RolloutTrace back = trace_from_csv(csv);
  ASSERT_EQ(back.tick_count(), trace.tick_count());
  EXPECT_EQ(back.success, trace.success);
  EXPECT_NEAR(back.dt_ctrl, trace.dt_ctrl, 1e-12);
  for (int j = 0; j < trace.tick_count(); ++j) {
    const auto k = static_cast<size_t>(j);
    EXPECT_LT((back.q[k] - trace.q[k]).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_NEAR(back.d[k], trace.d[k], 1e-7);
    EXPECT_EQ(back.classification[k], trace.classification[k]);
  }
  // 9 significant digits throughout
  EXPECT_EQ(csv, trace_to_csv(trace));
}

TEST_F(IoTest, RetimeConfigRoundTrip) {
  RetimeCostConfig cfg;
  cfg.sigma = 0.4;
  cfg.grid = {0.01, 0.05};
  cfg.weights.small_dt = 4.0;
  ChunkingConfig chunk;
  chunk.k = 0.8;
  chunk.horizon = 6;
  chunk.buffer = 5;
  write_text_file(path("cfg.json"), retime_config_to_json(cfg, chunk).dump());
  RetimeCostConfig cfg2;
  ChunkingConfig chunk2;
  retime_config_from_json(detail::parse_json(read_text_file(path("cfg.json")), "cfg"), &cfg2,
                          &chunk2);
  EXPECT_DOUBLE_EQ(cfg2.sigma, 0.4);
  EXPECT_EQ(cfg2.grid, cfg.grid);
  EXPECT_DOUBLE_EQ(cfg2.weights.small_dt, 4.0);
  EXPECT_DOUBLE_EQ(chunk2.k, 0.8);
  EXPECT_EQ(chunk2.horizon, 6);
  EXPECT_EQ(chunk2.buffer, 5);
}

TEST_F(IoTest, SuiteConfigParsing) {
  ojson j;
  j["motions"] = {"quiescent", "spike"};
  j["frames"] = 60;
  j["seeds"] = {7, 8, 9};
  j["retime"] = {{"grid", {0.01, 0.02}}, {"chunking", {{"k", 0.2}, {"horizon", 4}, {"buffer", 4}}}};
  j["sim"] = {{"dt_ctrl", 0.004}};
  j["disturbance"] = {{"mass_scale", {0.9, 1.1}}};
  write_text_file(path("suite.json"), j.dump());
  const SuiteConfig cfg = load_suite_config(path("suite.json"));
  EXPECT_EQ(cfg.motions.size(), 2u);
  EXPECT_EQ(cfg.frames, 60);
  EXPECT_EQ(cfg.seeds.size(), 3u);
  EXPECT_EQ(cfg.cost.grid.size(), 2u);
  EXPECT_DOUBLE_EQ(cfg.chunking.k, 0.2);
  EXPECT_DOUBLE_EQ(cfg.sim.dt_ctrl, 0.004);
  EXPECT_DOUBLE_EQ(cfg.disturbance.randomization.mass_scale_lo, 0.9);
}

TEST_F(IoTest, MetricsJsonFields) {
  MetricsReport m;
  m.trajectory = "spike";
  m.time_cost = 2.5;
  m.success = false;
  m.e_g = 0.12;
  const ojson j = metrics_to_json(m);
  EXPECT_EQ(j.at("trajectory"), "spike");
  EXPECT_DOUBLE_EQ(j.at("time_cost_s").get<double>(), 2.5);
  EXPECT_FALSE(j.at("success").get<bool>());
}

TEST_F(IoTest, UnwritablePathFails) {
  EXPECT_THROW(write_text_file("/proc/retime_cannot_write_here/x.txt", "x"),
               std::runtime_error);
}

}  // namespace
}  // namespace retime
