#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "retime/common.hpp"
#include "retime/metrics.hpp"
#include "retime/motion.hpp"
#include "retime/retimer.hpp"
#include "retime/robot_model.hpp"
#include "retime/simharness.hpp"

namespace retime {

using ojson = nlohmann::ordered_json;

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

namespace detail {

inline ojson parse_json(const std::string& text, const std::string& what) {
  ojson j = ojson::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("malformed JSON in " + what);
  return j;
}

inline Eigen::Vector3d vec3_of(const ojson& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(what + ": expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trajectory files
//
// JSON: { "name", "frame_period_s", "n_joints", "frames": [ {"r":[3],
// "theta6":[6], "q":[n], "dq":[n]} ] }
// CSV: header t,r0,r1,r2,th0..th5,q0..q{n-1},dq0..dq{n-1}; the frame period
// is taken from the t column spacing.
// ---------------------------------------------------------------------------

inline MotionTrajectory trajectory_from_json(const ojson& j) {
  MotionTrajectory traj;
  try {
    traj.name = j.at("name").get<std::string>();
    traj.frame_period = j.at("frame_period_s").get<double>();
    const int nj = j.at("n_joints").get<int>();
    for (const auto& f : j.at("frames")) {
      MotionClip c;
      c.r = detail::vec3_of(f.at("r"), "frame r");
      const auto& th = f.at("theta6");
      if (!th.is_array() || th.size() != 6) throw ParseError("frame theta6: expected 6 numbers");
      for (int i = 0; i < 6; ++i) c.theta6[i] = th[static_cast<size_t>(i)].get<double>();
      const auto& q = f.at("q");
      const auto& dq = f.at("dq");
      if (static_cast<int>(q.size()) != nj || static_cast<int>(dq.size()) != nj) {
        throw DimensionError("trajectory '" + traj.name + "': frame joint count != n_joints");
      }
      c.q.resize(nj);
      c.dq.resize(nj);
      for (int i = 0; i < nj; ++i) {
        c.q[i] = q[static_cast<size_t>(i)].get<double>();
        c.dq[i] = dq[static_cast<size_t>(i)].get<double>();
      }
      traj.frames.push_back(std::move(c));
    }
  } catch (const ojson::exception& e) {
    throw ParseError(std::string("trajectory json: ") + e.what());
  }
  traj.validate();
  return traj;
}

inline ojson trajectory_to_json(const MotionTrajectory& traj) {
  ojson j;
  j["name"] = traj.name;
  j["frame_period_s"] = traj.frame_period;
  j["n_joints"] = traj.njoints();
  ojson frames = ojson::array();
  for (const auto& f : traj.frames) {
    ojson fr;
    fr["r"] = {f.r.x(), f.r.y(), f.r.z()};
    fr["theta6"] = std::vector<double>(f.theta6.data(), f.theta6.data() + 6);
    fr["q"] = std::vector<double>(f.q.data(), f.q.data() + f.q.size());
    fr["dq"] = std::vector<double>(f.dq.data(), f.dq.data() + f.dq.size());
    frames.push_back(std::move(fr));
  }
  j["frames"] = std::move(frames);
  return j;
}

inline MotionTrajectory trajectory_from_csv(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("trajectory csv: empty file");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 10 || header[0] != "t" || (header.size() - 10) % 2 != 0) {
    throw ParseError("trajectory csv: unexpected header");
  }
  const int nj = static_cast<int>((header.size() - 10) / 2);
  MotionTrajectory traj;
  traj.name = name;
  std::vector<double> times;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DimensionError("trajectory csv: row width differs from header");
    }
    std::vector<double> vals;
    vals.reserve(cells.size());
    for (const auto& c : cells) {
      try {
        vals.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw ParseError("trajectory csv: bad number '" + c + "'");
      }
    }
    times.push_back(vals[0]);
    MotionClip clip;
    clip.r = Eigen::Vector3d(vals[1], vals[2], vals[3]);
    for (int i = 0; i < 6; ++i) clip.theta6[i] = vals[static_cast<size_t>(4 + i)];
    clip.q.resize(nj);
    clip.dq.resize(nj);
    for (int i = 0; i < nj; ++i) {
      clip.q[i] = vals[static_cast<size_t>(10 + i)];
      clip.dq[i] = vals[static_cast<size_t>(10 + nj + i)];
    }
    traj.frames.push_back(std::move(clip));
  }
  if (times.size() < 2) throw ParseError("trajectory csv: need at least 2 rows");
  traj.frame_period = times[1] - times[0];
  for (size_t i = 1; i + 1 < times.size(); ++i) {
    if (std::abs((times[i + 1] - times[i]) - traj.frame_period) > 1e-9) {
      throw ParseError("trajectory csv: non-uniform t column");
    }
  }
  traj.validate();
  return traj;
}

inline std::string trajectory_to_csv(const MotionTrajectory& traj) {
  std::ostringstream out;
  const int nj = traj.njoints();
  out << "t,r0,r1,r2";
  for (int i = 0; i < 6; ++i) out << ",th" << i;
  for (int i = 0; i < nj; ++i) out << ",q" << i;
  for (int i = 0; i < nj; ++i) out << ",dq" << i;
  out << "\n";
  for (int f = 0; f < traj.frame_count(); ++f) {
    const auto& c = traj.frames[static_cast<size_t>(f)];
    out << fmt_g(traj.frame_period * f);
    for (int i = 0; i < 3; ++i) out << ',' << fmt_g(c.r[i]);
    for (int i = 0; i < 6; ++i) out << ',' << fmt_g(c.theta6[i]);
    for (int i = 0; i < nj; ++i) out << ',' << fmt_g(c.q[i]);
    for (int i = 0; i < nj; ++i) out << ',' << fmt_g(c.dq[i]);
    out << "\n";
  }
  return out.str();
}

enum class TrajectoryFormat { kJson, kCsv, kAuto };

inline MotionTrajectory load_trajectory(const std::string& path,
                                        TrajectoryFormat format = TrajectoryFormat::kAuto) {
  const std::string text = read_text_file(path);
  const std::string stem = std::filesystem::path(path).stem().string();
  bool json = format == TrajectoryFormat::kJson;
  if (format == TrajectoryFormat::kAuto) {
    json = std::filesystem::path(path).extension() != ".csv";
  }
  return json ? trajectory_from_json(detail::parse_json(text, path))
              : trajectory_from_csv(text, stem);
}

// ---------------------------------------------------------------------------
// Robot model files
// ---------------------------------------------------------------------------

inline RobotModel model_from_json(const ojson& j) {
  RobotModel m;
  try {
    m.name = j.value("name", "model");
    const auto& base = j.at("base");
    m.base.mass = base.at("mass").get<double>();
    m.base.com = detail::vec3_of(base.at("com"), "base com");
    m.base.inertia_diag = detail::vec3_of(base.at("inertia_diag"), "base inertia");
    const auto& ank = j.at("ankle");
    m.ankle.stiffness = ank.at("stiffness").get<double>();
    m.ankle.damping = ank.at("damping").get<double>();
    m.ankle.pivot_height = ank.at("pivot_height").get<double>();
    for (const auto& p : j.at("foot_contacts")) {
      m.foot_contacts.push_back(detail::vec3_of(p, "foot contact"));
    }
    for (const auto& joint : j.at("joints")) {
      JointSpec spec;
      spec.parent = joint.at("parent").get<int>();
      spec.axis = detail::vec3_of(joint.at("axis"), "joint axis");
      spec.origin_translation = detail::vec3_of(joint.at("origin_translation"), "joint origin");
      if (joint.contains("origin_rotation")) {
        const auto& rot = joint.at("origin_rotation");
        if (!rot.is_array() || rot.size() != 3) throw ParseError("origin_rotation: expected 3x3");
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 3; ++c) {
            spec.origin_rotation(r, c) = rot[static_cast<size_t>(r)][static_cast<size_t>(c)].get<double>();
          }
        }
      }
      m.joints.push_back(spec);
    }
    for (const auto& link : j.at("links")) {
      m.links.push_back({link.at("mass").get<double>(), detail::vec3_of(link.at("com"), "link com"),
                         link.at("joint_inertia").get<double>()});
    }
    for (const auto& act : j.at("actuation")) {
      ActuationSpec a;
      a.kp = act.at("kp").get<double>();
      a.kd = act.at("kd").get<double>();
      a.torque_limit = act.at("torque_limit").get<double>();
      a.rotor_inertia = act.at("rotor_inertia").get<double>();
      m.actuation.push_back(a);
    }
  } catch (const ojson::exception& e) {
    throw ParseError(std::string("model json: ") + e.what());
  }
  m.validate();
  return m;
}

inline ojson model_to_json(const RobotModel& m) {
  ojson j;
  j["name"] = m.name;
  j["base"] = {{"mass", m.base.mass},
               {"com", {m.base.com.x(), m.base.com.y(), m.base.com.z()}},
               {"inertia_diag",
                {m.base.inertia_diag.x(), m.base.inertia_diag.y(), m.base.inertia_diag.z()}}};
  j["ankle"] = {{"stiffness", m.ankle.stiffness},
                {"damping", m.ankle.damping},
                {"pivot_height", m.ankle.pivot_height}};
  ojson contacts = ojson::array();
  for (const auto& p : m.foot_contacts) contacts.push_back({p.x(), p.y(), p.z()});
  j["foot_contacts"] = std::move(contacts);
  ojson joints = ojson::array();
  for (const auto& joint : m.joints) {
    ojson jj;
    jj["parent"] = joint.parent;
    jj["axis"] = {joint.axis.x(), joint.axis.y(), joint.axis.z()};
    jj["origin_translation"] = {joint.origin_translation.x(), joint.origin_translation.y(),
                                joint.origin_translation.z()};
    ojson rot = ojson::array();
    for (int r = 0; r < 3; ++r) {
      rot.push_back({joint.origin_rotation(r, 0), joint.origin_rotation(r, 1),
                     joint.origin_rotation(r, 2)});
    }
    jj["origin_rotation"] = std::move(rot);
    joints.push_back(std::move(jj));
  }
  j["joints"] = std::move(joints);
  ojson links = ojson::array();
  for (const auto& l : m.links) {
    links.push_back({{"mass", l.mass},
                     {"com", {l.com.x(), l.com.y(), l.com.z()}},
                     {"joint_inertia", l.joint_inertia}});
  }
  j["links"] = std::move(links);
  ojson acts = ojson::array();
  for (const auto& a : m.actuation) {
    acts.push_back({{"kp", a.kp},
                    {"kd", a.kd},
                    {"torque_limit", a.torque_limit},
                    {"rotor_inertia", a.rotor_inertia}});
  }
  j["actuation"] = std::move(acts);
  return j;
}

inline RobotModel load_model(const std::string& path) {
  return model_from_json(detail::parse_json(read_text_file(path), path));
}

// ---------------------------------------------------------------------------
// Plan and config files
// ---------------------------------------------------------------------------

inline ojson retime_config_to_json(const RetimeCostConfig& cfg, const ChunkingConfig& chunk) {
  ojson j;
  j["weights"] = {{"gravity_projection", cfg.weights.gravity_projection},
                  {"balance_penalty", cfg.weights.balance_penalty},
                  {"support_constraint", cfg.weights.support_constraint},
                  {"small_dt", cfg.weights.small_dt},
                  {"dt_smooth", cfg.weights.dt_smooth},
                  {"dt_norm", cfg.weights.dt_norm}};
  j["sigma"] = cfg.sigma;
  j["dt_bounds"] = {cfg.dt_min, cfg.dt_max};
  j["grid"] = cfg.grid;
  j["support_floor"] = cfg.support_floor;
  j["beam_width"] = cfg.beam_width;
  j["exhaustive_cap"] = cfg.exhaustive_cap;
  j["chunking"] = {{"k", chunk.k}, {"horizon", chunk.horizon}, {"buffer", chunk.buffer}};
  return j;
}

inline void retime_config_from_json(const ojson& j, RetimeCostConfig* cfg, ChunkingConfig* chunk) {
  try {
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      cfg->weights.gravity_projection = w.value("gravity_projection", cfg->weights.gravity_projection);
      cfg->weights.balance_penalty = w.value("balance_penalty", cfg->weights.balance_penalty);
      cfg->weights.support_constraint = w.value("support_constraint", cfg->weights.support_constraint);
      cfg->weights.small_dt = w.value("small_dt", cfg->weights.small_dt);
      cfg->weights.dt_smooth = w.value("dt_smooth", cfg->weights.dt_smooth);
      cfg->weights.dt_norm = w.value("dt_norm", cfg->weights.dt_norm);
    }
    cfg->sigma = j.value("sigma", cfg->sigma);
    if (j.contains("dt_bounds")) {
      cfg->dt_min = j.at("dt_bounds").at(0).get<double>();
      cfg->dt_max = j.at("dt_bounds").at(1).get<double>();
    }
    if (j.contains("grid")) cfg->grid = j.at("grid").get<std::vector<double>>();
    cfg->support_floor = j.value("support_floor", cfg->support_floor);
    cfg->beam_width = j.value("beam_width", cfg->beam_width);
    cfg->exhaustive_cap = j.value("exhaustive_cap", cfg->exhaustive_cap);
    if (j.contains("chunking")) {
      const auto& c = j.at("chunking");
      chunk->k = c.value("k", chunk->k);
      chunk->horizon = c.value("horizon", chunk->horizon);
      chunk->buffer = c.value("buffer", chunk->buffer);
    }
  } catch (const ojson::exception& e) {
    throw ParseError(std::string("retime config json: ") + e.what());
  }
  cfg->validate();
  chunk->validate();
}

inline std::string retime_config_hash(const RetimeCostConfig& cfg, const ChunkingConfig& chunk) {
  return to_hex(fnv1a(retime_config_to_json(cfg, chunk).dump()));
}

// Fingerprint of the committed durations, recorded in metrics reports.
inline std::string plan_hash(const RetimingPlan& plan) {
  std::string bytes;
  bytes.reserve(plan.dts.size() * sizeof(double));
  for (double dt : plan.dts) {
    const char* raw = reinterpret_cast<const char*>(&dt);
    bytes.append(raw, sizeof(double));
  }
  return to_hex(fnv1a(bytes));
}

inline ojson plan_to_json(const RetimingPlan& plan, const std::string& trajectory,
                          const std::string& config_hash) {
  ojson j;
  j["trajectory"] = trajectory;
  j["dt_s"] = plan.dts;
  j["total_time_s"] = plan.total_time;
  j["config_hash"] = config_hash;
  return j;
}

inline RetimingPlan plan_from_json(const ojson& j, std::string* trajectory = nullptr) {
  try {
    if (trajectory) *trajectory = j.value("trajectory", "");
    return make_plan(j.at("dt_s").get<std::vector<double>>());
  } catch (const ojson::exception& e) {
    throw ParseError(std::string("plan json: ") + e.what());
  }
}

inline RetimingPlan load_plan(const std::string& path, std::string* trajectory = nullptr) {
  return plan_from_json(detail::parse_json(read_text_file(path), path), trajectory);
}

// ---------------------------------------------------------------------------
// Rollout trace CSV: one row per control tick, floats at 9 significant
// digits. success and fall_time repeat per row; fall_time is -1 when the
// run succeeded.
// ---------------------------------------------------------------------------

inline std::string trace_to_csv(const RolloutTrace& t) {
  std::ostringstream out;
  const int nj = t.q.empty() ? 0 : static_cast<int>(t.q.front().size());
  out << "tick,t_s";
  for (int i = 0; i < nj; ++i) out << ",q" << i;
  for (int i = 0; i < nj; ++i) out << ",dq" << i;
  for (int i = 0; i < nj; ++i) out << ",ddq" << i;
  out << ",tilt_r,tilt_p,tilt_rate_r,tilt_rate_p,pg_x,pg_y,com_x,com_y,com_z"
      << ",P_x,P_y,P_z,L_x,L_y,L_z,Pdot_x,Pdot_y,Pdot_z,Ldot_x,Ldot_y,Ldot_z"
      << ",zmp_x,zmp_y,d,class,success,fall_time\n";
  const double fall = t.fall_time.value_or(-1.0);
  for (int j = 0; j < t.tick_count(); ++j) {
    const auto k = static_cast<size_t>(j);
    out << j << ',' << fmt_g(t.time[k]);
    for (int i = 0; i < nj; ++i) out << ',' << fmt_g(t.q[k][i]);
    for (int i = 0; i < nj; ++i) out << ',' << fmt_g(t.dq[k][i]);
    for (int i = 0; i < nj; ++i) out << ',' << fmt_g(t.ddq[k][i]);
    out << ',' << fmt_g(t.tilt[k].x()) << ',' << fmt_g(t.tilt[k].y());
    out << ',' << fmt_g(t.tilt_rate[k].x()) << ',' << fmt_g(t.tilt_rate[k].y());
    out << ',' << fmt_g(t.pg[k].x()) << ',' << fmt_g(t.pg[k].y());
    for (int i = 0; i < 3; ++i) out << ',' << fmt_g(t.com[k][i]);
    for (int i = 0; i < 3; ++i) out << ',' << fmt_g(t.linear_momentum[k][i]);
    for (int i = 0; i < 3; ++i) out << ',' << fmt_g(t.angular_momentum[k][i]);
    for (int i = 0; i < 3; ++i) out << ',' << fmt_g(t.linear_rate[k][i]);
    for (int i = 0; i < 3; ++i) out << ',' << fmt_g(t.angular_rate[k][i]);
    out << ',' << fmt_g(t.zmp_xy[k].x()) << ',' << fmt_g(t.zmp_xy[k].y());
    out << ',' << fmt_g(t.d[k]) << ',' << to_string(t.classification[k]);
    out << ',' << (t.success ? 1 : 0) << ',' << fmt_g(fall) << "\n";
  }
  return out.str();
}

inline RolloutTrace trace_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("trace csv: empty file");
  const auto header = detail::split_csv_line(line);
  int nj = 0;
  for (const auto& h : header) {
    if (h.rfind("q", 0) == 0 && h.size() > 1 && std::isdigit(static_cast<unsigned char>(h[1]))) {
      ++nj;
    }
  }
  const size_t expected = 2 + 3 * static_cast<size_t>(nj) + 27;
  if (header.size() != expected) throw ParseError("trace csv: unexpected column count");
  RolloutTrace t;
  bool have_dt = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != expected) throw DimensionError("trace csv: row width differs from header");
    size_t c = 1;
    const auto num = [&](size_t i) {
      try {
        return std::stod(cells[i]);
      } catch (const std::exception&) {
        throw ParseError("trace csv: bad number '" + cells[i] + "'");
      }
    };
    t.time.push_back(num(c++));
    Eigen::VectorXd q(nj), dq(nj), ddq(nj);
    for (int i = 0; i < nj; ++i) q[i] = num(c++);
    for (int i = 0; i < nj; ++i) dq[i] = num(c++);
    for (int i = 0; i < nj; ++i) ddq[i] = num(c++);
    t.q.push_back(q);
    t.dq.push_back(dq);
    t.ddq.push_back(ddq);
    t.tilt.emplace_back(num(c), num(c + 1));
    c += 2;
    t.tilt_rate.emplace_back(num(c), num(c + 1));
    c += 2;
    t.pg.emplace_back(num(c), num(c + 1));
    c += 2;
    t.com.emplace_back(num(c), num(c + 1), num(c + 2));
    c += 3;
    t.linear_momentum.emplace_back(num(c), num(c + 1), num(c + 2));
    c += 3;
    t.angular_momentum.emplace_back(num(c), num(c + 1), num(c + 2));
    c += 3;
    t.linear_rate.emplace_back(num(c), num(c + 1), num(c + 2));
    c += 3;
    t.angular_rate.emplace_back(num(c), num(c + 1), num(c + 2));
    c += 3;
    t.zmp_xy.emplace_back(num(c), num(c + 1));
    c += 2;
    t.d.push_back(num(c++));
    const std::string& cls = cells[c++];
    if (cls == "inside") {
      t.classification.push_back(BalanceClass::kInside);
    } else if (cls == "near_edge") {
      t.classification.push_back(BalanceClass::kNearEdge);
    } else if (cls == "exited") {
      t.classification.push_back(BalanceClass::kExited);
    } else {
      throw ParseError("trace csv: bad class '" + cls + "'");
    }
    t.success = num(c++) != 0.0;
    const double fall = num(c++);
    if (fall >= 0.0) t.fall_time = fall;
    t.com_proj.push_back(t.com.back().head<2>());
    if (!have_dt && t.time.size() == 2) {
      t.dt_ctrl = t.time[1] - t.time[0];
      have_dt = true;
    }
  }
  if (t.time.empty()) throw ParseError("trace csv: no rows");
  if (!t.success && !t.fall_time) t.fall_time = t.time.back();
  return t;
}

inline ojson metrics_to_json(const MetricsReport& m) {
  ojson j;
  j["trajectory"] = m.trajectory;
  j["time_cost_s"] = m.time_cost;
  j["success"] = m.success;
  j["e_jpe"] = m.e_jpe;
  j["e_eepe"] = m.e_eepe;
  j["e_eeoe"] = m.e_eeoe;
  j["e_g"] = m.e_g;
  j["e_acc_upper"] = m.e_acc_upper;
  j["e_acc_base"] = m.e_acc_base;
  j["e_action_upper"] = m.e_action_upper;
  j["peak_d"] = m.peak_d;
  j["plan_hash"] = m.plan_hash;
  j["seed"] = m.seed;
  return j;
}

}  // namespace retime
