#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "retime/common.hpp"
#include "retime/io.hpp"
#include "retime/metrics.hpp"
#include "retime/suite.hpp"

namespace retime {

inline std::string method_table_header() {
  return "method,cells,success_rate,time_cost_s,e_jpe,e_eepe,e_eeoe,e_g,"
         "e_acc_upper,e_acc_base,e_action_upper,peak_d";
}

inline std::string method_table_row(const MethodSummary& s) {
  std::ostringstream out;
  out << s.method << ',' << s.cells << ',' << fmt_g(s.success_rate) << ','
      << fmt_g(s.mean.time_cost) << ',' << fmt_g(s.mean.e_jpe) << ',' << fmt_g(s.mean.e_eepe)
      << ',' << fmt_g(s.mean.e_eeoe) << ',' << fmt_g(s.mean.e_g) << ','
      << fmt_g(s.mean.e_acc_upper) << ',' << fmt_g(s.mean.e_acc_base) << ','
      << fmt_g(s.mean.e_action_upper) << ',' << fmt_g(s.mean.peak_d);
  return out.str();
}

inline std::string comparison_to_csv(const ComparisonResult& r) {
  std::ostringstream out;
  out << method_table_header() << "\n";
  for (const auto& row : r.rows) out << method_table_row(row) << "\n";
  return out.str();
}

inline ojson summary_to_json(const MethodSummary& s) {
  ojson j;
  j["method"] = s.method;
  j["cells"] = s.cells;
  j["success_rate"] = s.success_rate;
  j["time_cost_s"] = s.mean.time_cost;
  j["e_jpe"] = s.mean.e_jpe;
  j["e_eepe"] = s.mean.e_eepe;
  j["e_eeoe"] = s.mean.e_eeoe;
  j["e_g"] = s.mean.e_g;
  j["e_acc_upper"] = s.mean.e_acc_upper;
  j["e_acc_base"] = s.mean.e_acc_base;
  j["e_action_upper"] = s.mean.e_action_upper;
  j["peak_d"] = s.mean.peak_d;
  return j;
}

inline ojson comparison_to_json(const ComparisonResult& r) {
  ojson j;
  ojson rows = ojson::array();
  for (const auto& row : r.rows) rows.push_back(summary_to_json(row));
  j["rows"] = std::move(rows);
  ojson cells = ojson::array();
  for (const auto& c : r.cells) {
    ojson cj = metrics_to_json(c.metrics);
    cj["method"] = c.method;
    cj["motion"] = c.motion;
    cj["seed"] = c.seed;
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j;
}

inline std::string cells_to_csv(const std::vector<RunRecord>& cells) {
  std::ostringstream out;
  out << "motion,method,seed,success,time_cost_s,e_jpe,e_eepe,e_eeoe,e_g,"
         "e_acc_upper,e_acc_base,e_action_upper,peak_d\n";
  for (const auto& c : cells) {
    const auto& m = c.metrics;
    out << c.motion << ',' << c.method << ',' << c.seed << ',' << (m.success ? 1 : 0) << ','
        << fmt_g(m.time_cost) << ',' << fmt_g(m.e_jpe) << ',' << fmt_g(m.e_eepe) << ','
        << fmt_g(m.e_eeoe) << ',' << fmt_g(m.e_g) << ',' << fmt_g(m.e_acc_upper) << ','
        << fmt_g(m.e_acc_base) << ',' << fmt_g(m.e_action_upper) << ',' << fmt_g(m.peak_d)
        << "\n";
  }
  return out.str();
}

inline std::string k_sweep_to_csv(const std::vector<KSweepRow>& rows) {
  std::ostringstream out;
  out << "k," << method_table_header().substr(7) << ",weights\n";
  for (const auto& r : rows) {
    std::string row = method_table_row(r.summary);
    out << fmt_g(r.k) << row.substr(r.summary.method.size()) << ',';
    for (size_t i = 0; i < r.weights.size(); ++i) {
      out << (i ? ";" : "") << fmt_g(r.weights[i], 6);
    }
    out << "\n";
  }
  return out.str();
}

inline std::string payload_sweep_to_csv(const std::vector<PayloadRow>& rows) {
  std::ostringstream out;
  out << "payload_kg,success,peak_d,e_g,seeded_success_rate,seeded_e_g\n";
  for (const auto& r : rows) {
    out << fmt_g(r.payload) << ',' << (r.success ? 1 : 0) << ',' << fmt_g(r.peak_d) << ','
        << fmt_g(r.e_g) << ',' << fmt_g(r.summary.success_rate) << ','
        << fmt_g(r.summary.mean.e_g) << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Deterministic SVG plots: fixed canvas, fixed precision, no timestamps.
// ---------------------------------------------------------------------------

namespace svg {

inline constexpr int kWidth = 640;
inline constexpr int kHeight = 480;
inline constexpr int kMargin = 56;

struct Mapper {
  double x_lo, x_hi, y_lo, y_hi;

  double x(double v) const {
    const double span = x_hi > x_lo ? x_hi - x_lo : 1.0;
    return kMargin + (v - x_lo) / span * (kWidth - 2 * kMargin);
  }
  double y(double v) const {
    const double span = y_hi > y_lo ? y_hi - y_lo : 1.0;
    return kHeight - kMargin - (v - y_lo) / span * (kHeight - 2 * kMargin);
  }
};

inline std::string num(double v) { return fmt_g(v, 6); }

inline void open_canvas(std::ostringstream& out, const std::string& title,
                        const std::string& x_label, const std::string& y_label,
                        const Mapper& m) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
      << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
      << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 16
      << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << kHeight / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << kHeight / 2 << ")\">" << y_label << "</text>\n";
  // axis extents
  out << "<text x=\"" << kMargin << "\" y=\"" << kHeight - kMargin + 16
      << "\" font-size=\"10\">" << num(m.x_lo) << "</text>\n";
  out << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kHeight - kMargin + 16
      << "\" text-anchor=\"end\" font-size=\"10\">" << num(m.x_hi) << "</text>\n";
  out << "<text x=\"" << kMargin - 4 << "\" y=\"" << kHeight - kMargin
      << "\" text-anchor=\"end\" font-size=\"10\">" << num(m.y_lo) << "</text>\n";
  out << "<text x=\"" << kMargin - 4 << "\" y=\"" << kMargin
      << "\" text-anchor=\"end\" font-size=\"10\">" << num(m.y_hi) << "</text>\n";
}

inline void polyline(std::ostringstream& out, const Mapper& m, const std::vector<double>& xs,
                     const std::vector<double>& ys, const std::string& color) {
  out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out << ' ';
    out << num(m.x(xs[i])) << ',' << num(m.y(ys[i]));
  }
  out << "\"/>\n";
}

}  // namespace svg

// Stability margin over time, with the classification thresholds drawn in.
inline std::string svg_margin_trace(const std::vector<double>& time, const std::vector<double>& d,
                                    const StabilityThresholds& th = {}) {
  if (time.empty() || time.size() != d.size()) {
    throw ValidationError("svg_margin_trace: empty or mismatched series");
  }
  double d_hi = th.edge * 1.15;
  for (double v : d) d_hi = std::max(d_hi, v * 1.05);
  svg::Mapper m{time.front(), time.back(), 0.0, d_hi};
  std::ostringstream out;
  svg::open_canvas(out, "stability margin d", "time [s]", "d [m]", m);
  for (double thr : {th.inside, th.edge}) {
    out << "<line x1=\"" << svg::num(m.x(m.x_lo)) << "\" y1=\"" << svg::num(m.y(thr))
        << "\" x2=\"" << svg::num(m.x(m.x_hi)) << "\" y2=\"" << svg::num(m.y(thr))
        << "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
  }
  svg::polyline(out, m, time, d, "#1f6fb2");
  out << "</svg>\n";
  return out.str();
}

// Committed duration profile of a plan.
inline std::string svg_dt_profile(const RetimingPlan& plan, double dt_min, double dt_max) {
  if (plan.dts.empty()) throw ValidationError("svg_dt_profile: empty plan");
  std::vector<double> xs(plan.dts.size()), ys = plan.dts;
  for (size_t i = 0; i < xs.size(); ++i) xs[i] = static_cast<double>(i);
  svg::Mapper m{0.0, static_cast<double>(xs.size() - 1), dt_min * 0.9, dt_max * 1.05};
  std::ostringstream out;
  svg::open_canvas(out, "committed frame durations", "frame", "dt [s]", m);
  svg::polyline(out, m, xs, ys, "#b24a1f");
  out << "</svg>\n";
  return out.str();
}

// Time/stability scatter with the Pareto front members highlighted.
inline std::string svg_pareto(const ParetoSet& set) {
  std::vector<const ParetoPoint*> all;
  for (const auto& p : set.front) all.push_back(&p);
  for (const auto& p : set.dominated) all.push_back(&p);
  if (all.empty()) throw ValidationError("svg_pareto: no points");
  double x_lo = all[0]->time_cost, x_hi = x_lo, y_lo = all[0]->e_g, y_hi = y_lo;
  for (const auto* p : all) {
    x_lo = std::min(x_lo, p->time_cost);
    x_hi = std::max(x_hi, p->time_cost);
    y_lo = std::min(y_lo, p->e_g);
    y_hi = std::max(y_hi, p->e_g);
  }
  const double pad_x = (x_hi - x_lo) * 0.05 + 1e-9;
  const double pad_y = (y_hi - y_lo) * 0.05 + 1e-9;
  svg::Mapper m{x_lo - pad_x, x_hi + pad_x, y_lo - pad_y, y_hi + pad_y};
  std::ostringstream out;
  svg::open_canvas(out, "time/stability trade-off (front in red)", "time cost [s]", "e_g", m);
  for (const auto& p : set.dominated) {
    out << "<circle cx=\"" << svg::num(m.x(p.time_cost)) << "\" cy=\"" << svg::num(m.y(p.e_g))
        << "\" r=\"3\" fill=\"#8fb5d5\"/>\n";
  }
  for (const auto& p : set.front) {
    out << "<circle cx=\"" << svg::num(m.x(p.time_cost)) << "\" cy=\"" << svg::num(m.y(p.e_g))
        << "\" r=\"4\" fill=\"#c23b21\"/>\n";
  }
  std::vector<double> fx, fy;
  for (const auto& p : set.front) {
    fx.push_back(p.time_cost);
    fy.push_back(p.e_g);
  }
  if (fx.size() >= 2) svg::polyline(out, m, fx, fy, "#c23b21");
  out << "</svg>\n";
  return out.str();
}

// ZMP/margin trace CSV used by the zmp-trace subcommand.
inline std::string stability_trace_csv(const StabilitySeries& s) {
  std::ostringstream out;
  out << "tick,t_s,zmp_x,zmp_y,d,class\n";
  for (size_t k = 0; k < s.time.size(); ++k) {
    out << k << ',' << fmt_g(s.time[k]) << ',' << fmt_g(s.zmp[k].x()) << ','
        << fmt_g(s.zmp[k].y()) << ',' << fmt_g(s.d[k]) << ','
        << to_string(s.classification[k]) << "\n";
  }
  return out.str();
}

inline StabilitySeries stability_series_of(const RolloutTrace& t) {
  StabilitySeries s;
  s.time = t.time;
  s.zmp = t.zmp_xy;
  s.d = t.d;
  s.classification = t.classification;
  return s;
}

}  // namespace retime
