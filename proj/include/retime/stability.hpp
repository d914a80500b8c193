#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "retime/common.hpp"
#include "retime/kinodyn.hpp"

namespace retime {

// Reject near-free-fall states where the ZMP denominator M g + Pdot_z
// collapses (about 0.17% of M g for a 60 kg model).
inline constexpr double kZmpDenominatorFloor = 1.0;  // N

struct SupportPolygon {
  std::vector<Eigen::Vector2d> vertices;  // convex, counterclockwise
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();  // area centroid
};

namespace detail {

inline double cross2(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace detail

// Convex hull (monotone chain) of the ground projections of the contact
// points. Collinear points are dropped so the ordering is strictly convex.
inline SupportPolygon support_polygon(const std::vector<Eigen::Vector3d>& contact_points) {
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(contact_points.size());
  for (const auto& p : contact_points) pts.emplace_back(p.x(), p.y());
  if (pts.size() < 3) {
    throw DegenerateInputError("support_polygon: need at least 3 contact points");
  }
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a == b; }),
            pts.end());

  const size_t n = pts.size();
  std::vector<Eigen::Vector2d> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {  // lower
    while (k >= 2 && detail::cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  for (size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper
    while (k >= t && detail::cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k > 0 ? k - 1 : 0);  // last point repeats the first
  if (hull.size() < 3) {
    throw DegenerateInputError("support_polygon: contact points are collinear");
  }

  SupportPolygon sp;
  sp.vertices = hull;
  double area2 = 0.0;
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    const double w = a.x() * b.y() - b.x() * a.y();
    area2 += w;
    c += (a + b) * w;
  }
  sp.centroid = c / (3.0 * area2);
  return sp;
}

// ZMP from the momentum balance about the ground plane:
//   x = (M g com_x + com_z Pdot_x - Ldot_y) / (M g + Pdot_z)
//   y = (M g com_y + com_z Pdot_y + Ldot_x) / (M g + Pdot_z)
inline Eigen::Vector2d zmp(const MomentumState& m, double g) {
  const double denom = m.mass * g + m.linear_rate.z();
  if (!(denom > kZmpDenominatorFloor)) {
    throw DegenerateInputError("zmp: near-free-fall state (denominator " +
                               std::to_string(denom) + " N)");
  }
  const double mg = m.mass * g;
  return {(mg * m.com.x() + m.com.z() * m.linear_rate.x() - m.angular_rate.y()) / denom,
          (mg * m.com.y() + m.com.z() * m.linear_rate.y() + m.angular_rate.x()) / denom};
}

// Zero-moment line: the ZMP formula with the CoM height replaced by an
// arbitrary query height. Sweeping the height traces a line in the plane.
inline Eigen::Vector2d zml_point(const MomentumState& m, double g, double z_query) {
  const double denom = m.mass * g + m.linear_rate.z();
  if (!(denom > kZmpDenominatorFloor)) {
    throw DegenerateInputError("zml_point: near-free-fall state");
  }
  const double mg = m.mass * g;
  return {(mg * m.com.x() + z_query * m.linear_rate.x() - m.angular_rate.y()) / denom,
          (mg * m.com.y() + z_query * m.linear_rate.y() + m.angular_rate.x()) / denom};
}

enum class BalanceClass { kInside, kNearEdge, kExited };

inline const char* to_string(BalanceClass c) {
  switch (c) {
    case BalanceClass::kInside: return "inside";
    case BalanceClass::kNearEdge: return "near_edge";
    case BalanceClass::kExited: return "exited";
  }
  return "?";
}

struct StabilityThresholds {
  double inside = 0.32;  // d <= inside        -> inside
  double edge = 0.36;    // inside < d <= edge -> near_edge, beyond -> exited
};

inline BalanceClass classify_margin(double d, const StabilityThresholds& th = {}) {
  if (d <= th.inside) return BalanceClass::kInside;
  if (d <= th.edge) return BalanceClass::kNearEdge;
  return BalanceClass::kExited;
}

struct StabilitySample {
  Eigen::Vector2d zmp = Eigen::Vector2d::Zero();
  double d = 0.0;  // distance from the polygon centroid, m
  BalanceClass classification = BalanceClass::kInside;
  Eigen::Vector2d com_proj = Eigen::Vector2d::Zero();
};

// Margin d = distance between the support polygon centroid and the ZMP
// ground point, classified against the thresholds.
inline StabilitySample stability_margin(const SupportPolygon& sp, const Eigen::Vector2d& zmp_ground,
                                        const Eigen::Vector2d& com_proj = Eigen::Vector2d::Zero(),
                                        const StabilityThresholds& th = {}) {
  StabilitySample s;
  s.zmp = zmp_ground;
  s.com_proj = com_proj;
  s.d = (sp.centroid - zmp_ground).norm();
  s.classification = classify_margin(s.d, th);
  return s;
}

struct PointInPolygonResult {
  bool inside = false;       // on the boundary counts as inside
  double signed_distance = 0.0;  // min signed distance to the edge lines; positive inside
};

inline PointInPolygonResult point_in_polygon(const SupportPolygon& sp, const Eigen::Vector2d& p) {
  if (sp.vertices.size() < 3) {
    throw DegenerateInputError("point_in_polygon: invalid polygon");
  }
  double min_sd = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < sp.vertices.size(); ++i) {
    const auto& a = sp.vertices[i];
    const auto& b = sp.vertices[(i + 1) % sp.vertices.size()];
    const Eigen::Vector2d e = b - a;
    const double len = e.norm();
    // CCW polygon: inward normal distance is cross(e, p-a)/|e|.
    const double sd = (e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x())) / len;
    min_sd = std::min(min_sd, sd);
  }
  return {min_sd >= 0.0, min_sd};
}

}  // namespace retime
