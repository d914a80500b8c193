#include <cmath>

#include <gtest/gtest.h>

#include "retime/stability.hpp"
#include "test_helpers.hpp"

namespace retime {
namespace {

std::vector<Eigen::Vector3d> unit_square() {
  return {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
}

// independent half-plane oracle
bool inside_by_half_planes(const SupportPolygon& sp, const Eigen::Vector2d& p) {
  for (size_t i = 0; i < sp.vertices.size(); ++i) {
    const Eigen::Vector2d& a = sp.vertices[i];
    const Eigen::Vector2d& b = sp.vertices[(i + 1) % sp.vertices.size()];
    const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    if (cross < 0.0) return false;
  }
  return true;
}

MomentumState static_state(const Eigen::Vector3d& com, double mass = 60.0) {
  MomentumState m;
  m.com = com;
  m.mass = mass;
  return m;
}

TEST(SupportPolygon, UnitSquare) {
  const SupportPolygon sp = support_polygon(unit_square());
  EXPECT_EQ(sp.vertices.size(), 4u);
  EXPECT_LT((sp.centroid - Eigen::Vector2d(0.5, 0.5)).norm(), 1e-15);
}

TEST(SupportPolygon, InteriorPointDropped) {
  auto pts = unit_square();
  pts.emplace_back(0.5, 0.5, 0.0);
  EXPECT_EQ(support_polygon(pts).vertices.size(), 4u);
}

TEST(SupportPolygon, CollinearInputIsDegenerate) {
  EXPECT_THROW(support_polygon({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}), DegenerateInputError);
  EXPECT_THROW(support_polygon({{0, 0, 0}, {1, 0, 0}}), DegenerateInputError);
}

TEST(SupportPolygon, HullIdempotence) {
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 12; ++i) {
      pts.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0);
    }
    SupportPolygon sp;
    try {
      sp = support_polygon(pts);
    } catch (const DegenerateInputError&) {
      continue;
    }
    std::vector<Eigen::Vector3d> verts;
    for (const auto& v : sp.vertices) verts.emplace_back(v.x(), v.y(), 0.0);
    const SupportPolygon again = support_polygon(verts);
    ASSERT_EQ(again.vertices.size(), sp.vertices.size());
    // same vertex set up to rotation of the cycle
    for (const auto& v : sp.vertices) {
      bool found = false;
      for (const auto& w : again.vertices) {
        if ((v - w).norm() < 1e-15) found = true;
      }
      EXPECT_TRUE(found);
    }
  }
}

TEST(Zmp, StaticStateProjectsTheCom) {
  const Eigen::Vector2d p = zmp(static_state({0.02, 0.0, 0.9}), 9.81);
  EXPECT_LT((p - Eigen::Vector2d(0.02, 0.0)).norm(), 1e-15);
}

TEST(Zmp, FreeFallIsRejected) {
  MomentumState m = static_state({0, 0, 0.9});
  m.linear_rate.z() = -m.mass * 9.81;
  EXPECT_THROW(zmp(m, 9.81), DegenerateInputError);
}

TEST(Zmp, HandEvaluatedDynamicCase) {
  MomentumState m = static_state({0, 0, 0.9});
  m.linear_rate = Eigen::Vector3d(30, 0, 0);
  const Eigen::Vector2d p = zmp(m, 9.81);
  EXPECT_NEAR(p.x(), 0.04587155963302752, 1e-15);
  EXPECT_DOUBLE_EQ(p.y(), 0.0);
}

TEST(Zmp, RandomStaticStatesEqualComProjection) {
  Rng rng(37);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Vector3d com(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0.5, 1.2));
    const Eigen::Vector2d p = zmp(static_state(com, rng.uniform(20, 100)), 9.81);
    EXPECT_LT((p - com.head<2>()).norm(), 1e-12);
  }
}

TEST(ZmlPoint, DefinitionalCases) {
  MomentumState stat = static_state({0.1, -0.2, 0.8});
  for (double z : {0.0, 0.4, 1.3}) {
    EXPECT_LT((zml_point(stat, 9.81, z) - Eigen::Vector2d(0.1, -0.2)).norm(), 1e-15);
  }

  MomentumState dyn = static_state({0, 0, 0.9});
  dyn.linear_rate = Eigen::Vector3d(30, 0, 0);
  EXPECT_TRUE(zml_point(dyn, 9.81, 0.9) == zmp(dyn, 9.81));
  EXPECT_NEAR(zml_point(dyn, 9.81, 0.45).x(), 0.02293577981651376, 1e-15);
}

TEST(ZmlPoint, ThreeHeightsAreCollinear) {
  Rng rng(43);
  for (int trial = 0; trial < 1000; ++trial) {
    MomentumState m = static_state(
        {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(0.6, 1.1)},
        rng.uniform(30, 90));
    m.linear_rate = Eigen::Vector3d(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-100, 100));
    m.angular_rate = Eigen::Vector3d(rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-30, 30));
    if (m.mass * 9.81 + m.linear_rate.z() <= kZmpDenominatorFloor) continue;
    const Eigen::Vector2d a = zml_point(m, 9.81, 0.0);
    const Eigen::Vector2d b = zml_point(m, 9.81, 0.5);
    const Eigen::Vector2d c = zml_point(m, 9.81, 1.0);
    const Eigen::Vector2d ab = b - a, ac = c - a;
    EXPECT_LT(std::abs(ab.x() * ac.y() - ab.y() * ac.x()), 1e-9);
  }
}

TEST(StabilityMargin, ThresholdClassification) {
  const SupportPolygon sp = support_polygon(unit_square());
  const Eigen::Vector2d c = sp.centroid;

  EXPECT_EQ(stability_margin(sp, c).classification, BalanceClass::kInside);
  EXPECT_DOUBLE_EQ(stability_margin(sp, c).d, 0.0);
  EXPECT_EQ(stability_margin(sp, c + Eigen::Vector2d(0.2, 0)).classification,
            BalanceClass::kInside);
  EXPECT_EQ(stability_margin(sp, c + Eigen::Vector2d(0.35, 0)).classification,
            BalanceClass::kNearEdge);
  EXPECT_EQ(stability_margin(sp, c + Eigen::Vector2d(0.40, 0)).classification,
            BalanceClass::kExited);
}

TEST(StabilityMargin, BoundariesAreClosedAbove) {
  EXPECT_EQ(classify_margin(0.32), BalanceClass::kInside);
  EXPECT_EQ(classify_margin(0.36), BalanceClass::kNearEdge);
  EXPECT_EQ(classify_margin(0.3600001), BalanceClass::kExited);
  EXPECT_EQ(classify_margin(std::nextafter(0.32, 1.0)), BalanceClass::kNearEdge);
}

TEST(PointInPolygon, BasicCases) {
  const SupportPolygon sp = support_polygon(unit_square());
  const auto center = point_in_polygon(sp, sp.centroid);
  EXPECT_TRUE(center.inside);
  EXPECT_GT(center.signed_distance, 0.0);

  const auto outside = point_in_polygon(sp, {2.0, 0.5});
  EXPECT_FALSE(outside.inside);
  EXPECT_NEAR(outside.signed_distance, -1.0, 1e-12);

  const auto vertex = point_in_polygon(sp, {0.0, 0.0});
  EXPECT_TRUE(vertex.inside);
  EXPECT_NEAR(vertex.signed_distance, 0.0, 1e-15);
}

TEST(PointInPolygon, AgreesWithHalfPlaneOracle) {
  Rng rng(53);
  for (int hull_trial = 0; hull_trial < 20; ++hull_trial) {
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 10; ++i) {
      pts.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0);
    }
    SupportPolygon sp;
    try {
      sp = support_polygon(pts);
    } catch (const DegenerateInputError&) {
      continue;
    }
    for (int i = 0; i < 500; ++i) {
      const Eigen::Vector2d p(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
      EXPECT_EQ(point_in_polygon(sp, p).inside, inside_by_half_planes(sp, p));
    }
  }
}

}  // namespace
}  // namespace retime
