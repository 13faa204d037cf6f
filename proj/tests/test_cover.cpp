#include <gtest/gtest.h>

#include <random>

#include "sfc/bench.hpp"
#include "sfc/cover.hpp"

using namespace sfc;

namespace {

Vec v2(double x, double y) { return (Vec(2) << x, y).finished(); }
Vec v3(double x, double y, double z) { return (Vec(3) << x, y, z).finished(); }

SolverConfig cfg_with(double w_v, double w_c, double rho) {
  SolverConfig c;
  c.w_v = w_v;
  c.w_c = w_c;
  c.rho = rho;
  return c;
}

bool same_metrics(const std::vector<IterationMetrics>& a, const std::vector<IterationMetrics>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto &x = a[k], &y = b[k];
    if (x.iteration != y.iteration || x.segments != y.segments || x.vol_e != y.vol_e || x.vol_p != y.vol_p ||
        x.overlap != y.overlap || x.path_len != y.path_len || x.traj_cost != y.traj_cost ||
        x.aug_lagrangian != y.aug_lagrangian)
      return false;
  }
  return true;
}

}  // namespace

TEST(AugmentedLagrangian, InsideGivesVolumeAndHeuristic) {
  const Polyline p({v2(0, 0), v2(1, 0), v2(2, 0)});
  std::vector<Ellipsoid> E{{Vec(v2(2, 1)).asDiagonal(), v2(0.5, 0)}, {Vec(v2(2, 1)).asDiagonal(), v2(1.5, 0)}};
  std::vector<SegmentDuals> y(2, SegmentDuals::Zero());
  const auto cfg = cfg_with(1.5, 2.0, 3.0);
  const Vec tau = time_allocation(p, 1.0);
  const double expected = 1.5 * 2.0 * -std::log(2.0) + 2.0 * 2.0;
  EXPECT_NEAR(augmented_lagrangian(E, p, y, tau, cfg), expected, 1e-12);
}

TEST(AugmentedLagrangian, OnlyDualTermLeft) {
  // Unit ball (log det 0), w_c = 0, and y = -g at both endpoints so the
  // penalty vanishes: only -(rho/2)||y||^2 remains.
  const Polyline p({v2(-1.5, 0), v2(1.5, 0)});
  std::vector<Ellipsoid> E{{Mat::Identity(2, 2), v2(0, 0)}};
  std::vector<SegmentDuals> y{SegmentDuals(-0.25, -0.25)};
  const auto cfg = cfg_with(1.0, 0.0, 2.0);
  EXPECT_NEAR(augmented_lagrangian(E, p, y, time_allocation(p, 1.0), cfg), -0.125, 1e-12);
}

TEST(AugmentedLagrangian, BoundaryPointHasZeroResidual) {
  const Polyline p({v2(-1, 0), v2(1, 0)});
  std::vector<Ellipsoid> E{{Mat::Identity(2, 2), v2(0, 0)}};
  const auto cfg = cfg_with(1.0, 1.0, 1.0);
  for (double y0 : {-0.5, 0.0, 0.5}) {
    std::vector<SegmentDuals> y{SegmentDuals(y0, 0.0)};
    // g(0) = 0, so the penalty is (rho/2)||y||^2 and cancels the dual term.
    EXPECT_NEAR(augmented_lagrangian(E, p, y, time_allocation(p, 1.0), cfg), 2.0, 1e-12);
  }
}

TEST(DualUpdate, Examples) {
  const Polyline p({v2(0, 0), v2(0.5, 0), v2(2, 0)});
  std::vector<Ellipsoid> E{{Mat::Identity(2, 2), v2(0.25, 0)}, {Mat::Identity(2, 2), v2(0.5, 0)}};
  std::vector<SegmentDuals> y{SegmentDuals(0.3, 0.4), SegmentDuals(0.0, 0.0)};
  const auto y1 = dual_update(E, p, y);
  EXPECT_EQ(y1[0], y[0]);                // both points inside E_1
  // p_2 = (2, 0) sits at residual 0.5 from E_2, so g = 0.25.
  EXPECT_NEAR(y1[1](0), 0.25, 1e-12);
  EXPECT_NEAR(y1[1](1), 0.0, 1e-12);

  // Residual 1 at one endpoint adds exactly 1; two updates add 2 g(v).
  const Polyline q({v2(0, 0), v2(2, 0)});
  std::vector<Ellipsoid> F{{Mat::Identity(2, 2), v2(0, 0)}};
  std::vector<SegmentDuals> z{SegmentDuals(0.1, 0.2)};
  const auto z1 = dual_update(F, q, z);
  EXPECT_NEAR(z1[0](0), 1.1, 1e-12);
  EXPECT_NEAR(z1[0](1), 0.2, 1e-12);
  const auto z2 = dual_update(F, q, z1);
  EXPECT_NEAR(z2[0](0) - z[0](0), 2.0, 1e-12);
}

TEST(DualUpdate, Monotone) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<Vec> pts;
    for (int i = 0; i < 4; ++i) pts.push_back(v3(g(rng), g(rng), g(rng)));
    const Polyline p(pts);
    std::vector<Ellipsoid> E;
    std::vector<SegmentDuals> y;
    for (int i = 0; i < 3; ++i) {
      E.push_back(Ellipsoid::ball(v3(g(rng), g(rng), g(rng)), 0.2 + std::abs(g(rng))));
      y.emplace_back(g(rng), g(rng));
    }
    const auto y1 = dual_update(E, p, y);
    for (int i = 0; i < 3; ++i) EXPECT_TRUE((y1[i].array() >= y[i].array()).all());
  }
}

// One obstacle voxel in the middle of a 4 m cube; the ellipsoid sits left of it.
TEST(CorridorBuilder, KeepsPolytopeThatWouldDropAWaypoint) {
  VoxelMap m({40, 40, 40}, 0.1, Vec::Zero(3));
  m.set(20, 20, 20, true);
  SolverConfig cfg;
  cfg.local_range = 3.0;
  CorridorBuilder b(m, cfg);
  const std::vector<Ellipsoid> E{Ellipsoid::ball(v3(1.0, 2.05, 2.05), 0.3)};
  b.seed_caches(E);
  const Polytope world = m.extent().faces();
  std::vector<Polytope> sfc{world};
  std::vector<Box> windows{m.extent()};

  // p_1 beyond the obstacle: the tangent plane would cut it off.
  Polyline across({v3(1.0, 2.05, 2.05), v3(3.0, 2.05, 2.05)});
  EXPECT_EQ(b.reinflate(E, across, sfc, windows), 1);
  EXPECT_EQ(sfc[0].rows(), world.rows());

  // Both waypoints on the ellipsoid's side: the new polytope is taken.
  Polyline near({v3(0.8, 2.05, 2.05), v3(1.3, 2.05, 2.05)});
  EXPECT_EQ(b.reinflate(E, near, sfc, windows), 0);
  EXPECT_GT(sfc[0].rows(), world.rows());
  EXPECT_GE(sfc[0].max_violation(v3(2.05, 2.05, 2.05)), -1e-12);
  EXPECT_LE(sfc[0].max_violation(near.points[1]), 0.0);
}

TEST(OptimizeCover, FixedTimingWhenRecomputeOff) {
  VoxelMap m({60, 20, 20}, 0.1, Vec::Zero(3));
  SolverConfig cfg;
  cfg.outer_max = 3;
  cfg.recompute_tau = false;
  const auto r = optimize_cover(m, {v3(0.5, 1, 1), v3(5.5, 1, 1), 0.1}, cfg);
  EXPECT_EQ(r.metrics.size(), 4u);
  EXPECT_FALSE(r.corridor_violating);
}

TEST(OptimizeCover, EmptyMapStraightQuery) {
  VoxelMap m({60, 20, 20}, 0.1, Vec::Zero(3));
  const Vec s = v3(0.5, 1.0, 1.0), g = v3(5.5, 1.2, 0.9);
  SolverConfig cfg;
  const auto r = optimize_cover(m, {s, g, 0.1}, cfg);
  ASSERT_FALSE(r.metrics.empty());
  EXPECT_NEAR(r.metrics.back().path_len, (g - s).norm(), 1e-6);
  EXPECT_NEAR(r.waypoints.length(), (g - s).norm(), 1e-6);
  // No obstacles: every polytope is its (world-clipped) window box.
  for (std::size_t i = 0; i < r.sfc.size(); ++i) {
    EXPECT_EQ(r.sfc[i].rows(), 6);
    for (int j = 0; j < 6; ++j) EXPECT_NEAR(r.sfc[i].A.row(j).cwiseAbs().maxCoeff(), 1.0, 1e-15);
  }
  // The trajectory stays on the chord.
  const Vec dir = (g - s).normalized();
  const double T = r.trajectory.total_time();
  for (int k = 0; k <= 100; ++k) {
    const Vec x = eval(r.trajectory, T * k / 100.0) - s;
    EXPECT_LE((x - dir * dir.dot(x)).norm(), 1e-6);
  }
  EXPECT_TRUE((r.trajectory.coeffs.front().col(0) - s).norm() < 1e-12);
  EXPECT_FALSE(r.corridor_violating);
}

TEST(OptimizeCover, InfeasibleQueryThrows) {
  VoxelMap m({40, 20, 20}, 0.1, Vec::Zero(3));
  for (int k = 0; k < 20; ++k)
    for (int j = 0; j < 20; ++j) m.set(20, j, k, true);
  SolverConfig cfg;
  EXPECT_THROW(optimize_cover(m, {v3(0.5, 1, 1), v3(3.5, 1, 1), 0.1}, cfg), InfeasibleQuery);
  EXPECT_THROW(optimize_cover(m, {v3(2.05, 1, 1), v3(3.5, 1, 1), 0.1}, cfg), InfeasibleQuery);
}

TEST(OptimizeCover, RejectsInvalidConfig) {
  VoxelMap m({20, 20, 20}, 0.1, Vec::Zero(3));
  SolverConfig cfg;
  cfg.rho = 0.0;
  EXPECT_THROW(optimize_cover(m, {v3(0.5, 1, 1), v3(1.5, 1, 1), 0.1}, cfg), ParseError);
}

TEST(OptimizeCover, Deterministic) {
  TrialSpec spec;
  const Trial t = make_trial(4, spec);
  SolverConfig cfg;
  cfg.outer_max = 4;
  const auto a = optimize_cover(t.map, {t.start, t.goal, 0.1}, cfg);
  const auto b = optimize_cover(t.map, {t.start, t.goal, 0.1}, cfg);
  EXPECT_TRUE(same_metrics(a.metrics, b.metrics));
  ASSERT_EQ(a.waypoints.points.size(), b.waypoints.points.size());
  for (std::size_t i = 0; i < a.waypoints.points.size(); ++i) EXPECT_TRUE(a.waypoints.points[i] == b.waypoints.points[i]);
  EXPECT_EQ(a.trajectory_cost, b.trajectory_cost);
}

// Exclusion, witness (including the fixed endpoints), corridor and
// bookkeeping invariants on seeded random maps, both heuristics.
TEST(OptimizeCover, SafetyInvariantsOnRandomMaps) {
  TrialSpec spec;
  int solved = 0;
  for (std::uint64_t seed = 11; seed < 15; ++seed) {
    const Trial t = make_trial(seed, spec);
    for (auto kind : {HeuristicKind::MinDist, HeuristicKind::MinJerk}) {
      SolverConfig cfg;
      cfg.heuristic = kind;
      cfg.outer_max = 5;
      CoverResult r;
      try {
        r = optimize_cover(t.map, {t.start, t.goal, 0.1}, cfg);
      } catch (const InfeasibleQuery&) {
        continue;
      }
      ++solved;
      const int M = r.waypoints.segments();
      EXPECT_EQ(static_cast<int>(r.sfc.size()), M);
      EXPECT_EQ(static_cast<int>(r.ellipsoids.size()), M);
      EXPECT_EQ(static_cast<int>(r.duals.size()), M);
      EXPECT_EQ(r.trajectory.segments(), M);
      EXPECT_GE(obstacle_exclusion_margin(t.map, r.sfc, r.windows), -1e-9);
      EXPECT_LE(r.overlap_witness, 1e-6);
      EXPECT_LE(overlap_violation(r.waypoints, r.sfc), 1e-6);
      EXPECT_LE(r.sfc.front().max_violation(t.start), 1e-6);
      EXPECT_LE(r.sfc.back().max_violation(t.goal), 1e-6);
      EXPECT_TRUE(corridor_check(r.trajectory, r.sfc, 64, 1e-4).ok());
      EXPECT_FALSE(r.corridor_violating);
      EXPECT_TRUE(r.waypoints.points.front() == t.start);
      EXPECT_TRUE(r.waypoints.points.back() == t.goal);
      for (int i = 0; i < M; ++i) {
        EXPECT_LE(containment_violation(r.ellipsoids[i], r.sfc[i]), 1e-9);
        EXPECT_TRUE((r.duals[i].array() >= 0.0).all());
      }
      for (const auto& mt : r.metrics) {
        EXPECT_GE(mt.vol_e, 0.0);
        EXPECT_GE(mt.vol_p, 0.0);
        EXPECT_EQ(static_cast<int>(mt.overlap.size()), M - 1);
      }
      EXPECT_TRUE(std::isfinite(r.trajectory_cost));
      EXPECT_TRUE(std::isfinite(r.baseline_cost));
    }
  }
  EXPECT_GE(solved, 6);
}

TEST(Bench, TrialsAreSeededAndSeparated) {
  TrialSpec spec;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Trial a = make_trial(seed, spec);
    const Trial b = make_trial(seed, spec);
    EXPECT_GE((a.start - a.goal).norm(), spec.min_dist);
    EXPECT_TRUE(a.start == b.start && a.goal == b.goal);
    EXPECT_TRUE(a.map.occupancy == b.map.occupancy);
    EXPECT_FALSE(a.map.occupied_at(a.start));
    EXPECT_FALSE(a.map.occupied_at(a.goal));
  }
  TrialSpec far = spec;
  far.min_dist = 100.0;
  EXPECT_THROW(make_trial(0, far), Error);
}

TEST(Bench, SweepParsingAndExpansion) {
  const auto axes = parse_sweep("l=1.5,2 alpha=2,3");
  ASSERT_EQ(axes.size(), 2u);
  EXPECT_EQ(axes[0].key, "l");
  EXPECT_EQ(axes[1].values, (std::vector<double>{2.0, 3.0}));
  const auto pts = expand_sweep(SolverConfig{}, axes);
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_EQ(pts[0].cfg.local_range, 1.5);
  EXPECT_EQ(pts[0].cfg.alpha, 2.0);
  EXPECT_EQ(pts[1].cfg.alpha, 3.0);
  EXPECT_EQ(pts[3].cfg.local_range, 2.0);
  EXPECT_TRUE(expand_sweep(SolverConfig{}, parse_sweep("")).size() == 1u);
  EXPECT_THROW(parse_sweep("beta=1"), ParseError);
  EXPECT_THROW(parse_sweep("alpha="), ParseError);
  EXPECT_THROW(parse_sweep("alpha=2,x"), ParseError);
  EXPECT_THROW(parse_sweep("alpha"), ParseError);
}

TEST(Bench, NormalizedSeriesAndStats) {
  EXPECT_EQ(normalized({1.0, 4.0, 2.0}), (std::vector<double>{0.25, 1.0, 0.5}));
  EXPECT_EQ(normalized({0.0, 0.0}), (std::vector<double>{0.0, 0.0}));
  Stat s;
  for (double x : {1.0, 2.0, 3.0, 4.0}) s.add(x);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.variance(), 5.0 / 3.0);
}
