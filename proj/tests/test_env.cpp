#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "sfc/env.hpp"

using namespace sfc;

namespace {

Vec v3(double x, double y, double z) { return (Vec(3) << x, y, z).finished(); }

VoxelMap random_map(std::uint64_t seed, std::array<int, 3> dims, double fill) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VoxelMap m(dims, 0.1 + 0.05 * u(rng), v3(u(rng) - 0.5, 3.0 * u(rng), -u(rng)));
  for (auto& c : m.occupancy) c = u(rng) < fill ? 1 : 0;
  return m;
}

// Independent brute-force oracle for inflate_map.
VoxelMap inflate_brute(const VoxelMap& m, double r) {
  VoxelMap out = m;
  for (std::size_t a = 0; a < m.size(); ++a) {
    if (m.occupancy[a]) continue;
    for (std::size_t b = 0; b < m.size(); ++b)
      if (m.occupancy[b] && (m.center(a) - m.center(b)).norm() <= r + 1e-9) {
        out.occupancy[a] = 1;
        break;
      }
  }
  return out;
}

}  // namespace

TEST(VoxelMapIO, SingleOccupiedCell) {
  const auto m = parse_voxel_map("SFCMAP 1\ndims 1 1 1\nres 0.1\norigin 0 0 0\n1\n");
  ASSERT_EQ(m.size(), 1u);
  EXPECT_TRUE(m.occupied(0, 0, 0));
}

TEST(VoxelMapIO, XFastestOrdering) {
  const auto m = parse_voxel_map("SFCMAP 1\ndims 2 1 1\nres 0.5\norigin 0 0 0\n10\n");
  EXPECT_TRUE(m.occupied(0, 0, 0));
  EXPECT_FALSE(m.occupied(1, 0, 0));
  const auto m2 = parse_voxel_map("SFCMAP 1\ndims 2 2 2\nres 1\norigin 0 0 0\n00000001\n");
  EXPECT_TRUE(m2.occupied(1, 1, 1));
  EXPECT_EQ(m2.occupied_count(), 1u);
}

TEST(VoxelMapIO, DataLengthMismatch) {
  try {
    parse_voxel_map("SFCMAP 1\ndims 2 2 2\nres 1\norigin 0 0 0\n0000000\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("data length mismatch"), std::string::npos);
  }
}

TEST(VoxelMapIO, ErrorsNameTheField) {
  auto msg = [](const std::string& text) {
    try {
      parse_voxel_map(text);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(msg("SFCMAP 2\ndims 1 1 1\nres 1\norigin 0 0 0\n0\n").find("header"), std::string::npos);
  EXPECT_NE(msg("SFCMAP 1\ndims 1 0 1\nres 1\norigin 0 0 0\n0\n").find("dims"), std::string::npos);
  EXPECT_NE(msg("SFCMAP 1\ndims 1 1 1\nres 0\norigin 0 0 0\n0\n").find("res"), std::string::npos);
  EXPECT_NE(msg("SFCMAP 1\ndims 1 1 1\nres -2\norigin 0 0 0\n0\n").find("res"), std::string::npos);
  EXPECT_NE(msg("SFCMAP 1\ndims 1 1 1\nres 1\norigin 0 x 0\n0\n").find("origin"), std::string::npos);
  EXPECT_NE(msg("SFCMAP 1\ndims 1 1 1\nres 1\norigin 0 0 0\n2\n").find("data"), std::string::npos);
}

TEST(VoxelMapIO, RoundTripProperty) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto m = random_map(seed, {1 + static_cast<int>(seed % 7), 3, 2 + static_cast<int>(seed % 3)}, 0.3);
    const std::string text = serialize_voxel_map(m);
    const auto back = parse_voxel_map(text);
    EXPECT_TRUE(back == m) << seed;
    EXPECT_EQ(serialize_voxel_map(back), text);
  }
}

TEST(VoxelMapIO, FileRoundTripAndMissingFile) {
  const auto path = (std::filesystem::temp_directory_path() / "sfc_env_roundtrip.sfcmap").string();
  const auto m = random_map(99, {5, 4, 3}, 0.4);
  save_voxel_map(m, path);
  EXPECT_TRUE(load_voxel_map(path) == m);
  std::remove(path.c_str());
  try {
    load_voxel_map("/nonexistent/dir/map.sfcmap");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/map.sfcmap"), std::string::npos);
  }
}

TEST(InflateMap, ZeroRadiusIsIdentity) {
  const auto m = random_map(1, {6, 5, 4}, 0.2);
  EXPECT_TRUE(inflate_map(m, 0.0) == m);
}

TEST(InflateMap, SingleVoxelSixNeighbors) {
  VoxelMap m({3, 3, 3}, 0.2, Vec::Zero(3));
  m.set(1, 1, 1, true);
  const auto out = inflate_map(m, 0.2);
  // Oracle: center-to-center distance over the 3^3 block.
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i) {
        const double dist = (m.center(i, j, k) - m.center(1, 1, 1)).norm();
        EXPECT_EQ(out.occupied(i, j, k), dist <= 0.2 + 1e-9) << i << j << k;
      }
  EXPECT_EQ(out.occupied_count(), 7u);
}

TEST(InflateMap, FullMapUnchanged) {
  VoxelMap m({4, 3, 2}, 0.1, Vec::Zero(3));
  std::fill(m.occupancy.begin(), m.occupancy.end(), 1);
  EXPECT_TRUE(inflate_map(m, 0.35) == m);
}

TEST(InflateMap, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto m = random_map(seed, {7, 6, 5}, 0.05);
    for (double r : {0.05, 0.13, 0.3}) {
      const double rr = r * m.resolution / 0.1;
      EXPECT_TRUE(inflate_map(m, rr) == inflate_brute(m, rr)) << seed << " " << r;
    }
  }
}

TEST(InflateMap, MonotoneAndGrowing) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_map(seed, {8, 8, 4}, 0.05);
    const double r = 1.5 * m.resolution;
    const auto once = inflate_map(m, r);
    const auto twice = inflate_map(once, r);
    for (std::size_t c = 0; c < m.size(); ++c) {
      if (m.occupancy[c]) {
        EXPECT_TRUE(once.occupancy[c]);
      }
      if (once.occupancy[c]) {
        EXPECT_TRUE(twice.occupancy[c]);
      }
    }
    EXPECT_GE(occupied_points(once, once.extent()).size(), occupied_points(m, m.extent()).size());
  }
}

TEST(OccupiedPoints, Examples) {
  VoxelMap empty({4, 4, 4}, 0.5, Vec::Zero(3));
  EXPECT_TRUE(occupied_points(empty, empty.extent()).empty());

  const auto m = random_map(5, {5, 4, 3}, 0.3);
  const auto all = occupied_points(m, m.extent());
  EXPECT_EQ(all.size(), m.occupied_count());
  // x-fastest order means ascending linear index.
  for (std::size_t k = 1; k < all.cells.size(); ++k) EXPECT_LT(all.cells[k - 1], all.cells[k]);
  for (std::size_t k = 0; k < all.size(); ++k) {
    EXPECT_TRUE(m.occupancy[all.cells[k]]);
    EXPECT_TRUE(all.points[k].isApprox(m.center(all.cells[k])));
  }
}

TEST(OccupiedPoints, WindowBetweenVoxels) {
  VoxelMap m({3, 1, 1}, 1.0, Vec::Zero(3));
  m.set(0, 0, 0, true);
  m.set(2, 0, 0, true);
  // Centers at x = 0.5 and 2.5; a window over x in [0.8, 2.2] contains neither.
  const Box w{v3(0.8, 0, 0), v3(2.2, 1, 1)};
  EXPECT_TRUE(occupied_points(m, w).empty());
  const Box outside{v3(10, 10, 10), v3(11, 11, 11)};
  EXPECT_TRUE(occupied_points(m, outside).empty());
  EXPECT_EQ(occupied_points(m, Box{v3(0.5, 0.5, 0.5), v3(0.5, 0.5, 0.5)}).size(), 1u);
}

TEST(GenRandomEnv, ZeroObstaclesIsFree) {
  EnvParams p;
  p.obstacle_count = 0;
  p.size = v3(4, 4, 2);
  const auto m = gen_random_env(p);
  EXPECT_EQ(m.occupied_count(), 0u);
  EXPECT_EQ(m.dims[0], 40);
  EXPECT_EQ(m.dims[2], 20);
}

TEST(GenRandomEnv, Deterministic) {
  EnvParams p;
  p.seed = 42;
  p.size = v3(8, 8, 3);
  EXPECT_TRUE(gen_random_env(p) == gen_random_env(p));
  EnvParams q = p;
  q.seed = 43;
  EXPECT_FALSE(gen_random_env(p) == gen_random_env(q));
}

TEST(GenRandomEnv, ClearanceAroundKeepFree) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EnvParams p;
    p.seed = seed;
    p.size = v3(10, 10, 3);
    p.obstacle_count = 60;
    p.keep_free = {v3(1, 1, 1), v3(9, 9, 2)};
    const auto m = gen_random_env(p);
    for (const auto& q : occupied_points(m, m.extent()).points)
      for (const auto& f : p.keep_free) EXPECT_GT((q - f).norm(), p.clearance);
  }
}

// One box spanning a known set of voxel centers: rasterize by hand.
TEST(GenRandomEnv, SingleObstacleRasterization) {
  EnvParams p;
  p.size = v3(6, 6, 3);
  p.resolution = 0.5;
  p.obstacle_count = 1;
  p.box_fraction = 1.0;
  p.seed = 7;
  const auto m = gen_random_env(p);
  ASSERT_GT(m.occupied_count(), 0u);
  // The occupied set must be a full axis-aligned block of voxels (a rasterized box).
  std::array<int, 3> lo{1 << 30, 1 << 30, 1 << 30}, hi{-1, -1, -1};
  for (std::size_t c = 0; c < m.size(); ++c)
    if (m.occupancy[c]) {
      const auto ijk = m.cell(c);
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], ijk[a]);
        hi[a] = std::max(hi[a], ijk[a]);
      }
    }
  std::size_t block = 1;
  for (int a = 0; a < 3; ++a) block *= static_cast<std::size_t>(hi[a] - lo[a] + 1);
  EXPECT_EQ(m.occupied_count(), block);
}

TEST(SegmentFree, Examples) {
  VoxelMap free_map({10, 10, 10}, 0.1, Vec::Zero(3));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t)
    EXPECT_TRUE(segment_free(free_map, v3(u(rng), u(rng), u(rng)), v3(u(rng), u(rng), u(rng))));

  VoxelMap line({3, 1, 1}, 1.0, Vec::Zero(3));
  line.set(1, 0, 0, true);
  EXPECT_FALSE(segment_free(line, v3(0.5, 0.5, 0.5), v3(2.5, 0.5, 0.5)));
  EXPECT_TRUE(segment_free(line, v3(0.2, 0.5, 0.5), v3(0.2, 0.5, 0.5)));
  EXPECT_TRUE(segment_free(line, v3(2.1, 0.1, 0.1), v3(2.9, 0.9, 0.9)));
  EXPECT_THROW(segment_free(line, v3(-1, 0.5, 0.5), v3(0.5, 0.5, 0.5)), Error);
}

// Supercover oracle: a voxel is traversed iff the segment meets its closed box.
TEST(SegmentFree, MatchesDenseSamplingOracle) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 300; ++t) {
    VoxelMap m({6, 6, 6}, 0.25, Vec::Zero(3));
    for (auto& c : m.occupancy) c = u(rng) < 0.04 ? 1 : 0;
    const Vec a = 1.5 * v3(u(rng), u(rng), u(rng));
    const Vec b = 1.5 * v3(u(rng), u(rng), u(rng));
    bool hit = false;
    const int steps = 20000;
    for (int s = 0; s <= steps && !hit; ++s) {
      const Vec x = a + (b - a) * (static_cast<double>(s) / steps);
      hit = m.occupied_at(x);
    }
    const bool free = segment_free(m, a, b);
    // Dense sampling can miss corner grazes, never the other way round.
    if (hit) {
      EXPECT_FALSE(free) << t;
    }
  }
}
