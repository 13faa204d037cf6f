#pragma once

// Front end of the corridor pipeline: grid A* with line-of-sight
// shortcutting, waypoint upsampling and segment-aligned ellipsoid seeds.

#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "sfc/env.hpp"
#include "sfc/error.hpp"
#include "sfc/geom.hpp"

namespace sfc {

struct PlanQuery {
  Vec start;
  Vec goal;
  /// Required clearance between the path and obstacle voxel centers (m).
  double clearance = 0.1;
};

/// Inflation radius used for planning. The extra half voxel diagonal turns
/// the per-voxel clearance test into a clearance bound for every point of the
/// returned polyline.
inline double planning_radius(const VoxelMap& m, double clearance) {
  return clearance + 0.5 * std::sqrt(3.0) * m.resolution * (1.0 + 1e-6);
}

namespace detail {

inline std::vector<Vec> greedy_shortcut(const VoxelMap& m, const std::vector<Vec>& raw) {
  std::vector<Vec> out;
  if (raw.empty()) return out;
  out.push_back(raw.front());
  std::size_t anchor = 0;
  while (anchor + 1 < raw.size()) {
    std::size_t j = anchor + 1;
    while (j + 1 < raw.size() && segment_free(m, raw[anchor], raw[j + 1])) ++j;
    out.push_back(raw[j]);
    anchor = j;
  }
  return out;
}

}  // namespace detail

/// A* over the 26-connected grid of the clearance-inflated map (no corner
/// cutting), followed by greedy line-of-sight shortcutting. The returned
/// polyline starts at q.start and ends at q.goal exactly.
inline Polyline plan_path_on(const VoxelMap& plan_map, const PlanQuery& q) {
  const VoxelMap& m = plan_map;
  if (q.start.size() != 3 || q.goal.size() != 3) throw Error("plan_path: expected 3-D query");
  if (!m.contains(q.start) || !m.contains(q.goal))
    throw InfeasibleQuery("infeasible query: start or goal outside the map");
  if ((q.start - q.goal).norm() <= 1e-9) throw InfeasibleQuery("infeasible query: start equals goal");
  const auto sc = m.cell_of(q.start);
  const auto gc = m.cell_of(q.goal);
  if (m.occupied(sc[0], sc[1], sc[2]))
    throw InfeasibleQuery("infeasible query: start is in collision");
  if (m.occupied(gc[0], gc[1], gc[2]))
    throw InfeasibleQuery("infeasible query: goal is in collision");

  const std::size_t N = m.size();
  const std::size_t s_idx = m.index(sc[0], sc[1], sc[2]);
  const std::size_t g_idx = m.index(gc[0], gc[1], gc[2]);
  constexpr float inf = std::numeric_limits<float>::infinity();
  std::vector<float> g(N, inf);
  std::vector<std::uint32_t> parent(N, std::numeric_limits<std::uint32_t>::max());
  std::vector<std::uint8_t> closed(N, 0);

  const Vec goal_c = m.center(gc[0], gc[1], gc[2]);
  auto heuristic = [&](std::size_t idx) {
    return static_cast<float>((m.center(idx) - goal_c).norm());
  };

  struct Node {
    float f;
    std::uint32_t idx;
    bool operator>(const Node& o) const { return f > o.f || (f == o.f && idx > o.idx); }
  };
  std::priority_queue<Node, std::vector<Node>, std::greater<Node>> open;
  g[s_idx] = 0.0f;
  open.push({heuristic(s_idx), static_cast<std::uint32_t>(s_idx)});

  struct Move {
    int di, dj, dk;
    float cost;
  };
  std::vector<Move> moves;
  for (int dk = -1; dk <= 1; ++dk)
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di)
        if (di || dj || dk)
          moves.push_back({di, dj, dk,
                           static_cast<float>(m.resolution * std::sqrt(di * di + dj * dj + dk * dk))});

  bool found = false;
  while (!open.empty()) {
    const Node cur = open.top();
    open.pop();
    if (closed[cur.idx]) continue;
    closed[cur.idx] = 1;
    if (cur.idx == g_idx) {
      found = true;
      break;
    }
    const auto c = m.cell(cur.idx);
    for (const auto& mv : moves) {
      const int i = c[0] + mv.di, j = c[1] + mv.dj, k = c[2] + mv.dk;
      if (!m.in_bounds(i, j, k) || m.occupied(i, j, k)) continue;
      // Diagonal moves may not clip occupied voxels sharing the crossed edge/corner.
      bool clear = true;
      for (int mask = 1; mask < 7 && clear; ++mask) {
        const int a = (mask & 1) ? mv.di : 0, b = (mask & 2) ? mv.dj : 0, e = (mask & 4) ? mv.dk : 0;
        if ((a == 0 && (mask & 1)) || (b == 0 && (mask & 2)) || (e == 0 && (mask & 4))) continue;
        if (m.occupied(c[0] + a, c[1] + b, c[2] + e)) clear = false;
      }
      if (!clear) continue;
      const std::size_t nidx = m.index(i, j, k);
      if (closed[nidx]) continue;
      const float ng = g[cur.idx] + mv.cost;
      if (ng < g[nidx]) {
        g[nidx] = ng;
        parent[nidx] = cur.idx;
        open.push({ng + heuristic(nidx), static_cast<std::uint32_t>(nidx)});
      }
    }
  }
  if (!found) throw InfeasibleQuery("infeasible query: no collision-free path on the grid");

  std::vector<std::size_t> cells;
  for (std::size_t idx = g_idx;; idx = parent[idx]) {
    cells.push_back(idx);
    if (idx == s_idx) break;
  }
  std::reverse(cells.begin(), cells.end());

  std::vector<Vec> raw;
  raw.push_back(q.start);
  for (auto idx : cells) {
    Vec c = m.center(idx);
    if ((c - raw.back()).norm() > 1e-9) raw.push_back(std::move(c));
  }
  if ((raw.back() - q.goal).norm() > 1e-9)
    raw.push_back(q.goal);
  else
    raw.back() = q.goal;
  return Polyline(detail::greedy_shortcut(m, raw));
}

inline Polyline plan_path(const VoxelMap& map, const PlanQuery& q) {
  if (!(q.clearance >= 0.0)) throw Error("plan_path: clearance must be non-negative");
  return plan_path_on(inflate_map(map, planning_radius(map, q.clearance)), q);
}

/// Splits every segment of length l into ceil(l / alpha) equal pieces.
inline Polyline upsample(const Polyline& path, double alpha) {
  if (!(alpha > 0.0)) throw Error("upsample: alpha must be positive");
  if (path.points.empty()) return path;
  std::vector<Vec> out{path.points.front()};
  for (std::size_t i = 1; i < path.points.size(); ++i) {
    const Vec& a = path.points[i - 1];
    const Vec& b = path.points[i];
    const double len = (b - a).norm();
    const int pieces = std::max(1, static_cast<int>(std::ceil(len / alpha - 1e-12)));
    for (int k = 1; k < pieces; ++k) out.push_back(a + (b - a) * (static_cast<double>(k) / pieces));
    out.push_back(b);
  }
  return Polyline(std::move(out));
}

/// One ellipsoid per segment: centered at the midpoint, semi-axis |p_i - p_{i-1}|/2
/// along the segment and eps across it.
inline Ellipsoid init_ellipsoid(const Vec& p_prev, const Vec& p_cur, double eps) {
  const Vec delta = p_cur - p_prev;
  const double len = delta.norm();
  if (!(len > 1e-12)) throw GeometryError("init_ellipsoids: zero-length segment");
  if (!(eps > 0.0)) throw GeometryError("init_ellipsoids: eps must be positive");
  const Vec mu = delta / len;
  const auto n = delta.size();
  const Mat proj = mu * mu.transpose();
  const Mat shape = proj * (len * len / 4.0) + (Mat::Identity(n, n) - proj) * (eps * eps);
  Eigen::LLT<Mat> llt(shape);
  if (llt.info() != Eigen::Success) throw GeometryError("init_ellipsoids: Cholesky failed");
  Mat L = llt.matrixL();
  return {L, 0.5 * (p_prev + p_cur)};
}

inline std::vector<Ellipsoid> init_ellipsoids(const Polyline& path, double eps) {
  std::vector<Ellipsoid> out;
  out.reserve(path.segments());
  for (std::size_t i = 1; i < path.points.size(); ++i)
    out.push_back(init_ellipsoid(path.points[i - 1], path.points[i], eps));
  return out;
}

}  // namespace sfc
