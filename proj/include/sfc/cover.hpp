#pragma once

// Corridor optimization driver: front end, greedy iteration-0 corridor, then
// alternating waypoint / ellipsoid / multiplier updates with polytope
// re-inflation, and a corridor-feasible minimum-jerk trajectory at the end.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sfc/ellipsoid_opt.hpp"
#include "sfc/env.hpp"
#include "sfc/error.hpp"
#include "sfc/frontend.hpp"
#include "sfc/geom.hpp"
#include "sfc/inflate.hpp"
#include "sfc/parallel.hpp"
#include "sfc/traj.hpp"
#include "sfc/waypoint_opt.hpp"

namespace sfc {

struct SolverConfig {
  double w_v = 1.0;
  double w_c = 1.0;
  double rho = 1.0;
  int k_max = 1;
  int outer_max = 10;
  double volume_rel_tol = 1e-3;
  HeuristicKind heuristic = HeuristicKind::MinDist;
  double alpha = 2.0;        ///< upsample threshold (m)
  double local_range = 2.0;  ///< l (m)
  double eps = 0.0;          ///< path clearance and seed radius; <= 0 means map resolution
  double v_nom = 2.0;        ///< average speed (m/s) for time allocation
  double mu_corr = 1e3;
  double delta = 1e-4;
  std::uint64_t seed = 0;    ///< Monte Carlo volume estimates
  int order = 3;             ///< s (3 = jerk)
  bool recompute_tau = true;
  int threads = 1;
  long mc_samples = 10000;
  int corridor_samples = 8;  ///< jerk-heuristic corridor samples per segment
  int final_samples = 64;    ///< corridor check density for the final trajectory
  double corridor_tol = 1e-4;
  double witness_tol = 1e-6;

  void validate() const {
    if (!(w_v > 0.0 && w_c > 0.0 && rho > 0.0)) throw ParseError("weights w_v, w_c, rho must be positive");
    if (outer_max < 1 || k_max < 1) throw ParseError("outer_max and k_max must be >= 1");
    if (!(alpha > 0.0) || !(local_range > 0.0) || !(v_nom > 0.0))
      throw ParseError("alpha, local range and v_nom must be positive");
    if (order < 2 || order > 4) throw ParseError("trajectory order must be in {2, 3, 4}");
    if (mc_samples < 10000) throw ParseError("mc_samples must be >= 1e4");
  }
};

struct IterationMetrics {
  int iteration = 0;
  int segments = 0;
  double vol_e = 0.0;
  double vol_p = 0.0;
  std::vector<double> overlap;   ///< vol(P_i ∩ P_{i+1})
  double path_len = 0.0;
  double traj_cost = 0.0;        ///< unconstrained rest-to-rest cost through the waypoints
  double aug_lagrangian = 0.0;
  double wall_ms = 0.0;          ///< elapsed since the start of the run
};

struct CoverResult {
  Polyline initial_path;               ///< planner output before upsampling
  std::vector<Polytope> sfc;
  std::vector<Box> windows;            ///< local window each polytope was inflated in
  std::vector<Ellipsoid> ellipsoids;
  Polyline waypoints;
  std::vector<SegmentDuals> duals;
  Vec tau;
  PiecewiseTrajectory trajectory;      ///< corridor-feasible rest-to-rest trajectory
  double trajectory_cost = 0.0;
  double baseline_cost = 0.0;          ///< same back end on the iteration-0 corridor
  std::vector<IterationMetrics> metrics;
  std::vector<double> al_log;          ///< augmented Lagrangian after every inner step
  double overlap_witness = 0.0;        ///< max waypoint violation of its two polytopes
  double corridor_worst = 0.0;         ///< worst sampled trajectory violation
  bool corridor_violating = false;
  bool witness_escalated = false;
  int polytopes_kept = 0;              ///< re-inflations rejected for dropping a waypoint
  double total_ms = 0.0;
};

/// Scaled-form augmented Lagrangian with the chosen heuristic.
inline double augmented_lagrangian(const std::vector<Ellipsoid>& E, const Polyline& p,
                                   const std::vector<SegmentDuals>& y, const Vec& tau,
                                   const SolverConfig& cfg) {
  const int M = p.segments();
  if (static_cast<int>(E.size()) != M || static_cast<int>(y.size()) != M)
    throw Error("augmented_lagrangian: inconsistent sizes");
  double f = 0.0;
  for (const auto& e : E) f -= cfg.w_v * e.log_det();
  f += cfg.w_c * evaluate_heuristic(p, tau, cfg.heuristic, cfg.order);
  for (int i = 1; i <= M; ++i) {
    f -= 0.5 * cfg.rho * y[i - 1].squaredNorm();
    f += attachment_penalty(E[i - 1], p.points[i - 1], p.points[i], y[i - 1], cfg.rho);
  }
  return f;
}

/// y_i += [g(h0(E_i, p_i)), g(h0(E_i, p_{i-1}))].
inline std::vector<SegmentDuals> dual_update(const std::vector<Ellipsoid>& E, const Polyline& p,
                                             const std::vector<SegmentDuals>& y) {
  const int M = p.segments();
  if (static_cast<int>(E.size()) != M || static_cast<int>(y.size()) != M)
    throw Error("dual_update: inconsistent sizes");
  std::vector<SegmentDuals> out = y;
  for (int i = 1; i <= M; ++i) {
    out[i - 1](0) += hinge_sq(ellipsoid_residual(E[i - 1], p.points[i]));
    out[i - 1](1) += hinge_sq(ellipsoid_residual(E[i - 1], p.points[i - 1]));
  }
  return out;
}

namespace detail {

inline ObstacleCloud merge_clouds(const VoxelMap& map, const std::vector<std::size_t>& a,
                                  const std::vector<std::size_t>& b) {
  std::vector<std::size_t> cells;
  cells.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(cells));
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  ObstacleCloud c;
  c.cells = cells;
  c.points.reserve(cells.size());
  for (auto idx : cells) c.points.push_back(map.center(idx));
  return c;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Polytope, window and obstacle cache bookkeeping for one run.
class CorridorBuilder {
 public:
  CorridorBuilder(const VoxelMap& map, const SolverConfig& cfg) : map_(map), cfg_(cfg) {
    inflate_cfg_.local_range = cfg.local_range;
    inflate_cfg_.world = map.extent();
  }

  /// Stores each segment's initial obstacle cache (cell indices, sorted).
  void seed_caches(const std::vector<Ellipsoid>& E) {
    caches_.resize(E.size());
    for (std::size_t i = 0; i < E.size(); ++i)
      caches_[i] = occupied_points(map_, local_window(E[i], cfg_.local_range, inflate_cfg_.world)).cells;
  }

  void inflate_all(const std::vector<Ellipsoid>& E, std::vector<Polytope>& sfc, std::vector<Box>& windows) {
    const int M = static_cast<int>(E.size());
    sfc.assign(M, Polytope{});
    windows.assign(M, Box{});
    parallel_for(M, cfg_.threads, [&](int i) { inflate_one(E[i], i, sfc[i], windows[i]); });
  }

  /// Re-inflation that keeps the waypoint overlaps non-empty: a segment whose
  /// new polytope loses p_i or p_{i+1} keeps its previous polytope, which
  /// holds both waypoints and, by construction of the ellipsoid step, E_i.
  /// Returns the number of kept polytopes.
  int reinflate(const std::vector<Ellipsoid>& E, const Polyline& p, std::vector<Polytope>& sfc,
                std::vector<Box>& windows) {
    const int M = static_cast<int>(E.size());
    std::vector<char> kept(M, 0);
    parallel_for(M, cfg_.threads, [&](int i) {
      Polytope P;
      Box w;
      inflate_one(E[i], i, P, w);
      auto loss = [&](const Polytope& Q) {
        return std::max(Q.max_violation(p.points[i]), Q.max_violation(p.points[i + 1]));
      };
      if (loss(P) > std::max(kWaypointTol, loss(sfc[i]))) {
        kept[i] = 1;
        return;
      }
      sfc[i] = std::move(P);
      windows[i] = w;
    });
    return static_cast<int>(std::count(kept.begin(), kept.end(), 1));
  }

  static constexpr double kWaypointTol = 1e-9;

 private:
  const VoxelMap& map_;
  const SolverConfig& cfg_;
  InflateConfig inflate_cfg_;
  std::vector<std::vector<std::size_t>> caches_;

  void inflate_one(const Ellipsoid& E, int i, Polytope& P, Box& window) const {
    window = local_window(E, cfg_.local_range, inflate_cfg_.world);
    const ObstacleCloud now = occupied_points(map_, window);
    const ObstacleCloud cloud = detail::merge_clouds(map_, caches_[i], now.cells);
    P = inflate_polytope(E, cloud, inflate_cfg_);
  }
};

inline IterationMetrics measure(int iteration, const std::vector<Ellipsoid>& E, const std::vector<Polytope>& sfc,
                                const std::vector<Box>& windows, const Polyline& p, const Vec& tau,
                                double al, const SolverConfig& cfg) {
  IterationMetrics m;
  m.iteration = iteration;
  m.segments = p.segments();
  const int M = static_cast<int>(sfc.size());
  std::vector<double> vp(M, 0.0), ov(std::max(0, M - 1), 0.0);
  parallel_for(M, cfg.threads, [&](int i) {
    const std::uint64_t base = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(iteration) * 7919ULL;
    vp[i] = polytope_volume_mc(sfc[i], windows[i], cfg.mc_samples, base + 2ULL * i);
    if (i + 1 < M)
      ov[i] = polytope_volume_mc(intersect(sfc[i], sfc[i + 1]), windows[i].intersected(windows[i + 1]),
                                 cfg.mc_samples, base + 2ULL * i + 1ULL);
  });
  for (const auto& e : E) m.vol_e += ellipsoid_volume(e);
  for (double v : vp) m.vol_p += v;
  m.overlap = ov;
  m.path_len = p.length();
  const int n = static_cast<int>(p.points.front().size());
  m.traj_cost = control_cost(solve_min_effort(p, tau, BoundaryState::rest(n, cfg.order),
                                              BoundaryState::rest(n, cfg.order), cfg.order));
  m.aug_lagrangian = al;
  return m;
}

/// Worst signed distance of obstacle points into the corridor polytopes
/// (negative means some point lies strictly inside a polytope).
inline double obstacle_exclusion_margin(const VoxelMap& map, const std::vector<Polytope>& sfc,
                                        const std::vector<Box>& windows) {
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sfc.size(); ++i) {
    const ObstacleCloud c = occupied_points(map, windows[i]);
    for (const auto& q : c.points) worst = std::min(worst, sfc[i].max_violation(q));
  }
  return worst;
}

/// Runs the full pipeline on an (already robot-radius inflated) voxel map.
inline CoverResult optimize_cover(const VoxelMap& map, const PlanQuery& query, const SolverConfig& cfg_in) {
  SolverConfig cfg = cfg_in;
  cfg.validate();
  if (!(cfg.eps > 0.0)) cfg.eps = map.resolution;
  const auto t0 = std::chrono::steady_clock::now();

  CoverResult out;
  PlanQuery q = query;
  q.clearance = cfg.eps;
  out.initial_path = plan_path(map, q);
  Polyline p = upsample(out.initial_path, cfg.alpha);
  const int M = p.segments();
  std::vector<Ellipsoid> E = init_ellipsoids(p, cfg.eps);
  std::vector<SegmentDuals> y(M, SegmentDuals::Zero());
  Vec tau = profile_time_allocation(p, cfg.v_nom);

  CorridorBuilder builder(map, cfg);
  builder.seed_caches(E);
  std::vector<Polytope> sfc;
  std::vector<Box> windows;
  builder.inflate_all(E, sfc, windows);

  WaypointOptions wopts;
  wopts.mu_corr = cfg.mu_corr;
  wopts.delta = cfg.delta;
  wopts.corridor_samples = cfg.corridor_samples;
  wopts.order = cfg.order;
  EllipsoidOptions eopts;
  eopts.mu_corr = cfg.mu_corr;

  auto corridor_trajectory = [&](const Polyline& pts, const std::vector<Polytope>& cells) {
    return solve_min_effort_in_corridor(pts, profile_time_allocation(pts, cfg.v_nom), cells, cfg.order,
                                        cfg.final_samples, 0.5 * cfg.corridor_tol);
  };

  out.metrics.push_back(measure(0, E, sfc, windows, p, tau, augmented_lagrangian(E, p, y, tau, cfg), cfg));
  out.metrics.back().wall_ms = detail::elapsed_ms(t0);
  out.baseline_cost = corridor_trajectory(p, sfc).cost;

  double prev_vol = out.metrics.back().vol_e;
  for (int it = 1; it <= cfg.outer_max; ++it) {
    if (it > 1) out.polytopes_kept += builder.reinflate(E, p, sfc, windows);
    for (int k = 0; k < cfg.k_max; ++k) {
      p = update_waypoints(p, E, sfc, y, tau, cfg.heuristic, cfg.w_c, cfg.rho, wopts);
      std::vector<Ellipsoid> next(M);
      parallel_for(M, cfg.threads, [&](int i) {
        EllipsoidOptions o = eopts;
        o.pin_prev = i == 0;
        o.pin_cur = i == M - 1;
        next[i] = max_ellipsoid(sfc[i], p.points[i], p.points[i + 1], y[i], E[i], cfg.w_v, cfg.rho, o);
      });
      E = std::move(next);
      y = dual_update(E, p, y);
      out.al_log.push_back(augmented_lagrangian(E, p, y, tau, cfg));
    }
    if (cfg.recompute_tau) tau = profile_time_allocation(p, cfg.v_nom);
    out.metrics.push_back(measure(it, E, sfc, windows, p, tau, out.al_log.back(), cfg));
    out.metrics.back().wall_ms = detail::elapsed_ms(t0);
    const double vol = out.metrics.back().vol_e;
    if (std::abs(vol - prev_vol) <= cfg.volume_rel_tol * std::max(vol, 1e-300)) break;
    prev_vol = vol;
  }

  out.overlap_witness = overlap_violation(p, sfc);
  if (out.overlap_witness > cfg.witness_tol) {
    WaypointOptions strong = wopts;
    strong.mu_corr *= 10.0;
    p = update_waypoints(p, E, sfc, y, tau, cfg.heuristic, cfg.w_c, cfg.rho, strong);
    out.overlap_witness = overlap_violation(p, sfc);
    out.witness_escalated = true;
  }

  if (obstacle_exclusion_margin(map, sfc, windows) < -1e-9)
    throw GeometryError("corridor polytope contains an obstacle point");

  auto final_traj = corridor_trajectory(p, sfc);
  auto report = corridor_check(final_traj.trajectory, sfc, cfg.final_samples, cfg.corridor_tol);
  out.corridor_violating = !report.ok();
  out.trajectory = final_traj.trajectory;
  out.trajectory_cost = final_traj.cost;
  out.corridor_worst = report.worst();

  out.sfc = std::move(sfc);
  out.windows = std::move(windows);
  out.ellipsoids = std::move(E);
  out.waypoints = std::move(p);
  out.duals = std::move(y);
  out.tau = out.trajectory.tau;
  out.total_ms = detail::elapsed_ms(t0);
  return out;
}

}  // namespace sfc
