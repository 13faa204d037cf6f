#pragma once

// JSON serialization of run reports and benchmark records. Wall-clock
// quantities live only under "timing" keys so the rest is reproducible.

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "sfc/bench.hpp"
#include "sfc/cover.hpp"

namespace sfc {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kPlannerId = "astar26-shortcut";

inline Json to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

/// Row-major nested arrays.
inline Json to_json(const Mat& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

inline Json config_json(const SolverConfig& c) {
  return {{"w_v", c.w_v},
          {"w_c", c.w_c},
          {"rho", c.rho},
          {"k_max", c.k_max},
          {"outer_max", c.outer_max},
          {"volume_rel_tol", c.volume_rel_tol},
          {"heuristic", to_string(c.heuristic)},
          {"alpha", c.alpha},
          {"local_range", c.local_range},
          {"eps", c.eps},
          {"v_nom", c.v_nom},
          {"mu_corr", c.mu_corr},
          {"delta", c.delta},
          {"seed", c.seed},
          {"order", c.order},
          {"recompute_tau", c.recompute_tau},
          {"mc_samples", c.mc_samples},
          {"corridor_samples", c.corridor_samples},
          {"final_samples", c.final_samples},
          {"corridor_tol", c.corridor_tol},
          {"witness_tol", c.witness_tol}};
}

inline Json iteration_json(const IterationMetrics& m) {
  return {{"it", m.iteration},
          {"segments", m.segments},
          {"vol_e", m.vol_e},
          {"vol_p", m.vol_p},
          {"overlap", m.overlap},
          {"path_len", m.path_len},
          {"traj_cost", m.traj_cost},
          {"aug_lagrangian", m.aug_lagrangian}};
}

inline Json normalized_json(const std::vector<IterationMetrics>& ms) {
  return {{"vol_e", normalized(series(ms, &IterationMetrics::vol_e))},
          {"vol_p", normalized(series(ms, &IterationMetrics::vol_p))},
          {"overlap", normalized(overlap_series(ms))}};
}

inline Json trajectory_json(const PiecewiseTrajectory& tr) {
  Json segs = Json::array();
  for (int i = 0; i < tr.segments(); ++i) segs.push_back({{"dt", tr.tau(i)}, {"coeffs", to_json(tr.coeffs[i])}});
  return {{"s", tr.order}, {"segments", std::move(segs)}};
}

inline Json iteration_timing_json(const std::vector<IterationMetrics>& ms) {
  Json t = Json::array();
  for (const auto& m : ms) t.push_back(m.wall_ms);
  return t;
}

/// Full single-run report.
inline Json run_report_json(const CoverResult& r, const SolverConfig& cfg, const PlanQuery& q,
                            const std::string& map_path) {
  Json meta = {{"version", kVersion},
               {"planner", kPlannerId},
               {"map", map_path},
               {"start", to_json(q.start)},
               {"goal", to_json(q.goal)},
               {"seed", cfg.seed},
               {"config", config_json(cfg)},
               {"baseline_cost", r.baseline_cost},
               {"trajectory_cost", r.trajectory_cost},
               {"overlap_witness", r.overlap_witness},
               {"corridor_worst", r.corridor_worst},
               {"corridor_violating", r.corridor_violating},
               {"witness_escalated", r.witness_escalated},
               {"polytopes_kept", r.polytopes_kept}};
  Json iterations = Json::array();
  for (const auto& m : r.metrics) iterations.push_back(iteration_json(m));
  Json polytopes = Json::array();
  for (const auto& P : r.sfc) polytopes.push_back({{"A", to_json(P.A)}, {"b", to_json(P.b)}});
  Json ellipsoids = Json::array();
  for (const auto& E : r.ellipsoids) {
    Json rows = Json::array();
    for (int i = 0; i < E.L.rows(); ++i) rows.push_back(to_json(Vec(E.L.row(i).head(i + 1).transpose())));
    ellipsoids.push_back({{"L", std::move(rows)}, {"d", to_json(E.d)}});
  }
  Json waypoints = Json::array();
  for (const auto& p : r.waypoints.points) waypoints.push_back(to_json(p));
  return {{"meta", std::move(meta)},
          {"iterations", std::move(iterations)},
          {"normalized", normalized_json(r.metrics)},
          {"sfc", {{"polytopes", std::move(polytopes)}}},
          {"ellipsoids", std::move(ellipsoids)},
          {"waypoints", std::move(waypoints)},
          {"trajectory", trajectory_json(r.trajectory)},
          {"timing", {{"total_ms", r.total_ms}, {"iteration_ms", iteration_timing_json(r.metrics)}}}};
}

namespace detail {

inline Json summary_json(const IterationMetrics& m, double traj_cost) {
  double ov = 0.0;
  for (double v : m.overlap) ov += v;
  return {{"it", m.iteration},   {"segments", m.segments}, {"vol_e", m.vol_e},         {"vol_p", m.vol_p},
          {"overlap", ov},       {"path_len", m.path_len}, {"traj_cost", traj_cost}};
}

}  // namespace detail

/// One JSON-lines benchmark record. `status` is "ok", "infeasible" or "error".
inline Json bench_record_json(int trial, const Trial& t, const SweepPoint& point, const SolverConfig& cfg) {
  Json settings = Json::object();
  for (const auto& [k, v] : point.settings) settings[k] = v;
  Json rec = {{"trial", trial},
              {"seed", t.seed},
              {"heuristic", to_string(cfg.heuristic)},
              {"settings", std::move(settings)},
              {"start", to_json(t.start)},
              {"goal", to_json(t.goal)}};
  try {
    const CoverResult r = optimize_cover(t.map, {t.start, t.goal, 0.1}, cfg);
    rec["status"] = "ok";
    rec["iterations"] = static_cast<int>(r.metrics.size()) - 1;
    rec["baseline"] = detail::summary_json(r.metrics.front(), r.baseline_cost);
    rec["final"] = detail::summary_json(r.metrics.back(), r.trajectory_cost);
    rec["normalized"] = normalized_json(r.metrics);
    rec["overlap_witness"] = r.overlap_witness;
    rec["corridor_worst"] = r.corridor_worst;
    rec["corridor_violating"] = r.corridor_violating;
    rec["polytopes_kept"] = r.polytopes_kept;
    rec["timing"] = {{"total_ms", r.total_ms}, {"iteration_ms", iteration_timing_json(r.metrics)}};
  } catch (const InfeasibleQuery& e) {
    rec["status"] = "infeasible";
    rec["error"] = e.what();
  } catch (const std::exception& e) {
    rec["status"] = "error";
    rec["error"] = e.what();
  }
  return rec;
}

/// Record without its "timing" object, for reproducibility comparisons.
inline Json without_timing(Json j) {
  if (j.is_object()) {
    j.erase("timing");
    for (auto& [k, v] : j.items()) v = without_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = without_timing(v);
  }
  return j;
}

/// Means (and standard deviations) per heuristic / sweep setting.
inline std::string bench_table(const std::vector<Json>& records) {
  struct Group {
    long ok = 0, failed = 0;
    Stat ms, segments, path_len, vol_e, vol_p, overlap, j0, j;
  };
  std::map<std::string, Group> groups;
  for (const auto& rec : records) {
    std::string key = rec.at("heuristic").get<std::string>();
    for (const auto& [k, v] : rec.at("settings").items()) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), " %s=%g", k.c_str(), v.get<double>());
      key += buf;
    }
    Group& g = groups[key];
    if (rec.at("status") != "ok") {
      ++g.failed;
      continue;
    }
    ++g.ok;
    const Json& f = rec.at("final");
    g.ms.add(rec.at("timing").at("total_ms").get<double>());
    g.segments.add(f.at("segments").get<double>());
    g.path_len.add(f.at("path_len").get<double>());
    g.vol_e.add(f.at("vol_e").get<double>());
    g.vol_p.add(f.at("vol_p").get<double>());
    g.overlap.add(f.at("overlap").get<double>());
    g.j0.add(rec.at("baseline").at("traj_cost").get<double>());
    g.j.add(f.at("traj_cost").get<double>());
  }
  std::string out;
  char line[512];
  std::snprintf(line, sizeof(line), "%-24s %4s %4s %16s %12s %14s %16s %16s %16s %18s %18s\n", "config", "ok", "fail",
                "time_ms", "M", "path_len", "vol_e", "vol_p", "overlap", "J0", "J");
  out += line;
  auto cell = [](const Stat& s) {
    char b[64];
    std::snprintf(b, sizeof(b), "%.4g±%.3g", s.mean, std::sqrt(s.variance()));
    return std::string(b);
  };
  for (const auto& [key, g] : groups) {
    std::snprintf(line, sizeof(line), "%-24s %4ld %4ld %16s %12s %14s %16s %16s %16s %18s %18s\n", key.c_str(), g.ok,
                  g.failed, cell(g.ms).c_str(), cell(g.segments).c_str(), cell(g.path_len).c_str(),
                  cell(g.vol_e).c_str(), cell(g.vol_p).c_str(), cell(g.overlap).c_str(), cell(g.j0).c_str(),
                  cell(g.j).c_str());
    out += line;
  }
  return out;
}

}  // namespace sfc
