// sfc: single runs, benchmark batches and map generation.
//
// Exit codes: 0 success, 1 IO/config error, 2 infeasible query.

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "sfc/report.hpp"

namespace {

using namespace sfc;

constexpr double kRobotRadius = 0.2;

Vec parse_vec3(const std::string& text, const std::string& flag) {
  Vec v(3);
  std::size_t pos = 0;
  for (int a = 0; a < 3; ++a) {
    const auto end = text.find(',', pos);
    if ((a < 2) != (end != std::string::npos)) throw ParseError(flag + " expects x,y,z, got '" + text + "'");
    const std::string tok = text.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v(a));
    if (tok.empty() || r.ec != std::errc{} || r.ptr != tok.data() + tok.size() || !std::isfinite(v(a)))
      throw ParseError(flag + " expects x,y,z, got '" + text + "'");
    pos = end + 1;
  }
  return v;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot write '" + path + "'");
  f << text;
  if (!f) throw ParseError("write failed for '" + path + "'");
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("sfc");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("SFC_LOG");
  const std::string level = env ? env : "error";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "info") spdlog::set_level(spdlog::level::info);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else throw ParseError("SFC_LOG must be error, info or debug, got '" + level + "'");
}

struct RunArgs {
  std::string map, start, goal, out, heuristic = "dist";
  SolverConfig cfg;
};

int cmd_run(const RunArgs& a) {
  SolverConfig cfg = a.cfg;
  cfg.heuristic = parse_heuristic(a.heuristic);
  const PlanQuery q{parse_vec3(a.start, "--start"), parse_vec3(a.goal, "--goal"), 0.1};
  VoxelMap map;
  try {
    map = load_voxel_map(a.map);
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    throw ParseError(msg.find(a.map) == std::string::npos ? a.map + ": " + msg : msg);
  }
  spdlog::info("map {}x{}x{} at {} m", map.dims[0], map.dims[1], map.dims[2], map.resolution);
  const CoverResult r = optimize_cover(inflate_map(map, kRobotRadius), q, cfg);
  for (const auto& m : r.metrics)
    spdlog::debug("it {} M={} vol_e={:.4f} vol_p={:.4f} len={:.3f} J={:.4f}", m.iteration, m.segments, m.vol_e,
                  m.vol_p, m.path_len, m.traj_cost);
  spdlog::info("{} segments, J {:.4f} (baseline {:.4f}), {:.0f} ms", r.sfc.size(), r.trajectory_cost, r.baseline_cost,
               r.total_ms);
  if (r.corridor_violating) spdlog::warn("final trajectory violates the corridor by {:.3g} m", r.corridor_worst);
  write_text(a.out, run_report_json(r, cfg, q, a.map).dump(2) + "\n");
  return 0;
}

struct BenchArgs {
  int trials = 10;
  std::uint64_t seed = 0;
  double min_dist = 10.0;
  std::string heuristic = "dist";
  std::vector<std::string> sweep;
  int jobs = 1;
  std::string out = "bench.jsonl";
};

int cmd_bench(const BenchArgs& a) {
  if (a.trials < 1) throw ParseError("--trials must be >= 1");
  if (a.jobs < 1) throw ParseError("--jobs must be >= 1");
  std::vector<HeuristicKind> kinds;
  if (a.heuristic == "both") kinds = {HeuristicKind::MinDist, HeuristicKind::MinJerk};
  else kinds = {parse_heuristic(a.heuristic)};
  std::string sweep_text;
  for (const auto& s : a.sweep) sweep_text += s + " ";
  const auto points = expand_sweep(SolverConfig{}, parse_sweep(sweep_text));
  TrialSpec spec;
  spec.min_dist = a.min_dist;
  spec.robot_radius = kRobotRadius;

  std::ofstream out(a.out, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + a.out + "'");

  // Workers claim whole trials; records are written in trial order.
  std::vector<std::vector<Json>> records(a.trials);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t; (t = next++) < a.trials;) {
      const std::uint64_t seed = trial_seed(a.seed, t);
      std::vector<Json>& recs = records[t];
      try {
        const Trial trial = make_trial(seed, spec);
        for (const auto& pt : points)
          for (HeuristicKind k : kinds) {
            SolverConfig cfg = pt.cfg;
            cfg.heuristic = k;
            cfg.seed = seed;
            recs.push_back(bench_record_json(t, trial, pt, cfg));
            spdlog::info("trial {} {} {}", t, to_string(k), recs.back()["status"].get<std::string>());
          }
      } catch (const std::exception& e) {
        recs.clear();
        for (const auto& pt : points)
          for (HeuristicKind k : kinds) {
            Json settings = Json::object();
            for (const auto& [key, v] : pt.settings) settings[key] = v;
            recs.push_back({{"trial", t},
                            {"seed", seed},
                            {"heuristic", to_string(k)},
                            {"settings", settings},
                            {"status", "error"},
                            {"error", e.what()}});
          }
        spdlog::warn("trial {}: {}", t, e.what());
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < std::min(a.jobs, a.trials); ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<Json> flat;
  for (const auto& recs : records)
    for (const auto& r : recs) {
      out << r.dump() << "\n";
      flat.push_back(r);
    }
  if (!out) throw ParseError("write failed for '" + a.out + "'");
  std::cout << bench_table(flat);
  return 0;
}

struct GenArgs {
  std::string size = "20,20,5";
  double res = 0.1;
  int obstacles = 30;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen(const GenArgs& a) {
  EnvParams p;
  p.size = parse_vec3(a.size, "--size");
  p.resolution = a.res;
  p.obstacle_count = a.obstacles;
  p.seed = a.seed;
  if (a.obstacles < 0) throw ParseError("--obstacles must be >= 0");
  save_voxel_map(gen_random_env(p), a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimized safe flight corridors"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "optimize a corridor for one query and write a JSON report");
  run_cmd->add_option("--map", run.map, "SFCMAP file")->required();
  run_cmd->add_option("--start", run.start, "x,y,z")->required();
  run_cmd->add_option("--goal", run.goal, "x,y,z")->required();
  run_cmd->add_option("--out", run.out, "report path")->required();
  run_cmd->add_option("--heuristic", run.heuristic, "dist or jerk")->capture_default_str();
  run_cmd->add_option("--alpha", run.cfg.alpha, "upsample threshold (m)")->capture_default_str();
  run_cmd->add_option("--local-range", run.cfg.local_range, "window margin l (m)")->capture_default_str();
  run_cmd->add_option("--eps", run.cfg.eps, "path clearance (m); <= 0 uses the map resolution")
      ->capture_default_str();
  run_cmd->add_option("--wv", run.cfg.w_v, "ellipsoid volume weight")->capture_default_str();
  run_cmd->add_option("--wc", run.cfg.w_c, "heuristic weight")->capture_default_str();
  run_cmd->add_option("--rho", run.cfg.rho, "penalty parameter")->capture_default_str();
  run_cmd->add_option("--outer-max", run.cfg.outer_max, "outer iterations")->capture_default_str();
  run_cmd->add_option("--kmax", run.cfg.k_max, "inner iterations")->capture_default_str();
  run_cmd->add_option("--vnom", run.cfg.v_nom, "average speed (m/s)")->capture_default_str();
  run_cmd->add_option("--seed", run.cfg.seed, "Monte Carlo seed")->capture_default_str();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "run seeded random trials and write JSON lines");
  bench_cmd->add_option("--trials", bench.trials)->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed)->capture_default_str();
  bench_cmd->add_option("--min-dist", bench.min_dist, "start/goal separation (m)")->capture_default_str();
  bench_cmd->add_option("--heuristic", bench.heuristic, "dist, jerk or both")->capture_default_str();
  bench_cmd->add_option("--sweep", bench.sweep, "axes like l=1.5,2 alpha=2,3");
  bench_cmd->add_option("--jobs", bench.jobs, "worker threads")->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "JSON-lines path")->capture_default_str();

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a random SFCMAP environment");
  gen_cmd->add_option("--size", gen.size, "x,y,z extents (m)")->capture_default_str();
  gen_cmd->add_option("--res", gen.res, "voxel size (m)")->capture_default_str();
  gen_cmd->add_option("--obstacles", gen.obstacles)->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "SFCMAP path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "sfc: " << e.what() << "\n";
    return 1;
  }

  try {
    configure_logging();
    if (*run_cmd) return cmd_run(run);
    if (*bench_cmd) return cmd_bench(bench);
    return cmd_gen(gen);
  } catch (const InfeasibleQuery& e) {
    std::cerr << "sfc: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "sfc: " << e.what() << "\n";
    return 1;
  }
}
