#pragma once

// Seeded benchmark trials: random environments with start/goal pairs a
// minimum distance apart, configuration sweeps, and summary statistics.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sfc/cover.hpp"
#include "sfc/env.hpp"
#include "sfc/error.hpp"

namespace sfc {

struct TrialSpec {
  EnvParams env;               ///< seed is overwritten per trial
  double min_dist = 10.0;      ///< start/goal separation (m)
  double robot_radius = 0.2;   ///< obstacle inflation before planning
  double border = 0.5;         ///< start/goal keep this far from the map faces
};

struct Trial {
  std::uint64_t seed = 0;
  VoxelMap map;  ///< inflated by the robot radius
  Vec start;
  Vec goal;
};

/// Seed of trial `index` in a batch started from `base` (splitmix64 mix).
inline std::uint64_t trial_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Environment `seed`, plus a start/goal pair drawn from a stream derived
/// from the same seed. Pairs closer than min_dist are rejected.
inline Trial make_trial(std::uint64_t seed, const TrialSpec& spec) {
  const Vec& size = spec.env.size;
  if (size.size() != 3) throw Error("make_trial: environment must be 3-D");
  if ((size.array() <= 2.0 * spec.border).any()) throw Error("make_trial: environment too small for the border");
  if (spec.min_dist >= (size.array() - 2.0 * spec.border).matrix().norm())
    throw Error("make_trial: min distance exceeds the environment diagonal");
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  auto draw = [&] {
    Vec p(3);
    for (int a = 0; a < 3; ++a)
      p(a) = std::uniform_real_distribution<double>(spec.border, size(a) - spec.border)(rng);
    return p;
  };
  Trial t;
  t.seed = seed;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 100000) throw Error("make_trial: no start/goal pair far enough apart");
    t.start = draw();
    t.goal = draw();
    if ((t.start - t.goal).norm() >= spec.min_dist) break;
  }
  EnvParams env = spec.env;
  env.seed = seed;
  env.keep_free = {t.start, t.goal};
  t.map = inflate_map(gen_random_env(env), spec.robot_radius);
  return t;
}

/// One axis of a sweep, e.g. "alpha=2,3".
struct SweepAxis {
  std::string key;
  std::vector<double> values;
};

namespace detail {

inline void apply_sweep_key(SolverConfig& cfg, const std::string& key, double v) {
  if (key == "l" || key == "local_range") cfg.local_range = v;
  else if (key == "alpha") cfg.alpha = v;
  else if (key == "eps") cfg.eps = v;
  else if (key == "wv") cfg.w_v = v;
  else if (key == "wc") cfg.w_c = v;
  else if (key == "rho") cfg.rho = v;
  else if (key == "vnom") cfg.v_nom = v;
  else throw ParseError("unknown sweep key '" + key + "' (expected l, alpha, eps, wv, wc, rho or vnom)");
}

}  // namespace detail

/// Parses whitespace-separated "key=v1,v2,..." axes.
inline std::vector<SweepAxis> parse_sweep(const std::string& text) {
  std::vector<SweepAxis> axes;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size())
      throw ParseError("sweep axis '" + tok + "' must look like key=v1,v2");
    SweepAxis axis{tok.substr(0, eq), {}};
    SolverConfig probe;
    std::istringstream vals(tok.substr(eq + 1));
    std::string v;
    while (std::getline(vals, v, ',')) {
      double x = 0.0;
      const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
      if (v.empty() || r.ec != std::errc{} || r.ptr != v.data() + v.size())
        throw ParseError("sweep axis '" + axis.key + "': invalid value '" + v + "'");
      axis.values.push_back(x);
      detail::apply_sweep_key(probe, axis.key, axis.values.back());
    }
    if (axis.values.empty()) throw ParseError("sweep axis '" + tok + "' has no values");
    axes.push_back(std::move(axis));
  }
  return axes;
}

struct SweepPoint {
  std::vector<std::pair<std::string, double>> settings;
  SolverConfig cfg;
};

/// Cartesian product of the axes applied to `base`, first axis slowest.
inline std::vector<SweepPoint> expand_sweep(const SolverConfig& base, const std::vector<SweepAxis>& axes) {
  std::vector<SweepPoint> out{{{}, base}};
  for (const auto& axis : axes) {
    std::vector<SweepPoint> next;
    for (const auto& pt : out)
      for (double v : axis.values) {
        SweepPoint q = pt;
        q.settings.emplace_back(axis.key, v);
        detail::apply_sweep_key(q.cfg, axis.key, v);
        next.push_back(std::move(q));
      }
    out = std::move(next);
  }
  return out;
}

/// Series divided by its maximum (all zeros stay zeros).
inline std::vector<double> normalized(const std::vector<double>& xs) {
  double mx = 0.0;
  for (double x : xs) mx = std::max(mx, x);
  std::vector<double> out(xs.size(), 0.0);
  if (mx > 0.0)
    for (std::size_t k = 0; k < xs.size(); ++k) out[k] = xs[k] / mx;
  return out;
}

/// Per-iteration series extracted from the metrics.
inline std::vector<double> series(const std::vector<IterationMetrics>& ms, double IterationMetrics::*field) {
  std::vector<double> out;
  for (const auto& m : ms) out.push_back(m.*field);
  return out;
}

inline std::vector<double> overlap_series(const std::vector<IterationMetrics>& ms) {
  std::vector<double> out;
  for (const auto& m : ms) {
    double s = 0.0;
    for (double v : m.overlap) s += v;
    out.push_back(s);
  }
  return out;
}

/// Running mean and unbiased variance.
struct Stat {
  long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / (n - 1) : 0.0; }
};

}  // namespace sfc
