#pragma once

// Limited-memory BFGS with a strong-Wolfe line search (two-loop recursion,
// cubic-interpolation zoom). Used for every smooth subproblem in the library.

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>

#include "sfc/error.hpp"
#include "sfc/geom.hpp"

namespace sfc {

/// f(x, grad) returns the objective value and writes the gradient.
using Objective = std::function<double(const Vec& x, Vec& grad)>;

struct MinimizeOptions {
  int memory = 8;
  int max_iters = 200;
  /// Stop when ||grad||_inf <= grad_tol.
  double grad_tol = 1e-8;
  /// Optional stop on relative decrease |f_k - f_{k+1}| <= f_rel_tol * max(1, |f_k|); 0 disables.
  double f_rel_tol = 0.0;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_linesearch = 40;
};

enum class MinimizeStatus { Converged, FunctionTolerance, MaxIterations, Stalled };

inline std::string to_string(MinimizeStatus s) {
  switch (s) {
    case MinimizeStatus::Converged: return "converged";
    case MinimizeStatus::FunctionTolerance: return "function_tolerance";
    case MinimizeStatus::MaxIterations: return "max_iterations";
    case MinimizeStatus::Stalled: return "stalled";
  }
  return "unknown";
}

struct MinimizeResult {
  Vec x;
  double f = 0.0;
  Vec grad;
  MinimizeStatus status = MinimizeStatus::MaxIterations;
  int iterations = 0;
  int evaluations = 0;
};

namespace detail {

struct LinePoint {
  double a = 0.0;
  double f = 0.0;
  double df = 0.0;
};

/// Minimizer of the cubic interpolating (a, f, df) at both ends, safeguarded
/// into the middle 80% of the bracket.
inline double cubic_step(const LinePoint& lo, const LinePoint& hi) {
  const double d1 = lo.df + hi.df - 3.0 * (lo.f - hi.f) / (lo.a - hi.a);
  const double disc = d1 * d1 - lo.df * hi.df;
  const double left = std::min(lo.a, hi.a), right = std::max(lo.a, hi.a);
  const double width = right - left;
  double a = 0.5 * (lo.a + hi.a);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), hi.a - lo.a);
    const double denom = hi.df - lo.df + 2.0 * d2;
    if (std::abs(denom) > 0.0) {
      const double cand = hi.a - (hi.a - lo.a) * (hi.df + d2 - d1) / denom;
      if (std::isfinite(cand)) a = cand;
    }
  }
  return std::clamp(a, left + 0.1 * width, right - 0.1 * width);
}

}  // namespace detail

/// Minimizes a C^1 objective. Always returns an iterate with f(x*) <= f(x0).
inline MinimizeResult minimize(const Objective& fun, const Vec& x0,
                               const MinimizeOptions& opts = {}) {
  MinimizeResult res;
  const auto n = x0.size();
  res.x = x0;
  res.grad = Vec::Zero(n);
  res.f = fun(res.x, res.grad);
  res.evaluations = 1;
  if (!std::isfinite(res.f) || !res.grad.allFinite())
    throw Error("minimize: non-finite objective or gradient at the initial point");
  if (n == 0 || res.grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
    res.status = MinimizeStatus::Converged;
    return res;
  }

  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vec x_trial(n), g_trial(n);

  auto eval_at = [&](const Vec& dir, double a, Vec& g_out, double& f_out) {
    x_trial = res.x + a * dir;
    f_out = fun(x_trial, g_out);
    ++res.evaluations;
    if (!std::isfinite(f_out) || !g_out.allFinite()) f_out = std::numeric_limits<double>::infinity();
  };

  for (int it = 0; it < opts.max_iters; ++it) {
    // Two-loop recursion.
    Vec dir = -res.grad;
    const int m = static_cast<int>(s_hist.size());
    std::vector<double> alpha(m);
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(dir);
      dir -= alpha[i] * y_hist[i];
    }
    if (m > 0) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (int i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(dir);
      dir += s_hist[i] * (alpha[i] - beta);
    }
    double dphi0 = res.grad.dot(dir);
    if (!(dphi0 < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -res.grad;
      dphi0 = -res.grad.squaredNorm();
    }

    const double f0 = res.f;
    double a_init = (m == 0) ? std::min(1.0, 1.0 / dir.lpNorm<Eigen::Infinity>()) : 1.0;

    // Strong-Wolfe bracketing search.
    detail::LinePoint prev{0.0, f0, dphi0};
    detail::LinePoint best = prev;
    Vec best_g = res.grad;
    bool accepted = false;
    double a = a_init;
    auto sufficient = [&](const detail::LinePoint& p) { return p.f <= f0 + opts.c1 * p.a * dphi0; };
    auto curvature = [&](const detail::LinePoint& p) { return std::abs(p.df) <= -opts.c2 * dphi0; };
    auto record = [&](const detail::LinePoint& p, const Vec& g) {
      if (p.f < best.f && sufficient(p)) {
        best = p;
        best_g = g;
      }
    };
    auto zoom = [&](detail::LinePoint lo, detail::LinePoint hi, int budget) {
      for (int z = 0; z < budget; ++z) {
        const double at = detail::cubic_step(lo, hi);
        detail::LinePoint p{at, 0.0, 0.0};
        eval_at(dir, at, g_trial, p.f);
        p.df = std::isfinite(p.f) ? g_trial.dot(dir) : 0.0;
        if (!std::isfinite(p.f) || !sufficient(p) || p.f >= lo.f) {
          hi = p;
          if (!std::isfinite(p.f)) hi.df = std::abs(lo.df) + 1.0;
        } else {
          record(p, g_trial);
          if (curvature(p)) return true;
          if (p.df * (hi.a - lo.a) >= 0.0) hi = lo;
          lo = p;
        }
        if (std::abs(hi.a - lo.a) <= 1e-16 * std::max(1.0, std::abs(lo.a))) break;
      }
      return false;
    };

    for (int ls = 0; ls < opts.max_linesearch; ++ls) {
      detail::LinePoint p{a, 0.0, 0.0};
      eval_at(dir, a, g_trial, p.f);
      if (!std::isfinite(p.f)) {
        // Step into a non-finite region: shrink.
        detail::LinePoint hi{a, std::numeric_limits<double>::max(), std::abs(prev.df) + 1.0};
        accepted = zoom(prev, hi, opts.max_linesearch - ls);
        break;
      }
      p.df = g_trial.dot(dir);
      if (!sufficient(p) || (ls > 0 && p.f >= prev.f)) {
        accepted = zoom(prev, p, opts.max_linesearch - ls);
        break;
      }
      record(p, g_trial);
      if (curvature(p)) {
        accepted = true;
        break;
      }
      if (p.df >= 0.0) {
        accepted = zoom(p, prev, opts.max_linesearch - ls);
        break;
      }
      prev = p;
      a *= 2.0;
    }

    if (!(best.a > 0.0)) {
      res.status = MinimizeStatus::Stalled;
      res.iterations = it;
      return res;
    }
    (void)accepted;  // a sufficient-decrease point without curvature is still taken.

    const Vec x_new = res.x + best.a * dir;
    const Vec s = x_new - res.x;
    const Vec y = best_g - res.grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * y.squaredNorm() && sy > 0.0) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const double f_old = res.f;
    res.x = x_new;
    res.f = best.f;
    res.grad = best_g;
    res.iterations = it + 1;

    if (res.grad.lpNorm<Eigen::Infinity>() <= opts.grad_tol) {
      res.status = MinimizeStatus::Converged;
      return res;
    }
    if (opts.f_rel_tol > 0.0 &&
        std::abs(f_old - res.f) <= opts.f_rel_tol * std::max(1.0, std::abs(f_old))) {
      res.status = MinimizeStatus::FunctionTolerance;
      return res;
    }
  }
  res.status = MinimizeStatus::MaxIterations;
  return res;
}

}  // namespace sfc
