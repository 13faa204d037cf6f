#pragma once

// Small dense routines on H-polytopes: a smoothed Chebyshev-style interior
// point and the Euclidean projection onto {x : A x <= b}.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "sfc/geom.hpp"
#include "sfc/lbfgs.hpp"

namespace sfc {

/// Approximate maximizer of min_j (b_j - a_j . x): minimizes the log-sum-exp
/// smoothing T log sum_j exp((a_j . x - b_j) / T) from `start`.
/// Returns the point and its exact minimum slack.
inline std::pair<Vec, double> interior_point(const Polytope& P, const Vec& start, double temperature) {
  if (P.rows() == 0) return {start, std::numeric_limits<double>::infinity()};
  const double T = temperature > 0.0 ? temperature : 1e-2;
  auto fun = [&](const Vec& x, Vec& g) {
    const Vec v = (P.A * x - P.b) / T;
    const double vmax = v.maxCoeff();
    const Vec w = (v.array() - vmax).exp();
    const double sum = w.sum();
    g = P.A.transpose() * (w / sum);
    return T * (vmax + std::log(sum));
  };
  MinimizeOptions opts;
  opts.max_iters = 200;
  opts.grad_tol = 1e-10;
  opts.f_rel_tol = 1e-12;
  const auto res = minimize(fun, start, opts);
  return {res.x, -P.max_violation(res.x)};
}

/// Euclidean projection of p onto P, by a primal active-set method started
/// from a feasible point. Returns nullopt when `feasible` is not inside P.
inline std::optional<Vec> project_onto_polytope(const Polytope& P, const Vec& p, const Vec& feasible,
                                                double feas_tol = 1e-12) {
  if (P.max_violation(p) <= 0.0) return p;
  if (P.max_violation(feasible) > feas_tol) return std::nullopt;
  const int n = static_cast<int>(p.size());
  Vec x = feasible;
  std::vector<int> work;
  const int max_iter = 50 + 4 * P.rows();
  for (int it = 0; it < max_iter; ++it) {
    Vec target = p;
    Vec lambda;
    if (!work.empty()) {
      Mat Aw(static_cast<Eigen::Index>(work.size()), n);
      Vec bw(static_cast<Eigen::Index>(work.size()));
      for (std::size_t k = 0; k < work.size(); ++k) {
        Aw.row(k) = P.A.row(work[k]);
        bw(k) = P.b(work[k]);
      }
      lambda = (Aw * Aw.transpose()).ldlt().solve(Aw * p - bw);
      target = p - Aw.transpose() * lambda;
    }
    const Vec step = target - x;
    if (step.norm() <= 1e-13 * std::max(1.0, x.norm())) {
      if (work.empty()) return x;
      Eigen::Index worst = 0;
      if (lambda.minCoeff(&worst) >= -1e-13) return x;
      work.erase(work.begin() + worst);
      continue;
    }
    double alpha = 1.0;
    int blocking = -1;
    for (int j = 0; j < P.rows(); ++j) {
      if (std::find(work.begin(), work.end(), j) != work.end()) continue;
      const double ad = P.A.row(j).dot(step);
      if (ad <= 1e-15) continue;
      const double ratio = std::max(0.0, (P.b(j) - P.A.row(j).dot(x)) / ad);
      if (ratio < alpha) {
        alpha = ratio;
        blocking = j;
      }
    }
    x += alpha * step;
    if (blocking >= 0) {
      if (static_cast<int>(work.size()) >= n) break;
      work.push_back(blocking);
    }
  }
  return x;
}

}  // namespace sfc
