#pragma once

// Waypoint stage of the alternating scheme: move the interior waypoints to
// reduce a trajectory heuristic (path length or jerk) plus the attachment
// terms, keeping each waypoint in the overlap of its two polytopes.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sfc/ellipsoid_opt.hpp"
#include "sfc/error.hpp"
#include "sfc/geom.hpp"
#include "sfc/lbfgs.hpp"
#include "sfc/polytope_ops.hpp"
#include "sfc/traj.hpp"

namespace sfc {

enum class HeuristicKind { MinDist, MinJerk };

inline std::string to_string(HeuristicKind k) { return k == HeuristicKind::MinDist ? "dist" : "jerk"; }

inline HeuristicKind parse_heuristic(const std::string& s) {
  if (s == "dist") return HeuristicKind::MinDist;
  if (s == "jerk") return HeuristicKind::MinJerk;
  throw ParseError("unknown heuristic '" + s + "' (expected dist or jerk)");
}

struct WaypointOptions {
  double mu_corr = 1e3;
  double delta = 1e-4;           ///< smoothing of the segment length
  int corridor_samples = 8;      ///< per segment, jerk heuristic only
  int order = 3;                 ///< s for the jerk heuristic
  /// Exact projection of each interior waypoint onto P_i and P_{i+1}.
  bool project_overlap = true;
  MinimizeOptions lbfgs = [] {
    MinimizeOptions o;
    o.max_iters = 200;
    o.grad_tol = 1e-9;
    o.f_rel_tol = 1e-12;
    return o;
  }();
};

/// sqrt(||v||^2 + delta^2) - delta; within delta of ||v||.
inline double smooth_len(const Vec& v, double delta) {
  return std::sqrt(v.squaredNorm() + delta * delta) - delta;
}

/// Raw heuristic value: path length, or the rest-to-rest minimum jerk cost.
inline double evaluate_heuristic(const Polyline& p, const Vec& tau, HeuristicKind kind, int order = 3) {
  if (p.segments() == 0) return 0.0;
  if (kind == HeuristicKind::MinDist) return p.length();
  const int n = static_cast<int>(p.points.front().size());
  return control_cost(solve_min_effort(p, tau, BoundaryState::rest(n, order),
                                       BoundaryState::rest(n, order), order));
}

/// Composite waypoint objective over the interior waypoints (flattened).
class WaypointObjective {
 public:
  WaypointObjective(const Polyline& p, const std::vector<Ellipsoid>& E, const std::vector<Polytope>& sfc,
                    const std::vector<SegmentDuals>& y, const Vec& tau, HeuristicKind kind, double w_c,
                    double rho, const WaypointOptions& opts)
      : p_(p), E_(E), sfc_(sfc), y_(y), kind_(kind), w_c_(w_c), rho_(rho), opts_(opts) {
    M_ = p.segments();
    if (M_ < 1 || static_cast<int>(E.size()) != M_ || static_cast<int>(sfc.size()) != M_ ||
        static_cast<int>(y.size()) != M_ || (kind == HeuristicKind::MinJerk && tau.size() != M_))
      throw Error("update_waypoints: inconsistent sizes");
    n_ = static_cast<int>(p.points.front().size());
    if (kind_ == HeuristicKind::MinJerk) {
      MinEffortSystem sys(tau, opts.order);
      K_ = sys.reduced_hessian().topLeftCorner(M_ + 1, M_ + 1);
      Mat Wx, Wf;
      sys.sample_maps(opts.corridor_samples, Wx, Wf);
      S_ = (Wx + Wf * sys.free_map()).leftCols(M_ + 1);
    }
  }

  int size() const { return (M_ - 1) * n_; }

  Vec pack(const Polyline& p) const {
    Vec x(size());
    for (int i = 1; i < M_; ++i) x.segment((i - 1) * n_, n_) = p.points[i];
    return x;
  }

  Polyline unpack(const Vec& x) const {
    Polyline q = p_;
    for (int i = 1; i < M_; ++i) q.points[i] = x.segment((i - 1) * n_, n_);
    return q;
  }

  double operator()(const Vec& x, Vec& grad) const {
    const Polyline q = unpack(x);
    std::vector<Vec> g(M_ + 1, Vec::Zero(n_));
    double f = 0.0;

    if (kind_ == HeuristicKind::MinDist) {
      for (int i = 1; i <= M_; ++i) {
        const Vec v = q.points[i] - q.points[i - 1];
        const double r = std::sqrt(v.squaredNorm() + opts_.delta * opts_.delta);
        f += w_c_ * (r - opts_.delta);
        g[i] += w_c_ * v / r;
        g[i - 1] -= w_c_ * v / r;
      }
    } else {
      Mat X(M_ + 1, n_);
      for (int i = 0; i <= M_; ++i) X.row(i) = q.points[i].transpose();
      const Mat KX = K_ * X;
      f += w_c_ * (X.transpose() * KX).trace();
      for (int i = 0; i <= M_; ++i) g[i] += 2.0 * w_c_ * KX.row(i).transpose();

      // Sampled corridor rows.
      const Mat pos = S_ * X;
      Mat dpos = Mat::Zero(pos.rows(), n_);
      const int per = std::max(1, opts_.corridor_samples);
      for (int r = 0; r < pos.rows(); ++r) {
        const Polytope& P = sfc_[r / per];
        for (int j = 0; j < P.rows(); ++j) {
          const double v = P.A.row(j).dot(pos.row(r)) - P.b(j);
          if (v > 0.0) {
            f += opts_.mu_corr * v * v;
            dpos.row(r) += 2.0 * opts_.mu_corr * v * P.A.row(j);
          }
        }
      }
      const Mat gX = S_.transpose() * dpos;
      for (int i = 0; i <= M_; ++i) g[i] += gX.row(i).transpose();
    }

    // Attachment terms, including the fixed endpoints.
    for (int i = 1; i <= M_; ++i) {
      const Ellipsoid& E = E_[i - 1];
      const std::array<int, 2> idx{i, i - 1};
      for (int e = 0; e < 2; ++e) {
        const Vec z = E.to_unit(q.points[idx[e]]);
        const double nz = z.norm();
        const double h = nz - 1.0;
        const double val = hinge_sq(h) + y_[i - 1](e);
        f += 0.5 * rho_ * val * val;
        const double coef = rho_ * val * hinge_sq_deriv(h);
        if (coef != 0.0 && nz > 0.0) {
          const Vec u = E.L.transpose().triangularView<Eigen::Upper>().solve(z);
          g[idx[e]] += coef * u / nz;
        }
      }
    }

    // Overlap rows: p_i in P_i and P_{i+1}.
    for (int i = 1; i < M_; ++i)
      for (const Polytope* P : {&sfc_[i - 1], &sfc_[i]})
        for (int j = 0; j < P->rows(); ++j) {
          const double v = P->A.row(j).dot(q.points[i]) - P->b(j);
          if (v > 0.0) {
            f += opts_.mu_corr * v * v;
            g[i] += 2.0 * opts_.mu_corr * v * P->A.row(j).transpose();
          }
        }

    grad.resize(size());
    for (int i = 1; i < M_; ++i) grad.segment((i - 1) * n_, n_) = g[i];
    return f;
  }

  double value(const Polyline& q) const {
    Vec g;
    return (*this)(pack(q), g);
  }

 private:
  const Polyline& p_;
  const std::vector<Ellipsoid>& E_;
  const std::vector<Polytope>& sfc_;
  const std::vector<SegmentDuals>& y_;
  HeuristicKind kind_;
  double w_c_, rho_;
  WaypointOptions opts_;
  int M_ = 0, n_ = 0;
  Mat K_, S_;
};

/// max over interior i of max_j (a_j . p_i - b_j) for rows of P_i and P_{i+1}.
inline double overlap_violation(const Polyline& p, const std::vector<Polytope>& sfc) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 1; i < p.segments(); ++i)
    worst = std::max({worst, sfc[i - 1].max_violation(p.points[i]), sfc[i].max_violation(p.points[i])});
  return worst;
}

/// Places p inside P1 and P2 by exact projection onto their intersection.
/// Returns nullopt if no interior point of the intersection can be found.
inline std::optional<Vec> project_into_overlap(const Polytope& P1, const Polytope& P2, const Vec& p) {
  const Polytope both = intersect(P1, P2);
  if (both.max_violation(p) <= 0.0) return p;
  const auto [inner, slack] = interior_point(both, p, 1e-3);
  if (!(slack > 0.0)) return std::nullopt;
  return project_onto_polytope(both, p, inner);
}

/// One waypoint update. Endpoints p_0 and p_M are returned unchanged; the
/// interior waypoints minimize the heuristic plus attachment and overlap
/// penalties and are then projected into P_i and P_{i+1}. If the projected
/// point set scores worse than a witness-feasible input, the input is kept.
inline Polyline update_waypoints(const Polyline& p, const std::vector<Ellipsoid>& E,
                                 const std::vector<Polytope>& sfc, const std::vector<SegmentDuals>& y,
                                 const Vec& tau, HeuristicKind kind, double w_c, double rho,
                                 const WaypointOptions& opts = {}) {
  const int M = p.segments();
  if (static_cast<int>(E.size()) != M || static_cast<int>(sfc.size()) != M ||
      static_cast<int>(y.size()) != M)
    throw Error("update_waypoints: inconsistent sizes");
  if (M < 2) return p;
  WaypointObjective obj(p, E, sfc, y, tau, kind, w_c, rho, opts);
  auto fun = [&](const Vec& x, Vec& g) { return obj(x, g); };
  const auto res = minimize(fun, obj.pack(p), opts.lbfgs);
  Polyline out = obj.unpack(res.x);

  if (opts.project_overlap) {
    for (int i = 1; i < M; ++i) {
      auto proj = project_into_overlap(sfc[i - 1], sfc[i], out.points[i]);
      if (proj) out.points[i] = *proj;
    }
    const double input_witness = overlap_violation(p, sfc);
    if (input_witness <= 1e-9 && obj.value(out) > obj.value(p)) return p;
  }
  return out;
}

}  // namespace sfc
