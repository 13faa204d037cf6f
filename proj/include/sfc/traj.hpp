#pragma once

// Piecewise-polynomial back end: minimum-control-effort trajectories of
// degree 2s-1 through fixed waypoints, exact cost integration, evaluation,
// corridor sampling and uniform time rescaling.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <vector>

#include "sfc/error.hpp"
#include "sfc/geom.hpp"
#include "sfc/lbfgs.hpp"

namespace sfc {

struct PiecewiseTrajectory {
  int order = 3;                  ///< s; polynomial degree is 2s - 1
  std::vector<Mat> coeffs;        ///< per segment n x 2s, column j multiplies t^j (local time)
  Vec tau;                        ///< segment durations

  int segments() const { return static_cast<int>(coeffs.size()); }
  int dim() const { return coeffs.empty() ? 0 : static_cast<int>(coeffs.front().rows()); }
  double total_time() const { return tau.sum(); }
};

/// Derivatives 1..s-1 at a trajectory end (position comes from the waypoints).
struct BoundaryState {
  std::vector<Vec> derivatives;

  static BoundaryState rest(int n, int s) {
    return {std::vector<Vec>(static_cast<std::size_t>(std::max(0, s - 1)), Vec::Zero(n))};
  }
};

namespace detail {

inline double falling(int j, int r) {
  double v = 1.0;
  for (int k = 0; k < r; ++k) v *= (j - k);
  return v;
}

/// Coefficients of the r-th derivative of sum_j c_j t^j.
inline Vec derive(const Vec& c, int r) {
  const int deg = static_cast<int>(c.size());
  if (r >= deg) return Vec::Zero(1);
  Vec out(deg - r);
  for (int j = r; j < deg; ++j) out(j - r) = c(j) * falling(j, r);
  return out;
}

inline double horner(const Vec& c, double t) {
  double v = 0.0;
  for (int j = static_cast<int>(c.size()) - 1; j >= 0; --j) v = v * t + c(j);
  return v;
}

/// Maps stacked end values [v(0), v'(0), ..., v^{(s-1)}(0), v(T), ..., v^{(s-1)}(T)]
/// to monomial coefficients of the degree 2s-1 Hermite interpolant.
inline Mat hermite_inverse(double T, int s) {
  const int m = 2 * s;
  Mat B = Mat::Zero(m, m);
  for (int r = 0; r < s; ++r) {
    B(r, r) = falling(r, r);
    for (int j = r; j < m; ++j) B(s + r, j) = falling(j, r) * std::pow(T, j - r);
  }
  return B.fullPivLu().inverse();
}

/// Gram matrix of s-th derivatives of the monomials t^0..t^{2s-1} on [0, T].
inline Mat effort_gram(double T, int s) {
  const int m = 2 * s;
  Mat Q = Mat::Zero(m, m);
  for (int j = s; j < m; ++j)
    for (int k = s; k < m; ++k) {
      const int p = j + k - 2 * s + 1;
      Q(j, k) = falling(j, s) * falling(k, s) * std::pow(T, p) / p;
    }
  return Q;
}

inline Vec monomials(double t, int m) {
  Vec b(m);
  double v = 1.0;
  for (int j = 0; j < m; ++j) {
    b(j) = v;
    v *= t;
  }
  return b;
}

}  // namespace detail

/// Linear structure of the minimum-effort problem for fixed durations.
///
/// Per coordinate, the knot values (derivatives 0..s-1 at the M+1 segment
/// joints) split into fixed entries (all positions plus the boundary
/// derivative stacks) and free entries (interior derivatives 1..s-1). The
/// optimal free entries are a linear function of the fixed ones, obtained
/// from the block-banded normal equations.
///
/// Fixed vector layout: [p_0 .. p_M, start derivs 1..s-1, end derivs 1..s-1].
class MinEffortSystem {
 public:
  MinEffortSystem(const Vec& tau, int s) : tau_(tau), s_(s) {
    if (s < 1) throw Error("min-effort: order must be >= 1");
    M_ = static_cast<int>(tau.size());
    if (M_ < 1) throw Error("min-effort: need at least one segment");
    if (!((tau.array() > 0.0).all()) || !tau.allFinite())
      throw Error("min-effort: singular system (non-positive duration)");

    const int nk = (M_ + 1) * s_;
    n_fixed_ = M_ + 1 + 2 * (s_ - 1);
    n_free_ = (M_ - 1) * (s_ - 1);
    slot_.assign(nk, {false, 0});
    for (int m = 0; m <= M_; ++m) slot_[m * s_] = {false, m};
    for (int r = 1; r < s_; ++r) {
      slot_[r] = {false, M_ + 1 + (r - 1)};
      slot_[M_ * s_ + r] = {false, M_ + 1 + (s_ - 1) + (r - 1)};
    }
    int f = 0;
    for (int m = 1; m < M_; ++m)
      for (int r = 1; r < s_; ++r) slot_[m * s_ + r] = {true, f++};

    hinv_.reserve(M_);
    seg_hess_.reserve(M_);
    for (int i = 0; i < M_; ++i) {
      hinv_.push_back(detail::hermite_inverse(tau_(i), s_));
      seg_hess_.push_back(hinv_.back().transpose() * detail::effort_gram(tau_(i), s_) * hinv_.back());
    }

    // Assemble the partitioned Hessian of sum_i e_i^T H_i e_i.
    std::vector<Eigen::Triplet<double>> ff;
    Mat fx = Mat::Zero(n_free_, n_fixed_);
    Mat xx = Mat::Zero(n_fixed_, n_fixed_);
    for (int i = 0; i < M_; ++i) {
      const Mat& H = seg_hess_[i];
      for (int a = 0; a < 2 * s_; ++a)
        for (int b = 0; b < 2 * s_; ++b) {
          const auto sa = slot_[knot_index(i, a)];
          const auto sb = slot_[knot_index(i, b)];
          if (sa.free && sb.free)
            ff.emplace_back(sa.idx, sb.idx, H(a, b));
          else if (sa.free)
            fx(sa.idx, sb.idx) += H(a, b);
          else if (!sb.free)
            xx(sa.idx, sb.idx) += H(a, b);
        }
    }
    free_map_ = Mat::Zero(n_free_, n_fixed_);
    free_hessian_ = Mat::Zero(n_free_, n_free_);
    if (n_free_ > 0) {
      Eigen::SparseMatrix<double> Gff(n_free_, n_free_);
      Gff.setFromTriplets(ff.begin(), ff.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(Gff);
      if (ldlt.info() != Eigen::Success) throw Error("min-effort: singular system");
      free_map_ = ldlt.solve(Mat(-fx));
      if (ldlt.info() != Eigen::Success || !free_map_.allFinite())
        throw Error("min-effort: singular system");
      free_hessian_ = Mat(Gff);
    }
    reduced_ = xx + fx.transpose() * free_map_;
    reduced_ = 0.5 * (reduced_ + reduced_.transpose());
  }

  int segments() const { return M_; }
  int order() const { return s_; }
  int fixed_size() const { return n_fixed_; }
  int free_size() const { return n_free_; }
  const Vec& tau() const { return tau_; }

  /// Free = free_map() * fixed at the optimum.
  const Mat& free_map() const { return free_map_; }
  /// Hessian block of the free interior derivatives (cost = f^T H f + ...).
  const Mat& free_hessian() const { return free_hessian_; }
  /// Optimal cost per coordinate is x^T reduced_hessian() x.
  const Mat& reduced_hessian() const { return reduced_; }

  /// Fixed block (n_fixed x n) from waypoints and boundary stacks.
  Mat fixed_values(const std::vector<Vec>& waypoints, const BoundaryState& bc0,
                   const BoundaryState& bcf) const {
    if (static_cast<int>(waypoints.size()) != M_ + 1)
      throw Error("min-effort: waypoint count must equal segments + 1");
    const auto n = waypoints.front().size();
    Mat X = Mat::Zero(n_fixed_, n);
    for (int m = 0; m <= M_; ++m) X.row(m) = waypoints[m].transpose();
    for (int r = 1; r < s_; ++r) {
      if (static_cast<int>(bc0.derivatives.size()) >= r) X.row(M_ + r) = bc0.derivatives[r - 1].transpose();
      if (static_cast<int>(bcf.derivatives.size()) >= r)
        X.row(M_ + (s_ - 1) + r) = bcf.derivatives[r - 1].transpose();
    }
    return X;
  }

  /// Knot values ((M+1)s x n) given fixed and free blocks.
  Mat knot_values(const Mat& fixed, const Mat& free) const {
    Mat K(static_cast<Eigen::Index>(slot_.size()), fixed.cols());
    for (std::size_t k = 0; k < slot_.size(); ++k)
      K.row(k) = slot_[k].free ? free.row(slot_[k].idx) : fixed.row(slot_[k].idx);
    return K;
  }

  PiecewiseTrajectory build(const Mat& knots) const {
    PiecewiseTrajectory tr;
    tr.order = s_;
    tr.tau = tau_;
    const auto n = knots.cols();
    for (int i = 0; i < M_; ++i) {
      Mat ends(2 * s_, n);
      for (int a = 0; a < 2 * s_; ++a) ends.row(a) = knots.row(knot_index(i, a));
      tr.coeffs.push_back((hinv_[i] * ends).transpose());
    }
    return tr;
  }

  PiecewiseTrajectory solve(const Mat& fixed) const {
    return build(knot_values(fixed, free_map_ * fixed));
  }

  /// Local sample times of segment i: midpoint when count == 1, otherwise
  /// count evenly spaced points including both ends.
  std::vector<double> sample_times(int i, int count) const {
    std::vector<double> t;
    if (count <= 1) return {0.5 * tau_(i)};
    for (int k = 0; k < count; ++k) t.push_back(tau_(i) * k / (count - 1));
    return t;
  }

  /// Position samples as a linear function of the knot values:
  /// rows ordered (segment, sample); returns W_fixed and W_free.
  void sample_maps(int count, Mat& w_fixed, Mat& w_free) const {
    const int rows = M_ * std::max(1, count);
    w_fixed = Mat::Zero(rows, n_fixed_);
    w_free = Mat::Zero(rows, n_free_);
    int row = 0;
    for (int i = 0; i < M_; ++i)
      for (double t : sample_times(i, count)) {
        const Vec w = hinv_[i].transpose() * detail::monomials(t, 2 * s_);
        for (int a = 0; a < 2 * s_; ++a) {
          const auto sl = slot_[knot_index(i, a)];
          (sl.free ? w_free : w_fixed)(row, sl.idx) += w(a);
        }
        ++row;
      }
  }

 private:
  struct Slot {
    bool free;
    int idx;
  };
  int knot_index(int seg, int a) const { return (a < s_) ? seg * s_ + a : (seg + 1) * s_ + (a - s_); }

  Vec tau_;
  int s_ = 3;
  int M_ = 0;
  int n_fixed_ = 0;
  int n_free_ = 0;
  std::vector<Slot> slot_;
  std::vector<Mat> hinv_;
  std::vector<Mat> seg_hess_;
  Mat free_map_;
  Mat free_hessian_;
  Mat reduced_;
};

/// Uniform-speed durations, floored at 1 ms.
inline Vec time_allocation(const Polyline& path, double v_nom) {
  if (!(v_nom > 0.0)) throw Error("time_allocation: v_nom must be positive");
  Vec tau(path.segments());
  for (int i = 0; i < path.segments(); ++i)
    tau(i) = std::max(1e-3, (path.points[i + 1] - path.points[i]).norm() / v_nom);
  return tau;
}

/// Rest-to-rest durations: joint i is reached at the time a minimum-jerk
/// rest-to-rest motion along the whole path covers the arc length up to
/// p_i, with total time path_length / v_nom. Short segments next to the
/// fixed ends get the extra time that starting or stopping needs.
inline Vec profile_time_allocation(const Polyline& p, double v_nom) {
  if (!(v_nom > 0.0)) throw Error("profile_time_allocation: v_nom must be positive");
  const int M = p.segments();
  Vec tau(M);
  const double L = p.length();
  if (!(L > 0.0)) return Vec::Constant(M, 1e-3);
  const double T = L / v_nom;
  auto inverse_profile = [](double frac) {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double u = 0.5 * (lo + hi);
      (u * u * u * (10.0 - 15.0 * u + 6.0 * u * u) < frac ? lo : hi) = u;
    }
    return 0.5 * (lo + hi);
  };
  double arc = 0.0, prev_u = 0.0;
  for (int i = 0; i < M; ++i) {
    arc += (p.points[i + 1] - p.points[i]).norm();
    const double u = i + 1 == M ? 1.0 : inverse_profile(std::min(1.0, arc / L));
    tau(i) = std::max(1e-3, T * (u - prev_u));
    prev_u = u;
  }
  return tau;
}

/// Unique minimizer of the integral of ||sigma^(s)||^2 through the waypoints
/// with the given boundary derivative stacks and C^{s-1} joints.
inline PiecewiseTrajectory solve_min_effort(const Polyline& waypoints, const Vec& tau,
                                            const BoundaryState& bc0, const BoundaryState& bcf,
                                            int s = 3) {
  if (waypoints.segments() != tau.size())
    throw Error("solve_min_effort: durations must match segment count");
  MinEffortSystem sys(tau, s);
  return sys.solve(sys.fixed_values(waypoints.points, bc0, bcf));
}

/// Exact integral of ||sigma^(s)(t)||^2 via coefficient convolution.
inline double control_cost(const PiecewiseTrajectory& tr) {
  double total = 0.0;
  for (int i = 0; i < tr.segments(); ++i) {
    const double T = tr.tau(i);
    for (int c = 0; c < tr.coeffs[i].rows(); ++c) {
      const Vec d = detail::derive(tr.coeffs[i].row(c).transpose(), tr.order);
      const int m = static_cast<int>(d.size());
      Vec sq = Vec::Zero(2 * m - 1);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) sq(a + b) += d(a) * d(b);
      double tp = T;
      for (int k = 0; k < sq.size(); ++k) {
        total += sq(k) * tp / (k + 1);
        tp *= T;
      }
    }
  }
  return total;
}

/// Derivative `deriv` of the trajectory at global time t in [0, T].
inline Vec eval(const PiecewiseTrajectory& tr, double t, int deriv = 0) {
  const double T = tr.total_time();
  if (tr.segments() == 0) throw Error("eval: empty trajectory");
  if (t < -1e-12 || t > T + 1e-12 || !std::isfinite(t)) throw Error("eval: time outside [0, T]");
  t = std::clamp(t, 0.0, T);
  int i = 0;
  double start = 0.0;
  while (i + 1 < tr.segments() && t > start + tr.tau(i)) {
    start += tr.tau(i);
    ++i;
  }
  const double local = std::min(t - start, tr.tau(i));
  Vec out(tr.dim());
  for (int c = 0; c < tr.dim(); ++c)
    out(c) = detail::horner(detail::derive(tr.coeffs[i].row(c).transpose(), deriv), local);
  return out;
}

/// Evaluates segment i at local time t.
inline Vec eval_segment(const PiecewiseTrajectory& tr, int i, double t, int deriv = 0) {
  Vec out(tr.dim());
  for (int c = 0; c < tr.dim(); ++c)
    out(c) = detail::horner(detail::derive(tr.coeffs[i].row(c).transpose(), deriv), t);
  return out;
}

struct CorridorViolation {
  int segment = 0;
  double t = 0.0;  ///< local time within the segment
  int row = 0;
  double violation = 0.0;
};

struct CorridorReport {
  std::vector<double> segment_max;  ///< max_t max_j (a_j . sigma_i(t) - b_j)
  std::vector<CorridorViolation> violations;  ///< worst sample per offending segment

  bool ok() const { return violations.empty(); }
  double worst() const {
    return segment_max.empty() ? -std::numeric_limits<double>::infinity()
                               : *std::max_element(segment_max.begin(), segment_max.end());
  }
};

/// Samples each segment against its polytope. Midpoint only when n_samples == 1,
/// otherwise evenly spaced including both ends. Segments whose worst sample
/// exceeds `tol` are reported.
inline CorridorReport corridor_check(const PiecewiseTrajectory& tr, const std::vector<Polytope>& sfc,
                                     int n_samples, double tol = 0.0) {
  if (static_cast<int>(sfc.size()) != tr.segments())
    throw Error("corridor_check: polytope count must match segment count");
  CorridorReport rep;
  for (int i = 0; i < tr.segments(); ++i) {
    CorridorViolation worst{i, 0.0, 0, -std::numeric_limits<double>::infinity()};
    const int count = std::max(1, n_samples);
    for (int k = 0; k < count; ++k) {
      const double t = count == 1 ? 0.5 * tr.tau(i) : tr.tau(i) * k / (count - 1);
      const Vec x = eval_segment(tr, i, t);
      const Vec v = sfc[i].A * x - sfc[i].b;
      Eigen::Index row = 0;
      const double mv = v.size() ? v.maxCoeff(&row) : -std::numeric_limits<double>::infinity();
      if (mv > worst.violation) worst = {i, t, static_cast<int>(row), mv};
    }
    rep.segment_max.push_back(worst.violation);
    if (worst.violation > tol) rep.violations.push_back(worst);
  }
  return rep;
}

/// Stretches time by `factor`; the geometric image is unchanged and the k-th
/// derivative scales by factor^{-k}.
inline PiecewiseTrajectory time_rescale(const PiecewiseTrajectory& tr, double factor) {
  if (!(factor > 0.0)) throw Error("time_rescale: factor must be positive");
  PiecewiseTrajectory out = tr;
  out.tau = tr.tau * factor;
  for (auto& c : out.coeffs) {
    double scale = 1.0;
    for (int j = 0; j < c.cols(); ++j) {
      c.col(j) *= scale;
      scale /= factor;
    }
  }
  return out;
}

struct CorridorSolveResult {
  PiecewiseTrajectory trajectory;
  double cost = 0.0;
  double worst_violation = 0.0;   ///< at the checked sample density
  double blend = 1.0;             ///< fraction of the penalized step kept (1 = no blending)
  bool unconstrained_feasible = false;
};

namespace detail {

/// Corridor-constrained quadratic in matrix unknowns Z (m x n):
/// cost = tr((Z - Zs)^T H (Z - Zs)) + const, sample positions C + B Z with
/// sample row r in polytope sfc[r / per]. Z0 must be feasible; returns a Z
/// whose worst sampled violation is at most that of Z0 or `tol`.
struct CorridorQP {
  const Mat& H;
  const Mat& Zs;
  const Mat& Z0;
  const Mat& B;
  const Mat& C;
  const std::vector<Polytope>& sfc;
  int per;
  double tol;

  double worst(const Mat& Z) const {
    const Mat pos = C + B * Z;
    double w = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < pos.rows(); ++r) w = std::max(w, sfc[r / per].max_violation(pos.row(r).transpose()));
    return w;
  }

  Mat solve(bool& unconstrained_feasible, double& blend) const {
    blend = 1.0;
    unconstrained_feasible = worst(Zs) <= tol;
    if (unconstrained_feasible || Zs.rows() == 0) return Zs;
    const auto m = Zs.rows(), n = Zs.cols();
    const double margin = 0.25 * tol;
    const double scale = std::max(1.0, ((Z0 - Zs).transpose() * H * (Z0 - Zs)).trace());
    auto objective_for = [&](double mu) {
      return [&, mu](const Vec& v, Vec& g) {
        const Eigen::Map<const Mat> Z(v.data(), m, n);
        const Mat D = Z - Zs;
        const Mat HD = H * D;
        double f = (D.transpose() * HD).trace();
        Mat G = 2.0 * HD;
        const Mat pos = C + B * Z;
        Mat dpos = Mat::Zero(pos.rows(), n);
        for (int r = 0; r < pos.rows(); ++r) {
          const Polytope& P = sfc[r / per];
          const Vec x = pos.row(r).transpose();
          for (int j = 0; j < P.rows(); ++j) {
            const double viol = P.A.row(j).dot(x) - P.b(j) + margin;
            if (viol > 0.0) {
              f += mu * viol * viol;
              dpos.row(r) += 2.0 * mu * viol * P.A.row(j);
            }
          }
        }
        G += B.transpose() * dpos;
        g = Eigen::Map<const Vec>(G.data(), G.size());
        return f;
      };
    };
    Vec v = Eigen::Map<const Vec>(Z0.data(), Z0.size());
    for (double mu_rel : {1e2, 1e4, 1e6}) {
      MinimizeOptions opts;
      opts.max_iters = 300;
      opts.grad_tol = 1e-9 * scale;
      opts.f_rel_tol = 1e-12;
      v = minimize(objective_for(mu_rel * scale), v, opts).x;
    }
    Mat Z = Eigen::Map<const Mat>(v.data(), m, n);
    // Pull back toward the feasible Z0 until the samples are inside.
    if (worst(Z) > tol) {
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (worst(Z0 + mid * (Z - Z0)) <= tol ? lo : hi) = mid;
      }
      blend = lo;
      Z = Z0 + lo * (Z - Z0);
    }
    return Z;
  }
};

}  // namespace detail

/// Rest-to-rest minimum-effort trajectory through fixed waypoints whose
/// samples stay inside the per-segment polytopes.
///
/// The unconstrained optimum is tried first. Otherwise the interior
/// derivatives are re-optimized with escalating hinge penalties on the
/// sampled corridor rows, then scaled toward zero until the sampled
/// violation is at most `tol`. Zero interior derivatives give straight
/// segments between waypoints, which lie in their polytope whenever each
/// waypoint lies in its adjacent polytopes.
inline CorridorSolveResult solve_min_effort_in_corridor(const Polyline& waypoints, const Vec& tau,
                                                        const std::vector<Polytope>& sfc, int s,
                                                        int samples_per_segment, double tol) {
  const int M = waypoints.segments();
  if (static_cast<int>(sfc.size()) != M) throw Error("corridor solve: polytope count mismatch");
  const int n = static_cast<int>(waypoints.points.front().size());
  MinEffortSystem sys(tau, s);
  const Mat X = sys.fixed_values(waypoints.points, BoundaryState::rest(n, s), BoundaryState::rest(n, s));
  Mat Wx, Wf;
  sys.sample_maps(samples_per_segment, Wx, Wf);
  const Mat Zs = sys.free_map() * X;
  const Mat Z0 = Mat::Zero(sys.free_size(), n);
  const Mat C = Wx * X;
  const detail::CorridorQP qp{sys.free_hessian(), Zs, Z0, Wf, C, sfc, std::max(1, samples_per_segment), tol};

  CorridorSolveResult out;
  const Mat F = qp.solve(out.unconstrained_feasible, out.blend);
  out.worst_violation = qp.worst(F);
  out.trajectory = sys.build(sys.knot_values(X, F));
  out.cost = control_cost(out.trajectory);
  return out;
}

}  // namespace sfc
