#pragma once

// Per-segment ellipsoid subproblem: maximum-volume ellipsoid inside a
// polytope, softly attached to the segment's two waypoints through the
// scaled augmented-Lagrangian terms.

#include <array>
#include <cmath>
#include <vector>

#include "sfc/error.hpp"
#include "sfc/geom.hpp"
#include "sfc/lbfgs.hpp"
#include "sfc/polytope_ops.hpp"

namespace sfc {

/// Scaled multipliers of one segment: entry 0 pairs with p_i, entry 1 with p_{i-1}.
using SegmentDuals = Eigen::Vector2d;

struct EllipsoidOptions {
  double mu_corr = 1e3;   ///< weight of the hinge-squared corridor rows
  /// Extra solves with mu_corr multiplied by mu_growth, run while the
  /// penalized minimizer still leaves P.
  int mu_stages = 2;
  double mu_growth = 100.0;
  /// Keep p_prev / p_cur inside E (fixed path endpoints), provided the warm
  /// start already contains them.
  bool pin_prev = false;
  bool pin_cur = false;
  MinimizeOptions lbfgs = [] {
    MinimizeOptions o;
    o.max_iters = 300;
    o.grad_tol = 1e-9;
    o.f_rel_tol = 1e-12;
    return o;
  }();
};

namespace detail {

/// Packing: [d (n), then the lower triangle row by row with log on the diagonal].
inline Vec pack_ellipsoid(const Ellipsoid& E) {
  const int n = E.dim();
  Vec th(n + n * (n + 1) / 2);
  th.head(n) = E.d;
  int k = n;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c <= r; ++c) th(k++) = (r == c) ? std::log(E.L(r, r)) : E.L(r, c);
  return th;
}

inline Ellipsoid unpack_ellipsoid(const Vec& th, int n) {
  Ellipsoid E{Mat::Zero(n, n), th.head(n)};
  int k = n;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c <= r; ++c) E.L(r, c) = (r == c) ? std::exp(th(k++)) : th(k++);
  return E;
}

inline int ellipsoid_dim_from_params(int m) {
  for (int n = 1; n < 16; ++n)
    if (n + n * (n + 1) / 2 == m) return n;
  throw Error("invalid ellipsoid parameter vector");
}

/// Accumulates coef * dh0(E, p)/d(d, L) into (gd, gL); returns h0.
inline double residual_with_grad(const Ellipsoid& E, const Vec& p, double coef, Vec& gd, Mat& gL) {
  const Vec z = E.to_unit(p);
  const double nz = z.norm();
  if (coef != 0.0 && nz > 0.0) {
    const Vec u = E.L.transpose().triangularView<Eigen::Upper>().solve(z);
    gd -= coef * u / nz;
    gL -= coef * (u * z.transpose()) / nz;
  }
  return nz - 1.0;
}

}  // namespace detail

/// Attachment term (rho/2) || [g(h0(E,p_cur)), g(h0(E,p_prev))] + y ||^2.
inline double attachment_penalty(const Ellipsoid& E, const Vec& p_prev, const Vec& p_cur,
                                 const SegmentDuals& y, double rho) {
  const double e0 = hinge_sq(ellipsoid_residual(E, p_cur)) + y(0);
  const double e1 = hinge_sq(ellipsoid_residual(E, p_prev)) + y(1);
  return 0.5 * rho * (e0 * e0 + e1 * e1);
}

/// Objective of the ellipsoid subproblem in packed parameters, including the
/// hinge-squared corridor rows ||L^T a_j|| + a_j.d - b_j weighted by mu_corr.
inline double ellipsoid_objective(const Vec& theta, Vec& grad, const Polytope& P, const Vec& p_prev,
                                  const Vec& p_cur, const SegmentDuals& y, double w_v, double rho,
                                  double mu_corr) {
  const int n = detail::ellipsoid_dim_from_params(static_cast<int>(theta.size()));
  const Ellipsoid E = detail::unpack_ellipsoid(theta, n);
  Vec gd = Vec::Zero(n);
  Mat gL = Mat::Zero(n, n);

  double f = -w_v * E.log_det();

  // Waypoint attachment. Hinge-squared terms vanish (with their slope) inside.
  const std::array<const Vec*, 2> pts{&p_cur, &p_prev};
  double h[2];
  for (int e = 0; e < 2; ++e) {
    Vec tmp_d = Vec::Zero(n);
    Mat tmp_L = Mat::Zero(n, n);
    h[e] = detail::residual_with_grad(E, *pts[e], 1.0, tmp_d, tmp_L);
    const double val = hinge_sq(h[e]) + y(e);
    f += 0.5 * rho * val * val;
    const double coef = rho * val * hinge_sq_deriv(h[e]);
    if (coef != 0.0) {
      gd += coef * tmp_d;
      gL += coef * tmp_L;
    }
  }

  // Corridor rows.
  for (int j = 0; j < P.rows(); ++j) {
    const Vec a = P.A.row(j).transpose();
    const Vec w = E.L.transpose() * a;
    const double r = w.norm();
    const double v = r + a.dot(E.d) - P.b(j);
    if (v <= 0.0) continue;
    f += mu_corr * v * v;
    const double coef = 2.0 * mu_corr * v;
    gd += coef * a;
    if (r > 0.0) gL += coef * (a * w.transpose()) / r;
  }

  grad.resize(theta.size());
  grad.head(n) = gd;
  int k = n;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c <= r; ++c) {
      if (r == c)
        grad(k++) = gL(r, r) * E.L(r, r) - w_v;
      else
        grad(k++) = gL(r, c);
    }
  return f;
}

/// Largest violation of the inscribed-ellipsoid rows ||L^T a_j|| + a_j.d <= b_j.
inline double containment_violation(const Ellipsoid& E, const Polytope& P) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < P.rows(); ++j)
    worst = std::max(worst, (E.L.transpose() * P.A.row(j).transpose()).norm() +
                                P.A.row(j).dot(E.d) - P.b(j));
  return worst;
}

namespace detail {

inline double polytope_scale(const Polytope& P, const Ellipsoid& hint) {
  const int n = P.dim();
  Vec lo = Vec::Constant(n, std::numeric_limits<double>::infinity());
  Vec hi = -lo;
  for (int j = 0; j < P.rows(); ++j)
    for (int k = 0; k < n; ++k) {
      if (std::abs(P.A(j, k) - 1.0) < 1e-12) hi(k) = std::min(hi(k), P.b(j));
      if (std::abs(P.A(j, k) + 1.0) < 1e-12) lo(k) = std::max(lo(k), -P.b(j));
    }
  if (lo.allFinite() && hi.allFinite()) return (hi - lo).norm();
  return 2.0 * hint.L.rowwise().norm().norm() + 1.0;
}

/// Makes E a certified subset of P: keeps E if it already fits, otherwise
/// retracts the center toward `interior` and shrinks L uniformly.
inline Ellipsoid repair_into(const Ellipsoid& E, const Polytope& P, const Vec& interior) {
  if (containment_violation(E, P) <= 0.0) return E;
  std::vector<double> support(P.rows());
  for (int j = 0; j < P.rows(); ++j) support[j] = (E.L.transpose() * P.A.row(j).transpose()).norm();
  auto center = [&](double t) { Vec c = interior + t * (E.d - interior); return c; };
  auto scale_at = [&](double t) {
    const Vec c = center(t);
    double s = std::numeric_limits<double>::infinity();
    for (int j = 0; j < P.rows(); ++j)
      if (support[j] > 0.0) s = std::min(s, (P.b(j) - P.A.row(j).dot(c)) / support[j]);
    return s;
  };
  // scale_at is concave (minimum of affine functions): golden-section search.
  double lo = 0.0, hi = 1.0;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = scale_at(x1), f2 = scale_at(x2);
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      lo = x1; x1 = x2; f1 = f2; x2 = lo + g * (hi - lo); f2 = scale_at(x2);
    } else {
      hi = x2; x2 = x1; f2 = f1; x1 = hi - g * (hi - lo); f1 = scale_at(x1);
    }
  }
  double t = 0.5 * (lo + hi);
  double s = scale_at(t);
  if (scale_at(1.0) >= s) { t = 1.0; s = scale_at(1.0); }
  if (s >= 1.0) {
    // Full size fits: move the center as close to the optimized one as possible.
    double a = t, b = 1.0;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (a + b);
      (scale_at(mid) >= 1.0 ? a : b) = mid;
    }
    t = a;
    s = 1.0;
  }
  if (!(s > 0.0)) throw GeometryError("degenerate polytope: no room for an inscribed ellipsoid");
  s = std::min(1.0, s) * (1.0 - 1e-12);
  Ellipsoid out{E.L * s, center(t)};
  // Guard against rounding at the boundary.
  for (int it = 0; it < 5 && containment_violation(out, P) > 0.0; ++it) out.L *= (1.0 - 1e-9);
  return out;
}

}  // namespace detail

inline constexpr double kPinTol = 1e-9;

/// Maximum-volume ellipsoid inside P with waypoint-attachment penalties.
///
/// The penalized problem is solved over (d, off-diagonal L, log diag L) with
/// L-BFGS from the warm start E0, raising the corridor weight while the
/// minimizer overshoots P. The minimizer is then repaired into P (center
/// retraction plus uniform shrink) so that E is certified inside P. The
/// repaired result is returned only if its objective does not exceed the
/// repaired warm start's. Pinned points that the warm start contains stay
/// inside: the result is pulled back toward the warm start if needed.
inline Ellipsoid max_ellipsoid(const Polytope& P, const Vec& p_prev, const Vec& p_cur,
                               const SegmentDuals& y, const Ellipsoid& E0, double w_v, double rho,
                               const EllipsoidOptions& opts = {}) {
  if (!E0.valid()) throw GeometryError("max_ellipsoid: invalid warm start");
  const int n = E0.dim();
  const double scale = detail::polytope_scale(P, E0);
  const auto [interior, slack] = interior_point(P, E0.d, 1e-2 * scale);
  if (!(slack > 0.0)) throw GeometryError("degenerate polytope: empty interior");

  const Ellipsoid warm = detail::repair_into(E0, P, interior);
  Vec theta = detail::pack_ellipsoid(warm);
  double mu = opts.mu_corr;
  for (int stage = 0; stage <= opts.mu_stages; ++stage, mu *= opts.mu_growth) {
    auto fun = [&](const Vec& th, Vec& g) {
      return ellipsoid_objective(th, g, P, p_prev, p_cur, y, w_v, rho, mu);
    };
    theta = minimize(fun, theta, opts.lbfgs).x;
    if (containment_violation(detail::unpack_ellipsoid(theta, n), P) <= 1e-9) break;
  }
  Ellipsoid cand = detail::repair_into(detail::unpack_ellipsoid(theta, n), P, interior);

  // Both ends of the blend lie in P (containment is convex in (L, d)).
  auto pins_hold = [&](const Ellipsoid& E) {
    return (!opts.pin_prev || ellipsoid_residual(E, p_prev) <= kPinTol) &&
           (!opts.pin_cur || ellipsoid_residual(E, p_cur) <= kPinTol);
  };
  if (pins_hold(warm) && !pins_hold(cand)) {
    auto blend = [&](double t) { return Ellipsoid{warm.L + t * (cand.L - warm.L), warm.d + t * (cand.d - warm.d)}; };
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      (pins_hold(blend(mid)) ? lo : hi) = mid;
    }
    cand = blend(lo);
  }

  auto clean_objective = [&](const Ellipsoid& E) {
    return -w_v * E.log_det() + attachment_penalty(E, p_prev, p_cur, y, rho);
  };
  return clean_objective(cand) <= clean_objective(warm) ? cand : warm;
}

}  // namespace sfc
