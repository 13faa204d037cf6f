#pragma once

// Core geometric types shared by the corridor pipeline: Cholesky-form
// ellipsoids, H-representation polytopes, polylines and axis-aligned boxes.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "sfc/error.hpp"

namespace sfc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// E(L, d) = { d + L u : ||u|| <= 1 }, L lower triangular with a strictly
/// positive diagonal. The shape matrix is L L^T, so membership reads
/// ||L^{-1}(x - d)|| <= 1 and the support value along a is ||L^T a|| + a.d.
struct Ellipsoid {
  Mat L;
  Vec d;

  Ellipsoid() = default;
  Ellipsoid(Mat L_, Vec d_) : L(std::move(L_)), d(std::move(d_)) {}

  int dim() const { return static_cast<int>(d.size()); }

  bool valid(double tol = 1e-12) const {
    if (L.rows() != d.size() || L.cols() != d.size()) return false;
    for (int r = 0; r < L.rows(); ++r) {
      if (!(L(r, r) > tol)) return false;
      for (int c = r + 1; c < L.cols(); ++c)
        if (L(r, c) != 0.0) return false;
    }
    return L.allFinite() && d.allFinite();
  }

  /// Maps x into unit-ball coordinates: y = L^{-1}(x - d).
  Vec to_unit(const Vec& x) const {
    return L.triangularView<Eigen::Lower>().solve(x - d);
  }

  double log_det() const { return L.diagonal().array().log().sum(); }

  static Ellipsoid ball(const Vec& center, double radius) {
    const auto n = center.size();
    return {Mat::Identity(n, n) * radius, center};
  }
};

/// P(A, b) = { x : A x <= b } with unit-norm rows.
struct Polytope {
  Mat A;
  Vec b;

  int dim() const { return static_cast<int>(A.cols()); }
  int rows() const { return static_cast<int>(A.rows()); }

  /// max_j (a_j . x - b_j); non-positive inside.
  double max_violation(const Vec& x) const {
    if (A.rows() == 0) return -std::numeric_limits<double>::infinity();
    return (A * x - b).maxCoeff();
  }

  void add_row(const Vec& a, double offset) {
    const double nrm = a.norm();
    if (!(nrm > 0.0)) throw GeometryError("polytope row with zero normal");
    A.conservativeResize(A.rows() + 1, a.size());
    b.conservativeResize(b.size() + 1);
    A.row(A.rows() - 1) = a.transpose() / nrm;
    b(b.size() - 1) = offset / nrm;
  }
};

struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }

  double volume() const {
    double v = 1.0;
    for (int k = 0; k < lo.size(); ++k) v *= std::max(0.0, hi(k) - lo(k));
    return v;
  }

  bool empty() const { return (hi.array() <= lo.array()).any(); }

  bool contains(const Vec& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }

  Box intersected(const Box& o) const {
    return {lo.cwiseMax(o.lo), hi.cwiseMin(o.hi)};
  }

  /// The 2n axis faces as unit-normal half-spaces.
  Polytope faces() const {
    const int n = dim();
    Polytope P;
    P.A = Mat::Zero(2 * n, n);
    P.b = Vec::Zero(2 * n);
    for (int k = 0; k < n; ++k) {
      P.A(2 * k, k) = 1.0;
      P.b(2 * k) = hi(k);
      P.A(2 * k + 1, k) = -1.0;
      P.b(2 * k + 1) = -lo(k);
    }
    return P;
  }
};

struct Polyline {
  std::vector<Vec> points;

  Polyline() = default;
  explicit Polyline(std::vector<Vec> pts) : points(std::move(pts)) {}

  /// Number of segments M.
  int segments() const { return std::max(0, static_cast<int>(points.size()) - 1); }

  double length() const {
    double s = 0.0;
    for (int i = 1; i < static_cast<int>(points.size()); ++i)
      s += (points[i] - points[i - 1]).norm();
    return s;
  }

  bool valid(double min_sep = 1e-9) const {
    for (int i = 1; i < static_cast<int>(points.size()); ++i)
      if ((points[i] - points[i - 1]).norm() <= min_sep) return false;
    return true;
  }
};

/// h0(E, x) = ||L^{-1}(x - d)|| - 1; negative strictly inside.
inline double ellipsoid_residual(const Ellipsoid& E, const Vec& x) {
  return E.to_unit(x).norm() - 1.0;
}

/// g(v) = max(0, v)^2.
inline double hinge_sq(double v) {
  const double h = std::max(0.0, v);
  return h * h;
}

inline double hinge_sq_deriv(double v) { return 2.0 * std::max(0.0, v); }

inline bool polytope_contains(const Polytope& P, const Vec& x, double tol) {
  return P.max_violation(x) <= tol;
}

inline double unit_ball_volume(int n) {
  switch (n) {
    case 1: return 2.0;
    case 2: return std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi / 3.0;
    default:
      return std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0 + 1.0);
  }
}

inline double ellipsoid_volume(const Ellipsoid& E) {
  return unit_ball_volume(E.dim()) * E.L.diagonal().prod();
}

/// Seeded Monte Carlo estimate of vol(P) over a caller-supplied bounding box.
/// Standard error is O(box_volume / sqrt(n_samples)).
inline double polytope_volume_mc(const Polytope& P, const Box& box, long n_samples,
                                 std::uint64_t seed) {
  const double bv = box.volume();
  if (bv <= 0.0 || n_samples <= 0) return 0.0;
  const int n = box.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec extent = box.hi - box.lo;
  // Row-major copy so the early-exit row scan stays cache friendly.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> A = P.A;
  Vec x(n);
  long hits = 0;
  for (long s = 0; s < n_samples; ++s) {
    for (int k = 0; k < n; ++k) x(k) = box.lo(k) + extent(k) * unit(rng);
    bool inside = true;
    for (int j = 0; j < P.rows() && inside; ++j)
      inside = A.row(j).dot(x) <= P.b(j);
    if (inside) ++hits;
  }
  return bv * static_cast<double>(hits) / static_cast<double>(n_samples);
}

/// Row concatenation; no redundancy removal.
inline Polytope intersect(const Polytope& P1, const Polytope& P2) {
  if (P1.dim() != P2.dim() && P1.rows() > 0 && P2.rows() > 0)
    throw GeometryError("intersect: dimension mismatch");
  Polytope out;
  const int n = std::max(P1.dim(), P2.dim());
  out.A.resize(P1.rows() + P2.rows(), n);
  out.b.resize(P1.rows() + P2.rows());
  if (P1.rows() > 0) out.A.topRows(P1.rows()) = P1.A;
  if (P2.rows() > 0) out.A.bottomRows(P2.rows()) = P2.A;
  out.b << P1.b, P2.b;
  return out;
}

/// Axis-aligned bounding box of an ellipsoid: half-extent k = ||row_k(L)||.
inline Box bounding_box(const Ellipsoid& E) {
  const Vec half = E.L.rowwise().norm();
  return {E.d - half, E.d + half};
}

}  // namespace sfc
