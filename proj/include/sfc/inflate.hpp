#pragma once

// Polytope inflation around an ellipsoid: one pass of tangent separating
// hyperplanes against point obstacles inside a local window.

#include <algorithm>
#include <numeric>
#include <sstream>
#include <vector>

#include "sfc/env.hpp"
#include "sfc/error.hpp"
#include "sfc/geom.hpp"

namespace sfc {

struct InflateConfig {
  double local_range = 2.0;  ///< l, margin added around the ellipsoid's bounding box (m)
  Box world;                 ///< polytopes never leave this box
  double tol = 1e-9;
};

/// Bounding box of E grown by +-l, clipped to the world box (if set).
inline Box local_window(const Ellipsoid& E, double l, const Box& world = {}) {
  Box w = bounding_box(E);
  w.lo.array() -= l;
  w.hi.array() += l;
  if (world.lo.size() == w.lo.size()) w = w.intersected(world);
  return w;
}

struct Halfspace {
  Vec a;  ///< unit normal
  double b = 0.0;
};

/// Plane through q tangent to the scaled copy of E that touches q. Its normal
/// is the ellipsoid-metric gradient (L L^T)^{-1}(q - d), so E lies in a.x <= b.
inline Halfspace separating_halfspace(const Ellipsoid& E, const Vec& q) {
  const Vec z = E.to_unit(q);
  if (z.norm() <= 1e-14) throw GeometryError("seed in obstacle: obstacle point at ellipsoid center");
  Vec a = E.L.transpose().triangularView<Eigen::Upper>().solve(z);
  a.normalize();
  return {a, a.dot(q)};
}

/// Grows a polytope around E: starts from the window faces and, visiting the
/// window's obstacle points in ascending ellipsoid residual, adds the tangent
/// plane of every point not yet cut off.
inline Polytope inflate_polytope(const Ellipsoid& E, const ObstacleCloud& cloud, const InflateConfig& cfg) {
  const Box window = local_window(E, cfg.local_range, cfg.world);
  Polytope P = window.faces();

  std::vector<std::size_t> in_window;
  std::vector<double> residual;
  for (std::size_t k = 0; k < cloud.points.size(); ++k) {
    const Vec& q = cloud.points[k];
    if (!window.contains(q)) continue;
    const double h = ellipsoid_residual(E, q);
    if (h < -cfg.tol) {
      std::ostringstream os;
      os << "seed ellipsoid in collision with obstacle point (" << q.transpose() << ")";
      throw GeometryError(os.str());
    }
    in_window.push_back(k);
    residual.push_back(h);
  }
  std::vector<std::size_t> order(in_window.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return residual[a] < residual[b]; });

  // Planes are collected in a row-major buffer; the polytope is assembled once.
  std::vector<Halfspace> planes;
  const int n = E.dim();
  for (std::size_t o : order) {
    const Vec& q = cloud.points[in_window[o]];
    bool cut = false;
    for (const auto& h : planes)
      if (h.a.dot(q) - h.b >= 0.0) {
        cut = true;
        break;
      }
    // Points on the window boundary are already on the polytope boundary.
    if (!cut && P.max_violation(q) >= 0.0) cut = true;
    if (cut) continue;
    planes.push_back(separating_halfspace(E, q));
  }
  const int faces = P.rows();
  P.A.conservativeResize(faces + static_cast<int>(planes.size()), n);
  P.b.conservativeResize(faces + static_cast<int>(planes.size()));
  for (std::size_t k = 0; k < planes.size(); ++k) {
    P.A.row(faces + k) = planes[k].a.transpose();
    P.b(faces + k) = planes[k].b;
  }
  return P;
}

}  // namespace sfc
