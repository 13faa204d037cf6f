#pragma once

// Voxel occupancy maps: SFCMAP text IO, robot-radius inflation, obstacle
// point extraction, segment traversal and a seeded synthetic generator.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sfc/error.hpp"
#include "sfc/geom.hpp"

namespace sfc {

struct VoxelMap {
  std::array<int, 3> dims{1, 1, 1};
  double resolution = 0.1;
  Vec origin = Vec::Zero(3);
  /// x-fastest, then y, then z.
  std::vector<std::uint8_t> occupancy = std::vector<std::uint8_t>(1, 0);

  VoxelMap() = default;
  VoxelMap(std::array<int, 3> dims_, double res, Vec origin_)
      : dims(dims_), resolution(res), origin(std::move(origin_)),
        occupancy(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2], 0) {}

  std::size_t size() const { return occupancy.size(); }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
  }

  std::array<int, 3> cell(std::size_t idx) const {
    const int i = static_cast<int>(idx % dims[0]);
    const int j = static_cast<int>((idx / dims[0]) % dims[1]);
    const int k = static_cast<int>(idx / (static_cast<std::size_t>(dims[0]) * dims[1]));
    return {i, j, k};
  }

  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }

  bool occupied(int i, int j, int k) const { return occupancy[index(i, j, k)] != 0; }
  void set(int i, int j, int k, bool v) { occupancy[index(i, j, k)] = v ? 1 : 0; }

  Vec center(int i, int j, int k) const {
    Vec c(3);
    c << origin(0) + (i + 0.5) * resolution, origin(1) + (j + 0.5) * resolution,
        origin(2) + (k + 0.5) * resolution;
    return c;
  }
  Vec center(std::size_t idx) const {
    const auto c = cell(idx);
    return center(c[0], c[1], c[2]);
  }

  Box extent() const {
    Vec hi(3);
    for (int a = 0; a < 3; ++a) hi(a) = origin(a) + dims[a] * resolution;
    return {origin, hi};
  }

  /// Containing cell of a world point; points on the upper face map to the last cell.
  std::array<int, 3> cell_of(const Vec& p) const {
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) {
      const int v = static_cast<int>(std::floor((p(a) - origin(a)) / resolution));
      c[a] = std::clamp(v, 0, dims[a] - 1);
    }
    return c;
  }

  bool contains(const Vec& p) const { return extent().contains(p); }

  bool occupied_at(const Vec& p) const {
    const auto c = cell_of(p);
    return occupied(c[0], c[1], c[2]);
  }

  std::size_t occupied_count() const {
    std::size_t n = 0;
    for (auto v : occupancy) n += v;
    return n;
  }

  bool operator==(const VoxelMap& o) const {
    return dims == o.dims && resolution == o.resolution && origin == o.origin &&
           occupancy == o.occupancy;
  }
};

/// Centers of occupied voxels. `cells` holds the matching linear voxel indices.
struct ObstacleCloud {
  std::vector<Vec> points;
  std::vector<std::size_t> cells;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& tok, const std::string& field) {
  double v = 0.0;
  auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size())
    throw ParseError("SFCMAP: invalid " + field + " value '" + tok + "'");
  return v;
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

}  // namespace detail

inline std::string serialize_voxel_map(const VoxelMap& m) {
  std::string s = "SFCMAP 1\n";
  s += "dims " + std::to_string(m.dims[0]) + " " + std::to_string(m.dims[1]) + " " +
       std::to_string(m.dims[2]) + "\n";
  s += "res " + detail::format_double(m.resolution) + "\n";
  s += "origin " + detail::format_double(m.origin(0)) + " " +
       detail::format_double(m.origin(1)) + " " + detail::format_double(m.origin(2)) + "\n";
  s.reserve(s.size() + m.size() + 1);
  for (auto v : m.occupancy) s.push_back(v ? '1' : '0');
  s.push_back('\n');
  return s;
}

inline VoxelMap parse_voxel_map(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  auto next = [&](const char* field) {
    if (!std::getline(is, line)) throw ParseError(std::string("SFCMAP: missing ") + field + " line");
    return detail::split_ws(line);
  };
  auto magic = next("header");
  if (magic.size() != 2 || magic[0] != "SFCMAP" || magic[1] != "1")
    throw ParseError("SFCMAP: malformed header (expected 'SFCMAP 1')");

  auto dims_tok = next("dims");
  if (dims_tok.size() != 4 || dims_tok[0] != "dims") throw ParseError("SFCMAP: malformed dims line");
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) {
    long v = 0;
    const auto& t = dims_tok[a + 1];
    auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc{} || r.ptr != t.data() + t.size() || v < 1 || v > (1 << 20))
      throw ParseError("SFCMAP: invalid dims value '" + t + "'");
    dims[a] = static_cast<int>(v);
  }

  auto res_tok = next("res");
  if (res_tok.size() != 2 || res_tok[0] != "res") throw ParseError("SFCMAP: malformed res line");
  const double res = detail::parse_double(res_tok[1], "res");
  if (!(res > 0.0) || !std::isfinite(res)) throw ParseError("SFCMAP: res must be positive");

  auto org_tok = next("origin");
  if (org_tok.size() != 4 || org_tok[0] != "origin")
    throw ParseError("SFCMAP: malformed origin line");
  Vec origin(3);
  for (int a = 0; a < 3; ++a) origin(a) = detail::parse_double(org_tok[a + 1], "origin");

  VoxelMap m(dims, res, origin);
  if (!std::getline(is, line)) line.clear();
  if (line.size() != m.size())
    throw ParseError("SFCMAP: data length mismatch (expected " + std::to_string(m.size()) +
                     " cells, got " + std::to_string(line.size()) + ")");
  for (std::size_t c = 0; c < line.size(); ++c) {
    if (line[c] != '0' && line[c] != '1')
      throw ParseError("SFCMAP: invalid data character at cell " + std::to_string(c));
    m.occupancy[c] = line[c] == '1';
  }
  std::string rest((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (!rest.empty()) throw ParseError("SFCMAP: trailing content after data line");
  return m;
}

inline VoxelMap load_voxel_map(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open map file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_voxel_map(text);
}

inline void save_voxel_map(const VoxelMap& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot write map file '" + path + "'");
  const auto s = serialize_voxel_map(m);
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!f) throw ParseError("write failed for '" + path + "'");
}

/// Occupies every voxel whose center lies within `radius` of an occupied
/// voxel center.
inline VoxelMap inflate_map(const VoxelMap& m, double radius) {
  if (radius < 0.0) throw Error("inflate_map: negative radius");
  const int reach = static_cast<int>(std::floor(radius / m.resolution + 1e-9));
  if (reach == 0) return m;
  const double r2 = (radius / m.resolution) * (radius / m.resolution) + 1e-9;
  std::vector<std::array<int, 3>> offsets;
  for (int dk = -reach; dk <= reach; ++dk)
    for (int dj = -reach; dj <= reach; ++dj)
      for (int di = -reach; di <= reach; ++di)
        if (di * di + dj * dj + dk * dk <= r2 && (di | dj | dk) != 0) offsets.push_back({di, dj, dk});

  VoxelMap out = m;
  for (int k = 0; k < m.dims[2]; ++k)
    for (int j = 0; j < m.dims[1]; ++j)
      for (int i = 0; i < m.dims[0]; ++i) {
        if (!m.occupied(i, j, k)) continue;
        for (const auto& o : offsets) {
          const int a = i + o[0], b = j + o[1], c = k + o[2];
          if (m.in_bounds(a, b, c)) out.set(a, b, c, true);
        }
      }
  return out;
}

/// Occupied voxel centers inside `window` (inclusive), x-fastest order.
inline ObstacleCloud occupied_points(const VoxelMap& m, const Box& window) {
  ObstacleCloud cloud;
  std::array<int, 3> lo{}, hi{};
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::max(0, static_cast<int>(std::ceil((window.lo(a) - m.origin(a)) / m.resolution - 0.5)));
    hi[a] = std::min(m.dims[a] - 1,
                     static_cast<int>(std::floor((window.hi(a) - m.origin(a)) / m.resolution - 0.5)));
    if (hi[a] < lo[a]) return cloud;
  }
  for (int k = lo[2]; k <= hi[2]; ++k)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int i = lo[0]; i <= hi[0]; ++i) {
        if (!m.occupied(i, j, k)) continue;
        Vec c = m.center(i, j, k);
        if (!window.contains(c)) continue;
        cloud.points.push_back(std::move(c));
        cloud.cells.push_back(m.index(i, j, k));
      }
  return cloud;
}

/// True iff every voxel touched by segment ab is free (supercover walk: when
/// the segment passes exactly through an edge or corner, all voxels sharing it
/// are checked).
inline bool segment_free(const VoxelMap& m, const Vec& a, const Vec& b) {
  if (!m.contains(a) || !m.contains(b)) throw Error("segment_free: endpoint outside map extent");
  auto cur = m.cell_of(a);
  const auto last = m.cell_of(b);
  if (m.occupied(cur[0], cur[1], cur[2])) return false;
  const Vec dir = b - a;
  std::array<int, 3> step{};
  std::array<double, 3> t_max{}, t_delta{};
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (int ax = 0; ax < 3; ++ax) {
    if (dir(ax) > 0) {
      step[ax] = 1;
      const double boundary = m.origin(ax) + (cur[ax] + 1) * m.resolution;
      t_max[ax] = (boundary - a(ax)) / dir(ax);
      t_delta[ax] = m.resolution / dir(ax);
    } else if (dir(ax) < 0) {
      step[ax] = -1;
      const double boundary = m.origin(ax) + cur[ax] * m.resolution;
      t_max[ax] = (boundary - a(ax)) / dir(ax);
      t_delta[ax] = -m.resolution / dir(ax);
    } else {
      t_max[ax] = inf;
      t_delta[ax] = inf;
    }
  }
  constexpr double tie = 1e-10;
  const int max_steps = m.dims[0] + m.dims[1] + m.dims[2] + 3;
  for (int s = 0; s < max_steps && cur != last; ++s) {
    const double t = std::min({t_max[0], t_max[1], t_max[2]});
    if (t > 1.0 + tie) break;
    std::array<bool, 3> moves{};
    int n_moves = 0;
    for (int ax = 0; ax < 3; ++ax) {
      moves[ax] = t_max[ax] - t <= tie && step[ax] != 0;
      n_moves += moves[ax];
    }
    if (n_moves > 1) {
      // Crossing an edge or a corner: check every partial step as well.
      for (int mask = 1; mask < 7; ++mask) {
        bool subset = true;
        int bits = 0;
        for (int ax = 0; ax < 3; ++ax)
          if (mask & (1 << ax)) {
            subset = subset && moves[ax];
            ++bits;
          }
        if (!subset || bits == n_moves) continue;
        std::array<int, 3> c = cur;
        for (int ax = 0; ax < 3; ++ax)
          if (mask & (1 << ax)) c[ax] += step[ax];
        if (m.in_bounds(c[0], c[1], c[2]) && m.occupied(c[0], c[1], c[2])) return false;
      }
    }
    for (int ax = 0; ax < 3; ++ax)
      if (moves[ax]) {
        cur[ax] += step[ax];
        t_max[ax] += t_delta[ax];
      }
    if (!m.in_bounds(cur[0], cur[1], cur[2])) break;
    if (m.occupied(cur[0], cur[1], cur[2])) return false;
  }
  return !m.occupied(last[0], last[1], last[2]);
}

struct EnvParams {
  Vec size = (Vec(3) << 20.0, 20.0, 5.0).finished();
  double resolution = 0.1;
  int obstacle_count = 30;
  /// Fraction of boxes; the rest are vertical cylinders.
  double box_fraction = 0.5;
  double min_extent = 0.5;
  double max_extent = 2.5;
  double clearance = 1.0;
  std::uint64_t seed = 0;
  /// World points (typically start/goal) whose clearance sphere is forced free.
  std::vector<Vec> keep_free;
};

/// Seeded random obstacle field. Boxes and vertical cylinders are rasterized
/// by voxel-center inclusion; clearance spheres around `keep_free` are cleared.
inline VoxelMap gen_random_env(const EnvParams& p) {
  if (p.size.size() != 3 || (p.size.array() <= 0.0).any() || !(p.resolution > 0.0))
    throw Error("gen_random_env: extents and resolution must be positive");
  if (p.box_fraction < 0.0 || p.box_fraction > 1.0)
    throw Error("gen_random_env: box fraction must lie in [0, 1]");
  if (!(p.min_extent > 0.0) || p.max_extent < p.min_extent)
    throw Error("gen_random_env: invalid obstacle extent range");
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a)
    dims[a] = std::max(1, static_cast<int>(std::lround(p.size(a) / p.resolution)));
  VoxelMap m(dims, p.resolution, Vec::Zero(3));

  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  for (int o = 0; o < p.obstacle_count; ++o) {
    const bool is_box = unit(rng) < p.box_fraction;
    Vec c(3);
    for (int a = 0; a < 3; ++a) c(a) = uni(0.0, p.size(a));
    const double height = uni(p.min_extent, std::max(p.min_extent, p.size(2)));
    Vec half(3);
    if (is_box) {
      half << 0.5 * uni(p.min_extent, p.max_extent), 0.5 * uni(p.min_extent, p.max_extent),
          0.5 * height;
    } else {
      const double r = 0.5 * uni(p.min_extent, p.max_extent);
      half << r, r, 0.5 * height;
    }
    std::array<int, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(0, static_cast<int>(std::floor((c(a) - half(a)) / p.resolution)));
      hi[a] = std::min(dims[a] - 1, static_cast<int>(std::ceil((c(a) + half(a)) / p.resolution)));
    }
    for (int k = lo[2]; k <= hi[2]; ++k)
      for (int j = lo[1]; j <= hi[1]; ++j)
        for (int i = lo[0]; i <= hi[0]; ++i) {
          const Vec q = m.center(i, j, k);
          const Vec dq = (q - c).cwiseAbs();
          bool inside = dq(2) <= half(2);
          if (is_box)
            inside = inside && dq(0) <= half(0) && dq(1) <= half(1);
          else
            inside = inside && dq(0) * dq(0) + dq(1) * dq(1) <= half(0) * half(0);
          if (inside) m.set(i, j, k, true);
        }
  }

  for (const auto& f : p.keep_free) {
    const int reach = static_cast<int>(std::ceil(p.clearance / p.resolution)) + 1;
    const auto fc = m.cell_of(f);
    for (int k = fc[2] - reach; k <= fc[2] + reach; ++k)
      for (int j = fc[1] - reach; j <= fc[1] + reach; ++j)
        for (int i = fc[0] - reach; i <= fc[0] + reach; ++i)
          if (m.in_bounds(i, j, k) && (m.center(i, j, k) - f).norm() <= p.clearance)
            m.set(i, j, k, false);
  }
  return m;
}

}  // namespace sfc
