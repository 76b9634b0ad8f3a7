#include "mpmtopo/particles.hpp"

#include <algorithm>
#include <cmath>

namespace mpmtopo {

bool Polygon::contains(const Vec2& p) const {
  const std::size_t n = pts.size();
  if (n < 3) return false;
  // Edge test first so boundary points count as inside.
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = pts[i];
    const Vec2& b = pts[(i + 1) % n];
    const Vec2 ab = b - a, ap = p - a;
    const double cross = ab.x() * ap.y() - ab.y() * ap.x();
    if (std::abs(cross) < 1e-14 * (1.0 + ab.norm() * ap.norm())) {
      const double t = ab.squaredNorm() > 0 ? ap.dot(ab) / ab.squaredNorm() : 0.0;
      if (t >= -1e-12 && t <= 1.0 + 1e-12) return true;
    }
  }
  // Crossing-number test.
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = pts[i];
    const Vec2& b = pts[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_int = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (p.x() < x_int) inside = !inside;
    }
  }
  return inside;
}

Vec2 Polygon::bbox_min() const {
  Vec2 m = pts.front();
  for (const Vec2& p : pts) m = m.cwiseMin(p);
  return m;
}

Vec2 Polygon::bbox_max() const {
  Vec2 m = pts.front();
  for (const Vec2& p : pts) m = m.cwiseMax(p);
  return m;
}

MaterialPointSet populate_regions(const std::vector<SeedRegion>& regions, const BackgroundGrid& grid,
                                  int pts_per_cell_per_dim, double thickness) {
  if (pts_per_cell_per_dim < 1) throw ConfigError("particles per cell per dimension must be >= 1");
  if (regions.empty()) throw ConfigError("no seed regions given");
  if (thickness <= 0.0) throw ConfigError("thickness must be positive");

  Vec2 lo = regions.front().poly.bbox_min();
  Vec2 hi = regions.front().poly.bbox_max();
  for (const auto& r : regions) {
    lo = lo.cwiseMin(r.poly.bbox_min());
    hi = hi.cwiseMax(r.poly.bbox_max());
  }
  const Vec2 gmin = grid.min_corner(), gmax = grid.max_corner();
  if (lo.x() < gmin.x() || lo.y() < gmin.y() || hi.x() > gmax.x() || hi.y() > gmax.y())
    throw ConfigError("seed domain exceeds grid bounds");

  const int pts = pts_per_cell_per_dim;
  const double sub = grid.h / pts;
  const double v0 = sub * sub * thickness;
  const Vec2 l0(sub, sub);

  // Cell range covering the union bounding box.
  const int ci0 = std::max(0, int(std::floor((lo.x() - grid.origin.x()) / grid.h)));
  const int ci1 = std::min(grid.nx - 1, int(std::floor((hi.x() - grid.origin.x()) / grid.h + 1e-12)));
  const int cj0 = std::max(0, int(std::floor((lo.y() - grid.origin.y()) / grid.h)));
  const int cj1 = std::min(grid.ny - 1, int(std::floor((hi.y() - grid.origin.y()) / grid.h + 1e-12)));

  MaterialPointSet set;
  int next_design = 0;
  for (int cj = cj0; cj <= cj1; ++cj) {
    for (int ci = ci0; ci <= ci1; ++ci) {
      const Vec2 cell_org = grid.origin + grid.h * Vec2(ci, cj);
      for (int sj = 0; sj < pts; ++sj) {
        for (int si = 0; si < pts; ++si) {
          const Vec2 c = cell_org + sub * Vec2(si + 0.5, sj + 0.5);
          int region = -1;
          for (std::size_t r = 0; r < regions.size(); ++r) {
            if (regions[r].poly.contains(c)) {
              region = int(r);
              break;
            }
          }
          if (region < 0) continue;
          const bool design = regions[std::size_t(region)].design;
          set.append(c, v0, l0, design ? next_design : -1);
          if (design) ++next_design;
        }
      }
    }
  }
  return set;
}

MaterialPointSet populate_domain(const Polygon& domain, const BackgroundGrid& grid, int pts_per_cell_per_dim,
                                 double thickness) {
  return populate_regions({SeedRegion{domain, true}}, grid, pts_per_cell_per_dim, thickness);
}

}  // namespace mpmtopo
