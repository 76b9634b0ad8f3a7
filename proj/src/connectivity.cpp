#include "mpmtopo/connectivity.hpp"

#include <cmath>

namespace mpmtopo {

std::vector<int> influence_nodes(const Vec2& pos, const Vec2& len, const BackgroundGrid& grid) {
  std::vector<int> out;
  const double rx = grid.h + 0.5 * len.x();
  const double ry = grid.h + 0.5 * len.y();
  const double fx = (pos.x() - grid.origin.x()) / grid.h;
  const double fy = (pos.y() - grid.origin.y()) / grid.h;
  const int i0 = std::max(0, int(std::floor(fx - rx / grid.h)));
  const int i1 = std::min(grid.nx, int(std::ceil(fx + rx / grid.h)));
  const int j0 = std::max(0, int(std::floor(fy - ry / grid.h)));
  const int j1 = std::min(grid.ny, int(std::ceil(fy + ry / grid.h)));
  for (int j = j0; j <= j1; ++j) {
    const double dy = pos.y() - (grid.origin.y() + grid.h * j);
    if (std::abs(dy) >= ry) continue;
    for (int i = i0; i <= i1; ++i) {
      const double dx = pos.x() - (grid.origin.x() + grid.h * i);
      if (std::abs(dx) >= rx) continue;
      out.push_back(grid.node_index(i, j));
    }
  }
  return out;
}

StepBasis build_step_basis(const MaterialPointSet& points, const BackgroundGrid& grid) {
  StepBasis b;
  const std::size_t np = points.size();
  b.offsets.assign(np + 1, 0);

  for (std::size_t p = 0; p < np; ++p) {
    if (!grid.contains(points.pos[p]))
      throw SolveError("particle " + std::to_string(p) + " escaped the background grid (grid too small)");
  }

  std::vector<std::vector<int>> lists(np);
  for (std::size_t p = 0; p < np; ++p) {
    lists[p] = influence_nodes(points.pos[p], points.domain_len[p], grid);
    b.offsets[p + 1] = b.offsets[p] + int(lists[p].size());
  }
  const std::size_t total = std::size_t(b.offsets[np]);
  b.nodes.resize(total);
  b.S.resize(total);
  b.G.resize(total);
  for (std::size_t p = 0; p < np; ++p) {
    std::size_t k = std::size_t(b.offsets[p]);
    for (int node : lists[p]) {
      const GimpShape2d sh = gimp_shape_and_grad(points.pos[p], grid.node_coord(node), grid.h, points.domain_len[p]);
      b.nodes[k] = node;
      b.S[k] = sh.S;
      b.G[k] = sh.grad;
      ++k;
    }
  }

  // Active dofs: touched nodes minus constrained axes.
  b.dof_to_active.assign(2 * std::size_t(grid.num_nodes()), -1);
  std::vector<std::uint8_t> touched(std::size_t(grid.num_nodes()), 0);
  for (int node : b.nodes) touched[std::size_t(node)] = 1;
  for (int node = 0; node < grid.num_nodes(); ++node) {
    if (!touched[std::size_t(node)]) continue;
    for (int axis = 0; axis < 2; ++axis) {
      if (grid.is_dirichlet(node, axis)) continue;
      const int dof = 2 * node + axis;
      b.dof_to_active[std::size_t(dof)] = int(b.active_dofs.size());
      b.active_dofs.push_back(dof);
    }
  }
  if (b.active_dofs.empty()) throw ConfigError("no active degrees of freedom (no particles or everything constrained)");
  return b;
}

std::vector<int> active_dofs(const MaterialPointSet& points, const BackgroundGrid& grid) {
  return build_step_basis(points, grid).active_dofs;
}

}  // namespace mpmtopo
