#pragma once

#include "mpmtopo/common.hpp"

#include <cstdint>
#include <vector>

namespace mpmtopo {

// Fixed Eulerian background grid. Nodes are laid out row-major with x
// fastest: node(i, j) = origin + h * (i, j), 0 <= i <= nx, 0 <= j <= ny.
// Dirichlet constraints are stored per node per axis together with the
// prescribed displacement reached at full load scale.
struct BackgroundGrid {
  Vec2 origin = Vec2::Zero();
  double h = 0.0;
  int nx = 0;  // cells in x
  int ny = 0;  // cells in y
  std::vector<std::uint8_t> dirichlet;  // 2 * num_nodes flags
  std::vector<double> prescribed;       // 2 * num_nodes values (m)

  BackgroundGrid() = default;
  BackgroundGrid(const Vec2& origin_, double h_, int nx_, int ny_)
      : origin(origin_), h(h_), nx(nx_), ny(ny_) {
    if (h <= 0.0 || nx < 1 || ny < 1) throw ConfigError("grid requires h > 0 and at least one cell per axis");
    dirichlet.assign(2 * std::size_t(num_nodes()), 0);
    prescribed.assign(2 * std::size_t(num_nodes()), 0.0);
  }

  int nodes_x() const { return nx + 1; }
  int nodes_y() const { return ny + 1; }
  int num_nodes() const { return nodes_x() * nodes_y(); }

  int node_index(int i, int j) const { return j * nodes_x() + i; }
  Vec2 node_coord(int node) const {
    const int i = node % nodes_x();
    const int j = node / nodes_x();
    return origin + h * Vec2(i, j);
  }

  Vec2 min_corner() const { return origin; }
  Vec2 max_corner() const { return origin + h * Vec2(nx, ny); }

  bool contains(const Vec2& p) const {
    const Vec2 lo = min_corner(), hi = max_corner();
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y();
  }

  void set_dirichlet(int node, int axis, double value) {
    dirichlet[2 * std::size_t(node) + axis] = 1;
    prescribed[2 * std::size_t(node) + axis] = value;
  }
  bool is_dirichlet(int node, int axis) const { return dirichlet[2 * std::size_t(node) + axis] != 0; }
};

}  // namespace mpmtopo
