#pragma once

#include "mpmtopo/common.hpp"
#include "mpmtopo/gimp.hpp"
#include "mpmtopo/grid.hpp"
#include "mpmtopo/particles.hpp"

#include <vector>

namespace mpmtopo {

// Grid nodes whose basis support contains the particle: exactly those with
// |x_i - X_i^v| < h + l_i/2 on both axes, clipped to the grid.
std::vector<int> influence_nodes(const Vec2& pos, const Vec2& len, const BackgroundGrid& grid);

// Particle-grid coupling tables for one load step. Shape values and
// gradients are evaluated once from the step-start particle positions and
// stay frozen through the Newton iterations of that step.
struct StepBasis {
  std::vector<int> offsets;  // particle p owns entries [offsets[p], offsets[p+1])
  std::vector<int> nodes;    // global node ids
  std::vector<double> S;     // shape values
  std::vector<Vec2> G;       // gradients at step start (1/m)

  // Active-dof bookkeeping: union of touched nodes minus Dirichlet axes.
  std::vector<int> dof_to_active;  // 2*num_nodes entries, -1 if not solved for
  std::vector<int> active_dofs;    // active index -> global dof (2*node+axis)

  int count(int p) const { return offsets[std::size_t(p) + 1] - offsets[std::size_t(p)]; }
  int num_active() const { return int(active_dofs.size()); }

  VecX restrict_active(const VecX& full) const {
    VecX out(num_active());
    for (int a = 0; a < num_active(); ++a) out[a] = full[active_dofs[std::size_t(a)]];
    return out;
  }
  void scatter_active(const VecX& act, VecX& full) const {
    for (int a = 0; a < num_active(); ++a) full[active_dofs[std::size_t(a)]] = act[a];
  }
};

// Throws SolveError if a particle left the grid (grid too small) and
// ConfigError if no particle touches any unconstrained dof.
StepBasis build_step_basis(const MaterialPointSet& points, const BackgroundGrid& grid);

// Union of influence nodes over all particles minus Dirichlet-constrained
// axes, as sorted global dof ids.
std::vector<int> active_dofs(const MaterialPointSet& points, const BackgroundGrid& grid);

}  // namespace mpmtopo
