#pragma once

#include "mpmtopo/common.hpp"
#include "mpmtopo/grid.hpp"

#include <vector>

namespace mpmtopo {

// Simple polygon in CCW or CW order; used for rectangular and trapezoidal
// design domains. Points exactly on an edge count as inside.
struct Polygon {
  std::vector<Vec2> pts;

  bool contains(const Vec2& p) const;
  Vec2 bbox_min() const;
  Vec2 bbox_max() const;
};

// Lagrangian material points (structure-of-arrays). `design_index >= 0`
// selects the particle's slot in the design field; -1 marks non-design
// (always-solid) particles.
struct MaterialPointSet {
  std::vector<Vec2> ref_pos;     // X_p^0
  std::vector<Vec2> pos;         // x_p
  std::vector<double> vol0;      // V_p^0 (m^3, thickness folded in)
  std::vector<double> vol;       // V_p = det(F) V_p^0
  std::vector<double> mass;      // m_p = rho_p V_p^0 (kg)
  std::vector<Mat2> def_grad;    // F_p
  std::vector<Vec2> domain_len0; // l_p^0
  std::vector<Vec2> domain_len;  // l_p
  std::vector<Vec2> point_load;  // f_p^ext at full load (N)
  std::vector<Vec2> body_force;  // b_p (N/kg)
  std::vector<int> design_index;

  std::size_t size() const { return ref_pos.size(); }

  void append(const Vec2& x, double v0, const Vec2& l0, int design_idx) {
    ref_pos.push_back(x);
    pos.push_back(x);
    vol0.push_back(v0);
    vol.push_back(v0);
    mass.push_back(0.0);
    def_grad.push_back(Mat2::Identity());
    domain_len0.push_back(l0);
    domain_len.push_back(l0);
    point_load.push_back(Vec2::Zero());
    body_force.push_back(Vec2::Zero());
    design_index.push_back(design_idx);
  }

  // Number of particles carrying a design variable.
  int num_design() const {
    int n = 0;
    for (int d : design_index)
      if (d >= 0) ++n;
    return n;
  }

  // Reset kinematic state to the reference configuration; loads and design
  // indices are untouched. Used at the start of every optimization iteration.
  void reset_to_reference() {
    for (std::size_t p = 0; p < size(); ++p) {
      pos[p] = ref_pos[p];
      vol[p] = vol0[p];
      def_grad[p] = Mat2::Identity();
      domain_len[p] = domain_len0[p];
    }
  }
};

// Seed particles at the centers of a pts x pts subdivision of every grid
// cell whose subdivision centers fall inside `domain`. Uniform initial
// volume (h/pts)^2 * thickness; identity deformation gradient.
MaterialPointSet populate_domain(const Polygon& domain, const BackgroundGrid& grid, int pts_per_cell_per_dim,
                                 double thickness);

// As above but with multiple regions: a particle center is assigned to the
// first region that contains it. Regions flagged `design = false` produce
// design_index -1.
struct SeedRegion {
  Polygon poly;
  bool design = true;
};
MaterialPointSet populate_regions(const std::vector<SeedRegion>& regions, const BackgroundGrid& grid,
                                  int pts_per_cell_per_dim, double thickness);

}  // namespace mpmtopo
