#pragma once

#include "mpmtopo/common.hpp"
#include "mpmtopo/connectivity.hpp"
#include "mpmtopo/constitutive.hpp"
#include "mpmtopo/grid.hpp"
#include "mpmtopo/particles.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace mpmtopo {

// Equal-increment load schedule: scale(k) = k / n_steps.
struct LoadSchedule {
  int n_steps = 1;
  double scale(int k) const { return double(k) / double(n_steps); }
};

// Per-particle design-mapped material properties.
struct MaterialFields {
  VecX lambda;  // Pa
  VecX mu;      // Pa
  VecX rho;     // kg/m^3

  LameParams lame(std::size_t p) const { return LameParams{lambda[Eigen::Index(p)], mu[Eigen::Index(p)]}; }
};

struct NewtonSettings {
  double tol = 1e-7;            // ||R|| (N)
  int max_iterations = 50;
  double armijo_c = 1e-4;
  double min_step = 9.765625e-4;  // 2^-10
  int threads = 1;
  std::ostream* log = nullptr;
};

// Counters shared by forward and adjoint passes; the adjoint's
// one-linear-solve-per-step contract is asserted against these.
struct SolveStats {
  long newton_iterations = 0;
  long linear_solves = 0;
  long line_search_cuts = 0;
};

struct StepResult {
  VecX u_full;  // converged incremental displacement on all grid dofs
  int iterations = 0;
  double residual_norm = 0.0;
  int line_search_cuts = 0;
};

struct SolveRecord {
  std::vector<VecX> u_active;          // per step, on that step's active dofs
  std::vector<VecX> u_full;            // per step, expanded
  std::vector<int> iterations;
  std::vector<double> residual_norms;
  bool store_states = false;
  std::vector<MaterialPointSet> states;  // per step if store_states
  MaterialPointSet final_state;
  SolveStats stats;
};

// Eq. (internal force): f[v] = sum_p V_p (grad_x S)^T sigma_p. `stresses`
// are evaluated at the current iterate; `push_forward` (optional) maps the
// frozen step-start gradients to spatial ones via (dF^-1)^T per particle.
VecX assemble_internal_force(const MaterialPointSet& points, const std::vector<StressState>& stresses,
                             const BackgroundGrid& grid, const StepBasis& basis,
                             const std::vector<Mat2>* push_forward = nullptr);

// f[v] = sum_p S^{vp} (m_p b_p + f_p^ext) * load_scale.
VecX assemble_external_force(const MaterialPointSet& points, const BackgroundGrid& grid, const StepBasis& basis,
                             double load_scale);

// Per-particle trial kinematics/stress at nodal displacement u (full dofs),
// relative to the step-start state captured in `points`/`basis`.
struct TrialState {
  std::vector<Mat2> delta_F;
  std::vector<Mat2> W;  // delta_F^{-1}
  std::vector<Mat2> F;
  std::vector<Mat2> tau;
  std::vector<double> detF;
  std::vector<LogDerivative> dlog;  // of B = F F^T
  bool ok = true;
  std::ptrdiff_t bad_particle = -1;  // lowest inverted particle if !ok
};

// One quasi-static load step: frozen basis, constant external force, Newton
// iterations with Armijo backtracking on 0.5 ||R||^2.
class StepSolver {
public:
  StepSolver(const MaterialPointSet& points, const BackgroundGrid& grid, const MaterialFields& mats,
             StepBasis basis, double load_scale, double dirichlet_increment_scale, const NewtonSettings& settings);

  // Trial evaluation at nodal displacement u (size 2*num_nodes).
  void compute_trial(const VecX& u_full, TrialState& trial) const;
  VecX residual_full(const TrialState& trial) const;  // f_int - f_ext on all dofs
  VecX residual_active(const VecX& u_full) const;

  // Assembles K = dR/du on active dofs at the given trial state.
  SparseMat tangent(const VecX& u_full, const TrialState& trial) const;

  StepResult solve(SolveStats* stats = nullptr);

  // Initial guess with Dirichlet increments applied and active dofs zero.
  VecX initial_u() const;

  const StepBasis& basis() const { return basis_; }
  const VecX& f_ext_full() const { return f_ext_full_; }

private:
  const MaterialPointSet& points_;
  const BackgroundGrid& grid_;
  const MaterialFields& mats_;
  StepBasis basis_;
  double load_scale_;
  double dirichlet_scale_;
  NewtonSettings settings_;
  VecX f_ext_full_;

  // Sparsity bookkeeping, built once per step.
  struct Pattern;
  std::shared_ptr<Pattern> pattern_;
  void build_pattern();
};

// Grid-to-particle transfer and state update at the converged increment.
// Mutates `points` in place. Throws InvertedStateError on det(dF) <= 0.
void update_particles(MaterialPointSet& points, const VecX& u_full, const StepBasis& basis);

// Cauchy stress per particle for the current particle state.
std::vector<StressState> evaluate_stresses(const MaterialPointSet& points, const MaterialFields& mats);

// Sequential load stepping over absolute scales (s_1, ..., s_n), s_0 = 0:
// rebuild connectivity, solve, update particles. `points` is advanced in
// place and also captured in the returned record.
SolveRecord solve_sequence(MaterialPointSet& points, const BackgroundGrid& grid, const MaterialFields& mats,
                           const std::vector<double>& scales, const NewtonSettings& settings,
                           bool store_states = false);

SolveRecord run_forward(MaterialPointSet& points, const BackgroundGrid& grid, const MaterialFields& mats,
                        const LoadSchedule& schedule, const NewtonSettings& settings, bool store_states = false);

}  // namespace mpmtopo
