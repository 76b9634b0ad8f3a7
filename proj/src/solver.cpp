#include "mpmtopo/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>

#include <Eigen/SparseLU>

namespace mpmtopo {

VecX assemble_external_force(const MaterialPointSet& points, const BackgroundGrid& grid, const StepBasis& basis,
                             double load_scale) {
  VecX f = VecX::Zero(2 * grid.num_nodes());
  for (std::size_t p = 0; p < points.size(); ++p) {
    const Vec2 load = (points.mass[p] * points.body_force[p] + points.point_load[p]) * load_scale;
    if (load.isZero()) continue;
    for (int k = basis.offsets[p]; k < basis.offsets[p + 1]; ++k) {
      const int node = basis.nodes[std::size_t(k)];
      const double s = basis.S[std::size_t(k)];
      f[2 * node + 0] += s * load.x();
      f[2 * node + 1] += s * load.y();
    }
  }
  return f;
}

VecX assemble_internal_force(const MaterialPointSet& points, const std::vector<StressState>& stresses,
                             const BackgroundGrid& grid, const StepBasis& basis,
                             const std::vector<Mat2>* push_forward) {
  VecX f = VecX::Zero(2 * grid.num_nodes());
  for (std::size_t p = 0; p < points.size(); ++p) {
    const Mat2 M = points.vol[p] * stresses[p].cauchy;
    const Mat2 Wt = push_forward ? (*push_forward)[p].transpose() : Mat2::Identity();
    for (int k = basis.offsets[p]; k < basis.offsets[p + 1]; ++k) {
      const Vec2 g = Wt * basis.G[std::size_t(k)];
      const Vec2 fv = M * g;
      const int node = basis.nodes[std::size_t(k)];
      f[2 * node + 0] += fv.x();
      f[2 * node + 1] += fv.y();
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Sparsity pattern and scatter bookkeeping for one load step.

struct StepSolver::Pattern {
  SparseMat K;                        // active x active, structure fixed
  std::vector<int> block_slots;      // 4 ints per block: slot[(b<<1)|a], -1 dropped
  std::vector<std::size_t> particle_block_offset;  // per particle into particle_blocks
  std::vector<int> particle_blocks;  // block id per (v,w) pair, w-major per v
  long nnz = 0;
};

void StepSolver::build_pattern() {
  if (pattern_) return;
  auto pat = std::make_shared<Pattern>();
  const std::size_t np = points_.size();
  const int num_nodes = grid_.num_nodes();

  // Touched nodes -> local ids (ascending node id).
  std::vector<std::uint8_t> touched(std::size_t(num_nodes), 0);
  for (int node : basis_.nodes) touched[std::size_t(node)] = 1;
  std::vector<int> local_id(std::size_t(num_nodes), -1);
  std::vector<int> local_nodes;
  local_nodes.reserve(1024);
  for (int node = 0; node < num_nodes; ++node) {
    if (touched[std::size_t(node)]) {
      local_id[std::size_t(node)] = int(local_nodes.size());
      local_nodes.push_back(node);
    }
  }
  const int nl = int(local_nodes.size());

  // Node -> particle adjacency (CSR, particle-major fill keeps lists sorted).
  std::vector<int> n2p_off(std::size_t(nl) + 1, 0);
  for (int node : basis_.nodes) ++n2p_off[std::size_t(local_id[std::size_t(node)]) + 1];
  for (int i = 0; i < nl; ++i) n2p_off[std::size_t(i) + 1] += n2p_off[std::size_t(i)];
  std::vector<int> n2p(std::size_t(n2p_off[std::size_t(nl)]));
  {
    std::vector<int> cursor(n2p_off.begin(), n2p_off.end() - 1);
    for (std::size_t p = 0; p < np; ++p)
      for (int k = basis_.offsets[p]; k < basis_.offsets[p + 1]; ++k) {
        const int ln = local_id[std::size_t(basis_.nodes[std::size_t(k)])];
        n2p[std::size_t(cursor[std::size_t(ln)]++)] = int(p);
      }
  }

  // Per column node: sorted unique neighbor nodes (block rows).
  std::vector<int> col_block_off(std::size_t(nl) + 1, 0);
  std::vector<int> block_rows;  // local node ids
  block_rows.reserve(std::size_t(nl) * 16);
  {
    std::vector<int> stamp(std::size_t(nl), -1);
    std::vector<int> scratch;
    for (int w = 0; w < nl; ++w) {
      scratch.clear();
      for (int q = n2p_off[std::size_t(w)]; q < n2p_off[std::size_t(w) + 1]; ++q) {
        const int p = n2p[std::size_t(q)];
        for (int k = basis_.offsets[std::size_t(p)]; k < basis_.offsets[std::size_t(p) + 1]; ++k) {
          const int lv = local_id[std::size_t(basis_.nodes[std::size_t(k)])];
          if (stamp[std::size_t(lv)] != w) {
            stamp[std::size_t(lv)] = w;
            scratch.push_back(lv);
          }
        }
      }
      std::sort(scratch.begin(), scratch.end());
      col_block_off[std::size_t(w) + 1] = col_block_off[std::size_t(w)] + int(scratch.size());
      block_rows.insert(block_rows.end(), scratch.begin(), scratch.end());
    }
  }
  const std::size_t n_blocks = block_rows.size();

  // Scalar CSC on active dofs. Columns/rows follow the active ordering,
  // which is ascending in (node, axis), so everything lands sorted.
  const int na = basis_.num_active();
  std::vector<int> outer(std::size_t(na) + 1, 0);
  std::vector<int> col_of_block_axis;  // active column per (w, b) or -1
  pat->block_slots.assign(n_blocks * 4, -1);

  // First pass: column counts.
  for (int w = 0; w < nl; ++w) {
    for (int b = 0; b < 2; ++b) {
      const int col = basis_.dof_to_active[std::size_t(2 * local_nodes[std::size_t(w)] + b)];
      if (col < 0) continue;
      int rows = 0;
      for (int q = col_block_off[std::size_t(w)]; q < col_block_off[std::size_t(w) + 1]; ++q) {
        const int vnode = local_nodes[std::size_t(block_rows[std::size_t(q)])];
        for (int a = 0; a < 2; ++a)
          if (basis_.dof_to_active[std::size_t(2 * vnode + a)] >= 0) ++rows;
      }
      outer[std::size_t(col) + 1] = rows;
    }
  }
  for (int c = 0; c < na; ++c) outer[std::size_t(c) + 1] += outer[std::size_t(c)];
  const long nnz = outer[std::size_t(na)];
  pat->nnz = nnz;

  pat->K.resize(na, na);
  pat->K.makeCompressed();
  pat->K.resizeNonZeros(nnz);
  std::memcpy(pat->K.outerIndexPtr(), outer.data(), sizeof(int) * (std::size_t(na) + 1));

  // Second pass: inner indices + block slots.
  {
    int* inner = pat->K.innerIndexPtr();
    for (int w = 0; w < nl; ++w) {
      for (int b = 0; b < 2; ++b) {
        const int col = basis_.dof_to_active[std::size_t(2 * local_nodes[std::size_t(w)] + b)];
        if (col < 0) continue;
        int slot = outer[std::size_t(col)];
        for (int q = col_block_off[std::size_t(w)]; q < col_block_off[std::size_t(w) + 1]; ++q) {
          const int vnode = local_nodes[std::size_t(block_rows[std::size_t(q)])];
          for (int a = 0; a < 2; ++a) {
            const int row = basis_.dof_to_active[std::size_t(2 * vnode + a)];
            if (row < 0) continue;
            inner[slot] = row;
            pat->block_slots[std::size_t(q) * 4 + std::size_t((b << 1) | a)] = slot;
            ++slot;
          }
        }
      }
    }
  }

  // Per-particle block ids, w-major within v: pb[v*n + w].
  pat->particle_block_offset.assign(np + 1, 0);
  for (std::size_t p = 0; p < np; ++p) {
    const std::size_t n = std::size_t(basis_.count(int(p)));
    pat->particle_block_offset[p + 1] = pat->particle_block_offset[p] + n * n;
  }
  pat->particle_blocks.assign(pat->particle_block_offset[np], -1);
  for (std::size_t p = 0; p < np; ++p) {
    const int base = basis_.offsets[p];
    const int n = basis_.count(int(p));
    int* pb = pat->particle_blocks.data() + pat->particle_block_offset[p];
    for (int iw = 0; iw < n; ++iw) {
      const int w = local_id[std::size_t(basis_.nodes[std::size_t(base + iw)])];
      const int q0 = col_block_off[std::size_t(w)], q1 = col_block_off[std::size_t(w) + 1];
      int q = q0;
      for (int iv = 0; iv < n; ++iv) {
        const int v = local_id[std::size_t(basis_.nodes[std::size_t(base + iv)])];
        while (q < q1 && block_rows[std::size_t(q)] < v) ++q;
        pb[iv * n + iw] = q;  // v is guaranteed present in column w
        ++q;
      }
      q = q0;  // reset for next column scan handled per iw; iv loop consumed q
    }
  }

  pattern_ = std::move(pat);
}

StepSolver::StepSolver(const MaterialPointSet& points, const BackgroundGrid& grid, const MaterialFields& mats,
                       StepBasis basis, double load_scale, double dirichlet_increment_scale,
                       const NewtonSettings& settings)
    : points_(points),
      grid_(grid),
      mats_(mats),
      basis_(std::move(basis)),
      load_scale_(load_scale),
      dirichlet_scale_(dirichlet_increment_scale),
      settings_(settings) {
  f_ext_full_ = assemble_external_force(points_, grid_, basis_, load_scale_);
}

VecX StepSolver::initial_u() const {
  VecX u = VecX::Zero(2 * grid_.num_nodes());
  for (int node = 0; node < grid_.num_nodes(); ++node)
    for (int axis = 0; axis < 2; ++axis)
      if (grid_.is_dirichlet(node, axis))
        u[2 * node + axis] = dirichlet_scale_ * grid_.prescribed[std::size_t(2 * node + axis)];
  return u;
}

void StepSolver::compute_trial(const VecX& u_full, TrialState& trial) const {
  const std::size_t np = points_.size();
  trial.delta_F.resize(np);
  trial.W.resize(np);
  trial.F.resize(np);
  trial.tau.resize(np);
  trial.detF.resize(np);
  trial.dlog.resize(np);
  trial.ok = true;
  trial.bad_particle = -1;

  std::mutex bad_mutex;
  parallel_for(np, settings_.threads, [&](std::size_t lo, std::size_t hi) {
    std::ptrdiff_t local_bad = -1;
    for (std::size_t p = lo; p < hi; ++p) {
      Mat2 A = Mat2::Zero();
      for (int k = basis_.offsets[p]; k < basis_.offsets[p + 1]; ++k) {
        const int node = basis_.nodes[std::size_t(k)];
        const Vec2 uv(u_full[2 * node], u_full[2 * node + 1]);
        A += uv * basis_.G[std::size_t(k)].transpose();
      }
      const Mat2 dF = Mat2::Identity() + A;
      const double ddet = dF.determinant();
      const Mat2 F = dF * points_.def_grad[p];
      const double detF = F.determinant();
      trial.delta_F[p] = dF;
      trial.F[p] = F;
      trial.detF[p] = detF;
      if (ddet <= 0.0 || detF <= 0.0) {
        if (local_bad < 0) local_bad = std::ptrdiff_t(p);
        continue;
      }
      trial.W[p] = dF.inverse();
      try {
        trial.dlog[p] = log_derivative(F * F.transpose());
      } catch (const InvertedStateError&) {
        if (local_bad < 0) local_bad = std::ptrdiff_t(p);
        continue;
      }
      const LameParams lame = mats_.lame(p);
      const Mat2& logB = trial.dlog[p].log_b;
      trial.tau[p] =
          (0.5 * plane_stress_lambda(lame) * logB.trace()) * Mat2::Identity() + lame.mu * logB;
    }
    if (local_bad >= 0) {
      std::lock_guard<std::mutex> lock(bad_mutex);
      trial.ok = false;
      if (trial.bad_particle < 0 || local_bad < trial.bad_particle) trial.bad_particle = local_bad;
    }
  });
}

VecX StepSolver::residual_full(const TrialState& trial) const {
  VecX f = VecX::Zero(2 * grid_.num_nodes());
  for (std::size_t p = 0; p < points_.size(); ++p) {
    const Mat2 M = points_.vol0[p] * trial.tau[p];
    const Mat2 Wt = trial.W[p].transpose();
    for (int k = basis_.offsets[p]; k < basis_.offsets[p + 1]; ++k) {
      const Vec2 fv = M * (Wt * basis_.G[std::size_t(k)]);
      const int node = basis_.nodes[std::size_t(k)];
      f[2 * node + 0] += fv.x();
      f[2 * node + 1] += fv.y();
    }
  }
  return f - f_ext_full_;
}

VecX StepSolver::residual_active(const VecX& u_full) const {
  TrialState trial;
  compute_trial(u_full, trial);
  if (!trial.ok)
    throw InvertedStateError("inverted particle during residual evaluation",
                             trial.detF[std::size_t(trial.bad_particle)], trial.bad_particle);
  return basis_.restrict_active(residual_full(trial));
}

SparseMat StepSolver::tangent(const VecX& /*u_full*/, const TrialState& trial) const {
  const_cast<StepSolver*>(this)->build_pattern();
  Pattern& pat = *pattern_;
  const std::size_t np = points_.size();
  double* values = pat.K.valuePtr();
  std::fill(values, values + pat.nnz, 0.0);

  // Chunked: parallel local-matrix computation, serial in-order scatter.
  constexpr std::size_t kChunk = 2048;
  std::vector<double> arena;
  std::vector<std::size_t> local_off;
  for (std::size_t c0 = 0; c0 < np; c0 += kChunk) {
    const std::size_t c1 = std::min(np, c0 + kChunk);
    local_off.assign(c1 - c0 + 1, 0);
    for (std::size_t p = c0; p < c1; ++p) {
      const std::size_t n = std::size_t(basis_.count(int(p)));
      local_off[p - c0 + 1] = local_off[p - c0] + 4 * n * n;
    }
    arena.resize(local_off.back());

    parallel_for(c1 - c0, settings_.threads, [&](std::size_t lo, std::size_t hi) {
      std::vector<Vec2> g, tg, cw;
      for (std::size_t i = lo; i < hi; ++i) {
        const std::size_t p = c0 + i;
        const int base = basis_.offsets[p];
        const int n = basis_.count(int(p));
        double* L = arena.data() + local_off[i];
        const double v0 = points_.vol0[p];
        const LameParams lame = mats_.lame(p);
        const double lps = plane_stress_lambda(lame);
        const Mat2 Wt = trial.W[p].transpose();
        const Mat2& tau = trial.tau[p];
        const Mat2 M1 = trial.F[p] * points_.def_grad[p].transpose();
        const LogDerivative& dl = trial.dlog[p];

        g.resize(std::size_t(n));
        tg.resize(std::size_t(n));
        cw.resize(std::size_t(n));
        for (int k = 0; k < n; ++k) {
          g[std::size_t(k)] = Wt * basis_.G[std::size_t(base + k)];
          tg[std::size_t(k)] = tau * g[std::size_t(k)];
          cw[std::size_t(k)] = M1 * basis_.G[std::size_t(base + k)];
        }

        // Material directional stresses per (w, axis b).
        // dB for du_w = e_b: e_b c_w^T + c_w e_b^T.
        for (int iw = 0; iw < n; ++iw) {
          Mat2 dtau_b[2];
          for (int b = 0; b < 2; ++b) {
            Mat2 dB;
            if (b == 0) {
              dB << 2.0 * cw[std::size_t(iw)].x(), cw[std::size_t(iw)].y(), cw[std::size_t(iw)].y(), 0.0;
            } else {
              dB << 0.0, cw[std::size_t(iw)].x(), cw[std::size_t(iw)].x(), 2.0 * cw[std::size_t(iw)].y();
            }
            const Mat2 dlogB = dl.apply(dB);
            dtau_b[b] = lame.mu * dlogB + (0.5 * lps * dlogB.trace()) * Mat2::Identity();
          }
          for (int iv = 0; iv < n; ++iv) {
            // Block (rows at v, cols at w): material + geometric terms.
            const Vec2& gv = g[std::size_t(iv)];
            const Vec2& tgw = tg[std::size_t(iw)];
            double* blk = L + 4 * (std::size_t(iv) * std::size_t(n) + std::size_t(iw));
            for (int b = 0; b < 2; ++b) {
              const Vec2 col = v0 * (dtau_b[b] * gv - tgw * gv[b]);
              blk[(b << 1) | 0] = col.x();
              blk[(b << 1) | 1] = col.y();
            }
          }
        }
      }
    });

    // Deterministic scatter in particle order.
    for (std::size_t p = c0; p < c1; ++p) {
      const int n = basis_.count(int(p));
      const double* L = arena.data() + local_off[p - c0];
      const int* pb = pat.particle_blocks.data() + pat.particle_block_offset[p];
      for (std::size_t pair = 0; pair < std::size_t(n) * std::size_t(n); ++pair) {
        const int* slots = pat.block_slots.data() + std::size_t(pb[pair]) * 4;
        const double* blk = L + 4 * pair;
        for (int e = 0; e < 4; ++e)
          if (slots[e] >= 0) values[slots[e]] += blk[e];
      }
    }
  }
  return pat.K;
}

StepResult StepSolver::solve(SolveStats* stats) {
  StepResult result;
  VecX u = initial_u();
  TrialState trial;
  compute_trial(u, trial);
  if (!trial.ok)
    throw InvertedStateError("inverted particle at step start", trial.detF[std::size_t(trial.bad_particle)],
                             trial.bad_particle);
  VecX r_act = basis_.restrict_active(residual_full(trial));
  double rnorm = r_act.norm();
  std::vector<double> history{rnorm};

  Eigen::SparseLU<SparseMat> lu;
  bool analyzed = false;
  int iters = 0;
  int cuts_total = 0;

  while (rnorm >= settings_.tol && iters < settings_.max_iterations) {
    const SparseMat& K = tangent(u, trial);
    if (!analyzed) {
      lu.analyzePattern(K);
      analyzed = true;
    }
    lu.factorize(K);
    if (lu.info() != Eigen::Success)
      throw SolveError("singular tangent stiffness (factorization failed) at Newton iteration " +
                       std::to_string(iters));
    const VecX delta = lu.solve(-r_act);
    if (stats) ++stats->linear_solves;

    const double phi0 = 0.5 * rnorm * rnorm;
    double alpha = 1.0;
    bool accepted = false;
    TrialState trial_try;
    VecX u_try, r_try;
    double rn_try = 0.0;
    while (true) {
      u_try = u;
      for (int a = 0; a < basis_.num_active(); ++a) u_try[basis_.active_dofs[std::size_t(a)]] += alpha * delta[a];
      compute_trial(u_try, trial_try);
      bool ok = trial_try.ok;
      double phi = std::numeric_limits<double>::infinity();
      if (ok) {
        r_try = basis_.restrict_active(residual_full(trial_try));
        rn_try = r_try.norm();
        phi = 0.5 * rn_try * rn_try;
        if (phi <= phi0 * (1.0 - 2.0 * settings_.armijo_c * alpha)) {
          accepted = true;
          break;
        }
      }
      if (alpha <= settings_.min_step) {
        // Accept a plain decrease at the smallest step; otherwise give up.
        if (ok && phi < phi0) accepted = true;
        break;
      }
      alpha *= 0.5;
      ++cuts_total;
      if (stats) ++stats->line_search_cuts;
    }
    if (!accepted) {
      std::ostringstream oss;
      oss << "Newton line search failed at iteration " << iters << " (residual history:";
      for (double h : history) oss << " " << h;
      oss << ")";
      throw SolveError(oss.str());
    }
    u = u_try;
    trial = trial_try;
    r_act = r_try;
    rnorm = rn_try;
    history.push_back(rnorm);
    ++iters;
    if (stats) ++stats->newton_iterations;
    if (settings_.log)
      (*settings_.log) << "  iter=" << iters << " residual=" << rnorm << " alpha=" << alpha << "\n";
  }

  if (rnorm >= settings_.tol) {
    std::ostringstream oss;
    oss << "Newton did not converge in " << settings_.max_iterations << " iterations (residual history:";
    for (double h : history) oss << " " << h;
    oss << ")";
    throw SolveError(oss.str());
  }

  result.u_full = std::move(u);
  result.iterations = iters;
  result.residual_norm = rnorm;
  result.line_search_cuts = cuts_total;
  return result;
}

void update_particles(MaterialPointSet& points, const VecX& u_full, const StepBasis& basis) {
  for (std::size_t p = 0; p < points.size(); ++p) {
    Vec2 du = Vec2::Zero();
    Mat2 A = Mat2::Zero();
    for (int k = basis.offsets[p]; k < basis.offsets[p + 1]; ++k) {
      const int node = basis.nodes[std::size_t(k)];
      const Vec2 uv(u_full[2 * node], u_full[2 * node + 1]);
      du += basis.S[std::size_t(k)] * uv;
      A += uv * basis.G[std::size_t(k)].transpose();
    }
    const Mat2 dF = Mat2::Identity() + A;
    const double d = dF.determinant();
    if (d <= 0.0)
      throw InvertedStateError("inverted incremental deformation in particle update", d, std::ptrdiff_t(p));
    points.def_grad[p] = dF * points.def_grad[p];
    points.pos[p] += du;
    points.vol[p] = points.def_grad[p].determinant() * points.vol0[p];
    const Vec2 stretch = stretch_diag(points.def_grad[p]);
    points.domain_len[p] = points.domain_len0[p].cwiseProduct(stretch);
  }
}

std::vector<StressState> evaluate_stresses(const MaterialPointSet& points, const MaterialFields& mats) {
  std::vector<StressState> out(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) out[p] = hencky_stress(points.def_grad[p], mats.lame(p));
  return out;
}

SolveRecord solve_sequence(MaterialPointSet& points, const BackgroundGrid& grid, const MaterialFields& mats,
                           const std::vector<double>& scales, const NewtonSettings& settings, bool store_states) {
  SolveRecord record;
  record.store_states = store_states;
  double prev_scale = 0.0;
  for (std::size_t k = 0; k < scales.size(); ++k) {
    StepBasis basis = build_step_basis(points, grid);
    StepSolver solver(points, grid, mats, std::move(basis), scales[k], scales[k] - prev_scale, settings);
    if (settings.log) (*settings.log) << "step " << (k + 1) << " scale=" << scales[k] << "\n";
    StepResult step;
    try {
      step = solver.solve(&record.stats);
    } catch (const SolveError& err) {
      throw SolveError("load step " + std::to_string(k + 1) + ": " + err.what());
    }
    update_particles(points, step.u_full, solver.basis());
    record.u_active.push_back(solver.basis().restrict_active(step.u_full));
    record.u_full.push_back(step.u_full);
    record.iterations.push_back(step.iterations);
    record.residual_norms.push_back(step.residual_norm);
    if (store_states) record.states.push_back(points);
    prev_scale = scales[k];
  }
  record.final_state = points;
  return record;
}

SolveRecord run_forward(MaterialPointSet& points, const BackgroundGrid& grid, const MaterialFields& mats,
                        const LoadSchedule& schedule, const NewtonSettings& settings, bool store_states) {
  if (schedule.n_steps < 1) throw ConfigError("load schedule requires n_steps >= 1");
  std::vector<double> scales(std::size_t(schedule.n_steps));
  for (int k = 1; k <= schedule.n_steps; ++k) scales[std::size_t(k - 1)] = schedule.scale(k);
  return solve_sequence(points, grid, mats, scales, settings, store_states);
}

}  // namespace mpmtopo
