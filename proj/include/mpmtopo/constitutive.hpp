#pragma once

#include "mpmtopo/common.hpp"

namespace mpmtopo {

struct LameParams {
  double lambda = 0.0;  // Pa
  double mu = 0.0;      // Pa
};

// Effective in-plane multiplier after eliminating eps_zz with the
// plane-stress closure: tau = lambda_ps * tr2(eps) I + 2 mu eps.
inline double plane_stress_lambda(const LameParams& p) {
  return 2.0 * p.lambda * p.mu / (p.lambda + 2.0 * p.mu);
}

struct StressState {
  Mat2 tau = Mat2::Zero();     // Kirchhoff (Pa)
  Mat2 cauchy = Mat2::Zero();  // sigma = tau / J (Pa)
  double J = 1.0;              // det(F)
  Mat2 hencky = Mat2::Zero();  // elastic log strain (in-plane block)
  double eps_zz = 0.0;         // out-of-plane strain from the closure
};

// Eigendecomposition of a symmetric 2x2 matrix. Eigenvalues sorted
// descending; the leading eigenvector is sign-fixed so Q(0,0) >= 0
// (Q(1,0) > 0 breaks the tie when Q(0,0) == 0) and the second column is the
// +90 degree rotation of the first, making Q a proper rotation. The fixed
// convention keeps tangent and adjoint evaluations deterministic.
struct SymEig2 {
  Vec2 lam;  // descending
  Mat2 Q;    // columns are eigenvectors, det(Q) = +1
};

SymEig2 sym_eig_2x2(const Mat2& B);

// Q diag(log lam) Q^T; requires SPD input.
Mat2 matrix_log_spd(const Mat2& B);

// Directional derivative of the matrix logarithm at SPD B in direction E:
// Q (L .* (Q^T E Q)) Q^T with the Loewner matrix
//   L_ij = (log lam_i - log lam_j) / (lam_i - lam_j)   (i != j)
//   L_ii = 1 / lam_i
// switching to the diagonal form when |lam_i - lam_j| < 1e-12.
Mat2 frechet_log(const Mat2& B, const Mat2& E);

// All spectral quantities for one evaluation point; lets the assembly apply
// many log-derivative directions without re-decomposing.
struct LogDerivative {
  SymEig2 eig;
  Mat2 loewner;  // entries L_ij above
  Mat2 log_b;    // Q diag(log lam) Q^T

  // d log(B)[E]
  Mat2 apply(const Mat2& E) const {
    const Mat2 ehat = eig.Q.transpose() * E * eig.Q;
    return eig.Q * loewner.cwiseProduct(ehat) * eig.Q.transpose();
  }
};

LogDerivative log_derivative(const Mat2& B);

// Hencky hyperelastic stress under plane stress. Throws InvertedStateError
// if det(F) <= 0 or B = F F^T fails the SPD check.
StressState hencky_stress(const Mat2& F, const LameParams& params);

// Kirchhoff stress only (hot path; same math as hencky_stress).
Mat2 hencky_tau(const Mat2& F, const LameParams& params);

// Directional derivative of tau with respect to F:
//   d tau = mu * dlog(B)[dB] + lambda_ps/2 * tr(dlog(B)[dB]) I,
//   dB    = dF F^T + F dF^T.
Mat2 hencky_tau_dir(const Mat2& F, const LameParams& params, const LogDerivative& dlog, const Mat2& dF);

// Vector-Jacobian products of tau(F; lambda, mu) for the adjoint sweep:
// given tau_bar, accumulate F_bar and the per-particle material parameter
// bars. `dlog` must be the decomposition of B = F F^T.
struct HenckyVjp {
  Mat2 F_bar = Mat2::Zero();
  double lambda_bar = 0.0;
  double mu_bar = 0.0;
};
HenckyVjp hencky_tau_vjp(const Mat2& F, const LameParams& params, const LogDerivative& dlog, const Mat2& tau_bar);

// Right-stretch diagonal U_ii from the polar decomposition F = R U; used by
// the GIMP domain-length update.
Vec2 stretch_diag(const Mat2& F);

// VJP of F -> (U_00, U_11): accumulates into F_bar given ubar.
Mat2 stretch_diag_vjp(const Mat2& F, const Vec2& ubar);

}  // namespace mpmtopo
