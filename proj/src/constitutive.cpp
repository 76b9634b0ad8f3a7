#include "mpmtopo/constitutive.hpp"

#include <cmath>

namespace mpmtopo {

namespace {
constexpr double kLoewnerEps = 1e-12;  // eigenvalue-gap switch to the diagonal form
}

SymEig2 sym_eig_2x2(const Mat2& B) {
  const double a = B(0, 0), b = 0.5 * (B(0, 1) + B(1, 0)), c = B(1, 1);
  const double mean = 0.5 * (a + c);
  const double disc = std::hypot(0.5 * (a - c), b);
  SymEig2 out;
  out.lam = Vec2(mean + disc, mean - disc);

  Vec2 v1;
  if (disc <= 0.0) {
    v1 = Vec2(1.0, 0.0);  // isotropic
  } else {
    // Pick the numerically larger residual column of (B - lam2 I).
    const Vec2 c1(a - out.lam(1), b);
    const Vec2 c2(b, c - out.lam(1));
    v1 = (c1.squaredNorm() >= c2.squaredNorm()) ? c1 : c2;
    v1.normalize();
  }
  if (v1.x() < 0.0 || (v1.x() == 0.0 && v1.y() < 0.0)) v1 = -v1;
  out.Q.col(0) = v1;
  out.Q.col(1) = Vec2(-v1.y(), v1.x());

  if (out.lam(1) <= 0.0)
    throw InvertedStateError("symmetric eigendecomposition: matrix is not positive definite", out.lam(1));
  return out;
}

Mat2 matrix_log_spd(const Mat2& B) {
  const SymEig2 e = sym_eig_2x2(B);
  const Vec2 lg(std::log(e.lam(0)), std::log(e.lam(1)));
  return e.Q * lg.asDiagonal() * e.Q.transpose();
}

LogDerivative log_derivative(const Mat2& B) {
  LogDerivative d;
  d.eig = sym_eig_2x2(B);
  const double l0 = d.eig.lam(0), l1 = d.eig.lam(1);
  const double ln0 = std::log(l0), ln1 = std::log(l1);
  d.loewner(0, 0) = 1.0 / l0;
  d.loewner(1, 1) = 1.0 / l1;
  const double off = (std::abs(l0 - l1) < kLoewnerEps) ? 1.0 / l0 : (ln0 - ln1) / (l0 - l1);
  d.loewner(0, 1) = d.loewner(1, 0) = off;
  const Vec2 lg(ln0, ln1);
  d.log_b = d.eig.Q * lg.asDiagonal() * d.eig.Q.transpose();
  return d;
}

Mat2 frechet_log(const Mat2& B, const Mat2& E) { return log_derivative(B).apply(E); }

StressState hencky_stress(const Mat2& F, const LameParams& params) {
  const double J = F.determinant();
  if (J <= 0.0) throw InvertedStateError("deformation gradient inverted", J);
  const Mat2 B = F * F.transpose();
  const Mat2 logB = matrix_log_spd(B);
  StressState s;
  s.J = J;
  s.hencky = 0.5 * logB;
  const double tr2 = s.hencky.trace();
  s.eps_zz = -params.lambda / (params.lambda + 2.0 * params.mu) * tr2;
  const double lps = plane_stress_lambda(params);
  s.tau = lps * tr2 * Mat2::Identity() + 2.0 * params.mu * s.hencky;
  s.cauchy = s.tau / J;
  return s;
}

Mat2 hencky_tau(const Mat2& F, const LameParams& params) {
  const double J = F.determinant();
  if (J <= 0.0) throw InvertedStateError("deformation gradient inverted", J);
  const Mat2 B = F * F.transpose();
  const Mat2 logB = matrix_log_spd(B);
  const double lps = plane_stress_lambda(params);
  return (0.5 * lps * logB.trace()) * Mat2::Identity() + params.mu * logB;
}

Mat2 hencky_tau_dir(const Mat2& F, const LameParams& params, const LogDerivative& dlog, const Mat2& dF) {
  const Mat2 dB = dF * F.transpose() + F * dF.transpose();
  const Mat2 dlogB = dlog.apply(dB);
  const double lps = plane_stress_lambda(params);
  return params.mu * dlogB + (0.5 * lps * dlogB.trace()) * Mat2::Identity();
}

HenckyVjp hencky_tau_vjp(const Mat2& F, const LameParams& params, const LogDerivative& dlog, const Mat2& tau_bar) {
  HenckyVjp out;
  const Mat2 tb = 0.5 * (tau_bar + tau_bar.transpose());
  const double lps = plane_stress_lambda(params);

  // F path: <tb, mu dlog[dB] + lps/2 tr(dlog[dB]) I>; dlog is self-adjoint.
  const Mat2 arg = params.mu * tb + (0.5 * lps * tb.trace()) * Mat2::Identity();
  const Mat2 B_bar = dlog.apply(arg);
  out.F_bar = (B_bar + B_bar.transpose()) * F;

  // Material path: tau = lps(l, m) * tr(eps) I + 2 m eps, eps = 0.5 log B.
  const Mat2 eps = 0.5 * dlog.log_b;
  const double tr_eps = eps.trace();
  const double denom = params.lambda + 2.0 * params.mu;
  const double dlps_dl = 4.0 * params.mu * params.mu / (denom * denom);
  const double dlps_dm = 2.0 * params.lambda * params.lambda / (denom * denom);
  const double tr_tb = tb.trace();
  out.lambda_bar = tr_eps * tr_tb * dlps_dl;
  out.mu_bar = tr_eps * tr_tb * dlps_dm + 2.0 * tb.cwiseProduct(eps).sum();
  return out;
}

Vec2 stretch_diag(const Mat2& F) {
  const Mat2 C = F.transpose() * F;
  const SymEig2 e = sym_eig_2x2(C);
  const Vec2 sq(std::sqrt(e.lam(0)), std::sqrt(e.lam(1)));
  const Mat2 U = e.Q * sq.asDiagonal() * e.Q.transpose();
  return Vec2(U(0, 0), U(1, 1));
}

Mat2 stretch_diag_vjp(const Mat2& F, const Vec2& ubar) {
  // U = sqrt(C), C = F^T F. dU = Q (M .* (Q^T dC Q)) Q^T with
  // M_ij = 1/(sqrt(l_i) + sqrt(l_j)); the map is self-adjoint, so the bar of
  // C is the same transform applied to the (diagonal) bar of U.
  const Mat2 C = F.transpose() * F;
  const SymEig2 e = sym_eig_2x2(C);
  const double s0 = std::sqrt(e.lam(0)), s1 = std::sqrt(e.lam(1));
  Mat2 M;
  M(0, 0) = 1.0 / (2.0 * s0);
  M(1, 1) = 1.0 / (2.0 * s1);
  M(0, 1) = M(1, 0) = 1.0 / (s0 + s1);
  Mat2 Ubar = Mat2::Zero();
  Ubar(0, 0) = ubar(0);
  Ubar(1, 1) = ubar(1);
  const Mat2 arg = e.Q.transpose() * Ubar * e.Q;
  const Mat2 C_bar = e.Q * M.cwiseProduct(arg) * e.Q.transpose();
  return F * (C_bar + C_bar.transpose());
}

}  // namespace mpmtopo
