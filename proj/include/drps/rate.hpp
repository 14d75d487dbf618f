#pragma once

// Local linear rate of Douglas-Rachford around a fixed point with affine active manifolds.
//
// With W_F = P_{T_F} (I + gamma P_{T_F} H_F P_{T_F})^{-1} P_{T_F} for F in {J, G},
//   M   = I/2 + (2 W_G - I)(2 W_J - I) / 2
//   M_l = (1 - l) I + l M
// M_l converges to the projector M_inf onto Fix M, and rho(M_l - M_inf) < 1 is the local rate.
// For locally polyhedral J and G (H = 0) the rate is
//   sqrt((1 - l)^2 + l (2 - l) cos^2 theta_F(T_J, T_G)).

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "drps/dr.hpp"
#include "drps/error.hpp"
#include "drps/functions.hpp"
#include "drps/linalg.hpp"
#include "drps/subspace.hpp"

namespace drps {

/// Relative singular-value threshold for ker(I - M).
inline constexpr double kKernelTolerance = 1e-8;
/// Distances below this are excluded from observed-rate fits.
inline constexpr double kObservedRateFloor = 1e-11;
inline constexpr std::size_t kMinRateWindow = 30;

struct RateModel {
  Subspace tj;
  Subspace tg;
  Matrix hj;
  Matrix hg;
  double gamma = 0.0;
  double lambda = 1.0;
  Matrix wj;
  Matrix wg;
  Matrix m;
  Matrix m_lambda;
  Matrix m_inf;
  double predicted_rate = 0.0;

  Index dim() const { return m.rows(); }
  bool polyhedral() const { return hj.isZero(0.0) && hg.isZero(0.0); }
};

namespace detail {

inline Matrix symmetric_part(const Matrix& a) { return 0.5 * (a + a.transpose()); }

inline void check_hessian(const Matrix& h, const Subspace& t, const char* which) {
  const Index n = t.ambient_dim();
  if (h.rows() != n || h.cols() != n) throw DimensionError(std::string("build_M: Hessian ") + which);
  if (symmetry_residual(h) > 1e-8)
    throw ParameterError(std::string("build_M: Hessian ") + which + " is not symmetric");
  if (h.isZero(0.0)) return;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric_part(h), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw ParameterError(std::string("build_M: Hessian ") + which + " is indefinite");
}

// P_T (I + gamma P_T H P_T)^{-1} P_T.
inline Matrix shrunk_projector(const Subspace& t, const Matrix& h, double gamma) {
  const Index n = t.ambient_dim();
  const Matrix p = t.projector();
  if (h.isZero(0.0)) return p;
  const Matrix q = symmetric_part(gamma * p * h * p);
  const Matrix inv = (Matrix::Identity(n, n) + q).llt().solve(Matrix::Identity(n, n));
  return symmetric_part(p * inv * p);
}

// Orthonormal basis of ker(a) by SVD, threshold relative to the largest singular value.
inline Matrix kernel_basis(const Matrix& a) {
  const Index n = a.cols();
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  if (smax == 0.0) return Matrix::Identity(n, n);
  Index rank = 0;
  while (rank < s.size() && s(rank) > kKernelTolerance * smax) ++rank;
  return svd.matrixV().rightCols(n - rank);
}

}  // namespace detail

/// Assembles M from the tangent spaces and Riemannian Hessians at the fixed point.
inline RateModel build_M(const Subspace& tj, const Subspace& tg, const Matrix& hj, const Matrix& hg,
                         double gamma) {
  if (!(gamma > 0.0)) throw ParameterError("build_M: gamma must be positive");
  detail::require_same_dim(tj.ambient_dim(), tg.ambient_dim(), "build_M");
  detail::check_hessian(hj, tj, "H_J");
  detail::check_hessian(hg, tg, "H_G");
  const Index n = tj.ambient_dim();
  const Matrix id = Matrix::Identity(n, n);

  RateModel r;
  r.tj = tj;
  r.tg = tg;
  r.hj = hj;
  r.hg = hg;
  r.gamma = gamma;
  r.wj = detail::shrunk_projector(tj, hj, gamma);
  r.wg = detail::shrunk_projector(tg, hg, gamma);
  r.m = 0.5 * id + 0.5 * (2.0 * r.wg - id) * (2.0 * r.wj - id);
  r.m_lambda = r.m;
  return r;
}

/// Orthogonal projector onto Fix M = ker(I - M).
inline Matrix fixed_subspace(const Matrix& m) {
  const Index n = m.rows();
  const Matrix k = detail::kernel_basis(Matrix::Identity(n, n) - m);
  return k * k.transpose();
}

/// Projector onto (T_J ∩ T_G) ⊕ (S_J ∩ S_G), the fixed space of M in the polyhedral case.
inline Matrix polyhedral_fixed_projector(const Subspace& tj, const Subspace& tg) {
  const Subspace a = intersect(tj, tg);
  const Subspace b = intersect(complement(tj), complement(tg));
  return orthogonal_sum(a, b).projector();
}

/// rho(M_l - M_inf). Throws ModelError when it is not below 1.
inline double spectral_rate(const Matrix& m_lambda, const Matrix& m_inf) {
  const double rho = spectral_radius(m_lambda - m_inf);
  if (rho >= 1.0 - 1e-12) throw ModelError("spectral_rate: rho(M_lambda - M_inf) >= 1, model violates convergence");
  return rho;
}

/// Sets lambda, M_l, M_inf and the spectral rate on a built model.
inline RateModel& relax(RateModel& r, double lambda) {
  if (!(lambda > 0.0 && lambda < 2.0)) throw ParameterError("relax: lambda must lie in (0, 2)");
  const Index n = r.dim();
  r.lambda = lambda;
  r.m_lambda = (1.0 - lambda) * Matrix::Identity(n, n) + lambda * r.m;
  r.m_inf = fixed_subspace(r.m);
  r.predicted_rate = spectral_rate(r.m_lambda, r.m_inf);
  return r;
}

inline double polyhedral_rate_from_angle(double theta_f, double lambda) {
  if (!(lambda > 0.0 && lambda < 2.0)) throw ParameterError("polyhedral_rate: lambda must lie in (0, 2)");
  const double c = std::cos(theta_f);
  return std::sqrt((1.0 - lambda) * (1.0 - lambda) + lambda * (2.0 - lambda) * c * c);
}

/// Closed-form optimal rate for locally polyhedral J, G. Throws ContainmentError when the
/// Friedrichs angle is undefined.
inline double polyhedral_rate(const Subspace& tj, const Subspace& tg, double lambda) {
  return polyhedral_rate_from_angle(friedrichs_angle(tj, tg), lambda);
}

struct SpectrumCheck {
  bool passed = false;
  double max_deviation = 0.0;
  std::vector<double> moduli;
};

/// Every eigenvalue modulus of a polyhedral M must sit within tol of {0, 1} ∪ {cos theta_k}.
inline SpectrumCheck spectrum_moduli_check(const Matrix& m, const Subspace& tj, const Subspace& tg,
                                           double tol = 1e-8) {
  std::vector<double> targets{0.0, 1.0};
  for (double c : principal_angles(tj, tg).cosines) targets.push_back(c);
  Eigen::EigenSolver<Matrix> es(m, false);
  SpectrumCheck out;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double mod = std::abs(es.eigenvalues()(i));
    out.moduli.push_back(mod);
    double best = kInf;
    for (double t : targets) best = std::min(best, std::abs(mod - t));
    out.max_deviation = std::max(out.max_deviation, best);
  }
  std::sort(out.moduli.begin(), out.moduli.end(), std::greater<>());
  out.passed = out.max_deviation <= tol;
  return out;
}

/// exp of the least-squares slope of ln ||z^k - z*|| over k in [K, K'], K' the last index with
/// ||z^k - z*|| >= floor. Returns 0 when the iterates hit z* exactly (finite termination).
inline double observed_rate(const ConvergenceLog& log, long k_start, double floor = kObservedRateFloor) {
  if (!log.reference) throw ParameterError("observed_rate: log has no reference");
  std::vector<std::pair<double, double>> pts;
  std::size_t before_zero = 0;
  for (const auto& r : log.records) {
    if (r.k < k_start) continue;
    if (r.z_dist == 0.0) {
      if (before_zero < kMinRateWindow) return 0.0;
      break;
    }
    ++before_zero;
  }
  long last = -1;
  for (const auto& r : log.records)
    if (r.k >= k_start && r.z_dist >= floor) last = r.k;
  for (const auto& r : log.records)
    if (r.k >= k_start && r.k <= last) pts.emplace_back(static_cast<double>(r.k), std::log(r.z_dist));
  if (pts.size() < kMinRateWindow) {
    throw WindowTooShortError("observed_rate: only " + std::to_string(pts.size()) +
                              " points above the floor after identification");
  }
  double mk = 0.0, ml = 0.0;
  for (const auto& [k, l] : pts) {
    mk += k;
    ml += l;
  }
  mk /= static_cast<double>(pts.size());
  ml /= static_cast<double>(pts.size());
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [k, l] : pts) {
    sxy += (k - mk) * (l - ml);
    sxx += (k - mk) * (k - mk);
  }
  return std::exp(sxy / sxx);
}

/// Model for a lifted problem: bold T_J = ⨉ T_i, T_G = diagonal S, H_G = 0.
inline RateModel build_product_M(const std::vector<Subspace>& ts, const std::vector<Matrix>& hs, double gamma,
                                 double lambda) {
  if (ts.size() < 2 || ts.size() != hs.size()) throw ParameterError("build_product_M: need m >= 2 blocks");
  const Index n = ts.front().ambient_dim();
  const auto m = static_cast<Index>(ts.size());
  Index cols = 0;
  for (const auto& t : ts) {
    detail::require_same_dim(t.ambient_dim(), n, "build_product_M: block");
    cols += t.dim();
  }
  Matrix basis = Matrix::Zero(m * n, cols);
  Matrix h = Matrix::Zero(m * n, m * n);
  Index c = 0;
  for (Index i = 0; i < m; ++i) {
    const auto& t = ts[static_cast<std::size_t>(i)];
    const auto& hi = hs[static_cast<std::size_t>(i)];
    detail::require_same_dim(hi.rows(), n, "build_product_M: Hessian");
    basis.block(i * n, c, n, t.dim()) = t.basis();
    h.block(i * n, i * n, n, n) = hi;
    c += t.dim();
  }
  const ConsensusIndicator diag(m, n);
  RateModel r = build_M(Subspace(m * n, std::move(basis)), diag.diagonal(), h, Matrix::Zero(m * n, m * n), gamma);
  relax(r, lambda);
  return r;
}

/// Model at a reference fixed point of (J, G).
inline RateModel linearize(const PartlySmoothFunction& j, const PartlySmoothFunction& g, const Reference& ref,
                           double gamma, double lambda) {
  RateModel r = build_M(j.model_subspace(ref.x), g.model_subspace(ref.v), j.riemannian_hessian(ref.x),
                        g.riemannian_hessian(ref.v), gamma);
  relax(r, lambda);
  return r;
}

}  // namespace drps
