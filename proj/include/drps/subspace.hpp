#pragma once

// Linear subspaces of R^n stored by an orthonormal basis, with projections,
// intersections, complements and principal / Friedrichs angles.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drps/error.hpp"
#include "drps/linalg.hpp"

namespace drps {

/// Singular values below this fraction of the largest are treated as zero.
inline constexpr double kRankTolerance = 1e-10;
/// A cosine at or above 1 - kUnitCosineTolerance marks an intersection direction.
inline constexpr double kUnitCosineTolerance = 1e-8;

/// Linear subspace of R^n represented by an n x d matrix with orthonormal columns.
///
/// The basis is taken as given: factories in this library only build bases that are
/// orthonormal by construction. Use orthonormalize() for arbitrary spanning sets.
class Subspace {
 public:
  Subspace() = default;

  Subspace(Index ambient_dim, Matrix basis) : n_(ambient_dim), basis_(std::move(basis)) {
    if (n_ <= 0) throw DimensionError("Subspace: ambient dimension must be positive");
    if (basis_.cols() == 0) basis_.resize(n_, 0);
    detail::require_same_dim(basis_.rows(), n_, "Subspace basis rows");
    if (basis_.cols() > n_) throw DimensionError("Subspace: more basis columns than ambient dimension");
  }

  static Subspace zero(Index n) { return Subspace(n, Matrix(n, 0)); }
  static Subspace full(Index n) { return Subspace(n, Matrix::Identity(n, n)); }

  /// span{e_i : i in coords}; indices must be distinct.
  static Subspace coordinates(Index n, std::span<const Index> coords) {
    Matrix b = Matrix::Zero(n, static_cast<Index>(coords.size()));
    for (Index j = 0; j < b.cols(); ++j) b(coords[static_cast<std::size_t>(j)], j) = 1.0;
    return Subspace(n, std::move(b));
  }

  Index ambient_dim() const { return n_; }
  Index dim() const { return basis_.cols(); }
  const Matrix& basis() const { return basis_; }

  Matrix projector() const { return basis_ * basis_.transpose(); }

  Vector project(const Vector& x) const {
    detail::require_same_dim(x.size(), n_, "project");
    if (dim() == 0) return Vector::Zero(n_);
    return basis_ * (basis_.transpose() * x);
  }

  /// max |B^T B - I| entrywise.
  double orthonormality_error() const {
    if (dim() == 0) return 0.0;
    return (basis_.transpose() * basis_ - Matrix::Identity(dim(), dim())).cwiseAbs().maxCoeff();
  }

  /// Bitwise equality of bases, used as a cheap cache key.
  bool identical_to(const Subspace& o) const {
    return n_ == o.n_ && dim() == o.dim() && basis_ == o.basis_;
  }

 private:
  Index n_ = 0;
  Matrix basis_;
};

inline Vector project(const Subspace& s, const Vector& x) { return s.project(x); }

/// Orthonormal basis of span(columns of `vectors`) by a thin SVD.
inline Subspace orthonormalize(const Matrix& vectors) {
  const Index n = vectors.rows();
  if (n <= 0) throw DimensionError("orthonormalize: empty ambient dimension");
  if (vectors.cols() == 0) return Subspace::zero(n);
  Eigen::JacobiSVD<Matrix> svd(vectors, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double cut = kRankTolerance * (s.size() > 0 ? s(0) : 0.0);
  Index rank = 0;
  while (rank < s.size() && s(rank) > cut && s(rank) > 0.0) ++rank;
  return Subspace(n, svd.matrixU().leftCols(rank));
}

inline Subspace orthonormalize(std::span<const Vector> vectors, Index n) {
  if (n <= 0) throw DimensionError("orthonormalize: empty ambient dimension");
  Matrix m(n, static_cast<Index>(vectors.size()));
  for (Index j = 0; j < m.cols(); ++j) {
    const Vector& v = vectors[static_cast<std::size_t>(j)];
    detail::require_same_dim(v.size(), n, "orthonormalize");
    m.col(j) = v;
  }
  return orthonormalize(m);
}

/// Principal angles between two subspaces, as cosines.
struct AngleSet {
  std::vector<double> cosines;  ///< nonincreasing, in [0,1]
  Index intersection_dim = 0;   ///< number of cosines >= 1 - 1e-8

  /// 1-based position of the Friedrichs angle among the principal angles.
  Index friedrichs_index() const { return intersection_dim + 1; }

  std::vector<double> angles() const {
    std::vector<double> out;
    out.reserve(cosines.size());
    for (double c : cosines) out.push_back(std::acos(c));
    return out;
  }
};

namespace detail {

// SVD of U^T V with U the lower-dimensional side.
struct CrossGram {
  Eigen::JacobiSVD<Matrix> svd;
  bool swapped = false;
};

inline CrossGram cross_gram(const Subspace& u, const Subspace& v, int options) {
  detail::require_same_dim(u.ambient_dim(), v.ambient_dim(), "principal_angles");
  const bool swapped = u.dim() > v.dim();
  const Matrix& a = swapped ? v.basis() : u.basis();
  const Matrix& b = swapped ? u.basis() : v.basis();
  return CrossGram{Eigen::JacobiSVD<Matrix>(a.transpose() * b, options), swapped};
}

}  // namespace detail

inline AngleSet principal_angles(const Subspace& u, const Subspace& v) {
  detail::require_same_dim(u.ambient_dim(), v.ambient_dim(), "principal_angles");
  AngleSet out;
  if (u.dim() == 0 || v.dim() == 0) return out;
  const auto g = detail::cross_gram(u, v, 0);
  const auto& s = g.svd.singularValues();
  out.cosines.reserve(static_cast<std::size_t>(s.size()));
  for (Index i = 0; i < s.size(); ++i) {
    const double c = std::clamp(s(i), 0.0, 1.0);
    out.cosines.push_back(c);
    if (c >= 1.0 - kUnitCosineTolerance) ++out.intersection_dim;
  }
  return out;
}

/// Friedrichs angle, i.e. the first principal angle past U ∩ V. Always in (0, pi/2].
/// Throws ContainmentError when one subspace contains the other.
inline double friedrichs_angle(const AngleSet& angles) {
  const auto d = static_cast<std::size_t>(angles.intersection_dim);
  if (d >= angles.cosines.size()) {
    throw ContainmentError("friedrichs_angle: one subspace contains the other");
  }
  return std::acos(angles.cosines[d]);
}

inline double friedrichs_angle(const Subspace& u, const Subspace& v) {
  return friedrichs_angle(principal_angles(u, v));
}

inline Subspace intersect(const Subspace& u, const Subspace& v) {
  detail::require_same_dim(u.ambient_dim(), v.ambient_dim(), "intersect");
  const Index n = u.ambient_dim();
  if (u.dim() == 0 || v.dim() == 0) return Subspace::zero(n);
  const auto g = detail::cross_gram(u, v, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = g.svd.singularValues();
  Index d = 0;
  while (d < s.size() && s(d) >= 1.0 - kUnitCosineTolerance) ++d;
  if (d == 0) return Subspace::zero(n);
  const Matrix& small = g.swapped ? v.basis() : u.basis();
  const Matrix& large = g.swapped ? u.basis() : v.basis();
  // Average the two nearly-equal principal vectors, then re-orthonormalize.
  Matrix dirs = 0.5 * (small * g.svd.matrixU().leftCols(d) + large * g.svd.matrixV().leftCols(d));
  return orthonormalize(dirs);
}

/// Orthogonal complement.
inline Subspace complement(const Subspace& s) {
  const Index n = s.ambient_dim();
  const Index d = s.dim();
  if (d == 0) return Subspace::full(n);
  if (d == n) return Subspace::zero(n);
  Eigen::HouseholderQR<Matrix> qr(s.basis());
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  return Subspace(n, q.rightCols(n - d));
}

/// Direct sum of two mutually orthogonal subspaces.
inline Subspace orthogonal_sum(const Subspace& a, const Subspace& b) {
  detail::require_same_dim(a.ambient_dim(), b.ambient_dim(), "orthogonal_sum");
  Matrix m(a.ambient_dim(), a.dim() + b.dim());
  m << a.basis(), b.basis();
  return orthonormalize(m);
}

/// ||(I - P_V) U||_F when dimensions agree (the root-sum of squared sines of the principal
/// angles), and 1 otherwise. Zero iff the subspaces coincide.
inline double projector_distance(const Subspace& u, const Subspace& v) {
  detail::require_same_dim(u.ambient_dim(), v.ambient_dim(), "projector_distance");
  if (u.dim() != v.dim()) return 1.0;
  if (u.dim() == 0 || u.identical_to(v)) return 0.0;
  const Matrix r = u.basis() - v.basis() * (v.basis().transpose() * u.basis());
  return r.norm();
}

inline bool same_subspace(const Subspace& u, const Subspace& v, double tol = 1e-8) {
  return projector_distance(u, v) <= tol;
}

}  // namespace drps
