#pragma once

// Catalog of partly smooth functions. Every instance is immutable after construction and
// exposes the objects the identification / rate analysis needs: the proximity operator, the
// model subspace T_x = Lin(∂f(x))^⊥, the Riemannian gradient e_x = P_{T_x} ∂f(x), the
// Riemannian Hessian along the (affine) active manifold, and a signed margin measuring how
// deep a vector sits inside ri ∂f(x).

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drps/error.hpp"
#include "drps/linalg.hpp"
#include "drps/prox_kernels.hpp"
#include "drps/subspace.hpp"

namespace drps {

/// Relative threshold under which an entry counts as zero: |x_i| <= 1e-10 (1 + ||x||).
inline constexpr double kActiveTolerance = 1e-10;
/// Tolerance for equality tests inside ri_margin, relative to 1 + ||u||_inf.
inline constexpr double kMarginTolerance = 1e-9;

class PartlySmoothFunction {
 public:
  virtual ~PartlySmoothFunction() = default;

  virtual Index dim() const = 0;
  virtual std::string name() const = 0;
  /// Locally polyhedral: e_x constant along x + T_x, Riemannian Hessian zero.
  virtual bool polyhedral() const { return true; }

  /// Function value; +inf outside the domain.
  double eval(const Vector& x) const {
    check_dim(x, "eval");
    return do_eval(x);
  }

  /// argmin_p gamma f(p) + 0.5 ||p - x||^2.
  Vector prox(double gamma, const Vector& x) const {
    if (!(gamma > 0.0)) throw ParameterError("prox: gamma must be positive");
    check_dim(x, "prox");
    return do_prox(gamma, x);
  }

  Subspace model_subspace(const Vector& x) const {
    check_dim(x, "model_subspace");
    return do_model_subspace(x);
  }

  Vector model_gradient(const Vector& x) const {
    check_dim(x, "model_gradient");
    return do_model_gradient(x);
  }

  /// Symmetric PSD n x n matrix H with P_T H P_T = H.
  Matrix riemannian_hessian(const Vector& x) const {
    check_dim(x, "riemannian_hessian");
    return do_riemannian_hessian(x);
  }

  /// Positive iff u ∈ ri ∂f(x); 0 on the relative boundary; -inf when u ∉ ∂f(x);
  /// +inf when ∂f(x) is an affine set containing u.
  double ri_margin(const Vector& x, const Vector& u) const {
    check_dim(x, "ri_margin");
    check_dim(u, "ri_margin");
    return do_ri_margin(x, u);
  }

 protected:
  virtual double do_eval(const Vector& x) const = 0;
  virtual Vector do_prox(double gamma, const Vector& x) const = 0;
  virtual Subspace do_model_subspace(const Vector& x) const = 0;
  virtual Vector do_model_gradient(const Vector& x) const = 0;
  virtual Matrix do_riemannian_hessian(const Vector&) const { return Matrix::Zero(dim(), dim()); }
  virtual double do_ri_margin(const Vector& x, const Vector& u) const = 0;

 private:
  void check_dim(const Vector& x, const char* what) const {
    detail::require_same_dim(x.size(), dim(), what);
  }
};

using FunctionPtr = std::shared_ptr<const PartlySmoothFunction>;

inline Vector prox(const PartlySmoothFunction& f, double gamma, const Vector& x) {
  return f.prox(gamma, x);
}

/// ||P_{T_p}(x - p) - gamma e_p|| with p = prox(gamma, x): zero for functions partly smooth
/// along p + T_p.
inline double check_prox_identity(const PartlySmoothFunction& f, double gamma, const Vector& x) {
  const Vector p = f.prox(gamma, x);
  const Subspace t = f.model_subspace(p);
  const Vector predicted = p + t.project(x - p) - gamma * f.model_gradient(p);
  return (p - predicted).norm();
}

namespace detail {

inline double zero_threshold(const Vector& x) { return kActiveTolerance * (1.0 + x.norm()); }

inline double margin_tolerance(const Vector& u) {
  return kMarginTolerance * (1.0 + (u.size() ? u.cwiseAbs().maxCoeff() : 0.0));
}

inline std::vector<Index> support(const Vector& x) {
  const double thr = zero_threshold(x);
  std::vector<Index> s;
  for (Index i = 0; i < x.size(); ++i)
    if (std::abs(x(i)) > thr) s.push_back(i);
  return s;
}

// Margin of u inside ri of the weighted l1 subdifferential at a point whose support is given
// by `x`: signs must match on the support, margin is min (w_i - |u_i|) off it.
inline double l1_margin(const Vector& x, const Vector& u, const Vector& w) {
  const double thr = zero_threshold(x);
  const double tol = margin_tolerance(u);
  double margin = kInf;
  for (Index i = 0; i < x.size(); ++i) {
    if (std::abs(x(i)) > thr) {
      if (std::abs(u(i) - w(i) * sign(x(i))) > tol) return -kInf;
    } else {
      const double m = w(i) - std::abs(u(i));
      if (m < -tol) return -kInf;
      margin = std::min(margin, m);
    }
  }
  return margin;
}

}  // namespace detail

/// f = 0.
class ZeroFunction final : public PartlySmoothFunction {
 public:
  explicit ZeroFunction(Index n) : n_(n) {}
  Index dim() const override { return n_; }
  std::string name() const override { return "zero"; }

 protected:
  double do_eval(const Vector&) const override { return 0.0; }
  Vector do_prox(double, const Vector& x) const override { return x; }
  Subspace do_model_subspace(const Vector&) const override { return Subspace::full(n_); }
  Vector do_model_gradient(const Vector&) const override { return Vector::Zero(n_); }
  double do_ri_margin(const Vector&, const Vector& u) const override {
    return u.cwiseAbs().maxCoeff() <= detail::margin_tolerance(u) ? kInf : -kInf;
  }

 private:
  Index n_;
};

/// Weighted l1 norm sum_i w_i |x_i|, w_i > 0.
class L1Norm final : public PartlySmoothFunction {
 public:
  explicit L1Norm(Index n) : w_(Vector::Ones(n)) {}
  explicit L1Norm(Vector weights) : w_(std::move(weights)) {
    if (w_.size() == 0 || (w_.array() <= 0.0).any())
      throw ParameterError("L1Norm: weights must be positive");
  }
  Index dim() const override { return w_.size(); }
  std::string name() const override { return "l1"; }

 protected:
  double do_eval(const Vector& x) const override { return w_.dot(x.cwiseAbs()); }

  Vector do_prox(double gamma, const Vector& x) const override {
    Vector p(x.size());
    for (Index i = 0; i < x.size(); ++i) p(i) = kernels::soft_threshold(x(i), gamma * w_(i));
    return p;
  }

  Subspace do_model_subspace(const Vector& x) const override {
    const auto s = detail::support(x);
    return Subspace::coordinates(dim(), s);
  }

  Vector do_model_gradient(const Vector& x) const override {
    Vector e = Vector::Zero(dim());
    for (Index i : detail::support(x)) e(i) = w_(i) * sign(x(i));
    return e;
  }

  double do_ri_margin(const Vector& x, const Vector& u) const override {
    return detail::l1_margin(x, u, w_);
  }

 private:
  Vector w_;
};

/// Group lasso norm w sum_b ||x_b||_2 over a partition of the coordinates into blocks.
class GroupL12Norm final : public PartlySmoothFunction {
 public:
  GroupL12Norm(Index n, std::vector<std::vector<Index>> blocks, double weight = 1.0)
      : n_(n), blocks_(std::move(blocks)), w_(weight) {
    if (!(w_ > 0.0)) throw ParameterError("GroupL12Norm: weight must be positive");
    std::vector<int> seen(static_cast<std::size_t>(n_), 0);
    for (const auto& b : blocks_) {
      if (b.empty()) throw ParameterError("GroupL12Norm: empty block");
      for (Index i : b) {
        if (i < 0 || i >= n_) throw DimensionError("GroupL12Norm: block index out of range");
        ++seen[static_cast<std::size_t>(i)];
      }
    }
    if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; }))
      throw ParameterError("GroupL12Norm: blocks must partition the coordinates");
  }

  /// Consecutive blocks of equal size.
  static GroupL12Norm uniform(Index n, Index block_size, double weight = 1.0) {
    if (block_size <= 0 || n % block_size != 0)
      throw ParameterError("GroupL12Norm: block size must divide n");
    std::vector<std::vector<Index>> blocks;
    for (Index s = 0; s < n; s += block_size) {
      std::vector<Index> b(static_cast<std::size_t>(block_size));
      std::iota(b.begin(), b.end(), s);
      blocks.push_back(std::move(b));
    }
    return GroupL12Norm(n, std::move(blocks), weight);
  }

  Index dim() const override { return n_; }
  std::string name() const override { return "l12"; }
  bool polyhedral() const override { return false; }
  const std::vector<std::vector<Index>>& blocks() const { return blocks_; }

 protected:
  double do_eval(const Vector& x) const override {
    double s = 0.0;
    for (const auto& b : blocks_) s += block_norm(x, b);
    return w_ * s;
  }

  Vector do_prox(double gamma, const Vector& x) const override {
    Vector p = Vector::Zero(n_);
    const double t = gamma * w_;
    for (const auto& b : blocks_) {
      const double nb = block_norm(x, b);
      if (nb <= t) continue;
      const double scale = 1.0 - t / nb;
      for (Index i : b) p(i) = scale * x(i);
    }
    return p;
  }

  Subspace do_model_subspace(const Vector& x) const override {
    std::vector<Index> coords;
    const double thr = detail::zero_threshold(x);
    for (const auto& b : blocks_)
      if (block_norm(x, b) > thr) coords.insert(coords.end(), b.begin(), b.end());
    std::sort(coords.begin(), coords.end());
    return Subspace::coordinates(n_, coords);
  }

  Vector do_model_gradient(const Vector& x) const override {
    Vector e = Vector::Zero(n_);
    const double thr = detail::zero_threshold(x);
    for (const auto& b : blocks_) {
      const double nb = block_norm(x, b);
      if (nb <= thr) continue;
      for (Index i : b) e(i) = w_ * x(i) / nb;
    }
    return e;
  }

  // On an active block: w (I - x_b x_b^T / ||x_b||^2) / ||x_b||.
  Matrix do_riemannian_hessian(const Vector& x) const override {
    Matrix h = Matrix::Zero(n_, n_);
    const double thr = detail::zero_threshold(x);
    for (const auto& b : blocks_) {
      const double nb = block_norm(x, b);
      if (nb <= thr) continue;
      for (Index i : b)
        for (Index j : b) h(i, j) = w_ * ((i == j ? 1.0 : 0.0) - x(i) * x(j) / (nb * nb)) / nb;
    }
    return h;
  }

  double do_ri_margin(const Vector& x, const Vector& u) const override {
    const double thr = detail::zero_threshold(x);
    const double tol = detail::margin_tolerance(u);
    double margin = kInf;
    for (const auto& b : blocks_) {
      const double nb = block_norm(x, b);
      if (nb > thr) {
        for (Index i : b)
          if (std::abs(u(i) - w_ * x(i) / nb) > tol) return -kInf;
      } else {
        const double m = w_ - block_norm(u, b);
        if (m < -tol) return -kInf;
        margin = std::min(margin, m);
      }
    }
    return margin;
  }

 private:
  static double block_norm(const Vector& x, const std::vector<Index>& b) {
    double s = 0.0;
    for (Index i : b) s += x(i) * x(i);
    return std::sqrt(s);
  }

  Index n_;
  std::vector<std::vector<Index>> blocks_;
  double w_;
};

/// l-infinity norm max_i |x_i|.
class LInfNorm final : public PartlySmoothFunction {
 public:
  explicit LInfNorm(Index n) : n_(n) {}
  Index dim() const override { return n_; }
  std::string name() const override { return "linf"; }

  /// Saturated coordinates I = {i : ||x||_inf - |x_i| <= 1e-10 (1 + ||x||_inf)}; empty at x = 0.
  static std::vector<Index> saturation(const Vector& x) {
    const double m = x.cwiseAbs().maxCoeff();
    std::vector<Index> sat;
    if (is_origin(x)) return sat;
    const double thr = kActiveTolerance * (1.0 + m);
    for (Index i = 0; i < x.size(); ++i)
      if (m - std::abs(x(i)) <= thr) sat.push_back(i);
    return sat;
  }

 protected:
  double do_eval(const Vector& x) const override { return x.cwiseAbs().maxCoeff(); }

  // Moreau: x - gamma proj_{B_1}(x / gamma), i.e. x clipped at gamma * tau.
  Vector do_prox(double gamma, const Vector& x) const override {
    const double t = gamma * kernels::l1_ball_threshold(x / gamma, 1.0);
    return x.cwiseMax(-t).cwiseMin(t);
  }

  // T_x = span{sign(x_I)} ⊕ span{e_i : i ∉ I}; T_0 = {0}.
  Subspace do_model_subspace(const Vector& x) const override {
    if (is_origin(x)) return Subspace::zero(n_);
    const auto sat = saturation(x);
    std::vector<char> in_sat(static_cast<std::size_t>(n_), 0);
    for (Index i : sat) in_sat[static_cast<std::size_t>(i)] = 1;
    Matrix b = Matrix::Zero(n_, n_ - static_cast<Index>(sat.size()) + 1);
    const double c = 1.0 / std::sqrt(static_cast<double>(sat.size()));
    for (Index i : sat) b(i, 0) = c * sign(x(i));
    Index col = 1;
    for (Index i = 0; i < n_; ++i)
      if (!in_sat[static_cast<std::size_t>(i)]) b(i, col++) = 1.0;
    return Subspace(n_, std::move(b));
  }

  Vector do_model_gradient(const Vector& x) const override {
    Vector e = Vector::Zero(n_);
    const auto sat = saturation(x);
    for (Index i : sat) e(i) = sign(x(i)) / static_cast<double>(sat.size());
    return e;
  }

  // ∂||.||_inf(x) = conv{sign(x_i) e_i : i ∈ I}; at 0 it is the unit l1 ball.
  double do_ri_margin(const Vector& x, const Vector& u) const override {
    const double tol = detail::margin_tolerance(u);
    if (is_origin(x)) return 1.0 - u.cwiseAbs().sum();
    const auto sat = saturation(x);
    std::vector<char> in_sat(static_cast<std::size_t>(n_), 0);
    double total = 0.0;
    double margin = kInf;
    for (Index i : sat) {
      in_sat[static_cast<std::size_t>(i)] = 1;
      const double a = sign(x(i)) * u(i);
      if (a < -tol) return -kInf;
      total += a;
      margin = std::min(margin, a);
    }
    for (Index i = 0; i < n_; ++i)
      if (!in_sat[static_cast<std::size_t>(i)] && std::abs(u(i)) > tol) return -kInf;
    if (std::abs(total - 1.0) > tol) return -kInf;
    return sat.size() == 1 ? kInf : margin;
  }

 private:
  static bool is_origin(const Vector& x) { return x.cwiseAbs().maxCoeff() <= kActiveTolerance; }

  Index n_;
};

/// Anisotropic total variation w sum_c sum_j |x_{c[j+1]} - x_{c[j]}| over a set of disjoint
/// index chains. A single chain 0..n-1 is the usual 1-D TV; rows or columns of an image give
/// the two halves of 2-D anisotropic TV. Coordinates outside every chain are unpenalized.
class TotalVariation1D final : public PartlySmoothFunction {
 public:
  explicit TotalVariation1D(Index n, double weight = 1.0)
      : TotalVariation1D(n, {iota_chain(n)}, weight) {}

  TotalVariation1D(Index n, std::vector<std::vector<Index>> chains, double weight = 1.0)
      : n_(n), chains_(std::move(chains)), w_(weight) {
    if (!(w_ > 0.0)) throw ParameterError("TotalVariation1D: weight must be positive");
    std::vector<int> seen(static_cast<std::size_t>(n_), 0);
    for (const auto& c : chains_)
      for (Index i : c) {
        if (i < 0 || i >= n_) throw DimensionError("TotalVariation1D: chain index out of range");
        if (seen[static_cast<std::size_t>(i)]++) throw ParameterError("TotalVariation1D: chains overlap");
      }
    in_chain_.assign(seen.begin(), seen.end());
  }

  /// Rows (along_rows = true) or columns of a row-major rows x cols image.
  static TotalVariation1D image_axis(Index rows, Index cols, bool along_rows, double weight = 1.0) {
    std::vector<std::vector<Index>> chains;
    if (along_rows) {
      for (Index r = 0; r < rows; ++r) {
        std::vector<Index> c;
        for (Index q = 0; q < cols; ++q) c.push_back(r * cols + q);
        chains.push_back(std::move(c));
      }
    } else {
      for (Index q = 0; q < cols; ++q) {
        std::vector<Index> c;
        for (Index r = 0; r < rows; ++r) c.push_back(r * cols + q);
        chains.push_back(std::move(c));
      }
    }
    return TotalVariation1D(rows * cols, std::move(chains), weight);
  }

  Index dim() const override { return n_; }
  std::string name() const override { return "tv1d"; }
  double weight() const { return w_; }

 protected:
  double do_eval(const Vector& x) const override {
    double s = 0.0;
    for (const auto& c : chains_)
      for (std::size_t j = 0; j + 1 < c.size(); ++j) s += std::abs(x(c[j + 1]) - x(c[j]));
    return w_ * s;
  }

  Vector do_prox(double gamma, const Vector& x) const override {
    Vector p = x;
    for (const auto& c : chains_) {
      Vector seg(static_cast<Index>(c.size()));
      for (std::size_t j = 0; j < c.size(); ++j) seg(static_cast<Index>(j)) = x(c[j]);
      const Vector out = kernels::tv1d_denoise(seg, gamma * w_);
      for (std::size_t j = 0; j < c.size(); ++j) p(c[j]) = out(static_cast<Index>(j));
    }
    return p;
  }

  // T_x = ker(D_{I^c}): vectors constant on every run of equal neighbours.
  Subspace do_model_subspace(const Vector& x) const override {
    const auto segs = segments(x);
    Matrix b = Matrix::Zero(n_, static_cast<Index>(segs.size()));
    for (std::size_t s = 0; s < segs.size(); ++s) {
      const double c = 1.0 / std::sqrt(static_cast<double>(segs[s].size()));
      for (Index i : segs[s]) b(i, static_cast<Index>(s)) = c;
    }
    return Subspace(n_, std::move(b));
  }

  // e_x = P_{T_x} D^T (w sign(Dx)), i.e. segment means of the jump contributions.
  Vector do_model_gradient(const Vector& x) const override {
    const Vector g = w_ * jump_gradient(x);
    Vector e = Vector::Zero(n_);
    for (const auto& seg : segments(x)) {
      double mean = 0.0;
      for (Index i : seg) mean += g(i);
      mean /= static_cast<double>(seg.size());
      for (Index i : seg) e(i) = mean;
    }
    return e;
  }

  // ∂TV(x) = {D^T q : q_j = w sign((Dx)_j) on jumps, |q_j| <= w elsewhere}. D^T is injective
  // on each chain, so q is recovered by cumulative sums of u along the chain.
  double do_ri_margin(const Vector& x, const Vector& u) const override {
    const double thr = detail::zero_threshold(x);
    const double tol = detail::margin_tolerance(u) * std::max(1.0, w_);
    double margin = kInf;
    for (Index i = 0; i < n_; ++i)
      if (!in_chain_[static_cast<std::size_t>(i)] && std::abs(u(i)) > tol) return -kInf;
    for (const auto& c : chains_) {
      double q = 0.0;
      for (std::size_t j = 0; j + 1 < c.size(); ++j) {
        q -= u(c[j]);
        const double jump = x(c[j + 1]) - x(c[j]);
        if (std::abs(jump) > thr) {
          if (std::abs(q - w_ * sign(jump)) > tol) return -kInf;
        } else {
          const double m = w_ - std::abs(q);
          if (m < -tol) return -kInf;
          margin = std::min(margin, m);
        }
      }
      q -= u(c.back());
      if (std::abs(q) > tol) return -kInf;
    }
    return margin;
  }

 private:
  static std::vector<Index> iota_chain(Index n) {
    std::vector<Index> c(static_cast<std::size_t>(n));
    std::iota(c.begin(), c.end(), Index{0});
    return c;
  }

  // Maximal runs of (numerically) equal neighbours along each chain, plus singleton
  // segments for unchained coordinates.
  std::vector<std::vector<Index>> segments(const Vector& x) const {
    const double thr = detail::zero_threshold(x);
    std::vector<std::vector<Index>> segs;
    for (const auto& c : chains_) {
      if (c.empty()) continue;
      segs.push_back({c[0]});
      for (std::size_t j = 0; j + 1 < c.size(); ++j) {
        if (std::abs(x(c[j + 1]) - x(c[j])) > thr) segs.emplace_back();
        segs.back().push_back(c[j + 1]);
      }
    }
    for (Index i = 0; i < n_; ++i)
      if (!in_chain_[static_cast<std::size_t>(i)]) segs.push_back({i});
    return segs;
  }

  // D^T sign(Dx) over all chains.
  Vector jump_gradient(const Vector& x) const {
    const double thr = detail::zero_threshold(x);
    Vector g = Vector::Zero(n_);
    for (const auto& c : chains_)
      for (std::size_t j = 0; j + 1 < c.size(); ++j) {
        const double jump = x(c[j + 1]) - x(c[j]);
        if (std::abs(jump) <= thr) continue;
        g(c[j]) -= sign(jump);
        g(c[j + 1]) += sign(jump);
      }
    return g;
  }

  Index n_;
  std::vector<std::vector<Index>> chains_;
  std::vector<char> in_chain_;
  double w_;
};

/// Indicator of the affine set {x : A x = y}. The pseudo-inverse, row space and kernel are
/// computed once by SVD.
class AffineIndicator final : public PartlySmoothFunction {
 public:
  AffineIndicator(Matrix a, Vector y) : a_(std::move(a)), y_(std::move(y)) {
    detail::require_same_dim(a_.rows(), y_.size(), "AffineIndicator");
    const Index n = a_.cols();
    if (n == 0) throw DimensionError("AffineIndicator: empty ambient dimension");
    Eigen::JacobiSVD<Matrix> svd(a_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double cut = kRankTolerance * (s.size() ? s(0) : 0.0);
    Index r = 0;
    while (r < s.size() && s(r) > cut && s(r) > 0.0) ++r;
    const Matrix& u = svd.matrixU();
    const Matrix& v = svd.matrixV();
    pinv_ = v.leftCols(r) * s.head(r).cwiseInverse().asDiagonal() * u.leftCols(r).transpose();
    row_space_ = Subspace(n, v.leftCols(r));
    kernel_ = Subspace(n, v.rightCols(n - r));
    const double residual = (a_ * (pinv_ * y_) - y_).norm();
    if (residual > 1e-8 * (1.0 + y_.norm()))
      throw InfeasibleError("AffineIndicator: y is not in the range of A (residual " +
                            std::to_string(residual) + ")");
  }

  Index dim() const override { return a_.cols(); }
  std::string name() const override { return "affine"; }
  const Matrix& matrix() const { return a_; }
  const Vector& rhs() const { return y_; }
  const Subspace& kernel() const { return kernel_; }
  Index rank() const { return row_space_.dim(); }

  bool feasible(const Vector& x) const {
    return (a_ * x - y_).norm() <= 1e-8 * (1.0 + y_.norm() + x.norm());
  }

 protected:
  double do_eval(const Vector& x) const override { return feasible(x) ? 0.0 : kInf; }
  Vector do_prox(double, const Vector& x) const override { return x - pinv_ * (a_ * x - y_); }
  Subspace do_model_subspace(const Vector&) const override { return kernel_; }
  Vector do_model_gradient(const Vector&) const override { return Vector::Zero(dim()); }

  // ∂ι(x) = Im(A^T) at feasible x, a subspace, so ri ∂ι(x) is the subspace itself.
  double do_ri_margin(const Vector& x, const Vector& u) const override {
    if (!feasible(x)) return -kInf;
    return (u - row_space_.project(u)).norm() <= 1e-8 * (1.0 + u.norm()) ? kInf : -kInf;
  }

 private:
  Matrix a_;
  Vector y_;
  Matrix pinv_;
  Subspace row_space_;
  Subspace kernel_;
};

/// Indicator of the box {v : |v_i - y_i| <= a}, i.e. of the l-infinity ball around y.
class BoxIndicator final : public PartlySmoothFunction {
 public:
  BoxIndicator(Vector center, double radius) : y_(std::move(center)), a_(radius) {
    if (!(a_ >= 0.0)) throw ParameterError("BoxIndicator: radius must be nonnegative");
  }

  Index dim() const override { return y_.size(); }
  std::string name() const override { return "box"; }

  std::vector<Index> active_set(const Vector& v) const {
    std::vector<Index> act;
    for (Index i = 0; i < v.size(); ++i)
      if (a_ - std::abs(v(i) - y_(i)) <= tolerance(i)) act.push_back(i);
    return act;
  }

 protected:
  double do_eval(const Vector& v) const override {
    for (Index i = 0; i < v.size(); ++i)
      if (std::abs(v(i) - y_(i)) > a_ + tolerance(i)) return kInf;
    return 0.0;
  }

  Vector do_prox(double, const Vector& x) const override {
    Vector p(x.size());
    for (Index i = 0; i < x.size(); ++i) p(i) = std::clamp(x(i), y_(i) - a_, y_(i) + a_);
    return p;
  }

  Subspace do_model_subspace(const Vector& v) const override {
    const auto act = active_set(v);
    std::vector<Index> free;
    std::size_t k = 0;
    for (Index i = 0; i < v.size(); ++i) {
      if (k < act.size() && act[k] == i) ++k;
      else free.push_back(i);
    }
    return Subspace::coordinates(dim(), free);
  }

  Vector do_model_gradient(const Vector&) const override { return Vector::Zero(dim()); }

  // Normal cone: u_i = 0 off the active set, sign(v_i - y_i) u_i >= 0 on it.
  double do_ri_margin(const Vector& v, const Vector& u) const override {
    if (do_eval(v) == kInf) return -kInf;
    const double tol = detail::margin_tolerance(u);
    const auto act = active_set(v);
    double margin = kInf;
    std::size_t k = 0;
    for (Index i = 0; i < v.size(); ++i) {
      if (k < act.size() && act[k] == i) {
        ++k;
        const double m = sign(v(i) - y_(i)) * u(i);
        if (m < -tol) return -kInf;
        margin = std::min(margin, m);
      } else if (std::abs(u(i)) > tol) {
        return -kInf;
      }
    }
    return margin;
  }

 private:
  double tolerance(Index i) const { return kActiveTolerance * (1.0 + a_ + std::abs(y_(i))); }

  Vector y_;
  double a_;
};

/// Weighted data fidelity w ||x - y||_1.
class L1Fidelity final : public PartlySmoothFunction {
 public:
  explicit L1Fidelity(Vector y, double weight = 1.0) : y_(std::move(y)), w_(weight) {
    if (!(w_ > 0.0)) throw ParameterError("L1Fidelity: weight must be positive");
  }

  Index dim() const override { return y_.size(); }
  std::string name() const override { return "l1_fidelity"; }

 protected:
  double do_eval(const Vector& x) const override { return w_ * (x - y_).cwiseAbs().sum(); }

  Vector do_prox(double gamma, const Vector& x) const override {
    return y_ + kernels::soft_threshold(x - y_, gamma * w_);
  }

  Subspace do_model_subspace(const Vector& x) const override {
    return Subspace::coordinates(dim(), detail::support(x - y_));
  }

  Vector do_model_gradient(const Vector& x) const override {
    const Vector r = x - y_;
    Vector e = Vector::Zero(dim());
    for (Index i : detail::support(r)) e(i) = w_ * sign(r(i));
    return e;
  }

  double do_ri_margin(const Vector& x, const Vector& u) const override {
    return detail::l1_margin(x - y_, u, Vector::Constant(dim(), w_));
  }

 private:
  Vector y_;
  double w_;
};

/// Separable sum f(x_1, ..., x_m) = sum_i f_i(x_i) on the product of the component spaces.
class SeparableSum final : public PartlySmoothFunction {
 public:
  explicit SeparableSum(std::vector<FunctionPtr> parts) : parts_(std::move(parts)) {
    if (parts_.empty()) throw ParameterError("SeparableSum: no components");
    Index off = 0;
    for (const auto& p : parts_) {
      offsets_.push_back(off);
      off += p->dim();
    }
    n_ = off;
  }

  Index dim() const override { return n_; }
  std::string name() const override {
    std::string s = "sum(";
    for (std::size_t i = 0; i < parts_.size(); ++i) s += (i ? "," : "") + parts_[i]->name();
    return s + ")";
  }
  bool polyhedral() const override {
    return std::all_of(parts_.begin(), parts_.end(), [](const auto& p) { return p->polyhedral(); });
  }
  const std::vector<FunctionPtr>& parts() const { return parts_; }

  Vector block(const Vector& x, std::size_t i) const {
    return x.segment(offsets_[i], parts_[i]->dim());
  }

 protected:
  double do_eval(const Vector& x) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < parts_.size(); ++i) s += parts_[i]->eval(block(x, i));
    return s;
  }

  Vector do_prox(double gamma, const Vector& x) const override {
    Vector p(n_);
    for (std::size_t i = 0; i < parts_.size(); ++i)
      p.segment(offsets_[i], parts_[i]->dim()) = parts_[i]->prox(gamma, block(x, i));
    return p;
  }

  Subspace do_model_subspace(const Vector& x) const override {
    std::vector<Subspace> ts;
    Index cols = 0;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      ts.push_back(parts_[i]->model_subspace(block(x, i)));
      cols += ts.back().dim();
    }
    Matrix b = Matrix::Zero(n_, cols);
    Index c = 0;
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      b.block(offsets_[i], c, parts_[i]->dim(), ts[i].dim()) = ts[i].basis();
      c += ts[i].dim();
    }
    return Subspace(n_, std::move(b));
  }

  Vector do_model_gradient(const Vector& x) const override {
    Vector e(n_);
    for (std::size_t i = 0; i < parts_.size(); ++i)
      e.segment(offsets_[i], parts_[i]->dim()) = parts_[i]->model_gradient(block(x, i));
    return e;
  }

  Matrix do_riemannian_hessian(const Vector& x) const override {
    Matrix h = Matrix::Zero(n_, n_);
    for (std::size_t i = 0; i < parts_.size(); ++i) {
      const Index d = parts_[i]->dim();
      h.block(offsets_[i], offsets_[i], d, d) = parts_[i]->riemannian_hessian(block(x, i));
    }
    return h;
  }

  double do_ri_margin(const Vector& x, const Vector& u) const override {
    double m = kInf;
    for (std::size_t i = 0; i < parts_.size(); ++i)
      m = std::min(m, parts_[i]->ri_margin(block(x, i), block(u, i)));
    return m;
  }

 private:
  std::vector<FunctionPtr> parts_;
  std::vector<Index> offsets_;
  Index n_ = 0;
};

/// Indicator of the diagonal S = {(x, ..., x)} of (R^n)^m.
class ConsensusIndicator final : public PartlySmoothFunction {
 public:
  ConsensusIndicator(Index copies, Index n) : m_(copies), n_(n) {
    if (m_ < 1 || n_ < 1) throw DimensionError("ConsensusIndicator: empty product");
    Matrix b = Matrix::Zero(m_ * n_, n_);
    const double c = 1.0 / std::sqrt(static_cast<double>(m_));
    for (Index i = 0; i < m_; ++i) b.block(i * n_, 0, n_, n_).diagonal().setConstant(c);
    diagonal_ = Subspace(m_ * n_, std::move(b));
  }

  Index dim() const override { return m_ * n_; }
  std::string name() const override { return "consensus"; }
  Index copies() const { return m_; }
  Index block_dim() const { return n_; }
  const Subspace& diagonal() const { return diagonal_; }

  Vector mean(const Vector& x) const {
    Vector s = Vector::Zero(n_);
    for (Index i = 0; i < m_; ++i) s += x.segment(i * n_, n_);
    return s / static_cast<double>(m_);
  }

  Vector replicate(const Vector& x) const { return x.replicate(m_, 1); }

 protected:
  double do_eval(const Vector& x) const override {
    const Vector c = mean(x);
    for (Index i = 0; i < m_; ++i)
      if ((x.segment(i * n_, n_) - c).norm() > 1e-10 * (1.0 + c.norm())) return kInf;
    return 0.0;
  }

  Vector do_prox(double, const Vector& x) const override { return replicate(mean(x)); }
  Subspace do_model_subspace(const Vector&) const override { return diagonal_; }
  Vector do_model_gradient(const Vector&) const override { return Vector::Zero(dim()); }

  // ∂ι_S(x) = S^⊥ = {u : sum_i u_i = 0} on S.
  double do_ri_margin(const Vector& x, const Vector& u) const override {
    if (do_eval(x) == kInf) return -kInf;
    Vector s = Vector::Zero(n_);
    for (Index i = 0; i < m_; ++i) s += u.segment(i * n_, n_);
    return s.norm() <= 1e-8 * (1.0 + u.norm()) ? kInf : -kInf;
  }

 private:
  Index m_;
  Index n_;
  Subspace diagonal_;
};

template <class F, class... Args>
FunctionPtr make_function(Args&&... args) {
  return std::make_shared<const F>(std::forward<Args>(args)...);
}

}  // namespace drps
