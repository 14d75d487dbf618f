#pragma once

// Relaxed Douglas-Rachford splitting for min J(x) + G(x):
//
//   v+ = prox_{gamma G}(2x - z)
//   z+ = (1 - lambda_k) z + lambda_k (z + v+ - x)
//   x+ = prox_{gamma J}(z+)
//
// with logging of distances to a reference fixed point and of the model subspaces of x^k
// and v^k, finite identification detection, the primal-dual form of the same recursion,
// and the product-space lifting for sums of m >= 2 functions.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drps/error.hpp"
#include "drps/functions.hpp"
#include "drps/linalg.hpp"
#include "drps/subspace.hpp"

namespace drps {

struct DRState {
  Vector z;
  Vector x;
  Vector v;
  long k = 0;
};

/// z^0 given, x^0 = prox_{gamma J}(z^0); v^0 is taken equal to x^0 (v is only defined from
/// the first step on, and x^0 is its fixed-point counterpart).
inline DRState initial_state(const PartlySmoothFunction& j, double gamma, const Vector& z0) {
  DRState s;
  s.z = z0;
  s.x = j.prox(gamma, z0);
  s.v = s.x;
  return s;
}

inline DRState dr_step(const DRState& s, const PartlySmoothFunction& j, const PartlySmoothFunction& g,
                       double gamma, double lambda) {
  if (!(gamma > 0.0)) throw ParameterError("dr_step: gamma must be positive");
  if (!(lambda > 0.0 && lambda <= 2.0)) throw ParameterError("dr_step: lambda must lie in (0, 2]");
  DRState n;
  n.v = g.prox(gamma, 2.0 * s.x - s.z);
  n.z = (1.0 - lambda) * s.z + lambda * (s.z + n.v - s.x);
  n.x = j.prox(gamma, n.z);
  n.k = s.k + 1;
  return n;
}

/// The fixed-point operator B_DR = (rprox_G rprox_J + I) / 2.
inline Vector fixed_point_map(const PartlySmoothFunction& j, const PartlySmoothFunction& g, double gamma,
                              const Vector& z) {
  const Vector x = j.prox(gamma, z);
  const Vector v = g.prox(gamma, 2.0 * x - z);
  return z + v - x;
}

/// lambda_k = limit + offset / k for k >= 1. Only constant schedules (offset = 0) and
/// schedules converging to a limit in (0, 2) are accepted.
struct RelaxationSchedule {
  double limit = 1.0;
  double offset = 0.0;

  static RelaxationSchedule constant(double lambda) { return {lambda, 0.0}; }

  double at(long k) const { return offset == 0.0 ? limit : limit + offset / static_cast<double>(k); }
  bool is_constant() const { return offset == 0.0; }

  void validate() const {
    if (!(limit > 0.0 && limit < 2.0))
      throw ParameterError("relaxation limit must lie in (0, 2)");
    const double first = at(1);
    if (!(first > 0.0 && first <= 2.0))
      throw ParameterError("relaxation schedule leaves (0, 2] at k = 1");
  }
};

struct StopRule {
  long max_iters = 100000;
  double fixed_point_tol = 1e-13;
};

/// A (numerically) converged fixed point z* with x* = prox_{gamma J}(z*) and
/// v* = prox_{gamma G}(2x* - z*).
struct Reference {
  Vector z;
  Vector x;
  Vector v;
};

struct IterationRecord {
  long k = 0;
  double lambda = 0.0;       ///< relaxation used to produce this record (0 for k = 0)
  double step = 0.0;         ///< ||z^k - z^{k-1}||
  double z_dist = std::numeric_limits<double>::quiet_NaN();  ///< ||z^k - z*||
  double x_dist = std::numeric_limits<double>::quiet_NaN();  ///< ||x^k - x*||
  Index dim_tj = -1;         ///< dim T^J_{x^k}
  Index dim_tg = -1;         ///< dim T^G_{v^k}
  bool match_j = false;      ///< T^J_{x^k} = T^J_{x*}
  bool match_g = false;      ///< T^G_{v^k} = T^G_{v*}
  /// ||z^k - z*||^2 and ||x^{k-1} - x*||^2 measured in P_{T^G_{v*}}; logged for inspection of
  /// whether their difference is o(||z^k - z*||^2).
  double z_tg_sq = std::numeric_limits<double>::quiet_NaN();
  double x_tg_sq = std::numeric_limits<double>::quiet_NaN();
};

struct ConvergenceLog {
  double gamma = 0.0;
  RelaxationSchedule schedule;
  Vector z0;
  std::vector<IterationRecord> records;
  bool converged = false;
  bool tracks_subspaces = false;
  std::optional<Reference> reference;

  /// Full iterates, kept only while 3 n (iterations + 1) <= kMaxStoredEntries.
  bool vectors_stored = false;
  std::vector<Vector> z;
  std::vector<Vector> x;
  std::vector<Vector> v;
  DRState last;

  long iterations() const { return records.empty() ? 0 : records.back().k; }
  bool lambda_is_one() const { return schedule.is_constant() && schedule.limit == 1.0; }
};

inline constexpr std::size_t kMaxStoredEntries = 10'000'000;

struct SolveOptions {
  bool store_vectors = true;      ///< subject to kMaxStoredEntries
  bool track_subspaces = true;    ///< dims and reference matches per iteration
  const Reference* reference = nullptr;
};

namespace detail {

// Compares T(x^k) against a fixed target, reusing the previous answer when the basis is
// bitwise identical (the common case once the active pattern is frozen).
class SubspaceMatcher {
 public:
  explicit SubspaceMatcher(std::optional<Subspace> target) : target_(std::move(target)) {}

  bool matches(const Subspace& s) {
    if (!target_) return false;
    if (last_ && last_->identical_to(s)) return last_result_;
    last_result_ = same_subspace(s, *target_, 1e-8);
    last_ = s;
    return last_result_;
  }

 private:
  std::optional<Subspace> target_;
  std::optional<Subspace> last_;
  bool last_result_ = false;
};

}  // namespace detail

/// Runs DR from z0 until ||z^{k+1} - z^k|| <= tol (1 + ||z^k||) or max_iters. Never throws on
/// non-convergence: the returned log carries converged = false instead.
inline ConvergenceLog solve(const PartlySmoothFunction& j, const PartlySmoothFunction& g, double gamma,
                            const RelaxationSchedule& schedule, const Vector& z0, const StopRule& stop,
                            const SolveOptions& opts = {}) {
  if (!(gamma > 0.0)) throw ParameterError("solve: gamma must be positive");
  schedule.validate();
  detail::require_same_dim(j.dim(), g.dim(), "solve: J and G");
  detail::require_same_dim(z0.size(), j.dim(), "solve: z0");

  ConvergenceLog log;
  log.gamma = gamma;
  log.schedule = schedule;
  log.z0 = z0;
  log.tracks_subspaces = opts.track_subspaces;
  log.vectors_stored = opts.store_vectors;
  if (opts.reference) log.reference = *opts.reference;

  const Index n = j.dim();
  std::optional<Subspace> tj_ref, tg_ref;
  if (opts.reference && opts.track_subspaces) {
    tj_ref = j.model_subspace(opts.reference->x);
    tg_ref = g.model_subspace(opts.reference->v);
  }
  detail::SubspaceMatcher match_j(tj_ref), match_g(tg_ref);

  DRState s = initial_state(j, gamma, z0);
  Vector prev_x = s.x;

  auto record = [&](const DRState& st, double lambda, double step) {
    IterationRecord r;
    r.k = st.k;
    r.lambda = lambda;
    r.step = step;
    if (opts.reference) {
      r.z_dist = (st.z - opts.reference->z).norm();
      r.x_dist = (st.x - opts.reference->x).norm();
      if (tg_ref) {
        r.z_tg_sq = tg_ref->project(st.z - opts.reference->z).squaredNorm();
        r.x_tg_sq = tg_ref->project(prev_x - opts.reference->x).squaredNorm();
      }
    }
    if (opts.track_subspaces) {
      const Subspace tj = j.model_subspace(st.x);
      const Subspace tg = g.model_subspace(st.v);
      r.dim_tj = tj.dim();
      r.dim_tg = tg.dim();
      r.match_j = match_j.matches(tj);
      r.match_g = match_g.matches(tg);
    }
    log.records.push_back(r);
    if (log.vectors_stored) {
      if (3 * static_cast<std::size_t>(n) * log.records.size() > kMaxStoredEntries) {
        log.vectors_stored = false;
        log.z = {};
        log.x = {};
        log.v = {};
      } else {
        log.z.push_back(st.z);
        log.x.push_back(st.x);
        log.v.push_back(st.v);
      }
    }
  };

  record(s, 0.0, 0.0);
  while (s.k < stop.max_iters) {
    const double lambda = schedule.at(s.k + 1);
    DRState next = dr_step(s, j, g, gamma, lambda);
    const double step = (next.z - s.z).norm();
    const bool done = step <= stop.fixed_point_tol * (1.0 + s.z.norm());
    prev_x = s.x;
    s = std::move(next);
    record(s, lambda, step);
    if (done) {
      log.converged = true;
      break;
    }
  }
  log.last = std::move(s);
  return log;
}

struct ReferenceOptions {
  RelaxationSchedule schedule = RelaxationSchedule::constant(1.0);
  long max_iters = 1'000'000;
  double fixed_point_tol = 1e-13;
  /// After the tolerance is met, keep iterating until the step norm has not reached a new
  /// minimum for this many iterations (round-off floor) or max_iters is hit.
  long stagnation_window = 100;
  double residual_tol = 1e-10;
};

/// Fixed point of B_DR computed by the solver itself at tight tolerance. Throws
/// NotConvergedError if the tolerance is not met or the fixed-point residual
/// ||prox_{gamma J}(z*) - x*|| + ||B_DR(z*) - z*|| exceeds residual_tol.
inline Reference compute_reference(const PartlySmoothFunction& j, const PartlySmoothFunction& g, double gamma,
                                   const Vector& z0, const ReferenceOptions& opts = {}) {
  if (!(gamma > 0.0)) throw ParameterError("compute_reference: gamma must be positive");
  opts.schedule.validate();
  detail::require_same_dim(z0.size(), j.dim(), "compute_reference: z0");

  DRState s = initial_state(j, gamma, z0);
  bool converged = false;
  double best_step = kInf;
  long since_best = 0;
  while (s.k < opts.max_iters) {
    DRState next = dr_step(s, j, g, gamma, opts.schedule.at(s.k + 1));
    const double step = (next.z - s.z).norm();
    if (!converged && step <= opts.fixed_point_tol * (1.0 + s.z.norm())) converged = true;
    s = std::move(next);
    if (step < best_step) {
      best_step = step;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (converged && since_best >= opts.stagnation_window) break;
    if (step == 0.0 && converged) break;
  }
  if (!converged) {
    throw NotConvergedError("compute_reference: no fixed point within " + std::to_string(opts.max_iters) +
                            " iterations");
  }
  Reference ref;
  ref.z = s.z;
  ref.x = j.prox(gamma, s.z);
  ref.v = g.prox(gamma, 2.0 * ref.x - ref.z);
  const double residual = (ref.x - s.x).norm() + (fixed_point_map(j, g, gamma, ref.z) - ref.z).norm();
  if (residual > opts.residual_tol) {
    throw NotConvergedError("compute_reference: fixed-point residual " + std::to_string(residual) +
                            " above tolerance");
  }
  return ref;
}

/// Smallest K such that the model subspaces of x^k and v^k agree with those at the reference
/// for every logged k >= K. Uses the per-iteration matches recorded by solve().
inline std::optional<long> identification_index(const ConvergenceLog& log) {
  if (!log.tracks_subspaces || !log.reference)
    throw ParameterError("identification_index: log has no reference subspace tracking");
  std::optional<long> k;
  for (auto it = log.records.rbegin(); it != log.records.rend(); ++it) {
    if (!(it->match_j && it->match_g)) break;
    k = it->k;
  }
  return k;
}

/// Same as above, recomputed from stored iterates against an explicit (x*, v*).
inline std::optional<long> identification_index(const ConvergenceLog& log, const PartlySmoothFunction& j,
                                                const PartlySmoothFunction& g, const Vector& x_star,
                                                const Vector& v_star) {
  if (!log.vectors_stored) throw ParameterError("identification_index: log does not store iterates");
  detail::SubspaceMatcher mj(j.model_subspace(x_star)), mg(g.model_subspace(v_star));
  std::vector<char> ok(log.x.size());
  for (std::size_t i = 0; i < log.x.size(); ++i)
    ok[i] = mj.matches(j.model_subspace(log.x[i])) && mg.matches(g.model_subspace(log.v[i]));
  std::optional<long> k;
  for (std::size_t i = ok.size(); i-- > 0;) {
    if (!ok[i]) break;
    k = log.records[i].k;
  }
  return k;
}

struct DualTrajectory {
  std::vector<Vector> u;           ///< u^k = (x^{k-1} - z^k) / gamma, k >= 1 (u[0] unused, zero)
  double max_discrepancy = 0.0;    ///< against the re-run primal-dual recursion
};

namespace detail {

// One step of the primal-dual form:
//   u+ = prox_{G*/gamma}((2x - z)/gamma) = (w - prox_{gamma G}(w)) / gamma,  w = 2x - z
//   z+ = x - gamma u+                       (lambda = 1)
//   x+ = prox_{gamma J}(z+)
struct PrimalDualState {
  Vector z, x, u;
};

inline PrimalDualState primal_dual_step(const PrimalDualState& s, const PartlySmoothFunction& j,
                                        const PartlySmoothFunction& g, double gamma) {
  PrimalDualState n;
  const Vector w = 2.0 * s.x - s.z;
  n.u = (w - g.prox(gamma, w)) / gamma;
  n.z = s.x - gamma * n.u;
  n.x = j.prox(gamma, n.z);
  return n;
}

}  // namespace detail

/// Reconstructs the dual iterates from a lambda = 1 log and compares the log against an
/// independent run of the primal-dual recursion started from the same z^0.
inline DualTrajectory dual_iterates(const ConvergenceLog& log, const PartlySmoothFunction& j,
                                    const PartlySmoothFunction& g) {
  if (!log.lambda_is_one()) throw ParameterError("dual_iterates: log was not produced with lambda = 1");
  if (!log.vectors_stored) throw ParameterError("dual_iterates: log does not store iterates");
  const double gamma = log.gamma;
  DualTrajectory out;
  const std::size_t count = log.z.size();
  out.u.assign(count, Vector::Zero(j.dim()));
  detail::PrimalDualState pd{log.z0, j.prox(gamma, log.z0), Vector::Zero(j.dim())};
  out.max_discrepancy = (pd.x - log.x[0]).norm();
  for (std::size_t k = 1; k < count; ++k) {
    out.u[k] = (log.x[k - 1] - log.z[k]) / gamma;
    pd = detail::primal_dual_step(pd, j, g, gamma);
    const double d = std::max({(pd.z - log.z[k]).norm(), (pd.x - log.x[k]).norm(), (pd.u - out.u[k]).norm()});
    out.max_discrepancy = std::max(out.max_discrepancy, d);
  }
  return out;
}

/// Runs DR (lambda = 1) and the primal-dual recursion side by side for `iterations` steps and
/// returns the largest discrepancy in (z, x, u). Used when logs are too large to store.
inline double primal_dual_discrepancy(const PartlySmoothFunction& j, const PartlySmoothFunction& g, double gamma,
                                      const Vector& z0, long iterations) {
  DRState dr = initial_state(j, gamma, z0);
  detail::PrimalDualState pd{z0, dr.x, Vector::Zero(j.dim())};
  double worst = 0.0;
  for (long k = 0; k < iterations; ++k) {
    const Vector x_prev = dr.x;
    dr = dr_step(dr, j, g, gamma, 1.0);
    pd = detail::primal_dual_step(pd, j, g, gamma);
    const Vector u = (x_prev - dr.z) / gamma;
    worst = std::max({worst, (pd.z - dr.z).norm(), (pd.x - dr.x).norm(), (pd.u - u).norm()});
  }
  return worst;
}

struct NondegeneracyMargins {
  double margin_j = -kInf;
  double margin_g = -kInf;
  bool certified() const { return margin_j > 0.0 && margin_g > 0.0; }
};

/// margin_J = ri_margin(J, x*, (z* - x*)/gamma), margin_G = ri_margin(G, v*, (x* - z*)/gamma).
inline NondegeneracyMargins check_nondegeneracy(const PartlySmoothFunction& j, const PartlySmoothFunction& g,
                                                const Reference& ref, double gamma) {
  const Vector dual = (ref.z - ref.x) / gamma;
  return {j.ri_margin(ref.x, dual), g.ri_margin(ref.v, -dual)};
}

/// min sum_i J_i(x) recast as min J(x_1..x_m) + ι_S(x_1..x_m) on (R^n)^m.
struct ProductProblem {
  std::shared_ptr<const SeparableSum> j;
  std::shared_ptr<const ConsensusIndicator> g;

  Index copies() const { return g->copies(); }
  Index block_dim() const { return g->block_dim(); }
  Index lifted_dim() const { return g->dim(); }

  Vector block(const Vector& x, Index i) const { return x.segment(i * block_dim(), block_dim()); }
  Vector solution(const Vector& x) const { return g->mean(x); }

  /// max_i ||x_i - mean||.
  double consensus_residual(const Vector& x) const {
    const Vector c = g->mean(x);
    double r = 0.0;
    for (Index i = 0; i < copies(); ++i) r = std::max(r, (block(x, i) - c).norm());
    return r;
  }
};

inline ProductProblem lift(std::vector<FunctionPtr> parts) {
  if (parts.size() < 2) throw ParameterError("lift: need at least two functions");
  const Index n = parts.front()->dim();
  for (const auto& p : parts) detail::require_same_dim(p->dim(), n, "lift: component");
  ProductProblem pp;
  const auto m = static_cast<Index>(parts.size());
  pp.j = std::make_shared<const SeparableSum>(std::move(parts));
  pp.g = std::make_shared<const ConsensusIndicator>(m, n);
  return pp;
}

}  // namespace drps
