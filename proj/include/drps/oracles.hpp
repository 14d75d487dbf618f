#pragma once

// Reference implementations used for cross-checks: brute-force 1-D TV denoising on short
// signals, random subspaces, and one instance of every catalog function.
//
// The TV minimizer p of 0.5||p - y||^2 + t sum|p_{i+1} - p_i| is piecewise constant; on each
// segment [a, b] its value is mean(y_[a,b]) - t (q_{a-1} - q_b) / (b - a + 1) where q at a
// segment boundary is the sign of the jump there (0 at the signal ends). Enumerating every
// segmentation and every jump-sign choice gives a finite candidate set containing the
// minimizer.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "drps/error.hpp"
#include "drps/functions.hpp"
#include "drps/linalg.hpp"
#include "drps/random.hpp"
#include "drps/subspace.hpp"

namespace drps::oracle {


inline double tv_objective(const Vector& p, const Vector& y, double t) {
  double s = 0.5 * (p - y).squaredNorm();
  for (Index i = 0; i + 1 < p.size(); ++i) s += t * std::abs(p(i + 1) - p(i));
  return s;
}

inline Vector tv_brute_force(const Vector& y, double t) {
  const Index n = y.size();
  if (n < 1 || n > 12) throw ParameterError("tv_brute_force: need 1 <= n <= 12");
  const Index gaps = n - 1;
  Vector best = y;
  double best_obj = std::numeric_limits<double>::infinity();
  for (unsigned cut_mask = 0; cut_mask < (1u << gaps); ++cut_mask) {
    std::vector<Index> cuts;
    for (Index g = 0; g < gaps; ++g)
      if (cut_mask & (1u << g)) cuts.push_back(g);
    const auto ncuts = static_cast<unsigned>(cuts.size());
    for (unsigned sign_mask = 0; sign_mask < (1u << ncuts); ++sign_mask) {
      // q at gap g: +1 / -1 on cuts, 0 at the two signal ends.
      std::vector<double> q_cut(ncuts);
      for (unsigned c = 0; c < ncuts; ++c) q_cut[c] = (sign_mask & (1u << c)) ? 1.0 : -1.0;
      Vector p(n);
      Index start = 0;
      double q_left = 0.0;
      for (unsigned c = 0; c <= ncuts; ++c) {
        const Index end = c < ncuts ? cuts[c] : n - 1;
        const double q_right = c < ncuts ? q_cut[c] : 0.0;
        double mean = 0.0;
        for (Index i = start; i <= end; ++i) mean += y(i);
        const double len = static_cast<double>(end - start + 1);
        mean /= len;
        const double value = mean - t * (q_left - q_right) / len;
        for (Index i = start; i <= end; ++i) p(i) = value;
        start = end + 1;
        q_left = q_right;
      }
      const double obj = tv_objective(p, y, t);
      if (obj < best_obj) {
        best_obj = obj;
        best = p;
      }
    }
  }
  return best;
}


inline Subspace random_subspace(Rng& rng, Index n, Index d) { return orthonormalize(rng.normal_matrix(n, d)); }

struct NamedFunction {
  std::string label;
  FunctionPtr f;
};

/// One instance of every catalog entry on R^8 (lifted entries on R^16).
inline std::vector<NamedFunction> sample_catalog(Rng& rng) {
  const Index n = 8;
  std::vector<NamedFunction> out;
  out.push_back({"l1", make_function<L1Norm>(n)});
  Vector w(n);
  for (Index i = 0; i < n; ++i) w(i) = 0.5 + 0.25 * static_cast<double>(i % 3);
  out.push_back({"l1_weighted", make_function<L1Norm>(w)});
  out.push_back({"l12", make_function<GroupL12Norm>(GroupL12Norm::uniform(n, 2, 1.3))});
  out.push_back({"linf", make_function<LInfNorm>(n)});
  out.push_back({"tv1d", make_function<TotalVariation1D>(n, 0.7)});
  const Matrix a = rng.normal_matrix(3, n);
  out.push_back({"affine", make_function<AffineIndicator>(a, a * rng.normal_vector(n))});
  out.push_back({"box", make_function<BoxIndicator>(rng.normal_vector(n), 0.5)});
  out.push_back({"l1_fidelity", make_function<L1Fidelity>(rng.normal_vector(n), 0.8)});
  out.push_back({"zero", make_function<ZeroFunction>(n)});
  out.push_back({"separable", make_function<SeparableSum>(std::vector<FunctionPtr>{
                                  make_function<L1Norm>(n), make_function<TotalVariation1D>(n)})});
  out.push_back({"consensus", make_function<ConsensusIndicator>(2, n)});
  return out;
}

}  // namespace drps::oracle
