#pragma once

// Experiment families: three compressed-sensing problems, TV inpainting posed on a product
// space, TV denoising under uniform noise, and TV-l1 outlier removal.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drps/dr.hpp"
#include "drps/error.hpp"
#include "drps/functions.hpp"
#include "drps/linalg.hpp"
#include "drps/random.hpp"

namespace drps {

inline constexpr std::array<std::string_view, 6> kScenarioNames{"cs_l1",       "cs_l12",        "cs_linf",
                                                                "tv_inpaint",  "uniform_noise", "outliers"};

inline bool is_scenario(std::string_view name) {
  for (auto s : kScenarioNames)
    if (s == name) return true;
  return false;
}

struct ScenarioConfig {
  std::string name;
  bool desk = false;
  Index m = 0;           ///< measurements (cs_*), observed pixels are drawn instead for tv_inpaint
  Index n = 0;           ///< signal length; rows * cols for tv_inpaint
  Index sparsity = 0;    ///< nonzeros / active blocks / saturating entries / outliers
  Index block_size = 0;  ///< cs_l12
  Index rows = 0, cols = 0;
  double observed_fraction = 0.0;  ///< tv_inpaint mask density
  double noise = 0.0;              ///< uniform_noise half-width a; outlier magnitude scale
  double reg = 0.0;                ///< TV weight for outliers
  double gamma = 0.0;              ///< 0 selects 1/sqrt(n)
  double lambda = 1.0;
  std::uint64_t seed = 0;
  long max_iters = 100000;
  double tol = 1e-13;

  double effective_gamma() const { return gamma > 0.0 ? gamma : 1.0 / std::sqrt(static_cast<double>(n)); }

  void validate() const {
    if (!is_scenario(name)) throw ParameterError("unknown scenario '" + name + "'");
    if (n < 1) throw ParameterError("scenario: n must be positive");
    if (!(gamma >= 0.0)) throw ParameterError("scenario: gamma must be positive");
    if (!(lambda > 0.0 && lambda < 2.0)) throw ParameterError("scenario: lambda must lie in (0, 2)");
    if (max_iters < 1) throw ParameterError("scenario: max_iters must be positive");
    if (!(tol > 0.0)) throw ParameterError("scenario: tol must be positive");
    if (name.starts_with("cs_") && (m < 1 || m > n)) throw ParameterError("scenario: need 1 <= m <= n");
    if (sparsity < 0 || sparsity > n) throw ParameterError("scenario: sparsity out of range");
    if (name == "cs_l12" && (block_size < 1 || n % block_size != 0 || sparsity > n / block_size))
      throw ParameterError("scenario: block size must divide n and cover the active blocks");
    if (name == "tv_inpaint" && rows * cols != n) throw ParameterError("scenario: rows * cols != n");
  }
};

/// Full-size defaults, or the scaled-down desk variants.
inline ScenarioConfig default_config(std::string_view name, bool desk = false) {
  ScenarioConfig c;
  c.name = std::string(name);
  c.desk = desk;
  if (name == "cs_l1") {
    c.m = desk ? 16 : 32;
    c.n = desk ? 64 : 128;
    c.sparsity = desk ? 4 : 8;
  } else if (name == "cs_l12") {
    c.m = desk ? 16 : 32;
    c.n = desk ? 64 : 128;
    c.block_size = 4;
    c.sparsity = desk ? 2 : 3;
  } else if (name == "cs_linf") {
    c.m = desk ? 60 : 120;
    c.n = desk ? 64 : 128;
    c.sparsity = desk ? 5 : 10;
  } else if (name == "tv_inpaint") {
    c.rows = c.cols = desk ? 8 : 16;
    c.n = c.rows * c.cols;
    c.observed_fraction = 0.6;
  } else if (name == "uniform_noise") {
    c.n = 100;
    c.noise = 1.0;
  } else if (name == "outliers") {
    c.n = 100;
    c.sparsity = 10;
    c.noise = 3.0;
    // reg = 0.5 ties spike removal against keeping it; at lambda = 1 the local rate is too
    // fast to leave a usable window above the floor.
    c.reg = 1.0;
    c.lambda = 0.3;
  } else {
    throw ParameterError("unknown scenario '" + std::string(name) + "'");
  }
  return c;
}

struct Problem {
  ScenarioConfig config;
  FunctionPtr j;
  FunctionPtr g;
  std::optional<ProductProblem> product;  ///< set for the lifted (m >= 3 function) family
  Vector truth;                           ///< ground-truth signal x0
  Vector observed;                        ///< y
  Matrix a;                               ///< measurement operator (cs_*, tv_inpaint)

  /// Signal read off a solution of the two-function problem.
  Vector signal(const Vector& x) const { return product ? product->solution(x) : x; }
  Index dim() const { return j->dim(); }
};

namespace detail {

// Piecewise-constant signal with `jumps` breakpoints and levels in [-2, 2].
inline Vector piecewise_constant(Rng& rng, Index n, Index jumps) {
  std::vector<Index> cuts = rng.choose(n - 1, jumps);
  std::sort(cuts.begin(), cuts.end());
  Vector x(n);
  Index start = 0;
  for (std::size_t s = 0; s <= cuts.size(); ++s) {
    const Index end = s < cuts.size() ? cuts[s] + 1 : n;
    x.segment(start, end - start).setConstant(rng.uniform(-2.0, 2.0));
    start = end;
  }
  return x;
}

inline Problem cs_problem(const ScenarioConfig& c, Rng& rng) {
  Problem p;
  p.config = c;
  p.a = rng.normal_matrix(c.m, c.n);
  p.truth = Vector::Zero(c.n);
  if (c.name == "cs_l1") {
    for (Index i : rng.choose(c.n, c.sparsity)) p.truth(i) = rng.normal();
    p.j = make_function<L1Norm>(c.n);
  } else if (c.name == "cs_l12") {
    for (Index b : rng.choose(c.n / c.block_size, c.sparsity))
      for (Index i = 0; i < c.block_size; ++i) p.truth(b * c.block_size + i) = rng.normal();
    p.j = make_function<GroupL12Norm>(GroupL12Norm::uniform(c.n, c.block_size));
  } else {
    for (Index i = 0; i < c.n; ++i) p.truth(i) = rng.uniform(-1.0, 1.0);
    for (Index i : rng.choose(c.n, c.sparsity)) p.truth(i) = rng.sign();
    p.j = make_function<LInfNorm>(c.n);
  }
  p.observed = p.a * p.truth;
  p.g = make_function<AffineIndicator>(p.a, p.observed);
  return p;
}

inline Problem inpaint_problem(const ScenarioConfig& c, Rng& rng) {
  Problem p;
  p.config = c;
  // A few axis-aligned rectangles on a constant background.
  p.truth = Vector::Constant(c.n, rng.uniform(-1.0, 1.0));
  const Index shapes = 3;
  for (Index s = 0; s < shapes; ++s) {
    const auto r0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(c.rows - 1)));
    const auto c0 = static_cast<Index>(rng.below(static_cast<std::uint64_t>(c.cols - 1)));
    const auto h = 2 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(c.rows / 2)));
    const auto w = 2 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(c.cols / 2)));
    const double level = rng.uniform(-2.0, 2.0);
    for (Index r = r0; r < std::min(c.rows, r0 + h); ++r)
      for (Index q = c0; q < std::min(c.cols, c0 + w); ++q) p.truth(r * c.cols + q) = level;
  }
  std::vector<Index> kept;
  for (Index i = 0; i < c.n; ++i)
    if (rng.uniform() < c.observed_fraction) kept.push_back(i);
  if (kept.empty()) kept.push_back(0);
  p.a = Matrix::Zero(static_cast<Index>(kept.size()), c.n);
  for (std::size_t r = 0; r < kept.size(); ++r) p.a(static_cast<Index>(r), kept[r]) = 1.0;
  p.observed = p.a * p.truth;
  p.product = lift({make_function<TotalVariation1D>(TotalVariation1D::image_axis(c.rows, c.cols, true)),
                    make_function<TotalVariation1D>(TotalVariation1D::image_axis(c.rows, c.cols, false)),
                    make_function<AffineIndicator>(p.a, p.observed)});
  p.j = p.product->j;
  p.g = p.product->g;
  return p;
}

inline Problem denoise_problem(const ScenarioConfig& c, Rng& rng) {
  Problem p;
  p.config = c;
  if (c.name == "uniform_noise") {
    // Piecewise constant plus a slow ramp: piecewise smooth.
    p.truth = piecewise_constant(rng, c.n, 5);
    const double slope = rng.uniform(-0.5, 0.5) / static_cast<double>(c.n);
    for (Index i = 0; i < c.n; ++i) p.truth(i) += slope * static_cast<double>(i);
    p.observed = p.truth;
    for (Index i = 0; i < c.n; ++i) p.observed(i) += rng.uniform(-c.noise, c.noise);
    p.j = make_function<TotalVariation1D>(c.n);
    p.g = make_function<BoxIndicator>(p.observed, c.noise);
  } else {
    p.truth = piecewise_constant(rng, c.n, 5);
    p.observed = p.truth;
    for (Index i : rng.choose(c.n, c.sparsity)) p.observed(i) += rng.sign() * rng.uniform(1.0, c.noise);
    p.j = make_function<TotalVariation1D>(c.n, c.reg);
    p.g = make_function<L1Fidelity>(p.observed);
  }
  return p;
}

}  // namespace detail

/// Deterministic in (config, seed); every family draws from its own named stream.
inline Problem generate(const ScenarioConfig& c) {
  c.validate();
  Rng rng = Rng(c.seed).split(c.name);
  if (c.name.starts_with("cs_")) return detail::cs_problem(c, rng);
  if (c.name == "tv_inpaint") return detail::inpaint_problem(c, rng);
  return detail::denoise_problem(c, rng);
}

}  // namespace drps
