#pragma once

// The nine acceptance checks. Each returns a verdict plus a one-line detail; run_all() shares
// the scenario sweep between the checks that need it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "drps/functions.hpp"
#include "drps/harness.hpp"
#include "drps/oracles.hpp"
#include "drps/rate.hpp"
#include "drps/random.hpp"
#include "drps/subspace.hpp"

namespace drps::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

template <class... Args>
std::string format(const char* fmt, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string describe(const Report& r) {
  std::string s = r.config.name + " seed " + std::to_string(r.config.seed);
  if (r.seed_used != r.config.seed) s += "->" + std::to_string(r.seed_used);
  return s;
}

}  // namespace detail

/// Random polyhedral models shared by criteria 1 and 8.
struct PolyhedralSample {
  Subspace tj, tg;
  double lambda = 1.0;
  RateModel model;
};

inline std::vector<PolyhedralSample> polyhedral_samples(std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<PolyhedralSample> out;
  for (int t = 0; t < 50; ++t) {
    const auto dj = 3 + static_cast<Index>(rng.below(6)), dg = 3 + static_cast<Index>(rng.below(6));
    const Subspace tj = oracle::random_subspace(rng, 20, dj), tg = oracle::random_subspace(rng, 20, dg);
    for (double lambda : {0.5, 1.0, 1.5}) {
      RateModel r = build_M(tj, tg, Matrix::Zero(20, 20), Matrix::Zero(20, 20), 1.0);
      relax(r, lambda);
      out.push_back({tj, tg, lambda, std::move(r)});
    }
  }
  return out;
}

inline CriterionResult rate_formula(const std::vector<PolyhedralSample>& samples, double build_seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const auto& s : samples)
    worst = std::max(worst, std::abs(s.model.predicted_rate - polyhedral_rate(s.tj, s.tg, s.lambda)));
  CriterionResult r{1, "rate formula fidelity", false, "", detail::seconds_since(t0) + build_seconds};
  r.passed = worst <= 1e-8 && r.seconds < 10.0;
  r.detail = detail::format("%zu models, max |spectral - formula| = %.3g", samples.size(), worst);
  return r;
}

struct Sweep {
  std::vector<RunResult> runs;
  double seconds = 0.0;
};

inline const std::vector<std::string>& polyhedral_scenarios() {
  static const std::vector<std::string> names{"cs_l1", "cs_linf", "uniform_noise", "outliers"};
  return names;
}

inline Sweep polyhedral_sweep() {
  const auto t0 = std::chrono::steady_clock::now();
  Sweep s;
  for (const auto& name : polyhedral_scenarios()) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      ScenarioConfig c = default_config(name, true);
      c.seed = seed;
      s.runs.push_back(run(c));
    }
  }
  s.seconds = detail::seconds_since(t0);
  return s;
}

inline CriterionResult rate_agreement(const Sweep& sweep) {
  CriterionResult r{2, "end-to-end rate agreement (polyhedral)", true, "", sweep.seconds};
  std::string failures;
  double worst = 0.0;
  for (const auto& run : sweep.runs) {
    const Report& p = run.report;
    std::string why;
    if (!p.ok()) why = p.error;
    else if (!p.identification_k) why = "not identified";
    else if (!p.certified()) why = detail::format("margins %.2g / %.2g", p.margin_j, p.margin_g);
    if (p.observed_rate) {
      const double gap = std::abs(*p.observed_rate - p.predicted_rate);
      worst = std::max(worst, gap);
      if (gap > kRateAgreementTolerance)
        why += (why.empty() ? "" : ", ") +
               detail::format("obs %.4f vs pred %.4f", *p.observed_rate, p.predicted_rate);
    } else if (why.empty()) {
      why = "no observed rate";
    }
    if (!why.empty()) {
      r.passed = false;
      failures += "; " + detail::describe(p) + " (" + why + ")";
    }
  }
  if (sweep.seconds >= 60.0) r.passed = false;
  r.detail = detail::format("%zu runs, max |obs - pred| = %.4f", sweep.runs.size(), worst) + failures;
  return r;
}

inline CriterionResult upper_bound() {
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioConfig c = default_config("cs_l12", true);
  const Report p = run(c).report;
  CriterionResult r{3, "non-polyhedral upper bound", false, "", detail::seconds_since(t0)};
  if (!p.ok() || !p.observed_rate) {
    r.detail = detail::describe(p) + ": " + p.failure_stage + " " + p.error;
    return r;
  }
  r.passed = *p.observed_rate <= p.predicted_rate + kRateAgreementTolerance;
  r.detail = detail::format("cs_l12 desk: obs %.5f <= pred %.5f + 0.02", *p.observed_rate, p.predicted_rate);
  return r;
}

inline CriterionResult finite_identification(const Sweep& sweep) {
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r{4, "finite identification", true, "", 0.0};
  std::string failures;
  long worst_k = 0;
  for (const auto& run : sweep.runs) {
    const Report& p = run.report;
    std::string why;
    if (!run.problem || !run.reference || !run.log.vectors_stored) {
      why = "no stored trajectory";
    } else {
      // Recomputed from the stored iterates, independent of the per-iteration flags.
      const auto k = identification_index(run.log, *run.problem->j, *run.problem->g, run.reference->x,
                                          run.reference->v);
      if (!k) why = "never identified";
      else if (*k >= p.config.max_iters) why = "K = max_iters";
      else if (p.identification_k != k) why = "logged K disagrees with recomputed K";
      else worst_k = std::max(worst_k, *k);
    }
    if (!why.empty()) {
      r.passed = false;
      failures += "; " + detail::describe(p) + " (" + why + ")";
    }
  }
  r.seconds = detail::seconds_since(t0);
  r.detail = detail::format("%zu runs, largest K = %ld", sweep.runs.size(), worst_k) + failures;
  return r;
}

inline CriterionResult prox_correctness(std::uint64_t seed = 5) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(seed);
  double fne = -kInf, ident = 0.0, tv = 0.0, moreau = 0.0;
  std::size_t instances = 0;
  for (const auto& [label, f] : oracle::sample_catalog(rng)) {
    ++instances;
    for (int t = 0; t < 100; ++t) {
      const double gamma = rng.uniform(0.05, 3.0);
      const Vector x = 2.0 * rng.normal_vector(f->dim());
      const Vector y = 2.0 * rng.normal_vector(f->dim());
      const Vector d = f->prox(gamma, x) - f->prox(gamma, y);
      fne = std::max(fne, d.squaredNorm() - d.dot(x - y));
      ident = std::max(ident, check_prox_identity(*f, gamma, x));
    }
  }
  for (int t = 0; t < 100; ++t) {
    const Index n = 2 + t % 5;
    const double w = rng.uniform(0.2, 2.0), gamma = rng.uniform(0.05, 2.0);
    const Vector x = 2.0 * rng.normal_vector(n);
    const TotalVariation1D f(n, w);
    tv = std::max(tv, (f.prox(gamma, x) - oracle::tv_brute_force(x, gamma * w)).cwiseAbs().maxCoeff());
  }
  const LInfNorm linf(12);
  for (int t = 0; t < 100; ++t) {
    const double gamma = rng.uniform(0.05, 3.0);
    const Vector x = 2.0 * rng.normal_vector(12);
    const Vector lhs = linf.prox(gamma, x) + gamma * kernels::project_l1_ball(x / gamma, 1.0);
    moreau = std::max(moreau, (lhs - x).cwiseAbs().maxCoeff());
  }
  CriterionResult r{5, "prox correctness", false, "", detail::seconds_since(t0)};
  r.passed = fne <= 1e-10 && ident <= 1e-9 && tv <= 1e-8 && moreau <= 1e-12;
  r.detail = detail::format(
      "%zu instances: firm nonexpansive slack %.2g, prox identity %.2g, TV vs brute force %.2g, l-inf Moreau %.2g",
      instances, fne, ident, tv, moreau);
  return r;
}

inline CriterionResult product_space() {
  const auto t0 = std::chrono::steady_clock::now();
  const Report p = run(default_config("tv_inpaint", true)).report;
  const Subspace t1 = Subspace::coordinates(2, std::vector<Index>{0});
  const Subspace t2 = Subspace::coordinates(2, std::vector<Index>{1});
  const RateModel m2 = build_product_M({t1, t2}, {Matrix::Zero(2, 2), Matrix::Zero(2, 2)}, 1.0, 1.0);
  const double formula = polyhedral_rate_from_angle(friedrichs_angle(m2.tj, m2.tg), 1.0);
  const double gap = std::abs(m2.predicted_rate - formula);
  CriterionResult r{6, "product-space correctness", false, "", detail::seconds_since(t0)};
  const double consensus = p.consensus_residual.value_or(kInf);
  r.passed = p.converged && consensus <= 1e-9 && p.spectral_rate < 1.0 && gap <= 1e-8;
  r.detail = detail::format("tv_inpaint desk: consensus %.2g, spectral rate %.5f; two-block example gap %.2g",
                            consensus, p.spectral_rate, gap);
  if (!p.ok()) r.detail += "; " + p.failure_stage + ": " + p.error;
  return r;
}

inline CriterionResult primal_dual(const Sweep& sweep) {
  CriterionResult r{7, "primal-dual equivalence", true, "", 0.0};
  double worst = 0.0;
  int checked = 0;
  std::string failures;
  for (const auto& run : sweep.runs) {
    if (!run.log.lambda_is_one()) continue;
    ++checked;
    const auto& d = run.report.primal_dual_discrepancy;
    if (!d || *d > 1e-10) {
      r.passed = false;
      failures += "; " + detail::describe(run.report);
    }
    if (d) worst = std::max(worst, *d);
  }
  if (checked == 0) r.passed = false;
  r.detail = detail::format("%d lambda = 1 runs, max discrepancy %.2g", checked, worst) + failures;
  return r;
}

inline CriterionResult spectrum_structure(const std::vector<PolyhedralSample>& samples) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t failed = 0;
  for (const auto& s : samples) {
    const SpectrumCheck c = spectrum_moduli_check(s.model.m, s.tj, s.tg);
    worst = std::max(worst, c.max_deviation);
    if (!c.passed) ++failed;
  }
  CriterionResult r{8, "spectrum structure", failed == 0, "", detail::seconds_since(t0)};
  r.detail = detail::format("%zu models, %zu failed, max modulus deviation %.2g", samples.size(), failed, worst);
  return r;
}

inline CriterionResult angle_oracle(std::uint64_t seed = 9) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto n = 2 + static_cast<Index>(rng.below(9));
    const Vector u = rng.normal_vector(n), v = rng.normal_vector(n);
    const double direct = std::acos(std::min(1.0, std::abs(u.normalized().dot(v.normalized()))));
    const double computed = principal_angles(orthonormalize(Matrix(u)), orthonormalize(Matrix(v))).angles().front();
    worst = std::max(worst, std::abs(direct - computed));
  }
  Matrix a = Matrix::Zero(3, 2), b = Matrix::Zero(3, 2);
  a(0, 0) = a(1, 1) = 1.0;
  b(0, 0) = 1.0;
  b(1, 1) = b(2, 1) = 1.0 / std::sqrt(2.0);
  const double theta = friedrichs_angle(orthonormalize(a), orthonormalize(b));
  const double err = std::abs(theta - std::numbers::pi / 4);
  CriterionResult r{9, "angle oracle", worst <= 1e-12 && err <= 1e-10, "", detail::seconds_since(t0)};
  r.detail = detail::format("100 line pairs, max angle error %.2g; R^3 example theta_F - pi/4 = %.2g", worst, err);
  return r;
}

inline std::vector<CriterionResult> run_all() {
  std::vector<CriterionResult> out;
  const auto t0 = std::chrono::steady_clock::now();
  const auto samples = polyhedral_samples();
  const double build = detail::seconds_since(t0);
  out.push_back(rate_formula(samples, build));
  const Sweep sweep = polyhedral_sweep();
  out.push_back(rate_agreement(sweep));
  out.push_back(upper_bound());
  out.push_back(finite_identification(sweep));
  out.push_back(prox_correctness());
  out.push_back(product_space());
  out.push_back(primal_dual(sweep));
  out.push_back(spectrum_structure(samples));
  out.push_back(angle_oracle());
  return out;
}

inline std::string format_line(const CriterionResult& r) {
  return detail::format("[%s] %d %s (%.2fs): ", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds) +
         r.detail;
}

}  // namespace drps::acceptance
