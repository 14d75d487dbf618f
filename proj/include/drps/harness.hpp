#pragma once

// generate -> reference -> logged replay -> identification -> non-degeneracy -> angles and
// rates -> observed rate, with CSV and JSON output.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "drps/dr.hpp"
#include "drps/error.hpp"
#include "drps/rate.hpp"
#include "drps/scenario.hpp"
#include "drps/subspace.hpp"
#include "json.hpp"

namespace drps {

using Json = nlohmann::ordered_json;

inline constexpr double kRateAgreementTolerance = 0.02;
inline constexpr double kDegenerateMargin = 1e-6;
inline constexpr int kMaxReseeds = 10;

struct RunOptions {
  bool timing = true;  ///< false writes runtime_ms as null so reports are byte-reproducible
};

struct Report {
  ScenarioConfig config;
  std::uint64_t seed_used = 0;
  std::vector<std::uint64_t> rejected_seeds;  ///< degenerate draws skipped by the reseed policy

  std::string failure_stage;  ///< empty when every stage completed
  std::string error;

  bool converged = false;
  long iterations = 0;
  std::optional<long> identification_k;
  Index dim_tj = -1;
  Index dim_tg = -1;

  std::optional<double> theta_f;  ///< rounded to 12 significant digits
  std::vector<double> cosines;
  bool polyhedral = false;
  std::string rate_source;  ///< "polyhedral" or "spectral"
  double predicted_rate = std::numeric_limits<double>::quiet_NaN();
  double spectral_rate = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> polyhedral_rate;
  std::optional<double> observed_rate;
  std::optional<bool> spectrum_check;

  double margin_j = std::numeric_limits<double>::quiet_NaN();
  double margin_g = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> primal_dual_discrepancy;
  std::optional<double> consensus_residual;

  std::string rate_check;  ///< "agreement" (polyhedral) or "upper_bound"
  bool passed = false;
  std::optional<double> runtime_ms;

  bool ok() const { return failure_stage.empty(); }
  bool certified() const { return margin_j > 0.0 && margin_g > 0.0; }
};

struct RunResult {
  Report report;
  std::optional<Problem> problem;
  std::optional<Reference> reference;
  ConvergenceLog log;
};

namespace detail {

inline double round_significant(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return std::strtod(buf, nullptr);
}

inline Reference reference_for(const Problem& p) {
  ReferenceOptions ro;
  ro.schedule = RelaxationSchedule::constant(p.config.lambda);
  ro.fixed_point_tol = p.config.tol;
  return compute_reference(*p.j, *p.g, p.config.effective_gamma(), Vector::Zero(p.dim()), ro);
}

inline bool rate_verdict(const Report& r) {
  if (!r.ok() || !r.observed_rate) return false;
  if (r.rate_check == "agreement") return std::abs(*r.observed_rate - r.predicted_rate) <= kRateAgreementTolerance;
  return *r.observed_rate <= r.predicted_rate + kRateAgreementTolerance;
}

}  // namespace detail

/// Runs one scenario. Stage failures are caught and recorded in the report; the returned
/// result always carries a report.
inline RunResult run(const ScenarioConfig& config, const RunOptions& options = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult out;
  Report& rep = out.report;
  rep.config = config;
  std::string stage = "generate";
  try {
    config.validate();
    const double gamma = config.effective_gamma();

    // Degenerate draws (a margin at or below kDegenerateMargin) are re-drawn with seed + 1.
    NondegeneracyMargins margins;
    for (int attempt = 0;; ++attempt) {
      ScenarioConfig c = config;
      c.seed = config.seed + static_cast<std::uint64_t>(attempt);
      stage = "generate";
      out.problem = generate(c);
      stage = "reference";
      out.reference = detail::reference_for(*out.problem);
      stage = "nondegeneracy";
      margins = check_nondegeneracy(*out.problem->j, *out.problem->g, *out.reference, gamma);
      rep.seed_used = c.seed;
      const bool degenerate = !(margins.margin_j > kDegenerateMargin && margins.margin_g > kDegenerateMargin);
      if (!degenerate || attempt == kMaxReseeds) break;
      rep.rejected_seeds.push_back(c.seed);
    }
    rep.margin_j = margins.margin_j;
    rep.margin_g = margins.margin_g;
    const Problem& p = *out.problem;
    const Reference& ref = *out.reference;

    stage = "solve";
    SolveOptions so;
    so.reference = &ref;
    const auto schedule = RelaxationSchedule::constant(config.lambda);
    out.log = solve(*p.j, *p.g, gamma, schedule, Vector::Zero(p.dim()), {config.max_iters, config.tol}, so);
    rep.converged = out.log.converged;
    rep.iterations = out.log.iterations();
    if (p.product) rep.consensus_residual = p.product->consensus_residual(out.log.last.x);
    if (out.log.lambda_is_one()) {
      rep.primal_dual_discrepancy = out.log.vectors_stored
                                        ? dual_iterates(out.log, *p.j, *p.g).max_discrepancy
                                        : primal_dual_discrepancy(*p.j, *p.g, gamma, Vector::Zero(p.dim()),
                                                                  rep.iterations);
    }
    if (!rep.converged) throw NotConvergedError("no convergence within max_iters");

    stage = "identification";
    rep.identification_k = identification_index(out.log);
    if (!rep.identification_k) throw NotConvergedError("model subspaces never settle on the reference ones");

    stage = "rate_model";
    RateModel model = linearize(*p.j, *p.g, ref, gamma, config.lambda);
    rep.dim_tj = model.tj.dim();
    rep.dim_tg = model.tg.dim();
    rep.cosines = principal_angles(model.tj, model.tg).cosines;
    rep.polyhedral = p.j->polyhedral() && p.g->polyhedral();
    rep.spectral_rate = model.predicted_rate;
    try {
      rep.theta_f = detail::round_significant(friedrichs_angle(model.tj, model.tg), 12);
    } catch (const ContainmentError&) {
      rep.theta_f.reset();
    }
    if (rep.polyhedral) {
      rep.rate_check = "agreement";
      rep.spectrum_check = spectrum_moduli_check(model.m, model.tj, model.tg).passed;
      if (rep.theta_f) rep.polyhedral_rate = polyhedral_rate(model.tj, model.tg, config.lambda);
    } else {
      rep.rate_check = "upper_bound";
    }
    rep.rate_source = rep.polyhedral_rate ? "polyhedral" : "spectral";
    rep.predicted_rate = rep.polyhedral_rate ? *rep.polyhedral_rate : rep.spectral_rate;

    stage = "observed_rate";
    rep.observed_rate = observed_rate(out.log, *rep.identification_k);
  } catch (const std::exception& e) {
    rep.failure_stage = stage;
    rep.error = e.what();
  }
  rep.passed = rep.ok() && rep.converged && rep.certified() && rep.identification_k &&
               *rep.identification_k < rep.iterations && detail::rate_verdict(rep);
  if (options.timing)
    rep.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---- serialization ----------------------------------------------------------------------

namespace detail {

inline Json number_or_string(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

inline double number_from(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) return j.get<std::string>() == "inf" ? kInf : -kInf;
  return j.get<double>();
}

template <class T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

template <class T>
std::optional<T> optional_from(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

}  // namespace detail

inline Json config_to_json(const ScenarioConfig& c) {
  return Json{{"name", c.name},
              {"desk", c.desk},
              {"m", c.m},
              {"n", c.n},
              {"sparsity", c.sparsity},
              {"block_size", c.block_size},
              {"rows", c.rows},
              {"cols", c.cols},
              {"observed_fraction", c.observed_fraction},
              {"noise", c.noise},
              {"reg", c.reg},
              {"gamma", c.effective_gamma()},
              {"lambda", c.lambda},
              {"seed", c.seed},
              {"max_iters", c.max_iters},
              {"tol", c.tol}};
}

inline ScenarioConfig config_from_json(const Json& j) {
  ScenarioConfig c;
  c.name = j.at("name").get<std::string>();
  c.desk = j.at("desk").get<bool>();
  c.m = j.at("m").get<Index>();
  c.n = j.at("n").get<Index>();
  c.sparsity = j.at("sparsity").get<Index>();
  c.block_size = j.at("block_size").get<Index>();
  c.rows = j.at("rows").get<Index>();
  c.cols = j.at("cols").get<Index>();
  c.observed_fraction = j.at("observed_fraction").get<double>();
  c.noise = j.at("noise").get<double>();
  c.reg = j.at("reg").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.lambda = j.at("lambda").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.max_iters = j.at("max_iters").get<long>();
  c.tol = j.at("tol").get<double>();
  return c;
}

inline Json report_to_json(const Report& r) {
  using detail::number_or_string;
  using detail::optional_json;
  return Json{{"config", config_to_json(r.config)},
              {"seed_used", r.seed_used},
              {"rejected_seeds", r.rejected_seeds},
              {"status", r.ok() ? "ok" : "failed"},
              {"failure_stage", r.ok() ? Json(nullptr) : Json(r.failure_stage)},
              {"error", r.ok() ? Json(nullptr) : Json(r.error)},
              {"converged", r.converged},
              {"iterations", r.iterations},
              {"identification_K", optional_json(r.identification_k)},
              {"dim_TJ", r.dim_tj},
              {"dim_TG", r.dim_tg},
              {"theta_F", optional_json(r.theta_f)},
              {"principal_cosines", r.cosines},
              {"polyhedral", r.polyhedral},
              {"rate_source", r.rate_source},
              {"predicted_rate", number_or_string(r.predicted_rate)},
              {"spectral_rate", number_or_string(r.spectral_rate)},
              {"polyhedral_rate", optional_json(r.polyhedral_rate)},
              {"observed_rate", optional_json(r.observed_rate)},
              {"spectrum_check", optional_json(r.spectrum_check)},
              {"margin_J", number_or_string(r.margin_j)},
              {"margin_G", number_or_string(r.margin_g)},
              {"primal_dual_discrepancy", optional_json(r.primal_dual_discrepancy)},
              {"consensus_residual", optional_json(r.consensus_residual)},
              {"rate_check", r.rate_check},
              {"rate_tolerance", kRateAgreementTolerance},
              {"passed", r.passed},
              {"runtime_ms", optional_json(r.runtime_ms)}};
}

inline Report report_from_json(const Json& j) {
  Report r;
  r.config = config_from_json(j.at("config"));
  r.seed_used = j.at("seed_used").get<std::uint64_t>();
  r.rejected_seeds = j.at("rejected_seeds").get<std::vector<std::uint64_t>>();
  if (j.at("status").get<std::string>() != "ok") {
    r.failure_stage = j.at("failure_stage").get<std::string>();
    r.error = j.at("error").get<std::string>();
  }
  r.converged = j.at("converged").get<bool>();
  r.iterations = j.at("iterations").get<long>();
  r.identification_k = detail::optional_from<long>(j.at("identification_K"));
  r.dim_tj = j.at("dim_TJ").get<Index>();
  r.dim_tg = j.at("dim_TG").get<Index>();
  r.theta_f = detail::optional_from<double>(j.at("theta_F"));
  r.cosines = j.at("principal_cosines").get<std::vector<double>>();
  r.polyhedral = j.at("polyhedral").get<bool>();
  r.rate_source = j.at("rate_source").get<std::string>();
  r.predicted_rate = detail::number_from(j.at("predicted_rate"));
  r.spectral_rate = detail::number_from(j.at("spectral_rate"));
  r.polyhedral_rate = detail::optional_from<double>(j.at("polyhedral_rate"));
  r.observed_rate = detail::optional_from<double>(j.at("observed_rate"));
  r.spectrum_check = detail::optional_from<bool>(j.at("spectrum_check"));
  r.margin_j = detail::number_from(j.at("margin_J"));
  r.margin_g = detail::number_from(j.at("margin_G"));
  r.primal_dual_discrepancy = detail::optional_from<double>(j.at("primal_dual_discrepancy"));
  r.consensus_residual = detail::optional_from<double>(j.at("consensus_residual"));
  r.rate_check = j.at("rate_check").get<std::string>();
  r.passed = j.at("passed").get<bool>();
  r.runtime_ms = detail::optional_from<double>(j.at("runtime_ms"));
  return r;
}

inline std::string csv_header() { return "k,znorm,xnorm,dim_TJ,dim_TG,identified"; }

/// One row per logged iteration; distances in %.16e (17 significant digits).
inline std::string format_csv(const ConvergenceLog& log, std::optional<long> k_ident) {
  if (!log.reference) throw ParameterError("emit_csv: log has no reference");
  std::string s = csv_header() + "\n";
  char buf[160];
  for (const auto& r : log.records) {
    const bool ident = k_ident && r.k >= *k_ident;
    std::snprintf(buf, sizeof buf, "%ld,%.16e,%.16e,%ld,%ld,%d\n", r.k, r.z_dist, r.x_dist,
                  static_cast<long>(r.dim_tj), static_cast<long>(r.dim_tg), ident ? 1 : 0);
    s += buf;
  }
  return s;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  f.close();
  if (!f) throw IoError("write failed for " + path.string());
}

}  // namespace detail

inline void emit_csv(const ConvergenceLog& log, std::optional<long> k_ident, const std::filesystem::path& path) {
  detail::write_file(path, format_csv(log, k_ident));
}

inline void emit_report(const Report& r, const std::filesystem::path& path) {
  detail::write_file(path, report_to_json(r).dump(2) + "\n");
}

/// Output directory: explicit value, else $DRPS_OUT, else ./drps_out.
inline std::filesystem::path output_dir(const std::string& explicit_dir = {}) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv("DRPS_OUT"); env && *env) return env;
  return "drps_out";
}

inline std::string output_stem(const ScenarioConfig& c) {
  return c.name + (c.desk ? "_desk" : "") + "_seed" + std::to_string(c.seed);
}

struct WrittenFiles {
  std::filesystem::path csv;
  std::filesystem::path report;
};

/// Writes <stem>.csv (when a logged run exists) and <stem>.json.
inline WrittenFiles write_outputs(const RunResult& res, const std::filesystem::path& dir) {
  WrittenFiles w;
  const std::string stem = output_stem(res.report.config);
  w.report = dir / (stem + ".json");
  if (res.log.reference) {
    w.csv = dir / (stem + ".csv");
    emit_csv(res.log, res.report.identification_k, w.csv);
  }
  emit_report(res.report, w.report);
  return w;
}

struct AngleSummary {
  std::optional<double> theta_f;
  std::vector<double> cosines;
  Index dim_tj = 0;
  Index dim_tg = 0;
};

/// Angles between the model subspaces at the reference solution of one draw.
inline AngleSummary scenario_angles(const ScenarioConfig& config) {
  const Problem p = generate(config);
  const Reference ref = detail::reference_for(p);
  const Subspace tj = p.j->model_subspace(ref.x);
  const Subspace tg = p.g->model_subspace(ref.v);
  AngleSummary a;
  a.dim_tj = tj.dim();
  a.dim_tg = tg.dim();
  const AngleSet set = principal_angles(tj, tg);
  a.cosines = set.cosines;
  if (set.friedrichs_index() <= static_cast<Index>(set.cosines.size())) a.theta_f = friedrichs_angle(set);
  return a;
}

}  // namespace drps
