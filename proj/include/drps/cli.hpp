#pragma once

// Command-line front end: list, run, angles, verify.
// Exit codes: 0 success, 1 runtime or stage failure, 2 usage error.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "drps/acceptance.hpp"
#include "drps/harness.hpp"
#include "drps/scenario.hpp"

namespace drps {

namespace detail {

inline void print_defaults(std::ostream& out, const ScenarioConfig& c) {
  out << "  " << c.name << (c.desk ? " --desk" : "") << ": n=" << c.n;
  if (c.name.starts_with("cs_")) out << " m=" << c.m << " sparsity=" << c.sparsity;
  if (c.block_size > 0) out << " block=" << c.block_size;
  if (c.rows > 0) out << " image=" << c.rows << "x" << c.cols << " observed=" << c.observed_fraction;
  if (c.noise > 0.0) out << " noise=" << c.noise;
  if (c.reg > 0.0) out << " reg=" << c.reg;
  out << " gamma=" << c.effective_gamma() << " lambda=" << c.lambda << "\n";
}

}  // namespace detail

inline int cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Douglas-Rachford local convergence experiments"};
  app.name("drps");
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "Print scenario names and their default parameters");

  ScenarioConfig over;
  std::string scenario, out_dir;
  std::uint64_t seed = 0;
  bool desk = false, no_timing = false;
  std::optional<double> gamma, lambda, tol;
  std::optional<long> max_iters;

  auto* run_cmd = app.add_subcommand("run", "Run one scenario and write <stem>.csv and <stem>.json");
  run_cmd->add_option("--scenario", scenario, "Scenario name")->required();
  run_cmd->add_option("--seed", seed, "Random seed");
  run_cmd->add_option("--gamma", gamma, "Step size (default 1/sqrt(n))");
  run_cmd->add_option("--lambda", lambda, "Relaxation parameter in (0, 2)");
  run_cmd->add_option("--max-iters", max_iters, "Iteration budget");
  run_cmd->add_option("--tol", tol, "Stopping tolerance on successive iterates");
  run_cmd->add_option("--out", out_dir, "Output directory (default $DRPS_OUT, else drps_out)");
  run_cmd->add_flag("--desk", desk, "Scaled-down dimensions");
  run_cmd->add_flag("--no-timing", no_timing, "Write runtime_ms as null so reports are byte-reproducible");

  auto* angles = app.add_subcommand("angles", "Print the Friedrichs and principal angles at the solution");
  angles->add_option("--scenario", scenario, "Scenario name")->required();
  angles->add_option("--seed", seed, "Random seed");
  angles->add_flag("--desk", desk, "Scaled-down dimensions");

  auto* verify = app.add_subcommand("verify", "Run the acceptance suite; exit 0 iff every check passes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "drps: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  if ((*run_cmd || *angles) && !is_scenario(scenario)) {
    err << "drps: unknown scenario '" << scenario << "'\n\n" << app.help();
    return 2;
  }

  try {
    if (*list) {
      for (auto name : kScenarioNames) {
        detail::print_defaults(out, default_config(name, false));
        detail::print_defaults(out, default_config(name, true));
      }
      return 0;
    }

    if (*run_cmd) {
      ScenarioConfig c = default_config(scenario, desk);
      c.seed = seed;
      if (gamma) c.gamma = *gamma;
      if (lambda) c.lambda = *lambda;
      if (max_iters) c.max_iters = *max_iters;
      if (tol) c.tol = *tol;
      try {
        c.validate();
      } catch (const ParameterError& e) {
        err << "drps: " << e.what() << "\n";
        return 2;
      }
      const RunResult res = run(c, RunOptions{.timing = !no_timing});
      const auto dir = output_dir(out_dir);
      const WrittenFiles files = write_outputs(res, dir);
      const Report& r = res.report;
      if (!files.csv.empty()) out << "wrote " << files.csv.string() << "\n";
      out << "wrote " << files.report.string() << "\n";
      if (!r.ok()) {
        err << "drps: stage '" << r.failure_stage << "' failed: " << r.error << "\n";
        return 1;
      }
      out << r.config.name << " seed " << r.seed_used << ": K=" << r.identification_k.value_or(-1)
          << " predicted=" << r.predicted_rate << " observed=" << r.observed_rate.value_or(-1.0)
          << " verdict=" << (r.passed ? "pass" : "fail") << "\n";
      return 0;
    }

    if (*angles) {
      ScenarioConfig c = default_config(scenario, desk);
      c.seed = seed;
      const AngleSummary a = scenario_angles(c);
      out << "dim T_J=" << a.dim_tj << " dim T_G=" << a.dim_tg << "\n";
      out << "theta_F=";
      if (a.theta_f) out << std::setprecision(12) << *a.theta_f << "\n";
      else out << "undefined (one model subspace contains the other)\n";
      out << "principal angles:";
      for (double cs : a.cosines) out << " " << std::setprecision(12) << std::acos(std::min(1.0, cs));
      out << "\n";
      return 0;
    }

    if (*verify) {
      bool all = true;
      for (const auto& r : acceptance::run_all()) {
        out << acceptance::format_line(r) << "\n";
        all = all && r.passed;
      }
      return all ? 0 : 1;
    }
  } catch (const std::exception& e) {
    err << "drps: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace drps
