#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "drps/acceptance.hpp"
#include "drps/cli.hpp"
#include "drps/harness.hpp"

using namespace drps;
namespace fs = std::filesystem;

namespace {

ScenarioConfig desk(const std::string& name, std::uint64_t seed = 0) {
  ScenarioConfig c = default_config(name, true);
  c.seed = seed;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("drps_test_" + tag);
  fs::remove_all(d);
  return d;
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult call(std::vector<std::string> args) {
  args.insert(args.begin(), "drps");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Run, CsL1DeskPasses) {
  const RunResult res = run(desk("cs_l1"));
  const Report& r = res.report;
  ASSERT_TRUE(r.ok()) << r.failure_stage << ": " << r.error;
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.rejected_seeds.empty());
  EXPECT_EQ(r.seed_used, 0u);
  ASSERT_TRUE(r.identification_k.has_value());
  EXPECT_LT(*r.identification_k, r.iterations);
  EXPECT_TRUE(r.certified());
  EXPECT_TRUE(r.polyhedral);
  EXPECT_EQ(r.rate_source, "polyhedral");
  EXPECT_EQ(r.rate_check, "agreement");
  EXPECT_NEAR(r.predicted_rate, r.spectral_rate, 1e-8);
  ASSERT_TRUE(r.observed_rate.has_value());
  EXPECT_NEAR(*r.observed_rate, r.predicted_rate, kRateAgreementTolerance);
  EXPECT_EQ(r.spectrum_check, true);
  ASSERT_TRUE(r.primal_dual_discrepancy.has_value());
  EXPECT_LE(*r.primal_dual_discrepancy, 1e-10);
  EXPECT_TRUE(r.passed);
  EXPECT_TRUE(r.runtime_ms.has_value());
}

TEST(Run, GroupNormUsesUpperBound) {
  const Report r = run(desk("cs_l12")).report;
  ASSERT_TRUE(r.ok()) << r.error;
  EXPECT_FALSE(r.polyhedral);
  EXPECT_EQ(r.rate_check, "upper_bound");
  EXPECT_EQ(r.rate_source, "spectral");
  EXPECT_FALSE(r.polyhedral_rate.has_value());
  ASSERT_TRUE(r.observed_rate.has_value());
  EXPECT_LE(*r.observed_rate, r.predicted_rate + kRateAgreementTolerance);
}

TEST(Run, InpaintingReachesConsensus) {
  const Report r = run(desk("tv_inpaint")).report;
  ASSERT_TRUE(r.ok()) << r.error;
  ASSERT_TRUE(r.consensus_residual.has_value());
  EXPECT_LE(*r.consensus_residual, 1e-9);
  EXPECT_LT(r.spectral_rate, 1.0);
}

TEST(Run, UniformNoiseReferenceIsFeasible) {
  const RunResult res = run(desk("uniform_noise"));
  ASSERT_TRUE(res.problem && res.reference);
  const Problem& p = *res.problem;
  EXPECT_LE((p.observed - res.reference->x).cwiseAbs().maxCoeff(), p.config.noise + 1e-10);
}

TEST(Run, ReseedPolicyRecordsRejectedSeeds) {
  // TV under an l-inf tube is degenerate for every draw, so all attempts are used.
  const Report r = run(desk("uniform_noise", 2)).report;
  EXPECT_EQ(r.rejected_seeds.size(), static_cast<std::size_t>(kMaxReseeds));
  for (std::size_t i = 0; i < r.rejected_seeds.size(); ++i) EXPECT_EQ(r.rejected_seeds[i], 2 + i);
  EXPECT_EQ(r.seed_used, 2u + kMaxReseeds);
  EXPECT_FALSE(r.certified());
  EXPECT_FALSE(r.passed);
}

TEST(Run, StageFailureIsRecorded) {
  ScenarioConfig c = desk("cs_l1");
  c.max_iters = 5;
  const Report r = run(c).report;
  EXPECT_EQ(r.failure_stage, "solve");
  EXPECT_FALSE(r.error.empty());
  EXPECT_FALSE(r.converged);
  EXPECT_FALSE(r.passed);

  c = desk("cs_l1");
  c.lambda = 3.0;
  EXPECT_EQ(run(c).report.failure_stage, "generate");
}

TEST(Run, RelaxedRunSkipsPrimalDual) {
  ScenarioConfig c = desk("cs_l1");
  c.lambda = 1.5;
  const Report r = run(c).report;
  ASSERT_TRUE(r.ok()) << r.error;
  EXPECT_FALSE(r.primal_dual_discrepancy.has_value());
  EXPECT_NEAR(*r.observed_rate, r.predicted_rate, kRateAgreementTolerance);
}

TEST(Report, JsonRoundTrip) {
  for (const char* name : {"cs_l1", "cs_l12", "uniform_noise"}) {
    const Report r = run(desk(name), {.timing = false}).report;
    const Json j = report_to_json(r);
    EXPECT_EQ(report_to_json(report_from_json(j)).dump(), j.dump()) << name;
    EXPECT_TRUE(j.at("runtime_ms").is_null());
  }
  ScenarioConfig c = desk("cs_l1");
  c.max_iters = 5;
  const Json j = report_to_json(run(c).report);
  EXPECT_EQ(j.at("status"), "failed");
  EXPECT_EQ(report_to_json(report_from_json(j)).dump(), j.dump());
}

TEST(Report, ThetaIsRoundedAndConfigEchoed) {
  const Report r = run(desk("cs_l1")).report;
  const Json j = report_to_json(r);
  ASSERT_TRUE(r.theta_f.has_value());
  EXPECT_EQ(*r.theta_f, detail::round_significant(*r.theta_f, 12));
  EXPECT_EQ(config_from_json(j.at("config")).n, 64);
  EXPECT_TRUE(config_from_json(j.at("config")).desk);
  for (const char* key : {"identification_K", "theta_F", "predicted_rate", "observed_rate", "margin_J",
                          "margin_G", "converged", "runtime_ms"})
    EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Csv, HeaderAndScalarExampleRows) {
  EXPECT_EQ(csv_header(), "k,znorm,xnorm,dim_TJ,dim_TG,identified");
  const L1Norm j(1);
  Vector y(1);
  y << 2.0;
  const AffineIndicator g(Matrix::Identity(1, 1), y);
  const Reference ref = compute_reference(j, g, 1.0, Vector::Zero(1));
  SolveOptions so;
  so.reference = &ref;
  const ConvergenceLog log = solve(j, g, 1.0, RelaxationSchedule::constant(1.0), Vector::Zero(1), {3, 1e-12}, so);
  const std::string csv = format_csv(log, identification_index(log));
  std::vector<std::string> lines;
  std::stringstream s(csv);
  for (std::string l; std::getline(s, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], csv_header());
  EXPECT_EQ(lines[1], "0,3.0000000000000000e+00,2.0000000000000000e+00,0,0,0");
  EXPECT_EQ(lines[2], "1,1.0000000000000000e+00,1.0000000000000000e+00,1,0,1");
  EXPECT_EQ(lines[3], "2,0.0000000000000000e+00,0.0000000000000000e+00,1,0,1");
  EXPECT_EQ(lines[4], "3,0.0000000000000000e+00,0.0000000000000000e+00,1,0,1");
  EXPECT_THROW(format_csv(ConvergenceLog{}, std::nullopt), ParameterError);
}

TEST(Output, FilesAreByteIdenticalAcrossReruns) {
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  for (const char* name : {"cs_l1", "outliers", "tv_inpaint"}) {
    const WrittenFiles fa = write_outputs(run(desk(name, 1), {.timing = false}), a);
    const WrittenFiles fb = write_outputs(run(desk(name, 1), {.timing = false}), b);
    EXPECT_EQ(slurp(fa.csv), slurp(fb.csv)) << name;
    EXPECT_EQ(slurp(fa.report), slurp(fb.report)) << name;
    EXPECT_EQ(fa.report.filename(), std::string(name) + "_desk_seed1.json");
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Output, UnwritablePathThrowsWithPath) {
  const fs::path d = scratch_dir("blocked");
  fs::create_directories(d);
  std::ofstream(d / "file") << "x";
  try {
    detail::write_file(d / "file" / "report.json", "{}");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("report.json"), std::string::npos);
  }
  fs::remove_all(d);
}

TEST(Output, DirectoryResolution) {
  EXPECT_EQ(output_dir("x/y"), fs::path("x/y"));
  ::setenv("DRPS_OUT", "/tmp/drps_env_out", 1);
  EXPECT_EQ(output_dir(), fs::path("/tmp/drps_env_out"));
  ::unsetenv("DRPS_OUT");
  EXPECT_EQ(output_dir(), fs::path("drps_out"));
  EXPECT_EQ(output_stem(default_config("cs_l1")), "cs_l1_seed0");
}

TEST(Angles, ScenarioSummary) {
  const AngleSummary a = scenario_angles(desk("cs_l1"));
  EXPECT_EQ(a.dim_tj, 4);
  EXPECT_EQ(a.dim_tg, 48);
  ASSERT_TRUE(a.theta_f.has_value());
  EXPECT_GT(*a.theta_f, 0.0);
  EXPECT_NEAR(std::cos(*a.theta_f), a.cosines.front(), 1e-12);
}

TEST(Cli, ListPrintsSixScenarios) {
  const CliResult r = call({"list"});
  EXPECT_EQ(r.code, 0);
  for (auto name : kScenarioNames) EXPECT_NE(r.out.find("  " + std::string(name) + ":"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(call({"run", "--scenario", "nope"}).code, 2);
  EXPECT_EQ(call({"run", "--scenario", "cs_l1", "--bogus"}).code, 2);
  EXPECT_EQ(call({"run"}).code, 2);
  EXPECT_EQ(call({}).code, 2);
  EXPECT_EQ(call({"frobnicate"}).code, 2);
  EXPECT_EQ(call({"run", "--scenario", "cs_l1", "--lambda", "2"}).code, 2);
  const CliResult r = call({"angles", "--scenario", "nope"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, RunWritesTwoFiles) {
  const fs::path d = scratch_dir("cli_run");
  const CliResult r = call({"run", "--scenario", "cs_l1", "--desk", "--seed", "0", "--out", d.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(d / "cs_l1_desk_seed0.csv"));
  EXPECT_TRUE(fs::exists(d / "cs_l1_desk_seed0.json"));
  EXPECT_EQ(std::distance(fs::directory_iterator(d), fs::directory_iterator{}), 2);
  fs::remove_all(d);
}

TEST(Cli, RunHonoursDrpsOut) {
  const fs::path d = scratch_dir("cli_env");
  ::setenv("DRPS_OUT", d.string().c_str(), 1);
  const CliResult r = call({"run", "--scenario", "cs_l1", "--desk", "--seed", "1", "--no-timing"});
  ::unsetenv("DRPS_OUT");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(d / "cs_l1_desk_seed1.json"));
  EXPECT_TRUE(Json::parse(slurp(d / "cs_l1_desk_seed1.json")).at("runtime_ms").is_null());
  fs::remove_all(d);
}

TEST(Cli, RuntimeFailuresExitOne) {
  const fs::path d = scratch_dir("cli_fail");
  EXPECT_EQ(call({"run", "--scenario", "cs_l1", "--desk", "--max-iters", "5", "--out", d.string()}).code, 1);
  // Report still written, tagged with the failing stage.
  EXPECT_EQ(Json::parse(slurp(d / "cs_l1_desk_seed0.json")).at("failure_stage"), "solve");
  fs::create_directories(d);
  std::ofstream(d / "blocker") << "x";
  EXPECT_EQ(call({"run", "--scenario", "cs_l1", "--desk", "--out", (d / "blocker").string()}).code, 1);
  fs::remove_all(d);
}

TEST(Cli, AnglesPrintsFriedrichsAngle) {
  const CliResult r = call({"angles", "--scenario", "cs_l1", "--desk", "--seed", "0"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("theta_F=0.35555240384"), std::string::npos) << r.out;
}

TEST(Acceptance, CheapCriteriaPass) {
  EXPECT_TRUE(acceptance::angle_oracle().passed);
  EXPECT_TRUE(acceptance::prox_correctness().passed);
  const auto samples = acceptance::polyhedral_samples();
  EXPECT_EQ(samples.size(), 150u);
  EXPECT_TRUE(acceptance::rate_formula(samples, 0.0).passed);
  EXPECT_TRUE(acceptance::spectrum_structure(samples).passed);
  const auto line = acceptance::format_line({9, "x", true, "d", 0.5});
  EXPECT_EQ(line, "[PASS] 9 x (0.50s): d");
}
