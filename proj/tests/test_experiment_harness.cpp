#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "strato/experiment_harness.hpp"

using namespace strato;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path d = fs::temp_directory_path() / ("strato_test_" + name);
    fs::remove_all(d);
    return d;
}

// Small, quick paired run.
ExperimentConfig tiny_config() {
    ExperimentConfig c = ExperimentConfig::from_preset(Preset::WellPreparedRate);
    c.grid = SlabGrid(8, 8, 8);
    c.params.epsilon = 0.2;
    c.params.nu = 0.05;
    c.final_time = 0.02;
    c.record_interval = 0.005;
    c.sweep_epsilon.clear();
    c.sweep_nu.clear();
    return c;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(STRATO_CLI) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(FitRate, ExactPowerLaws) {
    for (double order : {1.0, 2.0}) {
        std::vector<std::pair<double, double>> pts;
        for (double x : {0.4, 0.2, 0.1}) pts.emplace_back(x, 0.7 * std::pow(x, order));
        RateFitResult r = fit_rate(pts);
        EXPECT_NEAR(r.fitted_order, order, 1e-8);
        EXPECT_LE(r.fit_residual, 1e-12);
        EXPECT_NEAR(std::exp(r.intercept), 0.7, 1e-10);
    }
}

TEST(FitRate, DegeneratePoints) {
    EXPECT_THROW(fit_rate({{0.4, 1.0}, {0.2, 0.5}}), Error);
    try {
        fit_rate({{0.4, 1.0}, {0.2, 0.0}, {0.1, 0.3}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegeneratePoints);
    }
    EXPECT_THROW(fit_rate({{0.2, 1.0}, {0.2, 0.5}, {0.2, 0.3}}), Error);
}

TEST(Config, TomlOverridesPreset) {
    json j = parse_config_text(R"(
preset = "well_prepared_rate"
seed = 9
[grid]
nx = 16
[params]
epsilon = 0.3
[sweep]
epsilon = [0.4, 0.2, 0.1]
)", "toml");
    ExperimentConfig c = ExperimentConfig::from_json(j);
    EXPECT_EQ(c.grid.nx, 16);
    EXPECT_EQ(c.grid.ny, 32);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_DOUBLE_EQ(c.params.epsilon, 0.3);
    ASSERT_EQ(c.sweep_pairs().size(), 3u);
    EXPECT_DOUBLE_EQ(c.sweep_pairs()[1].second, 0.2);
    // the JSON form round trips
    ExperimentConfig d = ExperimentConfig::from_json(c.to_json());
    EXPECT_EQ(d.to_json().dump(), c.to_json().dump());
}

TEST(Config, RejectsBadInput) {
    auto bad = [](const std::string& toml) {
        try {
            ExperimentConfig::from_json(parse_config_text(toml, "toml"));
        } catch (const Error& e) {
            return e.kind() == ErrorKind::Validation;
        }
        return false;
    };
    EXPECT_TRUE(bad("[grid]\nnx = 15\n"));
    EXPECT_TRUE(bad("[grid]\nnx_typo = 16\n"));
    EXPECT_TRUE(bad("bogus = 1\n"));
    EXPECT_TRUE(bad("[sweep]\nepsilon = [0.1, 0.2, 0.05]\n"));
    EXPECT_TRUE(bad("[sweep]\nepsilon = [0.2, 0.0]\n"));
    EXPECT_TRUE(bad("[params]\ngamma = 1.4\n"));  // rate preset needs gamma > 3/2
    EXPECT_TRUE(bad("[initial]\nrho1_amp = 0.1\n"));  // rate preset needs zero defects
    EXPECT_TRUE(bad("[params]\nepsilon = \"x\"\n"));
    EXPECT_TRUE(bad("[grid\n"));
    EXPECT_FALSE(bad("preset = \"ill_prepared_qualitative\"\n[params]\ngamma = 3.5\n"));
    EXPECT_TRUE(bad("preset = \"nope\"\n"));
}

TEST(Config, IllPreparedPresetFlagsRegime) {
    ExperimentConfig c = ExperimentConfig::from_preset(Preset::IllPreparedQualitative);
    EXPECT_TRUE(c.params.ill_prepared_regime());
    EXPECT_FALSE(ExperimentConfig::from_preset(Preset::WellPreparedRate).params.ill_prepared_regime());
}

TEST(InitialFields, WellPreparedDataHasZeroDefects) {
    ExperimentConfig c = tiny_config();
    c.initial.shear_amp = 0.0;  // only the normalized 3-D part
    HydrostaticProfile prof = solve_hydrostatic(2.0, 1.0, 1.0, c.grid);
    InitialFields f = build_initial_fields(c, prof);
    EXPECT_EQ(f.primitive.rho1.max_abs(), 0.0);
    for (int k = 0; k < 3; ++k)
        for (std::size_t n = 0; n < c.grid.size(); ++n) EXPECT_EQ(f.primitive.u0[k][n], f.anelastic.v0[k][n]);
    EXPECT_NEAR(f.anelastic.v0.max_abs(), c.initial.u_amp, 1e-14);
    WeightedHelmholtz h(prof);
    EXPECT_LE(h.ops().divergence(scale_by(prof.rho_tilde(), f.anelastic.v0)).max_abs(), 1e-10);
    PrimitiveState s = assemble_initial_state(f.primitive, c.params, prof);
    AnelasticStepper as(c.params, prof);
    EXPECT_LE(thm1_metric(s, as.initial_state(f.anelastic), prof, c.params), 1e-24);
}

TEST(InitialFields, SeedChangesPhasesOnly) {
    ExperimentConfig a = tiny_config(), b = tiny_config();
    a.initial.shear_amp = b.initial.shear_amp = 0.0;  // shear direction is seeded too
    b.seed = 2;
    HydrostaticProfile prof = solve_hydrostatic(2.0, 1.0, 1.0, a.grid);
    InitialFields fa = build_initial_fields(a, prof), fb = build_initial_fields(b, prof);
    EXPECT_NEAR(fa.anelastic.v0.max_abs(), fb.anelastic.v0.max_abs(), 1e-14);
    EXPECT_GT((fa.anelastic.t0 - fb.anelastic.t0).max_abs(), 1e-3);
    InitialFields fa2 = build_initial_fields(a, prof);
    EXPECT_EQ((fa.anelastic.t0 - fa2.anelastic.t0).max_abs(), 0.0);
}

TEST(RunPaired, EquilibriumPresetHasZeroMetric) {
    ExperimentConfig c = ExperimentConfig::from_preset(Preset::Equilibrium);
    c.grid = SlabGrid(8, 8, 8);
    c.steps = 20;
    c.final_time = c.steps * c.stepper.dt;
    const fs::path d = fresh_dir("equilibrium");
    RunSummary s = run_paired(c, d);
    EXPECT_LE(s.sup_metric, 1e-10);
    EXPECT_LE(s.max_density_deviation, 1e-10);
    EXPECT_LE(s.max_speed, 1e-10);
    std::ifstream csv(d / "diagnostics.csv");
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, DiagnosticsRecord::csv_header());
    int rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        // thm1_metric column
        std::stringstream ss(line);
        std::string cell;
        for (int i = 0; i <= 6; ++i) std::getline(ss, cell, ',');
        EXPECT_LE(std::abs(std::stod(cell)), 1e-10);
    }
    EXPECT_GE(rows, 2);
}

TEST(RunPaired, WritesArtifactsAndCompleteManifest) {
    const fs::path d = fresh_dir("artifacts");
    ExperimentConfig c = tiny_config();
    RunSummary s = run_paired(c, d);
    EXPECT_GT(s.steps, 0);
    EXPECT_NEAR(s.steps * s.dt, c.final_time, 1e-12);
    EXPECT_GT(s.sup_metric, 0.0);
    for (const char* f : {"diagnostics.csv", "primitive_final.strato", "anelastic_final.strato", "manifest.json"})
        EXPECT_TRUE(fs::exists(d / f)) << f;
    json m = json::parse(read_file(d / "manifest.json"));
    EXPECT_TRUE(m["complete"].get<bool>());
    EXPECT_EQ(m["config_sha256"].get<std::string>(), sha256_hex(c.to_json().dump()));
    EXPECT_EQ(m["code_version"].get<std::string>(), code_version());
    ASSERT_EQ(m["files"].size(), 3u);
    for (const auto& f : m["files"]) {
        const std::string bytes = read_file(d / f["path"].get<std::string>());
        EXPECT_EQ(f["sha256"].get<std::string>(), sha256_hex(bytes));
        EXPECT_EQ(f["bytes"].get<std::size_t>(), bytes.size());
    }
    PrimitiveState p = load_primitive(d / "primitive_final.strato");
    EXPECT_NEAR(p.time, c.final_time, 1e-12);
}

TEST(RunPaired, FailureMarksManifestIncomplete) {
    const fs::path d = fresh_dir("failure");
    ExperimentConfig c = tiny_config();
    c.stepper.dt = 0.5;  // far beyond the viscous limit
    c.steps = 40;
    c.final_time = 20.0;
    EXPECT_THROW(run_paired(c, d), Error);
    json m = json::parse(read_file(d / "manifest.json"));
    EXPECT_FALSE(m["complete"].get<bool>());
    EXPECT_TRUE(m.contains("error"));
}

TEST(RunPaired, Deterministic) {
    ExperimentConfig c = tiny_config();
    const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
    run_paired(c, a);
    run_paired(c, b);
    EXPECT_EQ(read_file(a / "diagnostics.csv"), read_file(b / "diagnostics.csv"));
    EXPECT_EQ(read_file(a / "primitive_final.strato"), read_file(b / "primitive_final.strato"));
}

TEST(Sweep, FileContractAndIsolation) {
    ExperimentConfig c = tiny_config();
    c.sweep_epsilon = {0.4, 0.2, 0.1};
    c.nu_equals_epsilon = false;
    c.sweep_nu = {0.04, 0.02, 0.01};
    c.final_time = 0.01;
    c.threads = 3;
    const fs::path d = fresh_dir("sweep");
    SweepResult r = run_sweep(c, d);
    ASSERT_EQ(r.runs.size(), 3u);
    int csvs = 0;
    for (const auto& e : fs::recursive_directory_iterator(d))
        if (e.path().filename() == "diagnostics.csv") ++csvs;
    EXPECT_EQ(csvs, 3);
    EXPECT_TRUE(fs::exists(d / "rate.csv"));
    EXPECT_TRUE(fs::exists(d / "rate_fit.csv"));
    EXPECT_EQ(read_rate_csv(d / "rate.csv").size(), 3u);
    json m = json::parse(read_file(d / "manifest.json"));
    EXPECT_TRUE(m["complete"].get<bool>());
    EXPECT_EQ(m["files"].size(), 3u * 4u + 2u);  // per-run files and manifests, rate.csv, rate_fit.csv

    // serial execution and a standalone run give identical bytes
    ExperimentConfig single = c;
    single.threads = 1;
    const fs::path d2 = fresh_dir("sweep_serial");
    run_sweep(single, d2);
    ExperimentConfig one = tiny_config();
    one.final_time = c.final_time;
    one.params.epsilon = 0.1;
    one.params.nu = 0.01;
    const fs::path d3 = fresh_dir("sweep_one");
    run_paired(one, d3);
    const std::string name = run_dir_name(0.1, 0.01);
    EXPECT_EQ(read_file(d / name / "diagnostics.csv"), read_file(d2 / name / "diagnostics.csv"));
    EXPECT_EQ(read_file(d / name / "diagnostics.csv"), read_file(d3 / "diagnostics.csv"));
    EXPECT_EQ(read_file(d / "rate.csv"), read_file(d2 / "rate.csv"));
}

TEST(Threads, EnvironmentOverridesFlag) {
    ::unsetenv("STRATO_THREADS");
    EXPECT_EQ(resolve_threads(3), 3);
    ::setenv("STRATO_THREADS", "5", 1);
    EXPECT_EQ(resolve_threads(3), 5);
    ::setenv("STRATO_THREADS", "zero", 1);
    EXPECT_THROW(resolve_threads(3), Error);
    ::unsetenv("STRATO_THREADS");
}

TEST(InvariantSuite, PassesOnDefaults) {
    ExperimentConfig c = tiny_config();
    for (const auto& r : run_invariant_checks(c)) EXPECT_TRUE(r.pass()) << r.name << " " << r.value;
}

TEST(Cli, ExitCodes) {
    const fs::path d = fresh_dir("cli");
    fs::create_directories(d);
    EXPECT_EQ(run_cli("info"), 0);
    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("run --unknown-flag --output " + (d / "x").string()), 1);
    EXPECT_FALSE(fs::exists(d / "x"));
    EXPECT_EQ(run_cli("check --config " + std::string(STRATO_CONFIG_DIR) + "/default.toml"), 0);

    std::ofstream(d / "bad.toml") << "[grid]\nnx = 7\n";
    EXPECT_EQ(run_cli("run --config " + (d / "bad.toml").string() + " --output " + (d / "y").string()), 1);
    EXPECT_FALSE(fs::exists(d / "y"));

    std::ofstream(d / "rate.csv") << "epsilon,nu,eps_plus_nu,sup_metric\n0.2,0.2,0.4,0.8\n0.1,0.1,0.2,0.4\n"
                                     "0.05,0.05,0.1,0.2\n";
    EXPECT_EQ(run_cli("fit --input " + (d / "rate.csv").string() + " --output " + d.string()), 0);
    RateFitResult r = fit_rate(read_rate_csv(d / "rate.csv"));
    EXPECT_EQ(read_file(d / "rate_fit.csv"), rate_fit_csv(r));
    std::ofstream(d / "flat.csv") << "eps_plus_nu,sup_metric\n0.4,0\n0.2,0\n0.1,0\n";
    EXPECT_EQ(run_cli("fit --input " + (d / "flat.csv").string()), 1);

    // a run that blows up is a runtime failure
    std::ofstream(d / "blow.toml") << "[grid]\nnx = 8\nny = 8\nnz = 8\n[params]\nepsilon = 0.2\nnu = 0.05\n"
                                      "[stepper]\ndt = 0.5\nsteps = 40\n";
    EXPECT_EQ(run_cli("run --config " + (d / "blow.toml").string() + " --output " + (d / "z").string()), 2);
}
