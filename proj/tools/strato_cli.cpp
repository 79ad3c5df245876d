// strato: command-line driver for paired runs, sweeps, rate fits, spectra and checks.
//
// Exit codes: 0 success, 1 validation or usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "strato/experiment_harness.hpp"

namespace fs = std::filesystem;
using namespace strato;

namespace {

struct CommonOptions {
    std::string config;
    std::string preset;
    std::string output;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, CommonOptions& o) {
    sub->add_option("--config", o.config, "TOML or JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--preset", o.preset, "preset used when no config is given, or as the base of the config");
    sub->add_option("--output", o.output, "output directory (overrides output.dir)");
    sub->add_option("--threads", o.threads, "worker threads for sweeps (STRATO_THREADS overrides)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "seed for the perturbation phases");
}

ExperimentConfig resolve_config(const CommonOptions& o, Preset fallback) {
    const Preset base = o.preset.empty() ? fallback : preset_from_string(o.preset);
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig::from_preset(base)
                                            : ExperimentConfig::from_json(load_config_json(o.config), base);
    if (!o.output.empty()) cfg.output_dir = o.output;
    if (o.seed) cfg.seed = *o.seed;
    cfg.threads = resolve_threads(o.threads.value_or(cfg.threads));
    cfg.validate();
    return cfg;
}

void print_summary(const RunSummary& s) {
    std::cout << std::setprecision(6) << "eps=" << s.epsilon << " nu=" << s.nu << " steps=" << s.steps
              << " dt=" << s.dt << " sup_metric=" << s.sup_metric << " final_metric=" << s.final_metric
              << " elapsed=" << s.elapsed_seconds << "s\n";
}

int cmd_run(const CommonOptions& o) {
    ExperimentConfig cfg = resolve_config(o, Preset::WellPreparedRate);
    const fs::path dir = cfg.output_dir;
    if (cfg.preset == Preset::ManufacturedConvergence) {
        fs::create_directories(dir);
        ConvergenceReport rep = run_convergence(cfg);
        write_file(dir / "convergence.csv", rep.csv());
        write_manifest(dir, cfg, true,
                       {{"temporal_order", rep.temporal_order},
                        {"spatial_order", rep.spatial_order},
                        {"base_steps", rep.base_steps}});
        std::cout << "temporal_order=" << rep.temporal_order << " spatial_order=" << rep.spatial_order << "\n";
        return 0;
    }
    print_summary(run_paired(cfg, dir));
    std::cout << "wrote " << dir.string() << "\n";
    return 0;
}

int cmd_sweep(const CommonOptions& o) {
    ExperimentConfig cfg = resolve_config(o, Preset::WellPreparedRate);
    SweepResult r = run_sweep(cfg, cfg.output_dir);
    for (const auto& s : r.runs) print_summary(s);
    if (r.fitted)
        std::cout << "fitted_order=" << r.fit.fitted_order << " fit_residual=" << r.fit.fit_residual << "\n";
    std::cout << "wrote " << cfg.output_dir << "\n";
    return 0;
}

int cmd_fit(const std::string& input, const std::string& output) {
    RateFitResult r = fit_rate(read_rate_csv(input));
    if (!output.empty()) {
        fs::create_directories(output);
        write_file(fs::path(output) / "rate_fit.csv", rate_fit_csv(r));
    }
    std::cout << std::setprecision(12) << "fitted_order=" << r.fitted_order << " fit_residual=" << r.fit_residual
              << " n_points=" << r.points.size() << "\n";
    return 0;
}

int cmd_spectrum(const CommonOptions& o, int modes) {
    ExperimentConfig cfg = resolve_config(o, Preset::WellPreparedRate);
    HydrostaticProfile profile =
        solve_hydrostatic(cfg.params.gamma, cfg.params.g, cfg.rho_bottom, cfg.grid);
    PropagatorSpectrum sp = propagator_spectrum(profile, modes, 20, static_cast<unsigned>(cfg.seed));
    std::cout << "index,eigenvalue,horizontal_wavenumber,vertical_index\n" << std::setprecision(17);
    for (std::size_t i = 0; i < sp.modes.size(); ++i)
        std::cout << i << "," << sp.modes[i].eigenvalue << "," << sp.modes[i].horizontal_wavenumber << ","
                  << sp.modes[i].vertical_index << "\n";
    std::cerr << "self_adjointness_residual=" << sp.self_adjointness_residual << "\n";
    return 0;
}

int cmd_check(const CommonOptions& o) {
    ExperimentConfig cfg = resolve_config(o, Preset::WellPreparedRate);
    bool ok = true;
    for (const auto& c : run_invariant_checks(cfg)) {
        std::cout << (c.pass() ? "PASS " : "FAIL ") << c.name << ": " << std::setprecision(3) << c.value
                  << " (tol " << c.tolerance << ")\n";
        ok = ok && c.pass();
    }
    return ok ? 0 : 2;
}

int cmd_info() {
    std::cout << "strato " << code_version() << "\n"
              << "presets: equilibrium well_prepared_rate ill_prepared_qualitative manufactured_convergence\n"
              << "diagnostics.csv header: " << DiagnosticsRecord::csv_header() << "\n"
              << "default config:\n"
              << ExperimentConfig::from_preset(Preset::WellPreparedRate).to_json().dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-Mach stratified flow solver and anelastic-limit experiments"};
    app.require_subcommand(1);
    CommonOptions common;
    std::string fit_input, fit_output;
    int modes = 20;

    auto* run = app.add_subcommand("run", "paired primitive/anelastic run (or a self-convergence study)");
    add_common(run, common);
    auto* sweep = app.add_subcommand("sweep", "one paired run per (epsilon, nu) plus a rate fit");
    add_common(sweep, common);
    auto* fit = app.add_subcommand("fit", "fit the order of a rate CSV");
    fit->add_option("--input", fit_input, "rate CSV with eps_plus_nu and sup_metric columns")
        ->required()
        ->check(CLI::ExistingFile);
    fit->add_option("--output", fit_output, "directory for rate_fit.csv");
    auto* spectrum = app.add_subcommand("spectrum", "lowest eigenvalues of the acoustic propagator");
    add_common(spectrum, common);
    spectrum->add_option("--modes", modes, "number of eigenvalues")->check(CLI::PositiveNumber);
    auto* check = app.add_subcommand("check", "fast invariant suite");
    add_common(check, common);
    auto* info = app.add_subcommand("info", "version, presets and defaults");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*run) return cmd_run(common);
        if (*sweep) return cmd_sweep(common);
        if (*fit) return cmd_fit(fit_input, fit_output);
        if (*spectrum) return cmd_spectrum(common, modes);
        if (*check) return cmd_check(common);
        if (*info) return cmd_info();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        const bool validation = e.kind() == ErrorKind::Validation || e.kind() == ErrorKind::DegeneratePoints ||
                                e.kind() == ErrorKind::IncompatibleData || e.kind() == ErrorKind::GridMismatch;
        return validation ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
