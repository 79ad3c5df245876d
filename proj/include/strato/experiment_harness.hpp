#pragma once

/// @file experiment_harness.hpp
/// @brief Paired primitive/anelastic runs, (epsilon, nu) sweeps, rate fits,
/// self-convergence studies and run manifests.
///
/// Output layout of one run directory:
///     diagnostics.csv          DiagnosticsRecord::csv_header() then one row per record time
///     primitive_final.strato   rho, mom1..3, rhoTheta, rho_tilde
///     anelastic_final.strato   v1..3, T_pert, Pi
///     manifest.json            config, config hash, code version, file hashes, summary
/// A sweep directory holds one such directory per (epsilon, nu) pair plus
/// rate.csv, rate_fit.csv and a manifest covering every file below it.

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "strato/anelastic_solver.hpp"
#include "strato/checkpoint.hpp"
#include "strato/config.hpp"
#include "strato/diagnostics.hpp"
#include "strato/hydrostatics.hpp"
#include "strato/primitive_solver.hpp"

#ifndef STRATO_GIT_REV
#define STRATO_GIT_REV "unknown"
#endif

namespace strato {

inline constexpr const char* kVersion = "0.1.0";

inline std::string code_version() { return std::string(kVersion) + "+" + STRATO_GIT_REV; }

// ---------------------------------------------------------------- hashing

inline std::string sha256_hex(const void* data, std::size_t len) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    if (EVP_Digest(data, len, md, &n, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::Io, "sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < n; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
    if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
}

// ---------------------------------------------------------------- initial data

/// Uniform phase in [0, 2 pi) from one raw 64-bit Mersenne output, so the
/// fields do not depend on the standard library's distribution code.
inline double raw_phase(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 * std::numbers::pi;
}

/// Smooth bump in z that vanishes with all derivatives at the walls.
inline double wall_bump(double z) {
    const double s = (z - 0.5) / 0.45;
    return std::abs(s) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
}

struct InitialFields {
    InitialDataSpec primitive;
    AnelasticInitSpec anelastic;
};

/// Shared perturbation shapes. v0 is weighted-solenoidal and scaled to
/// max|v0| = u_amp; T0 = theta2_amp * bump(z) (1 + 0.5 sin cos). Well-prepared
/// data sets rho1 = 0, u0 = v0 and Theta^(2) = T0; ill-prepared data adds
/// rho1 and a gradient part to u0.
inline InitialFields build_initial_fields(const ExperimentConfig& cfg, const HydrostaticProfile& profile) {
    const SlabGrid& g = profile.grid();
    const double pi = std::numbers::pi;
    std::mt19937_64 rng(cfg.seed);
    double ph[8];
    for (double& p : ph) p = raw_phase(rng);

    InitialFields out;
    auto& prim = out.primitive;
    prim.kind = cfg.initial.kind == "ill_prepared" ? DataKind::IllPrepared : DataKind::WellPrepared;
    prim.bound_d = cfg.initial.bound_d;
    prim.rho1 = ScalarField(g, Parity::Even);
    prim.theta2 = ScalarField(g, Parity::Even);
    prim.u0 = VectorField(g);
    if (cfg.initial.kind == "rest") {
        out.anelastic = {prim.u0, prim.theta2};
        return out;
    }

    // rho_tilde v = horizontal rotation of psi(x, y) cos(pi z) + overturning from phi = cos(2 pi x) sin(pi z)
    VectorField rv(g);
    rv[0] = ScalarField::from_function(g, [&](double x, double y, double z) {
        return 2 * pi * std::sin(2 * pi * y + ph[0]) * std::cos(pi * z) +
               0.6 * pi * std::cos(2 * pi * x + ph[1]) * std::cos(pi * z);
    });
    rv[1] = ScalarField::from_function(g, [&](double x, double, double z) {
        return 2 * pi * 0.8 * std::cos(2 * pi * x + ph[2]) * (1.0 + 0.5 * std::cos(pi * z));
    });
    rv[2] = ScalarField::from_function(g, [&](double x, double, double z) {
        return 0.6 * 2 * pi * std::sin(2 * pi * x + ph[1]) * std::sin(pi * z);
    }, Parity::Odd);
    VectorField v(g);
    for (int c = 0; c < 3; ++c)
        for (std::size_t n = 0; n < g.size(); ++n) v[c][n] = rv[c][n] / profile.rho_tilde()[n];
    v = project_anelastic(v, profile, 1e-13);
    const double vmax = v.max_abs();
    v *= vmax > 0.0 ? cfg.initial.u_amp / vmax : 0.0;
    if (cfg.initial.shear_amp != 0.0) {
        const double cx = std::cos(ph[5]), cy = std::sin(ph[5]);
        for (int k = 0; k < g.nz; ++k)
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    const double a = cfg.initial.shear_amp * std::cos(pi * g.z(k));
                    v[0](i, j, k) += a * cx;
                    v[1](i, j, k) += a * cy;
                }
    }

    ScalarField t0 = ScalarField::from_function(g, [&](double x, double y, double z) {
        return cfg.initial.theta2_amp * wall_bump(z) *
               (1.0 + cfg.initial.theta2_variation * std::sin(2 * pi * x + ph[3]) * std::cos(2 * pi * y + ph[4]));
    });

    out.anelastic = {v, t0};
    prim.u0 = v;
    prim.theta2 = t0;
    if (cfg.initial.kind == "ill_prepared") {
        prim.rho1 = ScalarField::from_function(g, [&](double x, double y, double z) {
            return cfg.initial.rho1_amp *
                   (std::cos(2 * pi * x + ph[5]) * std::cos(pi * z) + 0.4 * std::sin(2 * pi * y + ph[6]));
        });
        SpectralOps ops(g);
        auto pot = ScalarField::from_function(g, [&](double x, double y, double z) {
            return std::cos(2 * pi * x + ph[7]) * std::cos(2 * pi * y) * std::cos(pi * z);
        });
        VectorField grad = ops.gradient(pot);
        const double gmax = grad.max_abs();
        prim.u0.axpy(cfg.initial.potential_amp / gmax, grad);
    }
    return out;
}

// ---------------------------------------------------------------- runs

/// int rho ((Theta - 1) / eps^2)^2.
inline double theta2_square_integral(const PrimitiveState& s, double epsilon) {
    const double e2 = epsilon * epsilon;
    return renormalized_integral(s, [e2](double th) { return (th - 1.0) * (th - 1.0) / (e2 * e2); });
}

struct RunSummary {
    double epsilon = 0.0;
    double nu = 0.0;
    int steps = 0;
    double dt = 0.0;
    double sup_metric = 0.0;           ///< running sup over all steps of the convergence metric
    double final_metric = 0.0;
    double max_relative_energy = 0.0;
    double max_energy_defect = 0.0;    ///< max over record times of the energy-inequality defect
    double transport_identity_defect = 0.0;
    double mass_drift_rate = 0.0;      ///< relative drift per unit time
    double rho_theta_drift_rate = 0.0;
    double theta2_drift_rate = 0.0;    ///< relative when the initial value is nonzero, absolute otherwise
    double max_density_deviation = 0.0;
    double max_speed = 0.0;
    double max_rho_theta_deviation = 0.0;
    double elapsed_seconds = 0.0;

    json to_json() const {
        return {{"epsilon", epsilon},
                {"nu", nu},
                {"steps", steps},
                {"dt", dt},
                {"sup_metric", sup_metric},
                {"final_metric", final_metric},
                {"max_relative_energy", max_relative_energy},
                {"max_energy_defect", max_energy_defect},
                {"transport_identity_defect", transport_identity_defect},
                {"mass_drift_rate", mass_drift_rate},
                {"rho_theta_drift_rate", rho_theta_drift_rate},
                {"theta2_drift_rate", theta2_drift_rate},
                {"max_density_deviation", max_density_deviation},
                {"max_speed", max_speed},
                {"max_rho_theta_deviation", max_rho_theta_deviation},
                {"elapsed_seconds", elapsed_seconds}};
    }
};

/// Common step for both systems: T / N with N from the smaller stable step at t = 0.
inline std::pair<int, double> paired_time_axis(const ExperimentConfig& cfg, PrimitiveStepper& ps,
                                               AnelasticStepper& as, const PrimitiveState& p0,
                                               const AnelasticState& a0) {
    if (cfg.steps > 0) return {cfg.steps, cfg.stepper.dt};
    double dt_max = cfg.stepper.dt > 0.0 ? cfg.stepper.dt : std::min(ps.stable_dt(p0), as.stable_dt(a0));
    const int n = step_count(cfg.final_time, dt_max);
    return {n, cfg.final_time / n};
}

inline void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg, bool complete,
                           const json& summary, const std::string& error = "") {
    namespace fs = std::filesystem;
    json m;
    const json cj = cfg.to_json();
    m["code_version"] = code_version();
    m["config"] = cj;
    m["config_sha256"] = sha256_hex(cj.dump());
    m["seed"] = cfg.seed;
    m["threads"] = cfg.threads;
    m["complete"] = complete;
    if (!error.empty()) m["error"] = error;
    m["summary"] = summary;
    std::vector<fs::path> files;
    if (fs::exists(dir))
        for (const auto& e : fs::recursive_directory_iterator(dir))
            if (e.is_regular_file() && e.path() != dir / "manifest.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    json list = json::array();
    for (const auto& f : files) {
        const std::string bytes = read_file(f);
        list.push_back({{"path", fs::relative(f, dir).generic_string()},
                        {"sha256", sha256_hex(bytes)},
                        {"bytes", bytes.size()}});
    }
    m["files"] = list;
    write_file(dir / "manifest.json", m.dump(2) + "\n");
}

/// Integrates both systems on one grid and time axis, records diagnostics
/// every record_interval, and writes the run directory. On failure the
/// manifest is written with complete = false and the error is rethrown.
inline RunSummary run_paired(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    cfg.validate();
    fs::create_directories(dir);
    const auto t_start = std::chrono::steady_clock::now();
    RunSummary sum;
    sum.epsilon = cfg.params.epsilon;
    sum.nu = cfg.params.nu;
    try {
        const ScaledParams& p = cfg.params;
        HydrostaticProfile profile = solve_hydrostatic(p.gamma, p.g, cfg.rho_bottom, cfg.grid);
        ScaledParams tp = p;
        tp.nu = cfg.target_nu;
        PrimitiveStepper ps(p, profile, cfg.stepper);
        AnelasticStepper as(tp, profile, cfg.stepper);
        InitialFields init = build_initial_fields(cfg, profile);
        PrimitiveState prim = assemble_initial_state(init.primitive, p, profile);
        AnelasticState targ = as.initial_state(init.anelastic);

        auto [nsteps, dt] = paired_time_axis(cfg, ps, as, prim, targ);
        sum.steps = nsteps;
        sum.dt = dt;
        const int every = std::max(1, static_cast<int>(std::lround(cfg.record_interval / dt)));

        DiagnosticsEvaluator diag(p, profile);
        EnergyBudget budget;
        const double eps2 = p.epsilon * p.epsilon;
        auto as_t = [eps2](double th) { return (th - 1.0) / eps2; };
        TransportIdentityTracker w6_scaled(cfg.grid, as_t);
        const double mass0 = integrate(prim.rho), rt0 = integrate(prim.rho_theta);
        const double g20 = theta2_square_integral(prim, p.epsilon);

        std::ofstream csv(dir / "diagnostics.csv", std::ios::binary);
        if (!csv) throw Error(ErrorKind::Io, "cannot write diagnostics.csv");
        csv << DiagnosticsRecord::csv_header() << "\n";

        auto observe = [&](int k) {
            const double m = thm1_metric(prim, targ, profile, p);
            sum.sup_metric = std::max(sum.sup_metric, m);
            sum.final_metric = m;
            const ScalarField& rt = profile.rho_tilde();
            for (std::size_t n = 0; n < rt.size(); ++n) {
                sum.max_density_deviation = std::max(sum.max_density_deviation, std::abs(prim.rho[n] - rt[n]));
                sum.max_rho_theta_deviation =
                    std::max(sum.max_rho_theta_deviation, std::abs(prim.rho_theta[n] - rt[n]));
            }
            sum.max_speed = std::max(sum.max_speed, velocity(prim).max_abs());
            w6_scaled.add(prim, targ);
            budget.add(ps, prim);
            sum.max_energy_defect = std::max(sum.max_energy_defect, budget.current());
            if (k % every == 0 || k == nsteps) {
                DiagnosticsRecord r = diag.record(prim, &targ, budget.dissipation_integral());
                sum.max_relative_energy = std::max(sum.max_relative_energy, r.relative_energy);
                csv << r.csv_row() << "\n";
            }
        };
        observe(0);
        for (int k = 1; k <= nsteps; ++k) {
            prim = ps.step(prim, dt);
            targ = as.step(targ, dt);
            prim.time = targ.time = k * dt;
            observe(k);
        }
        csv.close();
        sum.transport_identity_defect = w6_scaled.defect();
        const double T = nsteps * dt;
        sum.mass_drift_rate = std::abs(integrate(prim.rho) - mass0) / std::abs(mass0) / T;
        sum.rho_theta_drift_rate = std::abs(integrate(prim.rho_theta) - rt0) / std::abs(rt0) / T;
        const double g2 = theta2_square_integral(prim, p.epsilon);
        sum.theta2_drift_rate = std::abs(g2 - g20) / (g20 > 0.0 ? g20 : 1.0) / T;

        save_primitive(dir / "primitive_final.strato", prim, &profile);
        save_anelastic(dir / "anelastic_final.strato", targ);
        sum.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        write_manifest(dir, cfg, true, sum.to_json());
    } catch (const std::exception& e) {
        sum.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        write_manifest(dir, cfg, false, sum.to_json(), e.what());
        throw;
    }
    return sum;
}

// ---------------------------------------------------------------- rate fit

struct RateFitResult {
    std::vector<std::pair<double, double>> points;  ///< (epsilon + nu, sup metric)
    double fitted_order = 0.0;
    double intercept = 0.0;     ///< log of the fitted constant
    double fit_residual = 0.0;  ///< root-mean-square residual in log space
};

/// Least-squares slope of log(metric) against log(epsilon + nu).
inline RateFitResult fit_rate(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 3) throw Error(ErrorKind::DegeneratePoints, "a rate fit needs at least 3 points");
    for (const auto& [x, y] : points)
        if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y))
            throw Error(ErrorKind::DegeneratePoints, "rate fit points must be positive and finite");
    const double n = static_cast<double>(points.size());
    double sx = 0, sy = 0;
    for (const auto& [x, y] : points) {
        sx += std::log(x);
        sy += std::log(y);
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (const auto& [x, y] : points) {
        const double dx = std::log(x) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(y) - my);
    }
    if (!(sxx > 0.0)) throw Error(ErrorKind::DegeneratePoints, "rate fit needs distinct epsilon + nu values");
    RateFitResult r;
    r.points = points;
    r.fitted_order = sxy / sxx;
    r.intercept = my - r.fitted_order * mx;
    double ss = 0;
    for (const auto& [x, y] : points) {
        const double e = std::log(y) - (r.intercept + r.fitted_order * std::log(x));
        ss += e * e;
    }
    r.fit_residual = std::sqrt(ss / n);
    return r;
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string rate_fit_csv(const RateFitResult& r) {
    return "fitted_order,intercept,fit_residual,n_points\n" + format_double(r.fitted_order) + "," +
           format_double(r.intercept) + "," + format_double(r.fit_residual) + "," + std::to_string(r.points.size()) +
           "\n";
}

/// Reads (eps_plus_nu, sup_metric) columns from a rate CSV.
inline std::vector<std::pair<double, double>> read_rate_csv(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Validation, "empty rate CSV");
    std::vector<std::string> head;
    {
        std::istringstream hs(line);
        std::string c;
        while (std::getline(hs, c, ',')) head.push_back(c);
    }
    auto col = [&](const std::string& name) {
        auto it = std::find(head.begin(), head.end(), name);
        if (it == head.end()) throw Error(ErrorKind::Validation, "rate CSV lacks column " + name);
        return static_cast<std::size_t>(it - head.begin());
    };
    const std::size_t cx = col("eps_plus_nu"), cy = col("sup_metric");
    std::vector<std::pair<double, double>> pts;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) f.push_back(c);
        if (f.size() != head.size()) throw Error(ErrorKind::Validation, "ragged rate CSV row");
        try {
            pts.emplace_back(std::stod(f[cx]), std::stod(f[cy]));
        } catch (const std::exception&) {
            throw Error(ErrorKind::Validation, "non-numeric rate CSV entry");
        }
    }
    return pts;
}

// ---------------------------------------------------------------- sweeps

/// Worker count: STRATO_THREADS if set, else the requested value.
inline int resolve_threads(int requested) {
    if (const char* env = std::getenv("STRATO_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) throw Error(ErrorKind::Validation, "STRATO_THREADS must be >= 1");
        return static_cast<int>(v);
    }
    return std::max(1, requested);
}

inline std::string run_dir_name(double eps, double nu) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "eps_%.6g_nu_%.6g", eps, nu);
    return buf;
}

struct SweepResult {
    std::vector<RunSummary> runs;
    bool fitted = false;
    RateFitResult fit;
};

/// One run_paired per (epsilon, nu) pair, executed on a pool of worker
/// threads. Each run is single threaded and independent of the others.
inline SweepResult run_sweep(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    cfg.validate();
    fs::create_directories(dir);
    const auto pairs = cfg.sweep_pairs();
    SweepResult res;
    res.runs.resize(pairs.size());
    std::vector<std::string> errors(pairs.size());
    std::vector<std::exception_ptr> failures(pairs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < pairs.size(); i = next++) {
            ExperimentConfig c = cfg;
            c.params.epsilon = pairs[i].first;
            c.params.nu = pairs[i].second;
            c.sweep_epsilon.clear();
            c.sweep_nu.clear();
            try {
                res.runs[i] = run_paired(c, dir / run_dir_name(pairs[i].first, pairs[i].second));
            } catch (const std::exception& e) {
                errors[i] = e.what();
                failures[i] = std::current_exception();
            }
        }
    };
    const int nthreads = std::min<int>(cfg.threads, static_cast<int>(pairs.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::string first_error;
    std::exception_ptr first_failure;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        if (!errors[i].empty() && first_error.empty()) {
            first_error = run_dir_name(pairs[i].first, pairs[i].second) + ": " + errors[i];
            first_failure = failures[i];
        }

    std::ostringstream rate;
    rate << "epsilon,nu,eps_plus_nu,sup_metric,final_metric,steps,dt\n";
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!errors[i].empty()) continue;
        const RunSummary& r = res.runs[i];
        rate << format_double(r.epsilon) << "," << format_double(r.nu) << "," << format_double(r.epsilon + r.nu)
             << "," << format_double(r.sup_metric) << "," << format_double(r.final_metric) << "," << r.steps << ","
             << format_double(r.dt) << "\n";
        pts.emplace_back(r.epsilon + r.nu, r.sup_metric);
    }
    write_file(dir / "rate.csv", rate.str());

    json summary;
    summary["runs"] = json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i)
        if (errors[i].empty()) summary["runs"].push_back(res.runs[i].to_json());
    try {
        res.fit = fit_rate(pts);
        res.fitted = true;
        write_file(dir / "rate_fit.csv", rate_fit_csv(res.fit));
        summary["fitted_order"] = res.fit.fitted_order;
        summary["fit_residual"] = res.fit.fit_residual;
    } catch (const Error& e) {
        summary["fit_error"] = e.what();
    }
    write_manifest(dir, cfg, first_error.empty(), summary, first_error);
    if (first_failure) std::rethrow_exception(first_failure);
    return res;
}

// ---------------------------------------------------------------- self-convergence

/// Max-norm distance between two primitive states on the same grid.
inline double state_distance(const PrimitiveState& a, const PrimitiveState& b) {
    double m = 0.0;
    for (std::size_t n = 0; n < a.rho.size(); ++n) {
        m = std::max(m, std::abs(a.rho[n] - b.rho[n]));
        m = std::max(m, std::abs(a.rho_theta[n] - b.rho_theta[n]));
        for (int c = 0; c < 3; ++c) m = std::max(m, std::abs(a.mom[c][n] - b.mom[c][n]));
    }
    return m;
}

/// Primitive state at final_time after n equal steps.
inline PrimitiveState integrate_primitive(const ExperimentConfig& cfg, int nsteps) {
    HydrostaticProfile profile = solve_hydrostatic(cfg.params.gamma, cfg.params.g, cfg.rho_bottom, cfg.grid);
    PrimitiveStepper ps(cfg.params, profile, cfg.stepper);
    PrimitiveState s = assemble_initial_state(build_initial_fields(cfg, profile).primitive, cfg.params, profile);
    const double dt = cfg.final_time / nsteps;
    for (int k = 1; k <= nsteps; ++k) {
        s = ps.step(s, dt);
        s.time = k * dt;
    }
    return s;
}

struct ConvergenceReport {
    std::vector<double> temporal_errors;  ///< |U_dt - U_dt/2| for dt, dt/2
    std::vector<double> spatial_errors;   ///< |F_h - F_h/2| for h, h/2
    double temporal_order = 0.0;
    double spatial_order = 0.0;
    int base_steps = 0;

    std::string csv() const {
        std::ostringstream os;
        os << "kind,level,error\n";
        for (std::size_t i = 0; i < temporal_errors.size(); ++i)
            os << "temporal," << i << "," << format_double(temporal_errors[i]) << "\n";
        for (std::size_t i = 0; i < spatial_errors.size(); ++i)
            os << "spatial," << i << "," << format_double(spatial_errors[i]) << "\n";
        os << "temporal_order,," << format_double(temporal_order) << "\n";
        os << "spatial_order,," << format_double(spatial_order) << "\n";
        return os.str();
    }
};

/// Self-convergence of the primitive solver from the configured initial data.
/// Temporal: steps N, 2N, 4N on the configured grid, order from successive
/// state differences. Spatial: grids n, 2n, 4n per direction at one common
/// small step, order from successive differences of the final total energy
/// (grids do not share nodes in z, so a grid functional is compared).
inline ConvergenceReport run_convergence(const ExperimentConfig& cfg) {
    cfg.validate();
    ConvergenceReport rep;
    {
        HydrostaticProfile profile = solve_hydrostatic(cfg.params.gamma, cfg.params.g, cfg.rho_bottom, cfg.grid);
        PrimitiveStepper ps(cfg.params, profile, cfg.stepper);
        PrimitiveState s0 =
            assemble_initial_state(build_initial_fields(cfg, profile).primitive, cfg.params, profile);
        rep.base_steps = cfg.steps > 0 ? cfg.steps : step_count(cfg.final_time, ps.stable_dt(s0));
    }
    const int n0 = rep.base_steps;
    PrimitiveState a = integrate_primitive(cfg, n0), b = integrate_primitive(cfg, 2 * n0),
                   c = integrate_primitive(cfg, 4 * n0);
    rep.temporal_errors = {state_distance(a, b), state_distance(b, c)};
    rep.temporal_order = std::log2(rep.temporal_errors[0] / rep.temporal_errors[1]);

    std::vector<double> f;
    ExperimentConfig fine = cfg;
    fine.grid = SlabGrid(4 * cfg.grid.nx, 4 * cfg.grid.ny, 4 * cfg.grid.nz);
    int nsteps = 0;
    {
        HydrostaticProfile profile = solve_hydrostatic(fine.params.gamma, fine.params.g, fine.rho_bottom, fine.grid);
        PrimitiveStepper ps(fine.params, profile, fine.stepper);
        PrimitiveState s0 =
            assemble_initial_state(build_initial_fields(fine, profile).primitive, fine.params, profile);
        nsteps = step_count(fine.final_time, ps.stable_dt(s0));
    }
    for (int level = 0; level < 3; ++level) {
        ExperimentConfig c2 = cfg;
        const int m = 1 << level;
        c2.grid = SlabGrid(m * cfg.grid.nx, m * cfg.grid.ny, m * cfg.grid.nz);
        f.push_back(energy(integrate_primitive(c2, nsteps), c2.params));
    }
    rep.spatial_errors = {std::abs(f[0] - f[1]), std::abs(f[1] - f[2])};
    rep.spatial_order = std::log2(rep.spatial_errors[0] / rep.spatial_errors[1]);
    return rep;
}

// ---------------------------------------------------------------- invariant suite

struct CheckResult {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass() const { return std::isfinite(value) && value <= tolerance; }
};

/// Fast invariant suite on the configured grid and parameters: hydrostatic
/// rest, per-step conservation, weighted projection, anelastic constraint,
/// propagator symmetry and acoustic energy, checkpoint round trip.
inline std::vector<CheckResult> run_invariant_checks(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<CheckResult> out;
    const ScaledParams& p = cfg.params;
    HydrostaticProfile profile = solve_hydrostatic(p.gamma, p.g, cfg.rho_bottom, cfg.grid);
    const SlabGrid& g = profile.grid();
    PrimitiveStepper ps(p, profile, cfg.stepper);

    {
        PrimitiveState s{profile.rho_tilde(), VectorField(g), profile.rho_tilde(), 0.0};
        double dev = 0.0;
        for (int k = 0; k < 10; ++k) {
            s = ps.step(s, 0.005);
            for (std::size_t n = 0; n < g.size(); ++n)
                dev = std::max({dev, std::abs(s.rho[n] - profile.rho_tilde()[n]),
                                std::abs(s.rho_theta[n] - profile.rho_tilde()[n])});
            dev = std::max(dev, velocity(s).max_abs());
        }
        out.push_back({"hydrostatic rest, 10 steps", dev, 1e-10});
    }

    ExperimentConfig smooth = cfg;
    if (smooth.initial.kind == "rest") smooth.initial = InitialShapes{};
    InitialFields init = build_initial_fields(smooth, profile);
    {
        PrimitiveState s = assemble_initial_state(init.primitive, p, profile);
        const double m0 = integrate(s.rho), z0 = integrate(s.rho_theta);
        double dm = 0.0, dz = 0.0;
        for (int k = 0; k < 5; ++k) {
            const double m = integrate(s.rho), z = integrate(s.rho_theta);
            s = ps.step(s, ps.stable_dt(s));
            dm = std::max(dm, std::abs(integrate(s.rho) - m) / m0);
            dz = std::max(dz, std::abs(integrate(s.rho_theta) - z) / z0);
        }
        out.push_back({"mass conserved per step", dm, 1e-12});
        out.push_back({"rho Theta conserved per step", dz, 1e-12});
    }

    WeightedHelmholtz h(profile);
    {
        VectorField w = init.anelastic.v0;
        w.axpy(0.5, h.ops().gradient(init.anelastic.t0));
        HelmholtzParts parts = h.decompose(w, 1e-13);
        VectorField rec = parts.p_part + scale_by(profile.rho_tilde(), parts.q_part);
        rec -= w;
        out.push_back({"projection reconstruction", rec.max_abs(), 1e-12});
        out.push_back({"projection divergence", h.ops().divergence(parts.p_part).max_abs(), 1e-10});
        HelmholtzParts again = h.decompose(parts.p_part, 1e-13);
        out.push_back({"projection idempotence", again.q_part.max_abs() * profile.rho_tilde().max_abs(), 1e-10});
    }
    {
        ScaledParams tp = p;
        tp.nu = cfg.target_nu;
        AnelasticStepper as(tp, profile, cfg.stepper);
        AnelasticState a = as.initial_state(init.anelastic);
        double worst = 0.0;
        for (int k = 0; k < 3; ++k) {
            a = as.step(a);
            worst = std::max(worst, as.constraint_defect(a.v));
        }
        out.push_back({"anelastic constraint, 3 steps", worst, 1e-10});
    }
    {
        AcousticPropagator ap(profile);
        PropagatorSpectrum sp = propagator_spectrum(profile, 1, 20, static_cast<unsigned>(cfg.seed));
        out.push_back({"propagator self-adjointness, 20 pairs", sp.self_adjointness_residual, 1e-10});
        ScalarField z = init.anelastic.t0, phi(g, Parity::Even);
        double e = ap.energy(z, phi), drift = 0.0;
        for (int k = 0; k < 5; ++k) {
            std::tie(z, phi) = ap.step(z, phi, 0.01);
            const double e1 = ap.energy(z, phi);
            drift = std::max(drift, std::abs(e1 - e) / e);
            e = e1;
        }
        out.push_back({"acoustic energy per step", drift, 1e-10});
    }
    {
        PrimitiveState s = assemble_initial_state(init.primitive, p, profile);
        const auto tmp = std::filesystem::temp_directory_path() /
                         ("strato_check_" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) +
                          ".strato");
        save_primitive(tmp, s);
        PrimitiveState r = load_primitive(tmp);
        std::filesystem::remove(tmp);
        out.push_back({"checkpoint round trip", state_distance(s, r) + std::abs(s.time - r.time), 0.0});
    }
    return out;
}

}  // namespace strato
