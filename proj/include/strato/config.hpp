#pragma once

/// @file config.hpp
/// @brief Experiment configuration: presets, TOML/JSON loading, validation.
///
/// Sections: [grid] [params] [initial] [stepper] [output] [sweep], plus the
/// top-level keys `preset`, `seed` and `threads`. A preset fills every field
/// first; keys present in the file then override it. Unknown keys are errors.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "strato/core_types.hpp"
#include "strato/primitive_solver.hpp"
#include "strato/transport.hpp"

namespace strato {

using json = nlohmann::ordered_json;

enum class Preset { Equilibrium, WellPreparedRate, IllPreparedQualitative, ManufacturedConvergence };

inline std::string to_string(Preset p) {
    switch (p) {
        case Preset::Equilibrium: return "equilibrium";
        case Preset::WellPreparedRate: return "well_prepared_rate";
        case Preset::IllPreparedQualitative: return "ill_prepared_qualitative";
        case Preset::ManufacturedConvergence: return "manufactured_convergence";
    }
    return "unknown";
}

inline Preset preset_from_string(const std::string& s) {
    for (Preset p : {Preset::Equilibrium, Preset::WellPreparedRate, Preset::IllPreparedQualitative,
                     Preset::ManufacturedConvergence})
        if (to_string(p) == s) return p;
    throw Error(ErrorKind::Validation, "unknown preset '" + s + "'");
}

/// Amplitudes of the shared perturbation shapes. `rest` zeroes everything.
struct InitialShapes {
    std::string kind = "well_prepared";  ///< well_prepared | ill_prepared | rest
    double rho1_amp = 0.0;               ///< first-order density perturbation (ill-prepared only)
    double u_amp = 0.3;                  ///< solenoidal velocity v0
    double theta2_amp = 1.0;             ///< T0 = Theta^(2)
    double potential_amp = 0.0;          ///< gradient (acoustic) part added to u0 (ill-prepared only)
    double shear_amp = 0.0;              ///< horizontally uniform shear cos(pi z) added to v0
    double theta2_variation = 0.5;       ///< relative horizontal variation of T0
    double bound_d = std::numeric_limits<double>::infinity();
};

struct ExperimentConfig {
    Preset preset = Preset::WellPreparedRate;
    SlabGrid grid{32, 32, 16};
    ScaledParams params{};
    double rho_bottom = 1.0;
    InitialShapes initial{};
    StepperConfig stepper{};
    double final_time = 0.5;
    double record_interval = 0.05;
    int steps = 0;            ///< fixed step count; 0 derives dt from the CFL bounds
    double target_nu = 0.0;   ///< viscosity of the anelastic comparison run
    std::vector<double> sweep_epsilon;
    std::vector<double> sweep_nu;
    bool nu_equals_epsilon = true;
    std::string output_dir = "strato_out";
    std::uint64_t seed = 1;
    int threads = 1;

    static ExperimentConfig from_preset(Preset p) {
        ExperimentConfig c;
        c.preset = p;
        switch (p) {
            case Preset::Equilibrium:
                c.params.epsilon = 0.1;
                c.params.nu = 0.1;
                c.initial = {"rest", 0.0, 0.0, 0.0, 0.0};
                c.stepper.dt = 0.005;
                c.steps = 200;
                c.final_time = 1.0;
                c.record_interval = 0.1;
                break;
            case Preset::WellPreparedRate:
                c.params.epsilon = 0.1;
                c.params.nu = 0.1;
                // large-scale data: a cos(pi z) shear plus a weak 3-D part keeps nu k^2 T below 1
                c.initial = {"well_prepared", 0.0, 0.05, 1.0, 0.0, 0.3, 0.5};
                c.sweep_epsilon = {0.2, 0.1, 0.05};
                c.sweep_nu = {0.2, 0.1, 0.05};
                break;
            case Preset::IllPreparedQualitative:
                c.grid = SlabGrid(16, 16, 16);
                c.params.gamma = 3.5;
                c.params.epsilon = 0.1;
                c.params.nu = 0.01;
                c.initial = {"ill_prepared", 0.5, 0.3, 1.0, 0.1};
                c.target_nu = 0.01;
                c.final_time = 0.5;
                c.record_interval = 0.005;
                c.sweep_epsilon = {0.2, 0.1, 0.05};
                c.sweep_nu = {0.01, 0.01, 0.01};
                c.nu_equals_epsilon = false;
                break;
            case Preset::ManufacturedConvergence:
                c.grid = SlabGrid(8, 8, 8);
                c.params.epsilon = 1.0;
                c.params.nu = 0.01;
                c.initial = {"ill_prepared", 0.25, 0.15, 0.5, 0.05};
                c.final_time = 0.2;
                c.record_interval = 0.2;
                break;
        }
        return c;
    }

    /// (epsilon, nu) pairs of the sweep; the single params pair when no sweep is set.
    std::vector<std::pair<double, double>> sweep_pairs() const {
        std::vector<std::pair<double, double>> out;
        if (sweep_epsilon.empty()) return {{params.epsilon, params.nu}};
        for (std::size_t i = 0; i < sweep_epsilon.size(); ++i)
            out.emplace_back(sweep_epsilon[i], nu_equals_epsilon ? sweep_epsilon[i] : sweep_nu.at(i));
        return out;
    }

    void validate() const {
        auto fail = [](const std::string& m) { throw Error(ErrorKind::Validation, m); };
        grid.validate();
        params.validate();
        stepper.validate();
        if (!(rho_bottom > 0.0)) fail("params.rho_bottom must be > 0");
        if (!(final_time > 0.0)) fail("stepper.final_time must be > 0");
        if (!(record_interval > 0.0)) fail("stepper.record_interval must be > 0");
        if (steps < 0) fail("stepper.steps must be >= 0");
        if (steps > 0 && !(stepper.dt > 0.0)) fail("stepper.steps needs a positive stepper.dt");
        if (!(target_nu >= 0.0)) fail("stepper.target_nu must be >= 0");
        if (threads < 1) fail("threads must be >= 1");
        if (initial.kind != "well_prepared" && initial.kind != "ill_prepared" && initial.kind != "rest")
            fail("initial.kind must be well_prepared, ill_prepared or rest");
        auto strictly_decreasing = [&](const std::vector<double>& v, const char* name) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (!(v[i] > 0.0)) fail(std::string("sweep.") + name + " entries must be positive");
                if (i > 0 && !(v[i] < v[i - 1])) fail(std::string("sweep.") + name + " must be strictly decreasing");
            }
        };
        strictly_decreasing(sweep_epsilon, "epsilon");
        if (!nu_equals_epsilon) {
            if (sweep_nu.size() != sweep_epsilon.size()) fail("sweep.nu must match sweep.epsilon in length");
            for (double n : sweep_nu)
                if (!(n >= 0.0)) fail("sweep.nu entries must be >= 0");
        }
        if (preset == Preset::WellPreparedRate) {
            params.validate_for_rate_theorem();
            if (initial.kind != "well_prepared") fail("well_prepared_rate needs initial.kind = well_prepared");
            if (initial.rho1_amp != 0.0 || initial.potential_amp != 0.0)
                fail("well_prepared_rate needs zero initial defects (rho1_amp = potential_amp = 0)");
            if (!nu_equals_epsilon) strictly_decreasing(sweep_nu, "nu");
        }
    }

    json to_json() const {
        json j;
        j["preset"] = to_string(preset);
        j["seed"] = seed;
        j["threads"] = threads;
        j["grid"] = {{"nx", grid.nx}, {"ny", grid.ny}, {"nz", grid.nz}};
        j["params"] = {{"epsilon", params.epsilon}, {"nu", params.nu},          {"gamma", params.gamma},
                       {"mu", params.mu},           {"lambda_bulk", params.lambda_bulk}, {"g", params.g},
                       {"rho_bottom", rho_bottom}};
        j["initial"] = {{"kind", initial.kind},         {"rho1_amp", initial.rho1_amp},
                        {"u_amp", initial.u_amp},       {"theta2_amp", initial.theta2_amp},
                        {"potential_amp", initial.potential_amp},
                        {"shear_amp", initial.shear_amp},     {"theta2_variation", initial.theta2_variation}};
        if (std::isfinite(initial.bound_d)) j["initial"]["bound_d"] = initial.bound_d;
        j["stepper"] = {{"dt", stepper.dt},
                        {"steps", steps},
                        {"final_time", final_time},
                        {"record_interval", record_interval},
                        {"scheme", stepper.scheme},
                        {"cfl_advective", stepper.cfl_advective},
                        {"cfl_viscous", stepper.cfl_viscous},
                        {"implicit_tol", stepper.implicit_tol},
                        {"target_nu", target_nu}};
        j["output"] = {{"dir", output_dir}};
        j["sweep"] = {{"epsilon", sweep_epsilon}, {"nu", sweep_nu}, {"nu_equals_epsilon", nu_equals_epsilon}};
        return j;
    }

    /// Preset (from j["preset"] or the given default) overlaid with the keys of j.
    static ExperimentConfig from_json(const json& j, Preset fallback = Preset::WellPreparedRate) {
        if (!j.is_object()) throw Error(ErrorKind::Validation, "config root must be a table");
        ExperimentConfig c = from_preset(j.contains("preset") ? preset_from_string(j["preset"].get<std::string>())
                                                              : fallback);
        auto check_keys = [](const json& t, const std::string& where, std::set<std::string> allowed) {
            if (!t.is_object()) throw Error(ErrorKind::Validation, "'" + where + "' must be a table");
            for (const auto& [k, v] : t.items())
                if (!allowed.count(k)) throw Error(ErrorKind::Validation, "unknown config key '" + where + k + "'");
        };
        check_keys(j, "", {"preset", "seed", "threads", "grid", "params", "initial", "stepper", "output", "sweep"});
        try {
            if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
            if (j.contains("threads")) c.threads = j["threads"].get<int>();
            if (j.contains("grid")) {
                const auto& g = j["grid"];
                check_keys(g, "grid.", {"nx", "ny", "nz"});
                c.grid.nx = g.value("nx", c.grid.nx);
                c.grid.ny = g.value("ny", c.grid.ny);
                c.grid.nz = g.value("nz", c.grid.nz);
            }
            if (j.contains("params")) {
                const auto& p = j["params"];
                check_keys(p, "params.", {"epsilon", "nu", "gamma", "mu", "lambda_bulk", "g", "rho_bottom"});
                c.params.epsilon = p.value("epsilon", c.params.epsilon);
                c.params.nu = p.value("nu", c.params.nu);
                c.params.gamma = p.value("gamma", c.params.gamma);
                c.params.mu = p.value("mu", c.params.mu);
                c.params.lambda_bulk = p.value("lambda_bulk", c.params.lambda_bulk);
                c.params.g = p.value("g", c.params.g);
                c.rho_bottom = p.value("rho_bottom", c.rho_bottom);
            }
            if (j.contains("initial")) {
                const auto& i = j["initial"];
                check_keys(i, "initial.", {"kind", "rho1_amp", "u_amp", "theta2_amp", "potential_amp", "shear_amp",
                                           "theta2_variation", "bound_d"});
                c.initial.kind = i.value("kind", c.initial.kind);
                c.initial.rho1_amp = i.value("rho1_amp", c.initial.rho1_amp);
                c.initial.u_amp = i.value("u_amp", c.initial.u_amp);
                c.initial.theta2_amp = i.value("theta2_amp", c.initial.theta2_amp);
                c.initial.potential_amp = i.value("potential_amp", c.initial.potential_amp);
                c.initial.shear_amp = i.value("shear_amp", c.initial.shear_amp);
                c.initial.theta2_variation = i.value("theta2_variation", c.initial.theta2_variation);
                c.initial.bound_d = i.value("bound_d", c.initial.bound_d);
            }
            if (j.contains("stepper")) {
                const auto& s = j["stepper"];
                check_keys(s, "stepper.", {"dt", "steps", "final_time", "record_interval", "scheme", "cfl_advective",
                                           "cfl_viscous", "implicit_tol", "target_nu"});
                c.stepper.dt = s.value("dt", c.stepper.dt);
                c.steps = s.value("steps", c.steps);
                c.final_time = s.value("final_time", c.final_time);
                c.record_interval = s.value("record_interval", c.record_interval);
                c.stepper.scheme = s.value("scheme", c.stepper.scheme);
                c.stepper.cfl_advective = s.value("cfl_advective", c.stepper.cfl_advective);
                c.stepper.cfl_viscous = s.value("cfl_viscous", c.stepper.cfl_viscous);
                c.stepper.implicit_tol = s.value("implicit_tol", c.stepper.implicit_tol);
                c.target_nu = s.value("target_nu", c.target_nu);
            }
            if (j.contains("output")) {
                check_keys(j["output"], "output.", {"dir"});
                c.output_dir = j["output"].value("dir", c.output_dir);
            }
            if (j.contains("sweep")) {
                const auto& w = j["sweep"];
                check_keys(w, "sweep.", {"epsilon", "nu", "nu_equals_epsilon"});
                if (w.contains("epsilon")) c.sweep_epsilon = w["epsilon"].get<std::vector<double>>();
                if (w.contains("nu")) c.sweep_nu = w["nu"].get<std::vector<double>>();
                c.nu_equals_epsilon = w.value("nu_equals_epsilon", c.nu_equals_epsilon);
            }
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Validation, std::string("config type error: ") + e.what());
        }
        if (c.steps > 0) c.final_time = c.steps * c.stepper.dt;
        c.validate();
        return c;
    }
};

namespace detail {

inline json toml_to_json(const toml::node& n) {
    if (auto t = n.as_table()) {
        json j = json::object();
        for (const auto& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
        return j;
    }
    if (auto a = n.as_array()) {
        json j = json::array();
        for (const auto& v : *a) j.push_back(toml_to_json(v));
        return j;
    }
    if (auto v = n.as_integer()) return v->get();
    if (auto v = n.as_floating_point()) return v->get();
    if (auto v = n.as_boolean()) return v->get();
    if (auto v = n.as_string()) return v->get();
    throw Error(ErrorKind::Validation, "unsupported TOML value (dates and times are not config values)");
}

}  // namespace detail

/// Parse config text; `format` is "toml" or "json".
inline json parse_config_text(const std::string& text, const std::string& format) {
    if (format == "json") {
        try {
            return json::parse(text);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Validation, std::string("invalid JSON config: ") + e.what());
        }
    }
    try {
        return detail::toml_to_json(toml::parse(text));
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "invalid TOML config at line " << e.source().begin.line << ": " << e.description();
        throw Error(ErrorKind::Validation, os.str());
    }
}

inline json load_config_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path.extension() == ".json" ? "json" : "toml");
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    return ExperimentConfig::from_json(load_config_json(path));
}

}  // namespace strato
