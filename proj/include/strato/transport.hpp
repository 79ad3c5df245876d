#pragma once

/// @file transport.hpp
/// @brief Pieces shared by the compressible and anelastic steppers: time-step
/// settings, the discrete gravity field, split-form advection and the
/// Newtonian stress.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "strato/core_types.hpp"
#include "strato/hydrostatics.hpp"
#include "strato/spectral.hpp"

namespace strato {

struct StepperConfig {
    double dt = 0.0;                  ///< fixed step; 0 selects the stable step automatically
    std::string scheme = "imex_rk2";
    double cfl_advective = 0.4;
    double cfl_viscous = 1.0;         ///< fraction of the explicit viscous limit
    double implicit_tol = 1e-10;
    int implicit_max_iter = 1;        ///< implicit systems are solved directly
    double vacuum_floor = kDefaultVacuumFloor;

    void validate() const {
        auto fail = [](const std::string& msg) { throw Error(ErrorKind::Validation, msg); };
        if (!(dt >= 0.0) || !std::isfinite(dt)) fail("dt must be >= 0 (0 = automatic)");
        if (scheme != "imex_rk2") fail("unknown scheme '" + scheme + "' (only imex_rk2)");
        if (!(cfl_advective > 0.0)) fail("cfl_advective must be > 0");
        if (!(cfl_viscous > 0.0)) fail("cfl_viscous must be > 0");
        if (!(implicit_tol > 0.0 && implicit_tol <= 1e-6)) fail("implicit_tol must lie in (0, 1e-6]");
        if (implicit_max_iter < 1) fail("implicit_max_iter must be >= 1");
        if (!(vacuum_floor > 0.0)) fail("vacuum_floor must be > 0");
    }
};

/// Vertical component of grad_h H'(rho_tilde). It equals -g up to the
/// interpolation error of the collocation derivative, and using it in place of
/// grad F keeps the hydrostatic balance exact on the grid.
inline ScalarField discrete_gravity(const HydrostaticProfile& profile, const SpectralOps& ops) {
    ScalarField hp(profile.grid(), Parity::Even);
    for (std::size_t n = 0; n < hp.size(); ++n)
        hp[n] = pressure_potential_prime(profile.rho_tilde()[n], profile.gamma());
    return ops.dz(hp);
}

/// G[i][j] = d_j u_i.
using GradientTensor = std::array<std::array<ScalarField, 3>, 3>;

inline GradientTensor gradient_tensor(SpectralOps& ops, const VectorField& u) {
    GradientTensor g;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) g[i][j] = ops.partial(u[i], j);
    return g;
}

/// (a . grad) u from a precomputed gradient tensor of u.
inline VectorField convective(const VectorField& a, const GradientTensor& gu) {
    VectorField out(a.grid());
    for (int i = 0; i < 3; ++i) {
        ScalarField& o = out[i];
        o.set_parity(gu[i][0].parity());
        for (int j = 0; j < 3; ++j)
            for (std::size_t n = 0; n < o.size(); ++n) o[n] += a[j][n] * gu[i][j][n];
    }
    return out;
}

/// div(m (x) u), component i = sum_j d_j (m_i u_j).
inline VectorField div_tensor(SpectralOps& ops, const VectorField& m, const VectorField& u) {
    VectorField out(m.grid());
    for (int i = 0; i < 3; ++i) {
        ScalarField acc(m.grid(), m[i].parity());
        for (int j = 0; j < 3; ++j) acc += ops.partial(multiply(m[i], u[j]), j);
        out[i] = std::move(acc);
    }
    return out;
}

/// Trace of the velocity gradient.
inline ScalarField trace(const GradientTensor& g) {
    ScalarField d = g[0][0];
    d += g[1][1];
    d += g[2][2];
    return d;
}

/// div S(grad u) = mu lap u + (mu/3 + lambda) grad div u.
inline VectorField viscous_force(SpectralOps& ops, const VectorField& u, const GradientTensor& gu,
                                 const ScaledParams& p) {
    VectorField f = ops.laplacian(u);
    f *= p.mu;
    f.axpy(p.mu / 3.0 + p.lambda_bulk, ops.gradient(trace(gu)));
    return f;
}

/// Pointwise S(grad u) : grad u.
inline ScalarField stress_contraction(const GradientTensor& g, const ScaledParams& p) {
    const SlabGrid& grid = g[0][0].grid();
    ScalarField out(grid, Parity::Even);
    for (std::size_t n = 0; n < out.size(); ++n) {
        const double div = g[0][0][n] + g[1][1][n] + g[2][2][n];
        double s = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double sij = p.mu * (g[i][j][n] + g[j][i][n]);
                if (i == j) sij += (p.lambda_bulk - 2.0 / 3.0 * p.mu) * div;
                s += sij * g[i][j][n];
            }
        out[n] = s;
    }
    return out;
}

/// Trace of the shear part mu (grad u + grad u^T - 2/3 div u I); zero by construction.
inline double shear_trace(const GradientTensor& g, std::size_t n, double mu) {
    const double div = g[0][0][n] + g[1][1][n] + g[2][2][n];
    double t = 0.0;
    for (int i = 0; i < 3; ++i) t += mu * (2.0 * g[i][i][n] - 2.0 / 3.0 * div);
    return t;
}

/// Largest |k|^2 the collocation operators act with.
inline double max_wavenumber_squared(const SlabGrid& grid) {
    const double pi = std::numbers::pi;
    const double kx = 2.0 * pi * (grid.nx / 2 - 1);
    const double ky = 2.0 * pi * (grid.ny / 2 - 1);
    const double kz = pi * (grid.nz - 1);
    return kx * kx + ky * ky + kz * kz;
}

/// Advective step cfl * h_min / (max|u| + 1), further limited by the explicit
/// viscous bound when nu > 0.
inline double stable_dt(const SlabGrid& grid, double max_speed, double min_density, const ScaledParams& p,
                        const StepperConfig& cfg) {
    double dt = cfg.cfl_advective * grid.min_spacing() / (max_speed + 1.0);
    if (p.nu > 0.0) {
        const double kappa = p.nu * (4.0 / 3.0 * p.mu + p.lambda_bulk) / min_density * max_wavenumber_squared(grid);
        dt = std::min(dt, cfg.cfl_viscous / kappa);
    }
    return dt;
}

/// Split [0, T] into equal steps no longer than dt_max.
inline int step_count(double final_time, double dt_max) {
    if (!(final_time >= 0.0) || !(dt_max > 0.0)) throw Error(ErrorKind::Validation, "bad time span");
    return std::max(1, static_cast<int>(std::ceil(final_time / dt_max - 1e-12)));
}

}  // namespace strato
