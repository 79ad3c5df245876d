#pragma once

/// @file hydrostatics.hpp
/// @brief Equilibrium density rho_tilde(z) with grad rho_tilde^gamma = rho_tilde grad F, F = -g z.

#include <cmath>
#include <string>
#include <vector>

#include "strato/core_types.hpp"

namespace strato {

/// H(Z) = Z^gamma / (gamma - 1), the pressure potential.
inline double pressure_potential(double z, double gamma) { return std::pow(z, gamma) / (gamma - 1.0); }
/// H'(Z) = gamma Z^(gamma-1) / (gamma - 1).
inline double pressure_potential_prime(double z, double gamma) {
    return gamma * std::pow(z, gamma - 1.0) / (gamma - 1.0);
}

/// Sampled equilibrium profile. Immutable after construction.
class HydrostaticProfile {
public:
    /// Build from explicit nodal values rho(z_k); used for analytic and test profiles.
    static HydrostaticProfile from_values(const SlabGrid& grid, double gamma, double g,
                                          std::vector<double> rho_z) {
        grid.validate();
        if (static_cast<int>(rho_z.size()) != grid.nz)
            throw Error(ErrorKind::GridMismatch, "profile needs one value per vertical level");
        for (double r : rho_z)
            if (!(r > 0.0)) throw Error(ErrorKind::NonPositiveProfile, "profile must be strictly positive");
        HydrostaticProfile p;
        p.grid_ = grid;
        p.gamma_ = gamma;
        p.g_ = g;
        p.rho_bottom_ = rho_z.front();
        p.rho_z_ = std::move(rho_z);
        p.c_z_.resize(grid.nz);
        for (int k = 0; k < grid.nz; ++k) p.c_z_[k] = gamma * std::pow(p.rho_z_[k], gamma - 1.0);
        p.rho_tilde_ = ScalarField(grid, Parity::Even);
        p.c_ = ScalarField(grid, Parity::Even);
        p.potential_ = ScalarField(grid, Parity::Even);
        const std::size_t plane = grid.plane();
        for (int k = 0; k < grid.nz; ++k)
            for (std::size_t n = 0; n < plane; ++n) {
                p.rho_tilde_[k * plane + n] = p.rho_z_[k];
                p.c_[k * plane + n] = p.c_z_[k];
                p.potential_[k * plane + n] = -g * grid.z(k);
            }
        return p;
    }

    const SlabGrid& grid() const { return grid_; }
    double gamma() const { return gamma_; }
    double g() const { return g_; }
    double rho_bottom() const { return rho_bottom_; }

    /// rho_tilde at vertical level k.
    double rho(int k) const { return rho_z_[k]; }
    /// c(rho_tilde) = gamma rho_tilde^(gamma-1) at level k.
    double c(int k) const { return c_z_[k]; }
    const std::vector<double>& rho_levels() const { return rho_z_; }
    const std::vector<double>& c_levels() const { return c_z_; }

    const ScalarField& rho_tilde() const { return rho_tilde_; }
    const ScalarField& c_of_rho() const { return c_; }
    /// F = -g z.
    const ScalarField& potential() const { return potential_; }

    /// Level index of a flat field index.
    int level(std::size_t n) const { return static_cast<int>(n / grid_.plane()); }

private:
    SlabGrid grid_{};
    double gamma_ = 2.0;
    double g_ = 1.0;
    double rho_bottom_ = 1.0;
    std::vector<double> rho_z_;
    std::vector<double> c_z_;
    ScalarField rho_tilde_;
    ScalarField c_;
    ScalarField potential_;
};

/// Closed-form rho_tilde(z) = (rho_b^(gamma-1) - (gamma-1)/gamma g z)^(1/(gamma-1)).
inline double hydrostatic_density(double z, double gamma, double g, double rho_bottom) {
    const double base = std::pow(rho_bottom, gamma - 1.0) - (gamma - 1.0) / gamma * g * z;
    return base > 0.0 ? std::pow(base, 1.0 / (gamma - 1.0)) : 0.0;
}

/// g = 0 gives the constant profile rho_bottom.
inline HydrostaticProfile solve_hydrostatic(double gamma, double g, double rho_bottom, const SlabGrid& grid) {
    if (!(gamma > 1.0)) throw Error(ErrorKind::Validation, "gamma must be > 1");
    if (!(g >= 0.0)) throw Error(ErrorKind::Validation, "g must be >= 0");
    if (!(rho_bottom > 0.0)) throw Error(ErrorKind::NonPositiveProfile, "rho_bottom must be > 0");
    // Positivity on the closed interval [0,1]: the minimum sits at z = 1.
    const double top = std::pow(rho_bottom, gamma - 1.0) - (gamma - 1.0) / gamma * g;
    if (!(top > 0.0))
        throw Error(ErrorKind::NonPositiveProfile,
                    "closed-form profile reaches zero on [0,1]; need rho_bottom^(gamma-1) > g (gamma-1)/gamma");
    std::vector<double> rho_z(grid.nz);
    for (int k = 0; k < grid.nz; ++k) rho_z[k] = hydrostatic_density(grid.z(k), gamma, g, rho_bottom);
    auto p = HydrostaticProfile::from_values(grid, gamma, g, std::move(rho_z));
    return p;
}

/// Max-norm of d/dz H'(rho_tilde) - dF/dz over the vertical nodes.
///
/// H'(rho_tilde) is affine in z for the equilibrium family, so the second-order
/// difference stencil used here is exact for it up to round-off.
inline double check_equilibrium_identity(const HydrostaticProfile& profile) {
    const SlabGrid& grid = profile.grid();
    const int nz = grid.nz;
    const double h = grid.dz();
    std::vector<double> hp(nz);
    for (int k = 0; k < nz; ++k) hp[k] = pressure_potential_prime(profile.rho(k), profile.gamma());
    double worst = 0.0;
    for (int k = 0; k < nz; ++k) {
        double d;
        if (k == 0)
            d = (3.0 * (hp[1] - hp[0]) - (hp[2] - hp[1])) / (2.0 * h);
        else if (k == nz - 1)
            d = (3.0 * (hp[nz - 1] - hp[nz - 2]) - (hp[nz - 2] - hp[nz - 3])) / (2.0 * h);
        else
            d = (hp[k + 1] - hp[k - 1]) / (2.0 * h);
        worst = std::max(worst, std::abs(d - (-profile.g())));
    }
    return worst;
}

/// <u, w>_H = integral of u w rho_tilde / c(rho_tilde).
inline double weighted_inner_product(const ScalarField& u, const ScalarField& w, const HydrostaticProfile& profile) {
    u.check_same(w);
    if (!(u.grid() == profile.grid())) throw Error(ErrorKind::GridMismatch, "profile grid differs");
    const std::size_t plane = u.grid().plane();
    double s = 0.0;
    for (int k = 0; k < u.grid().nz; ++k) {
        const double wgt = profile.rho(k) / profile.c(k);
        double level = 0.0;
        for (std::size_t n = k * plane; n < (k + 1) * plane; ++n) level += u[n] * w[n];
        s += wgt * level;
    }
    return s * u.grid().cell_volume();
}

}  // namespace strato
