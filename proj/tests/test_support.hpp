#pragma once

// Deterministic smooth random fields for property tests.

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "strato/core_types.hpp"
#include "strato/primitive_solver.hpp"

namespace strato::test {

inline constexpr double kPi = std::numbers::pi;

/// Sum of a few low cosine (even) or sine (odd) modes with random amplitudes.
inline ScalarField random_smooth(const SlabGrid& grid, std::mt19937& rng, Parity parity = Parity::Even,
                                 int max_mode = 2) {
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    ScalarField f(grid, parity);
    for (int term = 0; term < 6; ++term) {
        const int kx = static_cast<int>(rng() % (max_mode + 1));
        const int ky = static_cast<int>(rng() % (max_mode + 1));
        const int m = static_cast<int>(rng() % (max_mode + 1)) + (parity == Parity::Odd ? 1 : 0);
        const double a = amp(rng), px = phase(rng), py = phase(rng);
        for (int k = 0; k < grid.nz; ++k)
            for (int j = 0; j < grid.ny; ++j)
                for (int i = 0; i < grid.nx; ++i) {
                    const double vz = parity == Parity::Even ? std::cos(m * kPi * grid.z(k))
                                                             : std::sin(m * kPi * grid.z(k));
                    f(i, j, k) += a * std::cos(2 * kPi * kx * grid.x(i) + px) *
                                  std::cos(2 * kPi * ky * grid.y(j) + py) * vz;
                }
    }
    return f;
}

inline VectorField random_admissible(const SlabGrid& grid, std::mt19937& rng, int max_mode = 2) {
    return VectorField(random_smooth(grid, rng, Parity::Even, max_mode),
                       random_smooth(grid, rng, Parity::Even, max_mode),
                       random_smooth(grid, rng, Parity::Odd, max_mode));
}

/// Smooth bump in z vanishing with all derivatives at the walls.
inline double wall_bump(double z) {
    const double s = (z - 0.5) / 0.45;
    return std::abs(s) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
}

/// Generic smooth, non-equilibrium initial data with O(1) perturbation shapes.
inline InitialDataSpec smooth_initial_data(const SlabGrid& grid, double amp = 1.0) {
    InitialDataSpec spec;
    spec.kind = DataKind::IllPrepared;
    spec.rho1 = ScalarField::from_function(grid, [&](double x, double y, double z) {
        return amp * 0.5 * std::cos(2 * kPi * x) * std::cos(kPi * z) + amp * 0.2 * std::sin(2 * kPi * y);
    });
    spec.u0 = VectorField(
        ScalarField::from_function(grid, [&](double, double y, double z) {
            return amp * 0.3 * std::sin(2 * kPi * y) * std::cos(kPi * z);
        }),
        ScalarField::from_function(grid, [&](double x, double, double) {
            return amp * 0.2 * std::cos(2 * kPi * x);
        }),
        ScalarField::from_function(grid, [&](double x, double y, double z) {
            return amp * 0.25 * std::cos(2 * kPi * (x + y)) * std::sin(kPi * z);
        }, Parity::Odd));
    spec.theta2 = ScalarField::from_function(grid, [&](double x, double y, double z) {
        return amp * wall_bump(z) * (1.0 + 0.5 * std::sin(2 * kPi * x) * std::cos(2 * kPi * y));
    });
    return spec;
}

// Classical Leray projection computed by brute-force modal sums, independent of
// the FFT/collocation path: cosine modes for u1, u2 and sine modes for u3.
inline VectorField classical_leray(const VectorField& w) {
    const SlabGrid& g = w.grid();
    using C = std::complex<double>;
    const int kxmax = g.nx / 2 - 1, kymax = g.ny / 2 - 1;
    VectorField out(g);
    for (int kx = -kxmax; kx <= kxmax; ++kx)
        for (int ky = -kymax; ky <= kymax; ++ky)
            for (int m = 0; m < g.nz; ++m) {
                C a[3] = {0.0, 0.0, 0.0};
                for (int k = 0; k < g.nz; ++k)
                    for (int j = 0; j < g.ny; ++j)
                        for (int i = 0; i < g.nx; ++i) {
                            const C e = std::exp(C(0, -2 * kPi * (kx * g.x(i) + ky * g.y(j))));
                            const double cz = std::cos(m * kPi * g.z(k)), sz = std::sin(m * kPi * g.z(k));
                            a[0] += w[0](i, j, k) * e * cz;
                            a[1] += w[1](i, j, k) * e * cz;
                            a[2] += w[2](i, j, k) * e * sz;
                        }
                const double norm = 1.0 / (g.nx * g.ny) * (m == 0 ? 1.0 / g.nz : 2.0 / g.nz);
                for (auto& c : a) c *= norm;
                // grad(psi cos) = (i k1 psi, i k2 psi) cos, -m pi psi sin
                const double k1 = 2 * kPi * kx, k2 = 2 * kPi * ky, k3 = m * kPi;
                const double kk = k1 * k1 + k2 * k2 + k3 * k3;
                if (kk > 0) {
                    const C div = C(0, k1) * a[0] + C(0, k2) * a[1] + k3 * a[2];
                    const C psi = -div / kk;
                    a[0] -= C(0, k1) * psi;
                    a[1] -= C(0, k2) * psi;
                    a[2] -= -k3 * psi;
                }
                for (int k = 0; k < g.nz; ++k)
                    for (int j = 0; j < g.ny; ++j)
                        for (int i = 0; i < g.nx; ++i) {
                            const C e = std::exp(C(0, 2 * kPi * (kx * g.x(i) + ky * g.y(j))));
                            const double cz = std::cos(m * kPi * g.z(k)), sz = std::sin(m * kPi * g.z(k));
                            out[0](i, j, k) += (a[0] * e).real() * cz;
                            out[1](i, j, k) += (a[1] * e).real() * cz;
                            out[2](i, j, k) += (a[2] * e).real() * sz;
                        }
            }
    return out;
}

}  // namespace strato::test
