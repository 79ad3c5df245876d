#pragma once

/// @file spectral.hpp
/// @brief Fourier (horizontal) x cosine/sine (vertical) collocation operators.
///
/// Horizontal derivatives use FFTW real-to-complex transforms per z level.
/// Vertical derivatives are dense nz x nz collocation matrices on the cell
/// centres: D_eo maps cosine-series nodal values to the sine-series values of
/// the derivative, and D_oe = -D_eo^T maps sine to cosine. The transpose
/// relation makes discrete summation by parts exact, which the projection,
/// the acoustic propagator and the energy bookkeeping all rely on.

#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <fftw3.h>

#include "strato/core_types.hpp"

namespace strato {

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwPlanDeleter {
    void operator()(fftw_plan_s* p) const {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(p);
    }
};
using FftwPlan = std::unique_ptr<fftw_plan_s, FftwPlanDeleter>;

template <class T>
struct FftwFree {
    void operator()(T* p) const { fftw_free(p); }
};

}  // namespace detail

/// Vertical collocation matrices for nz cell centres.
struct VerticalOperators {
    Eigen::MatrixXd d_eo;    ///< d/dz : even (cosine) -> odd (sine)
    Eigen::MatrixXd d_oe;    ///< d/dz : odd (sine) -> even (cosine)
    Eigen::MatrixXd lap_e;   ///< d2/dz2 on even fields
    Eigen::MatrixXd lap_o;   ///< d2/dz2 on odd fields

    explicit VerticalOperators(int nz) {
        const double pi = std::numbers::pi;
        d_eo = Eigen::MatrixXd::Zero(nz, nz);
        for (int j = 0; j < nz; ++j) {
            const double zj = (j + 0.5) / nz;
            for (int l = 0; l < nz; ++l) {
                const double zl = (l + 0.5) / nz;
                double s = 0.0;
                for (int m = 1; m < nz; ++m)
                    s += -m * pi * std::sin(m * pi * zj) * (2.0 / nz) * std::cos(m * pi * zl);
                d_eo(j, l) = s;
            }
        }
        d_oe = -d_eo.transpose();
        lap_e = d_oe * d_eo;
        lap_o = d_eo * d_oe;
    }

    const Eigen::MatrixXd& derivative(Parity from) const { return from == Parity::Even ? d_eo : d_oe; }
    const Eigen::MatrixXd& laplacian(Parity p) const { return p == Parity::Even ? lap_e : lap_o; }
};

/// Per-instance transform workspace. Not thread-safe; one per simulation.
class SpectralOps {
public:
    using Complex = std::complex<double>;

    explicit SpectralOps(const SlabGrid& grid)
        : grid_(grid), vert_(grid.nz), nxc_(grid.nx / 2 + 1) {
        grid.validate();
        const std::size_t nreal = grid.size();
        const std::size_t ncplx = static_cast<std::size_t>(nxc_) * grid.ny * grid.nz;
        real_.reset(fftw_alloc_real(nreal));
        cplx_.reset(reinterpret_cast<Complex*>(fftw_alloc_complex(ncplx)));
        int n[2] = {grid.ny, grid.nx};
        const int rdist = grid.nx * grid.ny;
        const int cdist = nxc_ * grid.ny;
        auto* c = reinterpret_cast<fftw_complex*>(cplx_.get());
        std::lock_guard lock(detail::fftw_planner_mutex());
        fwd_.reset(fftw_plan_many_dft_r2c(2, n, grid.nz, real_.get(), nullptr, 1, rdist, c, nullptr, 1,
                                          cdist, FFTW_ESTIMATE));
        bwd_.reset(fftw_plan_many_dft_c2r(2, n, grid.nz, c, nullptr, 1, cdist, real_.get(), nullptr, 1,
                                          rdist, FFTW_ESTIMATE));
    }

    SpectralOps(const SpectralOps&) = delete;
    SpectralOps& operator=(const SpectralOps&) = delete;

    const SlabGrid& grid() const { return grid_; }
    const VerticalOperators& vertical() const { return vert_; }
    int nx_complex() const { return nxc_; }

    /// Signed horizontal mode numbers for complex index (i, j).
    int kx_mode(int i) const { return i; }
    int ky_mode(int j) const { return j <= grid_.ny / 2 ? j : j - grid_.ny; }
    bool is_nyquist_x(int i) const { return i == grid_.nx / 2; }
    bool is_nyquist_y(int j) const { return j == grid_.ny / 2; }

    /// Wavenumbers as seen by the first-derivative operator (Nyquist -> 0).
    double kx_eff(int i) const { return is_nyquist_x(i) ? 0.0 : 2.0 * std::numbers::pi * i; }
    double ky_eff(int j) const { return is_nyquist_y(j) ? 0.0 : 2.0 * std::numbers::pi * ky_mode(j); }

    /// Integer key of |k_eff|^2 / (2 pi)^2; equal keys share vertical matrices.
    long k2_key(int i, int j) const {
        const long a = is_nyquist_x(i) ? 0 : i;
        const long b = is_nyquist_y(j) ? 0 : ky_mode(j);
        return a * a + b * b;
    }
    static double k2_from_key(long key) { return 4.0 * std::numbers::pi * std::numbers::pi * key; }

    std::size_t cindex(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * grid_.ny + j) * nxc_ + i;
    }

    /// Horizontal forward transform into the internal complex buffer.
    void forward(const ScalarField& f) {
        std::copy(f.values().begin(), f.values().end(), real_.get());
        fftw_execute(fwd_.get());
    }
    /// Inverse of forward(); normalised.
    void backward(ScalarField& out) {
        fftw_execute(bwd_.get());
        const double norm = 1.0 / static_cast<double>(grid_.plane());
        for (std::size_t n = 0; n < grid_.size(); ++n) out[n] = real_.get()[n] * norm;
    }
    Complex* spectrum() { return cplx_.get(); }

    ScalarField dx(const ScalarField& f) { return horizontal_derivative(f, 0); }
    ScalarField dy(const ScalarField& f) { return horizontal_derivative(f, 1); }

    ScalarField dz(const ScalarField& f) const {
        ScalarField out(f.grid(), flip(f.parity()));
        apply_vertical(vert_.derivative(f.parity()), f, out);
        return out;
    }

    /// Derivative along axis 0 (x), 1 (y) or 2 (z).
    ScalarField partial(const ScalarField& f, int axis) {
        if (axis == 0) return dx(f);
        if (axis == 1) return dy(f);
        return dz(f);
    }

    /// Gradient of an even scalar; the result is boundary admissible.
    VectorField gradient(const ScalarField& f) {
        if (f.parity() != Parity::Even)
            throw Error(ErrorKind::Validation, "gradient expects an even (cosine) scalar");
        return VectorField(dx(f), dy(f), dz(f));
    }

    /// Divergence of an admissible vector field; the result is even.
    ScalarField divergence(const VectorField& w) {
        if (!w.boundary_admissible())
            throw Error(ErrorKind::IncompatibleData, "divergence of a non-admissible field");
        ScalarField out = dx(w[0]);
        out += dy(w[1]);
        out += dz(w[2]);
        return out;
    }

    /// Laplacian preserving parity; horizontal part uses -k_eff^2.
    ScalarField laplacian(const ScalarField& f) {
        ScalarField out(f.grid(), f.parity());
        forward(f);
        Complex* c = spectrum();
        for (int k = 0; k < grid_.nz; ++k)
            for (int j = 0; j < grid_.ny; ++j)
                for (int i = 0; i < nxc_; ++i) {
                    const double kk = kx_eff(i) * kx_eff(i) + ky_eff(j) * ky_eff(j);
                    c[cindex(i, j, k)] *= -kk;
                }
        backward(out);
        ScalarField vz(f.grid(), f.parity());
        apply_vertical(vert_.laplacian(f.parity()), f, vz);
        out += vz;
        return out;
    }

    /// Vector Laplacian, componentwise.
    VectorField laplacian(const VectorField& v) {
        return VectorField(laplacian(v[0]), laplacian(v[1]), laplacian(v[2]));
    }

    /// out_k = sum_l M(k,l) in_l for every horizontal node.
    void apply_vertical(const Eigen::MatrixXd& m, const ScalarField& in, ScalarField& out) const {
        const std::size_t plane = grid_.plane();
        out.fill(0.0);
        for (int k = 0; k < grid_.nz; ++k) {
            double* o = out.data() + k * plane;
            for (int l = 0; l < grid_.nz; ++l) {
                const double a = m(k, l);
                if (a == 0.0) continue;
                const double* src = in.data() + l * plane;
                for (std::size_t n = 0; n < plane; ++n) o[n] += a * src[n];
            }
        }
    }

    /// Transform rhs horizontally, hand every vertical column (one per
    /// horizontal mode) to solve(i, j, column) for in-place modification,
    /// and transform back.
    template <class Solve>
    ScalarField solve_columns(const ScalarField& rhs, Parity out_parity, Solve&& solve) {
        forward(rhs);
        Complex* c = spectrum();
        Eigen::VectorXcd column(grid_.nz);
        for (int j = 0; j < grid_.ny; ++j)
            for (int i = 0; i < nxc_; ++i) {
                for (int k = 0; k < grid_.nz; ++k) column(k) = c[cindex(i, j, k)];
                solve(i, j, column);
                for (int k = 0; k < grid_.nz; ++k) c[cindex(i, j, k)] = column(k);
            }
        ScalarField out(rhs.grid(), out_parity);
        backward(out);
        return out;
    }

private:
    ScalarField horizontal_derivative(const ScalarField& f, int dir) {
        ScalarField out(f.grid(), f.parity());
        forward(f);
        Complex* c = spectrum();
        const Complex I(0.0, 1.0);
        for (int k = 0; k < grid_.nz; ++k)
            for (int j = 0; j < grid_.ny; ++j)
                for (int i = 0; i < nxc_; ++i) {
                    const double kk = dir == 0 ? kx_eff(i) : ky_eff(j);
                    c[cindex(i, j, k)] *= I * kk;
                }
        backward(out);
        return out;
    }

    SlabGrid grid_;
    VerticalOperators vert_;
    int nxc_;
    std::unique_ptr<double, detail::FftwFree<double>> real_;
    std::unique_ptr<Complex, detail::FftwFree<Complex>> cplx_;
    detail::FftwPlan fwd_;
    detail::FftwPlan bwd_;
};

}  // namespace strato
