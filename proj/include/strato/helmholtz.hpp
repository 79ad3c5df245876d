#pragma once

/// @file helmholtz.hpp
/// @brief Weighted Helmholtz decomposition w = P(w) + rho_tilde Q(w), Q(w) = grad Psi,
/// where div(rho_tilde grad Psi) = div w with the flux condition carried by the basis.
///
/// rho_tilde depends on z only, so the Neumann problem decouples into one
/// dense nz x nz system per horizontal Fourier mode:
///     (D_oe R D_eo - |k|^2 R) psi_k = rhs_k,   R = diag(rho_tilde).
/// Modes with |k_eff| = 0 are singular (constants); they are solved with a
/// bordered system that pins the vertical mean to zero.

#include <cmath>
#include <map>
#include <memory>
#include <utility>

#include <Eigen/Dense>

#include "strato/core_types.hpp"
#include "strato/hydrostatics.hpp"
#include "strato/spectral.hpp"

namespace strato {

struct NeumannSolveResult {
    ScalarField psi;        ///< mean-zero potential
    double residual = 0.0;  ///< max |div(rho_tilde grad psi) - div w|
    int iterations = 1;     ///< direct solve: always 1
};

struct HelmholtzParts {
    VectorField p_part;  ///< solenoidal part, div P = 0, P.n = 0
    VectorField q_part;  ///< grad Psi
};

/// Reusable weighted projector bound to one grid and profile.
class WeightedHelmholtz {
public:
    explicit WeightedHelmholtz(const HydrostaticProfile& profile)
        : profile_(profile), ops_(std::make_unique<SpectralOps>(profile.grid())) {
        const int nz = profile.grid().nz;
        rho_ = Eigen::VectorXd(nz);
        for (int k = 0; k < nz; ++k) rho_(k) = profile.rho(k);
        const auto& v = ops_->vertical();
        vertical_ = v.d_oe * rho_.asDiagonal() * v.d_eo;
    }

    const HydrostaticProfile& profile() const { return profile_; }
    SpectralOps& ops() { return *ops_; }

    /// Dense vertical operator of div(rho_tilde grad .) for horizontal key.
    Eigen::MatrixXd neumann_matrix(long key) const {
        Eigen::MatrixXd a = vertical_;
        a.diagonal() -= SpectralOps::k2_from_key(key) * rho_;
        return a;
    }

    /// Solve div(rho_tilde grad psi) = rhs with mean-zero psi. rhs must integrate to zero.
    ScalarField solve_rhs(const ScalarField& rhs) {
        if (rhs.parity() != Parity::Even) throw Error(ErrorKind::IncompatibleData, "Neumann data must be even");
        const double scale = std::max(1.0, rhs.max_abs());
        const double mean = integrate(rhs);
        if (std::abs(mean) > 1e-10 * scale)
            throw Error(ErrorKind::IncompatibleData,
                        "Neumann data is not compatible: integral of div w = " + std::to_string(mean));
        const int nz = profile_.grid().nz;
        return ops_->solve_columns(rhs, Parity::Even, [&](int i, int j, Eigen::VectorXcd& col) {
            const long key = ops_->k2_key(i, j);
            const auto& lu = factor(key);
            if (key == 0) {
                Eigen::VectorXd re = Eigen::VectorXd::Zero(nz + 1), im = Eigen::VectorXd::Zero(nz + 1);
                re.head(nz) = col.real();
                im.head(nz) = col.imag();
                Eigen::VectorXd xr = lu.solve(re), xi = lu.solve(im);
                col.real() = xr.head(nz);
                col.imag() = xi.head(nz);
            } else {
                Eigen::VectorXd xr = lu.solve(Eigen::VectorXd(col.real()));
                Eigen::VectorXd xi = lu.solve(Eigen::VectorXd(col.imag()));
                col.real() = xr;
                col.imag() = xi;
            }
        });
    }

    /// div(rho_tilde grad psi), discretely consistent with solve_rhs.
    ScalarField apply(const ScalarField& psi) {
        VectorField g = ops_->gradient(psi);
        return ops_->divergence(scale_by(profile_.rho_tilde(), g));
    }

    NeumannSolveResult solve(const VectorField& w, double tol = 1e-10) {
        if (!w.boundary_admissible())
            throw Error(ErrorKind::IncompatibleData, "w is not boundary admissible (u3 must be odd in z)");
        ScalarField rhs = ops_->divergence(w);
        NeumannSolveResult out;
        out.psi = solve_rhs(rhs);
        ScalarField defect = apply(out.psi);
        defect -= rhs;
        out.residual = defect.max_abs();
        if (!(out.residual <= tol * std::max(1.0, rhs.max_abs())))
            throw Error(ErrorKind::NoConvergence,
                        "weighted Neumann residual " + std::to_string(out.residual) + " above tolerance");
        return out;
    }

    HelmholtzParts decompose(const VectorField& w, double tol = 1e-10) {
        auto res = solve(w, tol);
        HelmholtzParts parts;
        parts.q_part = ops_->gradient(res.psi);
        parts.p_part = w - scale_by(profile_.rho_tilde(), parts.q_part);
        return parts;
    }

    /// Q(w) = grad Psi only.
    VectorField q_part(const VectorField& w, double tol = 1e-10) { return ops_->gradient(solve(w, tol).psi); }

private:
    const Eigen::PartialPivLU<Eigen::MatrixXd>& factor(long key) {
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const int nz = profile_.grid().nz;
        Eigen::MatrixXd a = neumann_matrix(key);
        if (key == 0) {
            Eigen::MatrixXd b = Eigen::MatrixXd::Zero(nz + 1, nz + 1);
            b.topLeftCorner(nz, nz) = a;
            b.block(0, nz, nz, 1).setOnes();
            b.block(nz, 0, 1, nz).setOnes();
            a = b;
        }
        return cache_.emplace(key, Eigen::PartialPivLU<Eigen::MatrixXd>(a)).first->second;
    }

    HydrostaticProfile profile_;
    std::unique_ptr<SpectralOps> ops_;
    Eigen::VectorXd rho_;
    Eigen::MatrixXd vertical_;
    std::map<long, Eigen::PartialPivLU<Eigen::MatrixXd>> cache_;
};

inline NeumannSolveResult solve_weighted_neumann(const VectorField& w, const HydrostaticProfile& profile,
                                                 double tol = 1e-10) {
    WeightedHelmholtz h(profile);
    return h.solve(w, tol);
}

inline HelmholtzParts decompose(const VectorField& w, const HydrostaticProfile& profile, double tol = 1e-10) {
    WeightedHelmholtz h(profile);
    return h.decompose(w, tol);
}

}  // namespace strato
