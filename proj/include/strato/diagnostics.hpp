#pragma once

/// @file diagnostics.hpp
/// @brief Functionals evaluated on solver snapshots: relative energy, the
/// convergence metric against an anelastic target, essential/residual
/// splitting, uniform-bound monitors, the transport identity defect, acoustic
/// variables, Lighthill sources and the acoustic propagator
///
///     A w = -c(rho_tilde) Lap_y w - (c / rho_tilde) d_z(rho_tilde d_z w),
///
/// which is symmetric in <u, w>_H = int u w rho_tilde / c(rho_tilde).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "strato/core_types.hpp"
#include "strato/helmholtz.hpp"
#include "strato/hydrostatics.hpp"
#include "strato/primitive_solver.hpp"
#include "strato/spectral.hpp"
#include "strato/transport.hpp"

namespace strato {

/// One row of diagnostics.csv.
struct DiagnosticsRecord {
    double time = 0.0;
    double kinetic_energy = 0.0;
    double internal_energy_scaled = 0.0;
    double total_energy = 0.0;
    double dissipation_integral = 0.0;
    double relative_energy = 0.0;
    double thm1_metric = 0.0;
    double mass = 0.0;
    double rho_theta_total = 0.0;
    double theta_pert_Linf = 0.0;
    double theta_pert_L1 = 0.0;
    double residual_measure = 0.0;
    double acoustic_energy = 0.0;
    double vortical_energy = 0.0;

    static std::string csv_header() {
        return "time,kinetic_energy,internal_energy_scaled,total_energy,dissipation_integral,"
               "relative_energy,thm1_metric,mass,rho_theta_total,theta_pert_Linf,theta_pert_L1,"
               "residual_measure,acoustic_energy,vortical_energy";
    }
    std::vector<double> values() const {
        return {time,           kinetic_energy,  internal_energy_scaled, total_energy,    dissipation_integral,
                relative_energy, thm1_metric,    mass,                   rho_theta_total, theta_pert_Linf,
                theta_pert_L1,  residual_measure, acoustic_energy,       vortical_energy};
    }
    std::string csv_row() const {
        std::ostringstream os;
        os.precision(17);
        const auto v = values();
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
        return os.str();
    }
    bool all_finite() const {
        for (double x : values())
            if (!std::isfinite(x)) return false;
        return true;
    }
};

/// int [ rho |u - U|^2 / 2 + (H(Z) - H'(r)(Z - r) - H(r)) / eps^2 ],  Z = rho Theta.
inline double relative_energy(const PrimitiveState& s, const ScalarField& r, const VectorField& U,
                              const ScaledParams& p) {
    for (double x : r.values())
        if (!(x > 0.0)) throw Error(ErrorKind::NonPositiveReference, "reference density must be positive");
    if (!U.boundary_admissible()) throw Error(ErrorKind::IncompatibleData, "U must be boundary admissible");
    const double inv_eps2 = 1.0 / (p.epsilon * p.epsilon);
    const double gm = p.gamma;
    return integrate_pointwise(s.grid(), [&](std::size_t n) {
        double kin = 0.0;
        if (s.rho[n] > 0.0)
            for (int c = 0; c < 3; ++c) {
                const double d = s.mom[c][n] / s.rho[n] - U[c][n];
                kin += 0.5 * s.rho[n] * d * d;
            }
        const double z = std::max(s.rho_theta[n], 0.0), rr = r[n];
        const double h = pressure_potential(z, gm) - pressure_potential_prime(rr, gm) * (z - rr) -
                         pressure_potential(rr, gm);
        return kin + inv_eps2 * h;
    });
}

/// Instantaneous integrand of the convergence metric:
///     int [ rho |u - v|^2 + |(rho - rho_tilde)/eps|^gamma + rho |(Theta - 1)/eps^2 - T|^2 ].
inline double thm1_metric(const PrimitiveState& s, const AnelasticState& target, const HydrostaticProfile& profile,
                          const ScaledParams& p) {
    const double eps = p.epsilon, eps2 = eps * eps;
    const ScalarField& rt = profile.rho_tilde();
    ScalarField theta = reconstruct_theta(s);
    return integrate_pointwise(s.grid(), [&](std::size_t n) {
        double kin = 0.0;
        if (s.rho[n] > 0.0)
            for (int c = 0; c < 3; ++c) {
                const double d = s.mom[c][n] / s.rho[n] - target.v[c][n];
                kin += s.rho[n] * d * d;
            }
        const double dens = std::pow(std::abs((s.rho[n] - rt[n]) / eps), p.gamma);
        const double th = (theta[n] - 1.0) / eps2 - target.t_pert[n];
        return kin + dens + s.rho[n] * th * th;
    });
}

/// Sharp indicator of rho_tilde/2 <= rho Theta <= 2 rho_tilde.
inline bool essential_point(double rho_theta, double rho_tilde) {
    return rho_theta >= 0.5 * rho_tilde && rho_theta <= 2.0 * rho_tilde;
}

/// (chi f, (1 - chi) f); the two parts sum to f exactly.
inline std::pair<ScalarField, ScalarField> ess_res_split(const ScalarField& f, const PrimitiveState& s,
                                                         const HydrostaticProfile& profile) {
    ScalarField ess(f.grid(), f.parity()), res(f.grid(), f.parity());
    for (std::size_t n = 0; n < f.size(); ++n)
        (essential_point(s.rho_theta[n], profile.rho_tilde()[n]) ? ess : res)[n] = f[n];
    return {ess, res};
}

/// Named uniform-bound monitors:
///   B6  ||sqrt(rho) u||_2            B8  ||sqrt(rho) (Theta-1)/eps^2||_2
///   B9  ||(Z - rho_tilde)/eps||_2 on the essential set
///   B10 int_res (1 + Z^gamma)        B11 ||(Theta-1)/eps^2||_inf
///   B13 ||(rho - rho_tilde)/eps||_2 on the essential set
///   B14 int_res rho^gamma            B15 ||(Theta-1)/eps^2||_1
/// plus residual_measure, the volume of the residual set.
inline std::map<std::string, double> uniform_bound_monitors(const PrimitiveState& s, const HydrostaticProfile& profile,
                                                            const ScaledParams& p) {
    const SlabGrid& grid = s.grid();
    const double eps = p.epsilon, eps2 = eps * eps, dv = grid.cell_volume();
    const ScalarField& rt = profile.rho_tilde();
    ScalarField theta = reconstruct_theta(s);
    double b6 = 0, b8 = 0, b9 = 0, b10 = 0, b11 = 0, b13 = 0, b14 = 0, b15 = 0, meas = 0;
    for (std::size_t n = 0; n < grid.size(); ++n) {
        const double r = s.rho[n], z = s.rho_theta[n];
        const double m2 = s.mom[0][n] * s.mom[0][n] + s.mom[1][n] * s.mom[1][n] + s.mom[2][n] * s.mom[2][n];
        if (r > 0.0) b6 += m2 / r;
        const double tp = (theta[n] - 1.0) / eps2;
        b8 += std::max(r, 0.0) * tp * tp;
        b11 = std::max(b11, std::abs(tp));
        b15 += std::abs(tp);
        if (essential_point(z, rt[n])) {
            b9 += (z - rt[n]) * (z - rt[n]) / eps2;
            b13 += (r - rt[n]) * (r - rt[n]) / eps2;
        } else {
            b10 += 1.0 + std::pow(std::abs(z), p.gamma);
            b14 += std::pow(std::abs(r), p.gamma);
            meas += 1.0;
        }
    }
    return {{"B6", std::sqrt(b6 * dv)},   {"B8", std::sqrt(b8 * dv)},  {"B9", std::sqrt(b9 * dv)},
            {"B10", b10 * dv},            {"B11", b11},                {"B13", std::sqrt(b13 * dv)},
            {"B14", b14 * dv},            {"B15", b15 * dv},           {"residual_measure", meas * dv}};
}

/// Running value of
///     |[int rho |G(Theta) - T|^2 / 2]_{t0}^{tN} + int_{t0}^{tN} int rho (G(Theta) - T)(u - v).grad T dt|
/// over paired samples, time integral by the trapezoid rule. Differentiating
/// the square under rho-transport of G(Theta) and v-transport of T gives the
/// flux term with a minus sign.
class TransportIdentityTracker {
public:
    TransportIdentityTracker(const SlabGrid& grid, std::function<double(double)> g)
        : g_(std::move(g)), ops_(std::make_unique<SpectralOps>(grid)) {}

    void add(const PrimitiveState& s, const AnelasticState& a) {
        if (std::abs(s.time - a.time) > 1e-9 * std::max(1.0, std::abs(s.time)))
            throw Error(ErrorKind::Validation, "paired samples are at different times");
        if (count_ > 0 && !(s.time > t_)) throw Error(ErrorKind::Validation, "samples must advance in time");
        ScalarField theta = reconstruct_theta(s);
        VectorField gt = ops_->gradient(a.t_pert);
        double dens = 0.0, flux = 0.0;
        const double dv = s.grid().cell_volume();
        for (std::size_t n = 0; n < theta.size(); ++n) {
            const double d = g_(theta[n]) - a.t_pert[n];
            double dot = 0.0;
            for (int c = 0; c < 3; ++c) dot += (s.mom[c][n] / s.rho[n] - a.v[c][n]) * gt[c][n];
            dens += 0.5 * s.rho[n] * d * d;
            flux += s.rho[n] * d * dot;
        }
        dens *= dv;
        flux *= dv;
        if (count_ == 0) {
            lhs0_ = dens;
        } else {
            rhs_ += 0.5 * (s.time - t_) * (flux + last_flux_);
        }
        lhs_ = dens - lhs0_;
        last_flux_ = flux;
        t_ = s.time;
        ++count_;
    }

    int samples() const { return count_; }
    double defect() const { return std::abs(lhs_ + rhs_); }

private:
    std::function<double(double)> g_;
    std::unique_ptr<SpectralOps> ops_;
    int count_ = 0;
    double t_ = 0.0, lhs0_ = 0.0, lhs_ = 0.0, rhs_ = 0.0, last_flux_ = 0.0;
};

inline double lemma_w6_defect(const std::vector<PrimitiveState>& prim, const std::vector<AnelasticState>& target,
                              const std::function<double(double)>& g) {
    if (prim.size() != target.size() || prim.size() < 2)
        throw Error(ErrorKind::Validation, "histories must be paired and hold at least 2 samples");
    for (std::size_t i = 0; i < prim.size(); ++i)
        if (std::abs(prim[i].time - target[i].time) > 1e-9 * std::max(1.0, std::abs(prim[i].time)))
            throw Error(ErrorKind::Validation, "paired samples are at different times");
    TransportIdentityTracker tr(prim.front().grid(), g);
    for (std::size_t i = 0; i < prim.size(); ++i) tr.add(prim[i], target[i]);
    return tr.defect();
}

/// Acoustic propagator A, its H inner product, and a Crank-Nicolson step for
/// the homogeneous system Z_t = A Phi, Phi_t = -Z, which conserves
/// <Z, Z>_H + <A Phi, Phi>_H.
class AcousticPropagator {
public:
    explicit AcousticPropagator(const HydrostaticProfile& profile)
        : profile_(profile), helm_(std::make_unique<WeightedHelmholtz>(profile)) {
        const int nz = profile.grid().nz;
        rho_ = Eigen::VectorXd(nz);
        mass_ = Eigen::VectorXd(nz);
        for (int k = 0; k < nz; ++k) {
            rho_(k) = profile.rho(k);
            mass_(k) = profile.rho(k) / profile.c(k);
        }
        const auto& d = helm_->ops().vertical().d_eo;
        vertical_ = d.transpose() * rho_.asDiagonal() * d;
        weight_ = ScalarField(profile.grid(), Parity::Even);
        for (std::size_t n = 0; n < weight_.size(); ++n)
            weight_[n] = profile.rho_tilde()[n] / profile.c_of_rho()[n];
    }

    const HydrostaticProfile& profile() const { return profile_; }
    WeightedHelmholtz& helmholtz() { return *helm_; }

    ScalarField apply(const ScalarField& w) {
        if (w.parity() != Parity::Even) throw Error(ErrorKind::IncompatibleData, "A acts on even fields");
        ScalarField out = helm_->apply(w);
        for (std::size_t n = 0; n < out.size(); ++n) out[n] *= -profile_.c_of_rho()[n] / profile_.rho_tilde()[n];
        return out;
    }

    double inner_h(const ScalarField& u, const ScalarField& w) const {
        return integrate_pointwise(u.grid(), [&](std::size_t n) { return u[n] * w[n] * weight_[n]; });
    }

    /// |<A u, w>_H - <u, A w>_H| / max(1, ||A u||_H ||w||_H, ||u||_H ||A w||_H).
    double self_adjointness_residual(const ScalarField& u, const ScalarField& w) {
        ScalarField au = apply(u), aw = apply(w);
        const double a = inner_h(au, w), b = inner_h(u, aw);
        const double scale = std::max({1.0, std::sqrt(inner_h(au, au) * inner_h(w, w)),
                                       std::sqrt(inner_h(u, u) * inner_h(aw, aw))});
        return std::abs(a - b) / scale;
    }

    double energy(const ScalarField& z, const ScalarField& phi) {
        return inner_h(z, z) + inner_h(apply(phi), phi);
    }

    /// Vertical generalized eigenproblem (rho_tilde |k|^2 + D^T R D) x = lambda diag(rho_tilde/c) x.
    Eigen::MatrixXd stiffness(long key) const {
        Eigen::MatrixXd a = vertical_;
        a.diagonal() += SpectralOps::k2_from_key(key) * rho_;
        return a;
    }
    const Eigen::VectorXd& mass() const { return mass_; }

    /// One Crank-Nicolson step of Z_t = A Phi, Phi_t = -Z.
    std::pair<ScalarField, ScalarField> step(const ScalarField& z, const ScalarField& phi, double dt) {
        prepare(dt);
        const double alpha = 0.25 * dt * dt;
        ScalarField aphi = apply(phi);
        ScalarField rhs = phi;
        rhs.axpy(-dt, z);
        rhs.axpy(-alpha, aphi);
        rhs = multiply(weight_, rhs);
        ScalarField next = helm_->ops().solve_columns(rhs, Parity::Even, [&](int i, int j, Eigen::VectorXcd& col) {
            const auto& llt = factors_.at(helm_->ops().k2_key(i, j));
            Eigen::VectorXd re = llt.solve(Eigen::VectorXd(col.real()));
            Eigen::VectorXd im = llt.solve(Eigen::VectorXd(col.imag()));
            col.real() = re;
            col.imag() = im;
        });
        ScalarField sum = phi;
        sum += next;
        ScalarField znext = z;
        znext.axpy(0.5 * dt, apply(sum));
        return {znext, next};
    }

private:
    void prepare(double dt) {
        if (dt == factor_dt_) return;
        factors_.clear();
        factor_dt_ = dt;
        const double alpha = 0.25 * dt * dt;
        SpectralOps& ops = helm_->ops();
        for (int j = 0; j < profile_.grid().ny; ++j)
            for (int i = 0; i < ops.nx_complex(); ++i) {
                const long key = ops.k2_key(i, j);
                if (factors_.count(key)) continue;
                Eigen::MatrixXd a = alpha * stiffness(key);
                a.diagonal() += mass_;
                factors_.emplace(key, Eigen::LLT<Eigen::MatrixXd>(a));
            }
    }

    HydrostaticProfile profile_;
    std::unique_ptr<WeightedHelmholtz> helm_;
    Eigen::VectorXd rho_, mass_;
    Eigen::MatrixXd vertical_;
    ScalarField weight_;
    double factor_dt_ = -1.0;
    std::map<long, Eigen::LLT<Eigen::MatrixXd>> factors_;
};

inline ScalarField acoustic_propagator_apply(const ScalarField& w, const HydrostaticProfile& profile) {
    AcousticPropagator a(profile);
    return a.apply(w);
}

struct PropagatorMode {
    double eigenvalue = 0.0;
    double horizontal_wavenumber = 0.0;  ///< |k| in units of 2 pi
    long k2_key = 0;                     ///< |k|^2 in units of (2 pi)^2
    int vertical_index = 0;              ///< m-th eigenvalue of its horizontal mode
};

struct PropagatorSpectrum {
    std::vector<PropagatorMode> modes;  ///< ascending eigenvalues
    double self_adjointness_residual = 0.0;
};

/// Lowest n_eigs eigenvalues of A, one entry per distinct horizontal |k|^2
/// (modes sharing |k| are degenerate). Self-adjointness is checked on
/// `pairs` random smooth pairs and reported.
inline PropagatorSpectrum propagator_spectrum(const HydrostaticProfile& profile, int n_eigs, int pairs = 20,
                                              unsigned seed = 7) {
    const SlabGrid& grid = profile.grid();
    if (n_eigs < 1) throw Error(ErrorKind::Validation, "n_eigs must be >= 1");
    AcousticPropagator a(profile);
    SpectralOps& ops = a.helmholtz().ops();
    std::set<long> keys;
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < ops.nx_complex(); ++i)
            if (!ops.is_nyquist_x(i) && !ops.is_nyquist_y(j)) keys.insert(ops.k2_key(i, j));
    if (static_cast<std::size_t>(n_eigs) > keys.size() * static_cast<std::size_t>(grid.nz))
        throw Error(ErrorKind::Validation, "n_eigs exceeds the grid capacity");

    PropagatorSpectrum out;
    Eigen::MatrixXd m = a.mass().asDiagonal();
    for (long key : keys) {
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a.stiffness(key), m, Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success)
            throw Error(ErrorKind::EigensolverFailure, "vertical eigensolve failed for |k|^2 key " + std::to_string(key));
        for (int q = 0; q < grid.nz; ++q)
            out.modes.push_back({es.eigenvalues()(q), std::sqrt(static_cast<double>(key)), key, q});
    }
    std::stable_sort(out.modes.begin(), out.modes.end(),
                     [](const PropagatorMode& x, const PropagatorMode& y) { return x.eigenvalue < y.eigenvalue; });
    out.modes.resize(n_eigs);

    std::mt19937 rng(seed);
    std::normal_distribution<double> nd;
    for (int p = 0; p < pairs; ++p) {
        ScalarField u(grid, Parity::Even), w(grid, Parity::Even);
        for (int t = 0; t < 4; ++t) {
            const int kx = static_cast<int>(rng() % 3), ky = static_cast<int>(rng() % 3);
            const int mz = static_cast<int>(rng() % 4);
            const double au = nd(rng), aw = nd(rng), ph = nd(rng);
            for (int k = 0; k < grid.nz; ++k)
                for (int j = 0; j < grid.ny; ++j)
                    for (int i = 0; i < grid.nx; ++i) {
                        const double basis = std::cos(2 * std::numbers::pi * (kx * grid.x(i) + ky * grid.y(j)) + ph) *
                                             std::cos(mz * std::numbers::pi * grid.z(k));
                        u(i, j, k) += au * basis;
                        w(i, j, k) += aw * basis * std::cos(2 * std::numbers::pi * grid.y(j));
                    }
        }
        out.self_adjointness_residual = std::max(out.self_adjointness_residual, a.self_adjointness_residual(u, w));
    }
    return out;
}

struct AcousticState {
    ScalarField s_eps;    ///< (rho Theta - rho_tilde) / (eps rho_tilde)
    ScalarField phi_eps;  ///< grad Phi = Q(rho u), mean-zero
    ScalarField z_eps;    ///< c(rho_tilde) S
    double acoustic_energy = 0.0;
    double vortical_energy = 0.0;  ///< int |P(rho u)|^2 / (2 rho_tilde)
};

inline AcousticState acoustic_variables(const PrimitiveState& s, AcousticPropagator& a, const ScaledParams& p) {
    const HydrostaticProfile& profile = a.profile();
    const ScalarField& rt = profile.rho_tilde();
    AcousticState out;
    out.s_eps = ScalarField(s.grid(), Parity::Even);
    out.z_eps = ScalarField(s.grid(), Parity::Even);
    for (std::size_t n = 0; n < rt.size(); ++n) {
        out.s_eps[n] = (s.rho_theta[n] - rt[n]) / (p.epsilon * rt[n]);
        out.z_eps[n] = profile.c_of_rho()[n] * out.s_eps[n];
    }
    HelmholtzParts parts = a.helmholtz().decompose(s.mom);
    out.phi_eps = a.helmholtz().solve(s.mom).psi;
    out.acoustic_energy = a.energy(out.z_eps, out.phi_eps);
    out.vortical_energy = integrate_pointwise(s.grid(), [&](std::size_t n) {
        double q = 0.0;
        for (int c = 0; c < 3; ++c) q += parts.p_part[c][n] * parts.p_part[c][n];
        return 0.5 * q / rt[n];
    });
    return out;
}

inline AcousticState acoustic_variables(const PrimitiveState& s, const HydrostaticProfile& profile,
                                        const ScaledParams& p) {
    AcousticPropagator a(profile);
    return acoustic_variables(s, a, p);
}

/// ((rho Theta)^gamma - gamma rho_tilde^(gamma-1)(rho Theta - rho_tilde) - rho_tilde^gamma) / eps^2.
inline ScalarField pressure_remainder(const PrimitiveState& s, const HydrostaticProfile& profile,
                                      const ScaledParams& p) {
    ScalarField out(s.grid(), Parity::Even);
    const double inv = 1.0 / (p.epsilon * p.epsilon);
    for (std::size_t n = 0; n < out.size(); ++n) {
        const double z = s.rho_theta[n], r = profile.rho_tilde()[n];
        out[n] = inv * (std::pow(z, p.gamma) - profile.c_of_rho()[n] * (z - r) - std::pow(r, p.gamma));
    }
    return out;
}

/// Sources of the acoustic analogy, G1 and the four pieces of G2 (their sum).
struct LighthillSources {
    ScalarField g1;
    VectorField g2;
    VectorField pressure;    ///< -Q grad(pressure remainder)
    VectorField convection;  ///< -Q div(rho u (x) u)
    VectorField viscous;     ///< +nu Q div S(grad u)
    VectorField buoyancy;    ///< Q(rho (1 - Theta)/eps^2 grad F)
};

inline LighthillSources lighthill_sources(const PrimitiveState& s, const HydrostaticProfile& profile,
                                          const ScaledParams& p) {
    WeightedHelmholtz h(profile);
    SpectralOps& ops = h.ops();
    const SlabGrid& grid = s.grid();
    const double eps = p.epsilon, eps2 = eps * eps;
    VectorField u = velocity(s);
    LighthillSources out;

    // rho (1 - Theta) u / eps = (m - Z u) / eps
    VectorField f = s.mom - scale_by(s.rho_theta, u);
    f *= 1.0 / eps;
    out.g1 = ops.divergence(f);
    for (std::size_t n = 0; n < grid.size(); ++n) out.g1[n] /= profile.rho_tilde()[n];

    out.pressure = h.q_part(ops.gradient(pressure_remainder(s, profile, p)));
    out.pressure *= -1.0;
    out.convection = h.q_part(div_tensor(ops, s.mom, u));
    out.convection *= -1.0;
    if (p.nu > 0.0) {
        GradientTensor gu = gradient_tensor(ops, u);
        out.viscous = h.q_part(viscous_force(ops, u, gu, p));
        out.viscous *= p.nu;
    } else {
        out.viscous = VectorField(grid);
    }
    ScalarField gradf = discrete_gravity(profile, ops);
    VectorField b(grid);
    for (std::size_t n = 0; n < grid.size(); ++n) b[2][n] = (s.rho[n] - s.rho_theta[n]) / eps2 * gradf[n];
    out.buoyancy = h.q_part(b);
    out.g2 = out.pressure;
    out.g2 += out.convection;
    out.g2 += out.viscous;
    out.g2 += out.buoyancy;
    return out;
}

/// Reusable evaluator for full diagnostics rows.
class DiagnosticsEvaluator {
public:
    DiagnosticsEvaluator(const ScaledParams& params, const HydrostaticProfile& profile)
        : params_(params), profile_(profile), acoustic_(profile) {}

    DiagnosticsRecord record(const PrimitiveState& s, const AnelasticState* target, double dissipation_integral) {
        DiagnosticsRecord r;
        r.time = s.time;
        r.kinetic_energy = kinetic_energy(s);
        r.internal_energy_scaled = internal_energy_scaled(s, params_);
        r.total_energy = r.kinetic_energy + r.internal_energy_scaled;
        r.dissipation_integral = dissipation_integral;
        r.relative_energy =
            relative_energy(s, profile_.rho_tilde(), target ? target->v : VectorField(s.grid()), params_);
        r.thm1_metric = target ? thm1_metric(s, *target, profile_, params_) : 0.0;
        r.mass = integrate(s.rho);
        r.rho_theta_total = integrate(s.rho_theta);
        auto mon = uniform_bound_monitors(s, profile_, params_);
        r.theta_pert_Linf = mon.at("B11");
        r.theta_pert_L1 = mon.at("B15");
        r.residual_measure = mon.at("residual_measure");
        AcousticState ac = acoustic_variables(s, acoustic_, params_);
        r.acoustic_energy = ac.acoustic_energy;
        r.vortical_energy = ac.vortical_energy;
        if (!r.all_finite()) throw Error(ErrorKind::BlowUp, "non-finite diagnostics at t = " + std::to_string(s.time));
        return r;
    }

    AcousticPropagator& acoustic() { return acoustic_; }

private:
    ScaledParams params_;
    HydrostaticProfile profile_;
    AcousticPropagator acoustic_;
};

}  // namespace strato
