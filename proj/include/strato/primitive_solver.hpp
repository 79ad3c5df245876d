#pragma once

/// @file primitive_solver.hpp
/// @brief Scaled compressible system in the unknowns (rho, m = rho u, Z = rho Theta).
///
///     rho_t + div m = 0
///     Z_t + div(Z u) = 0
///     m_t + div(m (x) u) + eps^-2 (Z grad H'(Z) - rho grad_h F) = nu div S(grad u)
///
/// Z grad H'(Z) = grad Z^gamma, and grad_h F is the discrete gradient of
/// H'(rho_tilde), so the rest state (rho_tilde, 0, rho_tilde) is an exact
/// discrete steady state.
///
/// Time stepping is an IMEX trapezoid. The acoustic block linearised about
/// (rho_tilde, Theta = 1),
///     rho_t = -div m,  Z_t = -div m,  m_t = -eps^-2 rho_tilde grad q,
///     q = c(rho_tilde) (Z - rho_tilde) / rho_tilde,
/// is Crank-Nicolson; everything else is Heun:
///     U* - dt/2 L U*   = U^n + dt/2 L U^n + dt N(U^n)
///     U^+ - dt/2 L U^+ = U^n + dt/2 L U^n + dt/2 (N(U^n) + N(U*)).
/// The implicit solve reduces to one SPD nz x nz system per horizontal mode.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "strato/core_types.hpp"
#include "strato/hydrostatics.hpp"
#include "strato/spectral.hpp"
#include "strato/transport.hpp"

namespace strato {

enum class DataKind { WellPrepared, IllPrepared };

struct InitialDataSpec {
    DataKind kind = DataKind::WellPrepared;
    ScalarField rho1;    ///< first-order density perturbation
    VectorField u0;      ///< initial velocity
    ScalarField theta2;  ///< second-order potential-temperature perturbation
    double bound_d = std::numeric_limits<double>::infinity();  ///< cap on the sup-norms
};

/// rho = rho_tilde + eps rho1, Z = rho (1 + eps^2 theta2), m = rho u0.
inline PrimitiveState assemble_initial_state(const InitialDataSpec& spec, const ScaledParams& params,
                                             const HydrostaticProfile& profile) {
    params.validate();
    const SlabGrid& grid = profile.grid();
    if (!(spec.rho1.grid() == grid) || !(spec.theta2.grid() == grid) || !(spec.u0.grid() == grid))
        throw Error(ErrorKind::GridMismatch, "initial data and profile grids differ");
    if (!spec.u0.boundary_admissible())
        throw Error(ErrorKind::Validation, "initial velocity must be boundary admissible");
    if (spec.rho1.max_abs() > spec.bound_d || spec.theta2.max_abs() > spec.bound_d ||
        spec.u0.max_abs() > spec.bound_d)
        throw Error(ErrorKind::Validation, "initial perturbation exceeds the bound D");
    const double eps = params.epsilon;
    PrimitiveState s;
    s.rho = profile.rho_tilde();
    s.rho.axpy(eps, spec.rho1);
    for (std::size_t n = 0; n < s.rho.size(); ++n)
        if (!(s.rho[n] > 0.0))
            throw Error(ErrorKind::NegativeDensity, "assembled density rho_tilde + eps rho1 is not positive");
    s.rho_theta = ScalarField(grid, Parity::Even);
    for (std::size_t n = 0; n < s.rho.size(); ++n)
        s.rho_theta[n] = s.rho[n] * (1.0 + eps * eps * spec.theta2[n]);
    s.mom = scale_by(s.rho, spec.u0);
    return s;
}

/// int [ rho |u|^2 / 2 ].
inline double kinetic_energy(const PrimitiveState& s) {
    return integrate_pointwise(s.grid(), [&](std::size_t n) {
        const double m2 = s.mom[0][n] * s.mom[0][n] + s.mom[1][n] * s.mom[1][n] + s.mom[2][n] * s.mom[2][n];
        return s.rho[n] > 0.0 ? 0.5 * m2 / s.rho[n] : 0.0;
    });
}

/// int Z^gamma / (eps^2 (gamma - 1)).
inline double internal_energy_scaled(const PrimitiveState& s, const ScaledParams& p) {
    const double scale = 1.0 / (p.epsilon * p.epsilon);
    return scale * integrate_pointwise(s.grid(), [&](std::size_t n) {
               return pressure_potential(std::max(s.rho_theta[n], 0.0), p.gamma);
           });
}

inline double energy(const PrimitiveState& s, const ScaledParams& p) {
    return kinetic_energy(s) + internal_energy_scaled(s, p);
}

/// Right-hand-side pieces of the three conservation laws.
struct Tendency {
    ScalarField rho;
    VectorField mom;
    ScalarField rho_theta;
};

class PrimitiveStepper {
public:
    PrimitiveStepper(const ScaledParams& params, const HydrostaticProfile& profile, StepperConfig cfg = {})
        : params_(params), profile_(profile), cfg_(std::move(cfg)),
          ops_(std::make_unique<SpectralOps>(profile.grid())) {
        params_.validate();
        cfg_.validate();
        const SlabGrid& grid = profile.grid();
        gravity_ = discrete_gravity(profile_, *ops_);
        hp_tilde_ = ScalarField(grid, Parity::Even);
        weight_ = ScalarField(grid, Parity::Even);
        for (std::size_t n = 0; n < grid.size(); ++n) {
            const double r = profile_.rho_tilde()[n];
            hp_tilde_[n] = pressure_potential_prime(r, params_.gamma);
            weight_[n] = profile_.c_of_rho()[n] / r;
        }
        if (std::abs(profile_.gamma() - params_.gamma) > 1e-14)
            throw Error(ErrorKind::Validation, "profile gamma differs from params gamma");
    }

    const ScaledParams& params() const { return params_; }
    const HydrostaticProfile& profile() const { return profile_; }
    const StepperConfig& config() const { return cfg_; }
    SpectralOps& ops() { return *ops_; }
    /// Vertical component of the discrete grad F.
    const ScalarField& gravity() const { return gravity_; }

    /// Largest stable step for this state.
    double stable_dt(const PrimitiveState& s) const {
        double umax = 0.0, rmin = std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n < s.rho.size(); ++n) {
            const double r = s.rho[n];
            rmin = std::min(rmin, r);
            if (r > cfg_.vacuum_floor) {
                const double u2 = (s.mom[0][n] * s.mom[0][n] + s.mom[1][n] * s.mom[1][n] +
                                   s.mom[2][n] * s.mom[2][n]) / (r * r);
                umax = std::max(umax, std::sqrt(u2));
            }
        }
        return strato::stable_dt(s.grid(), umax, std::max(rmin, cfg_.vacuum_floor), params_, cfg_);
    }

    /// Step size used by step(s): cfg.dt if set, the stable step otherwise.
    double choose_dt(const PrimitiveState& s) const { return cfg_.dt > 0.0 ? cfg_.dt : stable_dt(s); }

    /// q = c (Z - rho_tilde) / rho_tilde.
    ScalarField acoustic_potential(const ScalarField& z) const {
        ScalarField q(z.grid(), Parity::Even);
        for (std::size_t n = 0; n < q.size(); ++n) q[n] = weight_[n] * (z[n] - profile_.rho_tilde()[n]);
        return q;
    }

    /// Linearised acoustic block.
    Tendency linear_part(const PrimitiveState& s) {
        Tendency t;
        ScalarField d = ops_->divergence(s.mom);
        d *= -1.0;
        t.rho = d;
        t.rho_theta = d;
        t.mom = scale_by(profile_.rho_tilde(), ops_->gradient(acoustic_potential(s.rho_theta)));
        t.mom *= -1.0 / (params_.epsilon * params_.epsilon);
        return t;
    }

    /// Advection, viscosity, buoyancy and the nonlinear pressure remainder.
    Tendency explicit_part(const PrimitiveState& s) {
        const SlabGrid& grid = s.grid();
        const double inv_eps2 = 1.0 / (params_.epsilon * params_.epsilon);
        VectorField u = velocity_of(s);
        ScalarField theta = reconstruct_theta(s, cfg_.vacuum_floor);

        Tendency t;
        t.rho = ScalarField(grid, Parity::Even);

        VectorField flux = s.mom;
        for (int c = 0; c < 3; ++c)
            for (std::size_t n = 0; n < grid.size(); ++n) flux[c][n] *= theta[n] - 1.0;
        t.rho_theta = ops_->divergence(flux);
        t.rho_theta *= -1.0;

        GradientTensor gu = gradient_tensor(*ops_, u);
        VectorField adv = div_tensor(*ops_, s.mom, u);
        adv += scale_by(s.rho, convective(u, gu));
        adv += scale_by(ops_->divergence(s.mom), u);
        t.mom = -0.5 * adv;
        if (params_.nu > 0.0) t.mom.axpy(params_.nu, viscous_force(*ops_, u, gu, params_));

        // Z grad H'(Z) - rho grad_h F - rho_tilde grad q
        //   = Z grad h_nl + Z' grad q + (Z - rho) grad_h F
        ScalarField zp(grid, Parity::Even), hnl(grid, Parity::Even);
        for (std::size_t n = 0; n < grid.size(); ++n) {
            const double z = s.rho_theta[n];
            zp[n] = z - profile_.rho_tilde()[n];
            hnl[n] = pressure_potential_prime(z, params_.gamma) - hp_tilde_[n] - weight_[n] * zp[n];
        }
        VectorField pg = scale_by(s.rho_theta, ops_->gradient(hnl));
        pg += scale_by(zp, ops_->gradient(acoustic_potential(s.rho_theta)));
        for (std::size_t n = 0; n < grid.size(); ++n)
            pg[2][n] += (s.rho_theta[n] - s.rho[n]) * gravity_[n];
        t.mom.axpy(-inv_eps2, pg);
        return t;
    }

    /// Solve U - dt/2 L U = R.
    PrimitiveState implicit_solve(const Tendency& r, double dt) {
        const double eps2 = params_.epsilon * params_.epsilon;
        const double half = 0.5 * dt;
        ScalarField rhs = r.rho_theta - profile_.rho_tilde();
        rhs.axpy(-half, ops_->divergence(r.mom));
        prepare(dt);
        ScalarField q = ops_->solve_columns(rhs, Parity::Even, [&](int i, int j, Eigen::VectorXcd& col) {
            const auto& llt = factors_.at(ops_->k2_key(i, j));
            Eigen::VectorXd re = llt.solve(Eigen::VectorXd(col.real()));
            Eigen::VectorXd im = llt.solve(Eigen::VectorXd(col.imag()));
            col.real() = re;
            col.imag() = im;
        });
        PrimitiveState out;
        out.mom = r.mom;
        out.mom.axpy(-half / eps2, scale_by(profile_.rho_tilde(), ops_->gradient(q)));
        ScalarField d = ops_->divergence(out.mom);
        out.rho = r.rho;
        out.rho.axpy(-half, d);
        out.rho_theta = r.rho_theta;
        out.rho_theta.axpy(-half, d);
        return out;
    }

    PrimitiveState step(const PrimitiveState& s) { return step(s, choose_dt(s)); }

    PrimitiveState step(const PrimitiveState& s, double dt) {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::Validation, "dt must be positive");
        check(s);
        const double half = 0.5 * dt;
        Tendency ln = linear_part(s);
        Tendency nn = explicit_part(s);

        Tendency base{s.rho, s.mom, s.rho_theta};
        base.rho.axpy(half, ln.rho);
        base.mom.axpy(half, ln.mom);
        base.rho_theta.axpy(half, ln.rho_theta);

        Tendency r1 = base;
        r1.rho.axpy(dt, nn.rho);
        r1.mom.axpy(dt, nn.mom);
        r1.rho_theta.axpy(dt, nn.rho_theta);
        PrimitiveState stage = implicit_solve(r1, dt);
        stage.time = s.time + dt;
        check(stage);

        Tendency ns = explicit_part(stage);
        Tendency r2 = base;
        r2.rho.axpy(half, nn.rho);
        r2.rho.axpy(half, ns.rho);
        r2.mom.axpy(half, nn.mom);
        r2.mom.axpy(half, ns.mom);
        r2.rho_theta.axpy(half, nn.rho_theta);
        r2.rho_theta.axpy(half, ns.rho_theta);
        PrimitiveState out = implicit_solve(r2, dt);
        out.time = s.time + dt;
        check(out);
        return out;
    }

    /// nu int S(grad u) : grad u.
    double dissipation_rate(const PrimitiveState& s) {
        if (params_.nu == 0.0) return 0.0;
        GradientTensor gu = gradient_tensor(*ops_, velocity_of(s));
        return params_.nu * integrate(stress_contraction(gu, params_));
    }

    /// int rho grad_h F . u / eps^2.
    double gravity_power(const PrimitiveState& s) const {
        double acc = 0.0;
        for (std::size_t n = 0; n < gravity_.size(); ++n) acc += s.mom[2][n] * gravity_[n];
        return acc * s.grid().cell_volume() / (params_.epsilon * params_.epsilon);
    }

    /// Throws BlowUp or PositivityLoss.
    void check(const PrimitiveState& s) const {
        if (!s.all_finite()) throw Error(ErrorKind::BlowUp, "non-finite value at t = " + std::to_string(s.time));
        const double tol = -10.0 * std::numeric_limits<double>::epsilon();
        if (s.rho.min() < tol || s.rho_theta.min() < tol)
            throw Error(ErrorKind::PositivityLoss, "negative density or rho Theta at t = " + std::to_string(s.time));
    }

private:
    VectorField velocity_of(const PrimitiveState& s) const {
        VectorField u(s.grid());
        for (int c = 0; c < 3; ++c)
            for (std::size_t n = 0; n < u[c].size(); ++n)
                u[c][n] = s.rho[n] > cfg_.vacuum_floor ? s.mom[c][n] / s.rho[n] : 0.0;
        return u;
    }

    // diag(rho_tilde / c) + alpha (k^2 R + D_eo^T R D_eo), alpha = dt^2 / (4 eps^2).
    void prepare(double dt) {
        if (dt == factor_dt_) return;
        factors_.clear();
        factor_dt_ = dt;
        const SlabGrid& grid = profile_.grid();
        const int nz = grid.nz;
        const double alpha = dt * dt / (4.0 * params_.epsilon * params_.epsilon);
        Eigen::VectorXd rho(nz), mass(nz);
        for (int k = 0; k < nz; ++k) {
            rho(k) = profile_.rho(k);
            mass(k) = profile_.rho(k) / profile_.c(k);
        }
        const auto& d = ops_->vertical().d_eo;
        const Eigen::MatrixXd vert = d.transpose() * rho.asDiagonal() * d;
        for (int j = 0; j < grid.ny; ++j)
            for (int i = 0; i < ops_->nx_complex(); ++i) {
                const long key = ops_->k2_key(i, j);
                if (factors_.count(key)) continue;
                Eigen::MatrixXd a = alpha * vert;
                a.diagonal() += mass + alpha * SpectralOps::k2_from_key(key) * rho;
                Eigen::LLT<Eigen::MatrixXd> llt(a);
                if (llt.info() != Eigen::Success)
                    throw Error(ErrorKind::NoConvergence, "implicit acoustic system is not positive definite");
                factors_.emplace(key, std::move(llt));
            }
    }

    ScaledParams params_;
    HydrostaticProfile profile_;
    StepperConfig cfg_;
    std::unique_ptr<SpectralOps> ops_;
    ScalarField gravity_;
    ScalarField hp_tilde_;
    ScalarField weight_;
    double factor_dt_ = -1.0;
    std::map<long, Eigen::LLT<Eigen::MatrixXd>> factors_;
};

/// One step with a throwaway stepper.
inline PrimitiveState step(const PrimitiveState& s, const ScaledParams& params, const HydrostaticProfile& profile,
                           const StepperConfig& cfg) {
    PrimitiveStepper st(params, profile, cfg);
    return st.step(s);
}

/// Running bookkeeping of
///     E(tau) - E(0) + nu int_0^tau int S:grad u - int_0^tau int rho grad F . u / eps^2
/// with the time integrals taken by the trapezoid rule over the samples.
class EnergyBudget {
public:
    void add(double time, double energy, double dissipation_rate, double gravity_power) {
        if (count_ == 0) {
            e0_ = energy;
        } else {
            const double h = time - t_;
            dissipated_ += 0.5 * h * (dissipation_rate + last_diss_);
            work_ += 0.5 * h * (gravity_power + last_work_);
        }
        t_ = time;
        last_diss_ = dissipation_rate;
        last_work_ = gravity_power;
        current_ = energy - e0_ + dissipated_ - work_;
        max_ = count_ == 0 ? current_ : std::max(max_, current_);
        max_abs_ = std::max(max_abs_, std::abs(current_));
        ++count_;
    }
    void add(PrimitiveStepper& st, const PrimitiveState& s) {
        add(s.time, energy(s, st.params()), st.dissipation_rate(s), st.gravity_power(s));
    }

    int samples() const { return count_; }
    double current() const { return current_; }
    double max_defect() const { return max_; }
    double max_abs_defect() const { return max_abs_; }
    double dissipation_integral() const { return dissipated_; }
    double gravity_work() const { return work_; }

private:
    int count_ = 0;
    double e0_ = 0.0, t_ = 0.0, last_diss_ = 0.0, last_work_ = 0.0;
    double dissipated_ = 0.0, work_ = 0.0, current_ = 0.0, max_ = 0.0, max_abs_ = 0.0;
};

/// Max over the history of the energy-inequality defect.
inline double energy_inequality_defect(const std::vector<PrimitiveState>& history, const ScaledParams& params,
                                       const HydrostaticProfile& profile) {
    if (history.size() < 2) throw Error(ErrorKind::Validation, "energy defect needs at least 2 states");
    PrimitiveStepper st(params, profile);
    EnergyBudget b;
    for (const auto& s : history) b.add(st, s);
    return b.max_defect();
}

/// int rho G(Theta).
inline double renormalized_integral(const PrimitiveState& s, const std::function<double(double)>& g,
                                    double floor = kDefaultVacuumFloor) {
    ScalarField theta = reconstruct_theta(s, floor);
    return integrate_pointwise(s.grid(), [&](std::size_t n) { return s.rho[n] * g(theta[n]); });
}

/// Max over the history of |int rho G(Theta)(t) - int rho G(Theta)(0)|.
inline double renormalized_transport_defect(const std::vector<PrimitiveState>& history,
                                            const std::function<double(double)>& g) {
    if (history.empty()) return 0.0;
    const double i0 = renormalized_integral(history.front(), g);
    double worst = 0.0;
    for (const auto& s : history) worst = std::max(worst, std::abs(renormalized_integral(s, g) - i0));
    return worst;
}

/// Tracks how far the reconstructed Theta leaves its initial range.
class ThetaExtremaMonitor {
public:
    explicit ThetaExtremaMonitor(double floor = kDefaultVacuumFloor) : floor_(floor) {}

    void add(const PrimitiveState& s) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t n = 0; n < s.rho.size(); ++n) {
            if (s.rho[n] < floor_) continue;
            const double th = s.rho_theta[n] / s.rho[n];
            lo = std::min(lo, th);
            hi = std::max(hi, th);
        }
        if (!initialised_) {
            lo0_ = lo;
            hi0_ = hi;
            initialised_ = true;
        }
        overshoot_ = std::max(overshoot_, hi - hi0_);
        undershoot_ = std::max(undershoot_, lo0_ - lo);
    }
    double overshoot() const { return overshoot_; }
    double undershoot() const { return undershoot_; }
    double drift() const { return std::max(overshoot_, undershoot_); }

private:
    double floor_;
    bool initialised_ = false;
    double lo0_ = 0.0, hi0_ = 0.0, overshoot_ = 0.0, undershoot_ = 0.0;
};

}  // namespace strato
