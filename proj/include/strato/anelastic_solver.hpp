#pragma once

/// @file anelastic_solver.hpp
/// @brief Anelastic limit system in velocity form,
///
///     v_t + (v.grad)v + grad Pi = -T grad F + (nu / rho_tilde) div S(grad v),
///     T_t + v.grad T = 0,   div(rho_tilde v) = 0,
///
/// advanced by Heun with a weighted projection after each stage. Advection is
/// in split form, (1/2)[(v.grad)v + rho_tilde^-1 div(rho_tilde v (x) v)], which
/// leaves int rho_tilde |v|^2 / 2 untouched by transport. Pi is recovered from
/// the last projection potential and stored mean-zero; the stepper never reads
/// it, so shifting Pi by a constant changes nothing downstream.

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "strato/core_types.hpp"
#include "strato/helmholtz.hpp"
#include "strato/hydrostatics.hpp"
#include "strato/spectral.hpp"
#include "strato/transport.hpp"

namespace strato {

struct AnelasticInitSpec {
    VectorField v0;
    ScalarField t0;
};

/// Velocity projector onto div(rho_tilde v) = 0: returns w - grad Psi with
/// div(rho_tilde grad Psi) = div(rho_tilde w), i.e. P(rho_tilde w) / rho_tilde.
inline VectorField project_anelastic(const VectorField& w, WeightedHelmholtz& h, double tol = 1e-10) {
    if (!w.boundary_admissible())
        throw Error(ErrorKind::IncompatibleData, "w is not boundary admissible (u3 must be odd in z)");
    VectorField grad_psi = h.q_part(scale_by(h.profile().rho_tilde(), w), tol);
    return w - grad_psi;
}

inline VectorField project_anelastic(const VectorField& w, const HydrostaticProfile& profile, double tol = 1e-10) {
    WeightedHelmholtz h(profile);
    return project_anelastic(w, h, tol);
}

inline double kinetic_energy_anelastic(const AnelasticState& s, const HydrostaticProfile& profile) {
    const ScalarField& r = profile.rho_tilde();
    return integrate_pointwise(s.grid(), [&](std::size_t n) {
        return 0.5 * r[n] * (s.v[0][n] * s.v[0][n] + s.v[1][n] * s.v[1][n] + s.v[2][n] * s.v[2][n]);
    });
}

class AnelasticStepper {
public:
    AnelasticStepper(const ScaledParams& params, const HydrostaticProfile& profile, StepperConfig cfg = {})
        : params_(params), profile_(profile), cfg_(std::move(cfg)),
          helm_(std::make_unique<WeightedHelmholtz>(profile)) {
        params_.validate();
        cfg_.validate();
        gravity_ = discrete_gravity(profile_, helm_->ops());
        inv_rho_ = ScalarField(profile.grid(), Parity::Even);
        for (std::size_t n = 0; n < inv_rho_.size(); ++n) inv_rho_[n] = 1.0 / profile_.rho_tilde()[n];
    }

    const ScaledParams& params() const { return params_; }
    const HydrostaticProfile& profile() const { return profile_; }
    WeightedHelmholtz& helmholtz() { return *helm_; }
    SpectralOps& ops() { return helm_->ops(); }
    const ScalarField& gravity() const { return gravity_; }

    /// Build a state from initial data; v0 is projected once.
    AnelasticState initial_state(const AnelasticInitSpec& spec) {
        AnelasticState s;
        s.v = project(spec.v0);
        s.t_pert = spec.t0;
        s.pi = ScalarField(profile_.grid(), Parity::Even);
        return s;
    }

    VectorField project(const VectorField& w) { return project_anelastic(w, *helm_, cfg_.implicit_tol); }

    /// max |div(rho_tilde v)|.
    double constraint_defect(const VectorField& v) {
        return ops().divergence(scale_by(profile_.rho_tilde(), v)).max_abs();
    }

    double stable_dt(const AnelasticState& s) const {
        double umax = 0.0;
        for (std::size_t n = 0; n < s.v[0].size(); ++n)
            umax = std::max(umax, std::sqrt(s.v[0][n] * s.v[0][n] + s.v[1][n] * s.v[1][n] + s.v[2][n] * s.v[2][n]));
        double rmin = std::numeric_limits<double>::infinity();
        for (double r : profile_.rho_levels()) rmin = std::min(rmin, r);
        return strato::stable_dt(s.grid(), umax, rmin, params_, cfg_);
    }
    double choose_dt(const AnelasticState& s) const { return cfg_.dt > 0.0 ? cfg_.dt : stable_dt(s); }

    /// Velocity tendency before projection.
    VectorField velocity_rhs(const VectorField& v, const ScalarField& t) {
        SpectralOps& o = ops();
        GradientTensor gv = gradient_tensor(o, v);
        VectorField rv = scale_by(profile_.rho_tilde(), v);
        VectorField adv = scale_by(inv_rho_, div_tensor(o, rv, v));
        adv += convective(v, gv);
        VectorField f = -0.5 * adv;
        for (std::size_t n = 0; n < t.size(); ++n) f[2][n] -= t[n] * gravity_[n];
        if (params_.nu > 0.0) f.axpy(params_.nu, scale_by(inv_rho_, viscous_force(o, v, gv, params_)));
        return f;
    }

    /// -(1/2)[v.grad T + rho_tilde^-1 div(rho_tilde v T)].
    ScalarField transport_rhs(const VectorField& v, const ScalarField& t) {
        SpectralOps& o = ops();
        VectorField gt = o.gradient(t);
        ScalarField adv(t.grid(), Parity::Even);
        for (int c = 0; c < 3; ++c)
            for (std::size_t n = 0; n < t.size(); ++n) adv[n] += v[c][n] * gt[c][n];
        VectorField flux = scale_by(multiply(profile_.rho_tilde(), t), v);
        adv += multiply(inv_rho_, o.divergence(flux));
        adv *= -0.5;
        return adv;
    }

    AnelasticState step(const AnelasticState& s) { return step(s, choose_dt(s)); }

    AnelasticState step(const AnelasticState& s, double dt) {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::Validation, "dt must be positive");
        VectorField fv = velocity_rhs(s.v, s.t_pert);
        ScalarField ft = transport_rhs(s.v, s.t_pert);

        VectorField v1 = s.v;
        v1.axpy(dt, fv);
        v1 = project(v1);
        ScalarField t1 = s.t_pert;
        t1.axpy(dt, ft);

        VectorField fv1 = velocity_rhs(v1, t1);
        ScalarField ft1 = transport_rhs(v1, t1);

        AnelasticState out;
        VectorField pre = s.v;
        pre.axpy(0.5 * dt, fv);
        pre.axpy(0.5 * dt, fv1);
        NeumannSolveResult res = helm_->solve(scale_by(profile_.rho_tilde(), pre), cfg_.implicit_tol);
        out.v = pre - ops().gradient(res.psi);
        out.pi = res.psi;
        out.pi *= 1.0 / dt;
        out.t_pert = s.t_pert;
        out.t_pert.axpy(0.5 * dt, ft);
        out.t_pert.axpy(0.5 * dt, ft1);
        out.time = s.time + dt;
        if (!out.v.all_finite() || !out.t_pert.all_finite())
            throw Error(ErrorKind::BlowUp, "non-finite anelastic state at t = " + std::to_string(out.time));
        return out;
    }

private:
    ScaledParams params_;
    HydrostaticProfile profile_;
    StepperConfig cfg_;
    std::unique_ptr<WeightedHelmholtz> helm_;
    ScalarField gravity_;
    ScalarField inv_rho_;
};

inline AnelasticState step_anelastic(const AnelasticState& s, const ScaledParams& params,
                                     const HydrostaticProfile& profile, const StepperConfig& cfg) {
    AnelasticStepper st(params, profile, cfg);
    return st.step(s);
}

/// Extremes of T over a run compared with the initial extremes.
class TransportExtremaMonitor {
public:
    void add(const ScalarField& t) {
        const double lo = t.min(), hi = t.max();
        if (!init_) {
            lo0_ = lo;
            hi0_ = hi;
            init_ = true;
        }
        overshoot_ = std::max(overshoot_, hi - hi0_);
        undershoot_ = std::max(undershoot_, lo0_ - lo);
        max_dev_ = std::max(max_dev_, std::abs(hi - hi0_));
        min_dev_ = std::max(min_dev_, std::abs(lo - lo0_));
    }
    /// (max_t max T - max T0, min T0 - min_t min T): growth of the range.
    std::pair<double, double> expansion() const { return {overshoot_, undershoot_}; }
    /// Largest |max T(t) - max T0| and |min T(t) - min T0|: catches shrinking too.
    std::pair<double, double> deviation() const { return {max_dev_, min_dev_}; }

private:
    bool init_ = false;
    double lo0_ = 0.0, hi0_ = 0.0;
    double overshoot_ = 0.0, undershoot_ = 0.0, max_dev_ = 0.0, min_dev_ = 0.0;
};

/// Range growth of T over a history of states.
inline std::pair<double, double> transport_extrema_monitor(const std::vector<AnelasticState>& history) {
    if (history.empty()) throw Error(ErrorKind::Validation, "empty history");
    TransportExtremaMonitor m;
    for (const auto& s : history) m.add(s.t_pert);
    return m.expansion();
}

}  // namespace strato
