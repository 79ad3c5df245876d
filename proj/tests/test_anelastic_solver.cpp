#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "strato/anelastic_solver.hpp"
#include "test_support.hpp"

using namespace strato;
using strato::test::kPi;

namespace {

ScaledParams params_with(double nu = 0.0) {
    ScaledParams p;
    p.epsilon = 0.1;
    p.nu = nu;
    p.gamma = 2.0;
    p.g = 1.0;
    return p;
}

double max_diff(const ScalarField& a, const ScalarField& b) {
    double m = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, std::abs(a[n] - b[n]));
    return m;
}
double max_diff(const VectorField& a, const VectorField& b) {
    return std::max({max_diff(a[0], b[0]), max_diff(a[1], b[1]), max_diff(a[2], b[2])});
}

// Weighted-solenoidal velocity from stream functions:
// rho_tilde v = (-d_y psi, d_x psi, 0) + (-pi f cos(pi z), 0, f' sin(pi z)).
VectorField solenoidal_velocity(const SlabGrid& g, const HydrostaticProfile& prof, double amp) {
    VectorField rv(g);
    rv[0] = ScalarField::from_function(g, [&](double x, double y, double z) {
        return amp * (-2 * kPi * 0.5 * std::cos(2 * kPi * y) * std::cos(kPi * z) -
                      kPi * 0.3 * std::sin(2 * kPi * x) * std::cos(kPi * z));
    });
    rv[1] = ScalarField::from_function(g, [&](double x, double, double) {
        return amp * 2 * kPi * 0.4 * std::cos(2 * kPi * x);
    });
    rv[2] = ScalarField::from_function(g, [&](double x, double, double z) {
        return amp * 0.3 * 2 * kPi * std::cos(2 * kPi * x) * std::sin(kPi * z);
    }, Parity::Odd);
    VectorField v = rv;
    for (int c = 0; c < 3; ++c)
        for (std::size_t n = 0; n < g.size(); ++n) v[c][n] /= prof.rho_tilde()[n];
    return v;
}

ScalarField bump_temperature(const SlabGrid& g) {
    return ScalarField::from_function(g, [](double x, double y, double z) {
        return test::wall_bump(z) * (1.0 + 0.5 * std::cos(2 * kPi * x) * std::sin(2 * kPi * y));
    });
}

}  // namespace

TEST(ProjectAnelastic, WeightedSolenoidalFieldIsFixed) {
    SlabGrid g(16, 16, 16);
    auto prof = solve_hydrostatic(2.0, 1.0, 1.0, g);
    auto v = solenoidal_velocity(g, prof, 1.0);
    WeightedHelmholtz h(prof);
    EXPECT_LE(h.ops().divergence(scale_by(prof.rho_tilde(), v)).max_abs(), 1e-10);
    EXPECT_LE(max_diff(project_anelastic(v, h), v), 1e-10);
}

TEST(ProjectAnelastic, GradientRemovedForUnitDensity) {
    SlabGrid g(8, 8, 8);
    auto prof = solve_hydrostatic(2.0, 0.0, 1.0, g);
    SpectralOps ops(g);
    auto phi = ScalarField::from_function(g, [](double x, double y, double z) {
        return std::cos(2 * kPi * x) * std::cos(kPi * z) + std::sin(2 * kPi * y);
    });
    EXPECT_LE(project_anelastic(ops.gradient(phi), prof).max_abs(), 1e-10);
}

TEST(ProjectAnelastic, IdempotentAndConstrained) {
    SlabGrid g(16, 8, 16);
    auto prof = solve_hydrostatic(1.6, 1.0, 1.0, g);
    WeightedHelmholtz h(prof);
    std::mt19937 rng(17);
    for (int trial = 0; trial < 3; ++trial) {
        auto p1 = project_anelastic(test::random_admissible(g, rng), h);
        EXPECT_LE(h.ops().divergence(scale_by(prof.rho_tilde(), p1)).max_abs(), 1e-10);
        EXPECT_LE(max_diff(project_anelastic(p1, h), p1), 1e-10);
    }
}

TEST(AnelasticStep, RestStateStaysAtRest) {
    SlabGrid g(8, 8, 8);
    auto prof = solve_hydrostatic(2.0, 1.0, 1.0, g);
    AnelasticStepper st(params_with(0.1), prof);
    auto s = st.initial_state({VectorField(g), ScalarField(g)});
    for (int k = 0; k < 5; ++k) s = st.step(s);
    EXPECT_EQ(s.v.max_abs(), 0.0);
    EXPECT_EQ(s.t_pert.max_abs(), 0.0);
    EXPECT_EQ(s.pi.max_abs(), 0.0);
}

TEST(AnelasticStep, UniformBuoyancyIsAbsorbedByPressure) {
    SlabGrid g(8, 8, 16);
    auto prof = solve_hydrostatic(2.0, 1.0, 1.0, g);
    AnelasticStepper st(params_with(), prof);
    auto s = st.initial_state({VectorField(g), ScalarField(g, Parity::Even, 1.0)});
    const double dt = 0.01;
    auto s1 = st.step(s, dt);
    // oracle: dt times the projected buoyancy, computed with an independent Neumann solve
    VectorField b(g);
    for (std::size_t n = 0; n < g.size(); ++n) b[2][n] = -st.gravity()[n];
    VectorField expected = dt * project_anelastic(b, prof);
    EXPECT_LE(max_diff(s1.v, expected), 10 * dt * dt * dt);
    // a horizontally uniform vertical force is a weighted gradient up to grid-scale residue
    EXPECT_LE(expected.max_abs(), 1e-3 * dt);
    // pressure balances it: d_z Pi = -T grad F on the column
    auto dpi = st.ops().dz(s1.pi);
    for (int k = 0; k < g.nz; ++k) EXPECT_NEAR(dpi(3, 5, k), -st.gravity()(3, 5, k), 1e-3);
    EXPECT_LE(std::abs(integrate(s1.pi)), 1e-12);
}

TEST(AnelasticStep, RigidTranslationTransportsTemperature) {
    SlabGrid g(64, 64, 8);
    auto p = params_with();
    VectorField v(g);
    v[0].fill(1.0);
    auto t0 = [](double x, double y, double z) {
        return std::cos(kPi * z) * (1.0 + 0.5 * std::cos(2 * kPi * x) * std::sin(2 * kPi * y));
    };
    auto run = [&](int n, TransportExtremaMonitor* mon) {
        // zero gravity so the uniform translation is an exact solution of the momentum equation
        auto flat = solve_hydrostatic(2.0, 0.0, 1.0, g);
        AnelasticStepper st(p, flat);
        AnelasticState s;
        s.v = v;
        s.t_pert = ScalarField::from_function(g, t0);
        s.pi = ScalarField(g);
        if (mon) mon->add(s.t_pert);
        for (int k = 0; k < n; ++k) {
            s = st.step(s, 0.25 / n);
            if (mon) mon->add(s.t_pert);
        }
        return s;
    };
    auto exact = ScalarField::from_function(g, [&](double x, double y, double z) { return t0(x - 0.25, y, z); });
    TransportExtremaMonitor mon;
    auto s1 = run(40, nullptr);
    auto s2 = run(80, &mon);
    const double e1 = max_diff(s1.t_pert, exact), e2 = max_diff(s2.t_pert, exact);
    EXPECT_NEAR(e1 / e2, 4.0, 0.6);
    EXPECT_LE(max_diff(s1.v, v), 1e-12);
    EXPECT_LE(mon.expansion().first, 1e-6);
    EXPECT_LE(mon.expansion().second, 1e-6);
}

TEST(TransportMonitor, ConstantTemperature) {
    SlabGrid g(8, 8, 8);
    auto prof = solve_hydrostatic(2.0, 1.0, 1.0, g);
    AnelasticStepper st(params_with(), prof);
    auto s = st.initial_state({solenoidal_velocity(g, prof, 0.3), ScalarField(g, Parity::Even, 0.7)});
    std::vector<AnelasticState> h{s};
    for (int k = 0; k < 5; ++k) h.push_back(st.step(h.back()));
    auto [over, under] = transport_extrema_monitor(h);
    EXPECT_LE(over, 1e-13);
    EXPECT_LE(under, 1e-13);
}

TEST(TransportMonitor, DiffusiveControlDetected) {
    SlabGrid g(16, 16, 8);
    auto prof = solve_hydrostatic(2.0, 1.0, 1.0, g);
    AnelasticStepper st(params_with(), prof);
    auto s = st.initial_state({solenoidal_velocity(g, prof, 0.3), bump_temperature(g)});
    TransportExtremaMonitor mon;
    mon.add(s.t_pert);
    for (int k = 0; k < 10; ++k) {
        s = st.step(s, 0.01);
        s.t_pert.axpy(0.01 * 0.5, st.ops().laplacian(s.t_pert));
        mon.add(s.t_pert);
    }
    EXPECT_GT(mon.deviation().first, 1e-3);
}

TEST(AnelasticStep, ConstraintHeldEveryStep) {
    SlabGrid g(16, 16, 8);
    auto prof = solve_hydrostatic(2.0, 1.0, 1.0, g);
    AnelasticStepper st(params_with(0.05), prof);
    auto s = st.initial_state({solenoidal_velocity(g, prof, 0.5), bump_temperature(g)});
    for (int k = 0; k < 10; ++k) {
        s = st.step(s);
        EXPECT_LE(st.constraint_defect(s.v), 1e-10);
        EXPECT_TRUE(s.v.boundary_admissible());
    }
}

TEST(AnelasticStep, PressureGaugeDoesNotMatter) {
    SlabGrid g(8, 8, 8);
    auto prof = solve_hydrostatic(2.0, 1.0, 1.0, g);
    AnelasticStepper st(params_with(0.05), prof);
    auto a = st.initial_state({solenoidal_velocity(g, prof, 0.5), bump_temperature(g)});
    auto b = a;
    for (std::size_t n = 0; n < g.size(); ++n) b.pi[n] += 3.5;
    for (int k = 0; k < 5; ++k) {
        a = st.step(a, 0.01);
        b = st.step(b, 0.01);
        for (int c = 0; c < 3; ++c) EXPECT_EQ(std::memcmp(a.v[c].data(), b.v[c].data(), g.size() * 8), 0);
        EXPECT_EQ(std::memcmp(a.t_pert.data(), b.t_pert.data(), g.size() * 8), 0);
    }
}

TEST(AnelasticStep, InviscidKineticEnergyConservedToSchemeOrder) {
    SlabGrid g(16, 16, 8);
    auto prof = solve_hydrostatic(2.0, 1.0, 1.0, g);
    AnelasticStepper st(params_with(), prof);
    auto s0 = st.initial_state({solenoidal_velocity(g, prof, 0.2), ScalarField(g)});
    const double k0 = kinetic_energy_anelastic(s0, prof);
    auto drift = [&](int n) {
        auto s = s0;
        for (int k = 0; k < n; ++k) s = st.step(s, 0.2 / n);
        return std::abs(kinetic_energy_anelastic(s, prof) - k0) / k0;
    };
    const double d1 = drift(40), d2 = drift(80);
    EXPECT_LE(d1, 1e-3);
    EXPECT_GT(d1 / d2, 3.0);
}
