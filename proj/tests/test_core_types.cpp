#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "strato/checkpoint.hpp"
#include "strato/core_types.hpp"
#include "strato/hydrostatics.hpp"
#include "test_support.hpp"

using namespace strato;
using strato::test::kPi;

namespace {

PrimitiveState uniform_state(const SlabGrid& grid, double rho, double rho_theta) {
    PrimitiveState s;
    s.rho = ScalarField(grid, Parity::Even, rho);
    s.mom = VectorField(grid);
    s.rho_theta = ScalarField(grid, Parity::Even, rho_theta);
    return s;
}

}  // namespace

TEST(SlabGrid, RejectsOddOrSmallSizes) {
    EXPECT_THROW(SlabGrid(3, 8, 8), Error);
    EXPECT_THROW(SlabGrid(8, 7, 8), Error);
    EXPECT_THROW(SlabGrid(8, 8, 2), Error);
    EXPECT_NO_THROW(SlabGrid(4, 4, 4));
}

TEST(SlabGrid, CellCentresInVertical) {
    SlabGrid g(4, 4, 8);
    EXPECT_DOUBLE_EQ(g.z(0), 1.0 / 16.0);
    EXPECT_DOUBLE_EQ(g.z(7), 15.0 / 16.0);
    EXPECT_DOUBLE_EQ(g.x(0), 0.0);
}

TEST(ScaledParams, Validation) {
    ScaledParams p;
    EXPECT_NO_THROW(p.validate());
    p.epsilon = 0.0;
    EXPECT_THROW(p.validate(), Error);
    p = ScaledParams{};
    p.gamma = 1.4;
    EXPECT_NO_THROW(p.validate());
    EXPECT_THROW(p.validate_for_rate_theorem(), Error);
    p.gamma = 3.5;
    EXPECT_TRUE(p.ill_prepared_regime());
}

TEST(ReconstructTheta, IdentityCase) {
    SlabGrid g(4, 4, 4);
    auto theta = reconstruct_theta(uniform_state(g, 1.0, 1.0));
    for (double v : theta.values()) EXPECT_EQ(v, 1.0);
}

TEST(ReconstructTheta, VacuumConventionIsOne) {
    SlabGrid g(4, 4, 4);
    auto theta = reconstruct_theta(uniform_state(g, 0.0, 0.3));
    for (double v : theta.values()) EXPECT_EQ(v, 1.0);
}

TEST(ReconstructTheta, DirectQuotient) {
    SlabGrid g(4, 4, 4);
    const double eps = 0.1;
    const double z = 2.0 * (1.0 + eps * eps * 0.5);
    auto theta = reconstruct_theta(uniform_state(g, 2.0, z));
    for (double v : theta.values()) EXPECT_NEAR(v, 1.005, 1e-15);
}

TEST(ReconstructTheta, RejectsNonPositiveFloor) {
    SlabGrid g(4, 4, 4);
    EXPECT_THROW(reconstruct_theta(uniform_state(g, 1.0, 1.0), 0.0), Error);
}

TEST(WeightedInnerProduct, ConstantsWithUnitDensity) {
    SlabGrid g(8, 8, 8);
    auto prof = solve_hydrostatic(2.0, 0.0, 1.0, g);  // rho_tilde = 1, c = 2
    ScalarField one(g, Parity::Even, 1.0);
    EXPECT_NEAR(weighted_inner_product(one, one, prof), 0.5, 1e-15);
    ScalarField zero(g);
    EXPECT_EQ(weighted_inner_product(zero, one, prof), 0.0);
}

TEST(WeightedInnerProduct, OrthogonalTrigonometricPair) {
    SlabGrid g(32, 8, 8);
    auto prof = solve_hydrostatic(2.0, 0.0, 1.0, g);
    auto u = ScalarField::from_function(g, [](double x, double, double) { return std::cos(2 * kPi * x); });
    auto w = ScalarField::from_function(g, [](double x, double, double) { return std::sin(2 * kPi * x); });
    EXPECT_NEAR(weighted_inner_product(u, w, prof), 0.0, 1e-15);
}

TEST(WeightedInnerProduct, GridMismatchThrows) {
    SlabGrid g(8, 8, 8), h(8, 8, 4);
    auto prof = solve_hydrostatic(2.0, 1.0, 1.0, g);
    ScalarField a(g), b(h);
    EXPECT_THROW(weighted_inner_product(a, b, prof), Error);
}

TEST(WeightedInnerProduct, SymmetricAndPositiveOnRandomFields) {
    SlabGrid g(8, 8, 8);
    auto prof = solve_hydrostatic(1.7, 1.0, 1.0, g);
    std::mt19937 rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        auto u = test::random_smooth(g, rng);
        auto w = test::random_smooth(g, rng);
        EXPECT_EQ(weighted_inner_product(u, w, prof), weighted_inner_product(w, u, prof));
        if (u.max_abs() > 0) {
            EXPECT_GT(weighted_inner_product(u, u, prof), 0.0);
        }
    }
}

TEST(VectorField, AdmissibilityClosedUnderLinearCombination) {
    SlabGrid g(8, 8, 8);
    std::mt19937 rng(3);
    auto a = test::random_admissible(g, rng);
    auto b = test::random_admissible(g, rng);
    VectorField c = 0.3 * a + b;
    c.axpy(-2.0, a);
    EXPECT_TRUE(c.boundary_admissible());
    EXPECT_FALSE(VectorField(a[0], a[1], a[0]).boundary_admissible());
}

TEST(Checkpoint, BitExactRoundTripOfPrimitiveState) {
    SlabGrid g(8, 6, 4);
    std::mt19937 rng(11);
    PrimitiveState s;
    s.rho = test::random_smooth(g, rng);
    s.mom = test::random_admissible(g, rng);
    s.rho_theta = test::random_smooth(g, rng);
    s.time = 1.0 / 3.0;
    auto prof = solve_hydrostatic(2.0, 1.0, 1.0, g);
    auto path = std::filesystem::temp_directory_path() / "strato_ckpt_test.strato";
    save_primitive(path, s, &prof);
    auto data = read_checkpoint(path);
    EXPECT_EQ(data.fields.size(), 6u);
    auto r = load_primitive(path);
    EXPECT_EQ(r.time, s.time);
    EXPECT_EQ(std::memcmp(r.rho.data(), s.rho.data(), g.size() * 8), 0);
    for (int c = 0; c < 3; ++c) EXPECT_EQ(std::memcmp(r.mom[c].data(), s.mom[c].data(), g.size() * 8), 0);
    EXPECT_EQ(std::memcmp(r.rho_theta.data(), s.rho_theta.data(), g.size() * 8), 0);
    EXPECT_TRUE(r.mom.boundary_admissible());
    std::filesystem::remove(path);
}

TEST(Checkpoint, HeaderAndLayout) {
    SlabGrid g(4, 4, 4);
    ScalarField f = ScalarField::from_function(g, [&](double x, double y, double z) { return x + 10 * y + 100 * z; });
    auto path = std::filesystem::temp_directory_path() / "strato_layout.strato";
    write_checkpoint(path, g, 0.5, {&f});
    std::ifstream in(path, std::ios::binary);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "STRATO1 4 4 4 1 0.5");
    double first[2];
    in.read(reinterpret_cast<char*>(first), 16);
    EXPECT_EQ(first[0], f(0, 0, 0));
    EXPECT_EQ(first[1], f(1, 0, 0));  // x fastest
    std::filesystem::remove(path);
}

TEST(Checkpoint, BadMagicRejected) {
    auto path = std::filesystem::temp_directory_path() / "strato_bad.strato";
    {
        std::ofstream out(path);
        out << "NOTSTRATO 4 4 4 1 0\n";
    }
    EXPECT_THROW(read_checkpoint(path), Error);
    std::filesystem::remove(path);
}
