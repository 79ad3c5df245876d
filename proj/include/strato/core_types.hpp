#pragma once

/// @file core_types.hpp
/// @brief Grid geometry, field containers and the scaling-parameter bundle.
///
/// The domain is the slab T^2 x (0,1). Horizontal directions are periodic and
/// sampled at x_i = i/nx, y_j = j/ny. The vertical direction is sampled at the
/// cell centres z_k = (k + 1/2)/nz. Every field carries a vertical parity:
/// even fields are cosine series in z (scalars, u1, u2) and odd fields are
/// sine series (u3), so the complete-slip conditions hold by construction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace strato {

enum class ErrorKind {
    Validation,
    GridMismatch,
    NonPositiveProfile,
    NegativeDensity,
    BlowUp,
    PositivityLoss,
    IncompatibleData,
    NoConvergence,
    NonPositiveReference,
    DegeneratePoints,
    EigensolverFailure,
    Io,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Validation: return "Validation";
        case ErrorKind::GridMismatch: return "GridMismatch";
        case ErrorKind::NonPositiveProfile: return "NonPositiveProfile";
        case ErrorKind::NegativeDensity: return "NegativeDensity";
        case ErrorKind::BlowUp: return "BlowUp";
        case ErrorKind::PositivityLoss: return "PositivityLoss";
        case ErrorKind::IncompatibleData: return "IncompatibleData";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::NonPositiveReference: return "NonPositiveReference";
        case ErrorKind::DegeneratePoints: return "DegeneratePoints";
        case ErrorKind::EigensolverFailure: return "EigensolverFailure";
        case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Dimensionless knobs of the scaled system.
struct ScaledParams {
    double epsilon = 0.1;      ///< Mach = Froude number
    double nu = 0.0;           ///< viscosity scale (1/Re)
    double gamma = 2.0;        ///< adiabatic exponent, p = (rho Theta)^gamma
    double mu = 1.0;           ///< shear viscosity
    double lambda_bulk = 0.0;  ///< bulk viscosity
    double g = 1.0;            ///< gravity magnitude, F = -g z

    void validate() const {
        auto fail = [](const std::string& msg) { throw Error(ErrorKind::Validation, msg); };
        if (!(epsilon > 0.0)) fail("epsilon must be > 0");
        if (!(nu >= 0.0)) fail("nu must be >= 0");
        if (!(gamma > 1.0)) fail("gamma must be > 1");
        if (!(mu > 0.0)) fail("mu must be > 0");
        if (!(lambda_bulk >= 0.0)) fail("lambda_bulk must be >= 0");
        if (!(g >= 0.0)) fail("g must be >= 0");
    }

    /// Hypotheses of the well-prepared convergence result.
    void validate_for_rate_theorem() const {
        validate();
        if (!(gamma > 1.5)) throw Error(ErrorKind::Validation, "rate preset requires gamma > 3/2");
    }

    /// gamma > 3 is the regime of the ill-prepared (dispersive) result.
    bool ill_prepared_regime() const { return gamma > 3.0; }
};

/// Slab T^2 x (0,1) sampled with nx x ny periodic nodes and nz vertical cells.
struct SlabGrid {
    int nx = 16;
    int ny = 16;
    int nz = 8;

    SlabGrid() = default;
    SlabGrid(int nx_, int ny_, int nz_) : nx(nx_), ny(ny_), nz(nz_) { validate(); }

    void validate() const {
        for (int n : {nx, ny, nz}) {
            if (n < 4 || n % 2 != 0)
                throw Error(ErrorKind::Validation, "grid sizes must be even and >= 4");
        }
    }

    std::size_t size() const { return static_cast<std::size_t>(nx) * ny * nz; }
    std::size_t plane() const { return static_cast<std::size_t>(nx) * ny; }

    // z-major storage: x fastest, then y, then z.
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * ny + j) * nx + i;
    }

    double x(int i) const { return static_cast<double>(i) / nx; }
    double y(int j) const { return static_cast<double>(j) / ny; }
    double z(int k) const { return (k + 0.5) / nz; }

    double dx() const { return 1.0 / nx; }
    double dy() const { return 1.0 / ny; }
    double dz() const { return 1.0 / nz; }
    double min_spacing() const { return std::min({dx(), dy(), dz()}); }
    double cell_volume() const { return 1.0 / (static_cast<double>(nx) * ny * nz); }

    friend bool operator==(const SlabGrid&, const SlabGrid&) = default;
};

enum class Parity { Even, Odd };

inline Parity flip(Parity p) { return p == Parity::Even ? Parity::Odd : Parity::Even; }

/// Nodal values of a scalar on a SlabGrid.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const SlabGrid& grid, Parity parity = Parity::Even, double value = 0.0)
        : grid_(grid), parity_(parity), values_(grid.size(), value) {}

    template <class F>
    static ScalarField from_function(const SlabGrid& grid, F&& f, Parity parity = Parity::Even) {
        ScalarField out(grid, parity);
        for (int k = 0; k < grid.nz; ++k)
            for (int j = 0; j < grid.ny; ++j)
                for (int i = 0; i < grid.nx; ++i)
                    out(i, j, k) = f(grid.x(i), grid.y(j), grid.z(k));
        return out;
    }

    const SlabGrid& grid() const { return grid_; }
    Parity parity() const { return parity_; }
    void set_parity(Parity p) { parity_ = p; }

    std::size_t size() const { return values_.size(); }
    double& operator[](std::size_t n) { return values_[n]; }
    double operator[](std::size_t n) const { return values_[n]; }
    double& operator()(int i, int j, int k) { return values_[grid_.index(i, j, k)]; }
    double operator()(int i, int j, int k) const { return values_[grid_.index(i, j, k)]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }

    void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

    ScalarField& operator+=(const ScalarField& o) {
        check_same(o);
        for (std::size_t n = 0; n < values_.size(); ++n) values_[n] += o.values_[n];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o) {
        check_same(o);
        for (std::size_t n = 0; n < values_.size(); ++n) values_[n] -= o.values_[n];
        return *this;
    }
    ScalarField& operator*=(double s) {
        for (double& v : values_) v *= s;
        return *this;
    }
    /// this += a * x
    ScalarField& axpy(double a, const ScalarField& x) {
        check_same(x);
        for (std::size_t n = 0; n < values_.size(); ++n) values_[n] += a * x.values_[n];
        return *this;
    }

    friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
    friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
    friend ScalarField operator*(double s, ScalarField a) { return a *= s; }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }
    double min() const { return *std::min_element(values_.begin(), values_.end()); }
    double max() const { return *std::max_element(values_.begin(), values_.end()); }
    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    void check_same(const ScalarField& o) const {
        if (!(grid_ == o.grid_)) throw Error(ErrorKind::GridMismatch, "fields live on different grids");
    }

private:
    SlabGrid grid_{};
    Parity parity_ = Parity::Even;
    std::vector<double> values_;
};

/// Pointwise product; the parity is the product of parities.
inline ScalarField multiply(const ScalarField& a, const ScalarField& b) {
    a.check_same(b);
    ScalarField out(a.grid(), a.parity() == b.parity() ? Parity::Even : Parity::Odd);
    for (std::size_t n = 0; n < a.size(); ++n) out[n] = a[n] * b[n];
    return out;
}

/// Three components (u1, u2, u3); u3 is odd in z.
class VectorField {
public:
    VectorField() = default;
    explicit VectorField(const SlabGrid& grid)
        : comp_{ScalarField(grid, Parity::Even), ScalarField(grid, Parity::Even),
                ScalarField(grid, Parity::Odd)} {}
    VectorField(ScalarField u1, ScalarField u2, ScalarField u3)
        : comp_{std::move(u1), std::move(u2), std::move(u3)} {
        comp_[0].check_same(comp_[1]);
        comp_[0].check_same(comp_[2]);
    }

    ScalarField& operator[](int c) { return comp_[c]; }
    const ScalarField& operator[](int c) const { return comp_[c]; }
    const SlabGrid& grid() const { return comp_[0].grid(); }

    /// u3 = 0 on z in {0,1} holds iff u3 is a sine series and u1, u2 are cosine series.
    bool boundary_admissible() const {
        return comp_[0].parity() == Parity::Even && comp_[1].parity() == Parity::Even &&
               comp_[2].parity() == Parity::Odd;
    }

    VectorField& operator+=(const VectorField& o) {
        for (int c = 0; c < 3; ++c) comp_[c] += o.comp_[c];
        return *this;
    }
    VectorField& operator-=(const VectorField& o) {
        for (int c = 0; c < 3; ++c) comp_[c] -= o.comp_[c];
        return *this;
    }
    VectorField& operator*=(double s) {
        for (auto& f : comp_) f *= s;
        return *this;
    }
    VectorField& axpy(double a, const VectorField& x) {
        for (int c = 0; c < 3; ++c) comp_[c].axpy(a, x.comp_[c]);
        return *this;
    }
    friend VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
    friend VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
    friend VectorField operator*(double s, VectorField a) { return a *= s; }

    double max_abs() const {
        return std::max({comp_[0].max_abs(), comp_[1].max_abs(), comp_[2].max_abs()});
    }
    bool all_finite() const {
        return comp_[0].all_finite() && comp_[1].all_finite() && comp_[2].all_finite();
    }

private:
    std::array<ScalarField, 3> comp_;
};

/// Scalar times each component.
inline VectorField scale_by(const ScalarField& s, const VectorField& v) {
    return VectorField(multiply(s, v[0]), multiply(s, v[1]), multiply(s, v[2]));
}

/// Conservative variables of the compressible system.
struct PrimitiveState {
    ScalarField rho;        ///< density
    VectorField mom;        ///< rho u
    ScalarField rho_theta;  ///< Z = rho Theta
    double time = 0.0;

    const SlabGrid& grid() const { return rho.grid(); }
    bool all_finite() const { return rho.all_finite() && mom.all_finite() && rho_theta.all_finite(); }
};

/// State of the anelastic limit system.
struct AnelasticState {
    VectorField v;        ///< velocity, div(rho_tilde v) = 0
    ScalarField t_pert;   ///< second-order potential-temperature variation
    ScalarField pi;       ///< pressure, stored mean-zero
    double time = 0.0;

    const SlabGrid& grid() const { return v.grid(); }
};

inline constexpr double kDefaultVacuumFloor = 1e-12;

/// Theta = Z / rho where rho >= floor, and 1 on the vacuum set.
inline ScalarField reconstruct_theta(const PrimitiveState& state, double floor = kDefaultVacuumFloor) {
    if (!(floor > 0.0)) throw Error(ErrorKind::Validation, "vacuum floor must be positive");
    ScalarField theta(state.grid(), Parity::Even, 1.0);
    for (std::size_t n = 0; n < theta.size(); ++n)
        if (state.rho[n] >= floor) theta[n] = state.rho_theta[n] / state.rho[n];
    return theta;
}

/// Velocity u = m / rho (no vacuum handling; callers keep rho > 0).
inline VectorField velocity(const PrimitiveState& state) {
    VectorField u(state.grid());
    for (int c = 0; c < 3; ++c)
        for (std::size_t n = 0; n < u[c].size(); ++n) u[c][n] = state.mom[c][n] / state.rho[n];
    return u;
}

/// Collocation quadrature over the unit slab. Exact for the trigonometric
/// modes the grid resolves.
inline double integrate(const ScalarField& f) {
    double s = 0.0;
    for (double v : f.values()) s += v;
    return s * f.grid().cell_volume();
}

template <class F>
double integrate_pointwise(const SlabGrid& grid, F&& integrand) {
    double s = 0.0;
    for (std::size_t n = 0; n < grid.size(); ++n) s += integrand(n);
    return s * grid.cell_volume();
}

inline double inner(const ScalarField& a, const ScalarField& b) {
    a.check_same(b);
    double s = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * b[n];
    return s * a.grid().cell_volume();
}

inline double inner(const VectorField& a, const VectorField& b) {
    return inner(a[0], b[0]) + inner(a[1], b[1]) + inner(a[2], b[2]);
}

}  // namespace strato
