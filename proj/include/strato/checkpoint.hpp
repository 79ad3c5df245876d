#pragma once

/// @file checkpoint.hpp
/// @brief STRATO1 field checkpoints.
///
/// Layout: one ASCII header line `STRATO1 nx ny nz nfields time`, then one
/// block per field of nx*ny*nz little-endian float64 values, z slowest and x
/// fastest. Primitive states store (rho, mom1, mom2, mom3, rhoTheta) with an
/// optional sixth auxiliary block holding the sampled rho_tilde; anelastic
/// states store (v1, v2, v3, T_pert, Pi).

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "strato/core_types.hpp"
#include "strato/hydrostatics.hpp"

namespace strato {

struct CheckpointData {
    SlabGrid grid;
    double time = 0.0;
    std::vector<std::vector<double>> fields;
};

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int b = 0; b < 8; ++b) r |= ((v >> (8 * b)) & 0xffu) << (8 * (7 - b));
        return r;
    }
    return v;
}

}  // namespace detail

inline void write_checkpoint(const std::filesystem::path& path, const SlabGrid& grid, double time,
                             const std::vector<const ScalarField*>& fields) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot open checkpoint for writing: " + path.string());
    char header[160];
    std::snprintf(header, sizeof header, "STRATO1 %d %d %d %zu %.17g\n", grid.nx, grid.ny, grid.nz,
                  fields.size(), time);
    out << header;
    std::vector<std::uint64_t> buf(grid.size());
    for (const ScalarField* f : fields) {
        if (!(f->grid() == grid)) throw Error(ErrorKind::GridMismatch, "checkpoint field on wrong grid");
        for (std::size_t n = 0; n < grid.size(); ++n)
            buf[n] = detail::to_little_endian(std::bit_cast<std::uint64_t>((*f)[n]));
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
    }
    if (!out) throw Error(ErrorKind::Io, "failed writing checkpoint " + path.string());
}

inline CheckpointData read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Io, "empty checkpoint");
    std::istringstream hs(line);
    std::string magic;
    CheckpointData data;
    std::size_t nfields = 0;
    std::string time_text;
    hs >> magic >> data.grid.nx >> data.grid.ny >> data.grid.nz >> nfields >> time_text;
    if (magic != "STRATO1" || !hs) throw Error(ErrorKind::Io, "bad checkpoint header: " + line);
    data.grid.validate();
    data.time = std::strtod(time_text.c_str(), nullptr);
    std::vector<std::uint64_t> buf(data.grid.size());
    for (std::size_t f = 0; f < nfields; ++f) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
        if (!in) throw Error(ErrorKind::Io, "truncated checkpoint " + path.string());
        std::vector<double> values(buf.size());
        for (std::size_t n = 0; n < buf.size(); ++n)
            values[n] = std::bit_cast<double>(detail::to_little_endian(buf[n]));
        data.fields.push_back(std::move(values));
    }
    return data;
}

inline void save_primitive(const std::filesystem::path& path, const PrimitiveState& s,
                           const HydrostaticProfile* profile = nullptr) {
    std::vector<const ScalarField*> f{&s.rho, &s.mom[0], &s.mom[1], &s.mom[2], &s.rho_theta};
    if (profile) f.push_back(&profile->rho_tilde());
    write_checkpoint(path, s.grid(), s.time, f);
}

inline void save_anelastic(const std::filesystem::path& path, const AnelasticState& s) {
    write_checkpoint(path, s.grid(), s.time, {&s.v[0], &s.v[1], &s.v[2], &s.t_pert, &s.pi});
}

namespace detail {
inline ScalarField field_from(const CheckpointData& d, std::size_t idx, Parity p) {
    ScalarField f(d.grid, p);
    std::copy(d.fields[idx].begin(), d.fields[idx].end(), f.data());
    return f;
}
}  // namespace detail

inline PrimitiveState load_primitive(const std::filesystem::path& path) {
    auto d = read_checkpoint(path);
    if (d.fields.size() < 5) throw Error(ErrorKind::Io, "primitive checkpoint needs 5 fields");
    PrimitiveState s;
    s.rho = detail::field_from(d, 0, Parity::Even);
    s.mom = VectorField(detail::field_from(d, 1, Parity::Even), detail::field_from(d, 2, Parity::Even),
                        detail::field_from(d, 3, Parity::Odd));
    s.rho_theta = detail::field_from(d, 4, Parity::Even);
    s.time = d.time;
    return s;
}

inline AnelasticState load_anelastic(const std::filesystem::path& path) {
    auto d = read_checkpoint(path);
    if (d.fields.size() != 5) throw Error(ErrorKind::Io, "anelastic checkpoint needs 5 fields");
    AnelasticState s;
    s.v = VectorField(detail::field_from(d, 0, Parity::Even), detail::field_from(d, 1, Parity::Even),
                      detail::field_from(d, 2, Parity::Odd));
    s.t_pert = detail::field_from(d, 3, Parity::Even);
    s.pi = detail::field_from(d, 4, Parity::Even);
    s.time = d.time;
    return s;
}

}  // namespace strato
