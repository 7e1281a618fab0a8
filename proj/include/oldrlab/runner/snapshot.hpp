#pragma once

// Flat binary snapshots. Layout, all integers little-endian u32:
//   "OLDR", version, dim, n, field count,
//   per field: name length, UTF-8 name bytes,
//   per field: n^dim row-major little-endian f64 values.

#include "../spectral.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace oldrlab::runner {

inline constexpr std::uint32_t kSnapshotVersion = 1;

struct Snapshot {
    int dim = 2;
    int n = 0;
    std::vector<std::string> names;
    std::vector<std::vector<double>> values;

    const std::vector<double>& field(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return values[i];
        throw ConfigError("snapshot: no field '" + name + "'");
    }
    bool has(const std::string& name) const {
        for (const auto& s : names)
            if (s == name) return true;
        return false;
    }
    /// The named field on its own grid.
    SpectralField spectral(const std::string& name) const { return SpectralField::from_values(Grid(dim, n), field(name)); }
};

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
    v = to_little(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint32_t get_u32(std::istream& is) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw ConfigError("snapshot: truncated header");
    return to_little(v);
}

}  // namespace detail

inline void write_snapshot(std::ostream& os, const Snapshot& s) {
    const std::size_t count = s.dim == 1 ? static_cast<std::size_t>(s.n) : static_cast<std::size_t>(s.n) * s.n;
    if (s.names.size() != s.values.size()) throw ConfigError("snapshot: names and fields differ in number");
    os.write("OLDR", 4);
    detail::put_u32(os, kSnapshotVersion);
    detail::put_u32(os, static_cast<std::uint32_t>(s.dim));
    detail::put_u32(os, static_cast<std::uint32_t>(s.n));
    detail::put_u32(os, static_cast<std::uint32_t>(s.names.size()));
    for (const auto& name : s.names) {
        detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    for (const auto& v : s.values) {
        if (v.size() != count) throw ConfigError("snapshot: field size does not match n^dim");
        for (double x : v) {
            const double le = detail::to_little(x);
            os.write(reinterpret_cast<const char*>(&le), sizeof le);
        }
    }
    if (!os) throw ConfigError("snapshot: write failed");
}

inline Snapshot read_snapshot(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "OLDR", 4) != 0) throw ConfigError("snapshot: bad magic");
    const auto version = detail::get_u32(is);
    if (version != kSnapshotVersion) throw ConfigError("snapshot: unsupported version " + std::to_string(version));
    Snapshot s;
    s.dim = static_cast<int>(detail::get_u32(is));
    s.n = static_cast<int>(detail::get_u32(is));
    if (s.dim != 1 && s.dim != 2) throw ConfigError("snapshot: dim must be 1 or 2");
    if (s.n < 2 || s.n > (1 << 16)) throw ConfigError("snapshot: implausible n");
    const auto fields = detail::get_u32(is);
    if (fields > 64) throw ConfigError("snapshot: implausible field count");
    for (std::uint32_t f = 0; f < fields; ++f) {
        const auto len = detail::get_u32(is);
        if (len > 256) throw ConfigError("snapshot: implausible name length");
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) throw ConfigError("snapshot: truncated names");
        s.names.push_back(std::move(name));
    }
    const std::size_t count = s.dim == 1 ? static_cast<std::size_t>(s.n) : static_cast<std::size_t>(s.n) * s.n;
    for (std::uint32_t f = 0; f < fields; ++f) {
        std::vector<double> v(count);
        if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double))))
            throw ConfigError("snapshot: truncated data");
        for (double& x : v) x = detail::to_little(x);
        s.values.push_back(std::move(v));
    }
    return s;
}

inline void save_snapshot(const std::string& path, const Snapshot& s) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("snapshot: cannot open " + path);
    write_snapshot(os, s);
}

inline Snapshot load_snapshot(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("snapshot: cannot open " + path);
    return read_snapshot(is);
}

/// Snapshot of named fields sharing one grid.
inline Snapshot snapshot_of(const std::vector<std::pair<std::string, const SpectralField*>>& fields) {
    if (fields.empty()) throw ConfigError("snapshot: no fields");
    Snapshot s;
    const Grid& g = fields.front().second->grid();
    s.dim = g.dim();
    s.n = g.n();
    for (const auto& [name, f] : fields) {
        f->check_same(*fields.front().second, "snapshot");
        s.names.push_back(name);
        s.values.emplace_back(f->values().begin(), f->values().end());
    }
    return s;
}

}  // namespace oldrlab::runner
