#include "hyperpredict/grid_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace hyperpredict {

static_assert(std::endian::native == std::endian::little,
              "grid serialization assumes a little-endian host");

namespace {

constexpr std::array<char, 4> kMagic{'H', 'P', 'G', 'R'};
constexpr std::uint32_t kFloat64 = 0;
constexpr std::uint32_t kUint32 = 1;

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("grid file truncated");
    return v;
}

void write_header(std::ostream& os, std::uint32_t dtype, Shape s, std::uint32_t chans) {
    os.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(os, dtype);
    put<std::uint32_t>(os, 2);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.ny));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.nx));
    put<std::uint32_t>(os, chans);
}

Shape read_header(std::istream& is, std::uint32_t dtype, std::uint32_t chans) {
    std::array<char, 4> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) throw DataError("not a grid file (bad magic)");
    if (get<std::uint32_t>(is) != dtype) throw DataError("grid file has unexpected element type");
    const auto dims = get<std::uint32_t>(is);
    if (dims != 2) throw DataError("only 2D grid files are supported");
    const auto ny = get<std::uint32_t>(is);
    const auto nx = get<std::uint32_t>(is);
    if (get<std::uint32_t>(is) != chans) throw DataError("grid file has unexpected channel count");
    if (nx == 0 || ny == 0 || nx > (1u << 16) || ny > (1u << 16)) {
        throw DataError("grid file has implausible axis sizes");
    }
    return {static_cast<int>(nx), static_cast<int>(ny)};
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot read " + path.string());
    return is;
}

}  // namespace

void write_grid(std::ostream& os, const ScalarGrid& grid) {
    write_header(os, kFloat64, grid.shape(), 1);
    os.write(reinterpret_cast<const char*>(grid.values().data()),
             static_cast<std::streamsize>(grid.size() * sizeof(double)));
}

void write_grid(std::ostream& os, const LabelGrid& grid) {
    write_header(os, kUint32, grid.shape(), 1);
    os.write(reinterpret_cast<const char*>(grid.values().data()),
             static_cast<std::streamsize>(grid.size() * sizeof(std::uint32_t)));
}

void write_grid(std::ostream& os, const DisplacementField& field) {
    write_header(os, kFloat64, field.shape(), 2);
    for (const Vec2& v : field) {
        put(os, v.x);
        put(os, v.y);
    }
}

ScalarGrid read_scalar_grid(std::istream& is) {
    const Shape s = read_header(is, kFloat64, 1);
    ScalarGrid g(s);
    is.read(reinterpret_cast<char*>(g.values().data()),
            static_cast<std::streamsize>(g.size() * sizeof(double)));
    if (!is) throw DataError("grid file truncated");
    return g;
}

LabelGrid read_label_grid(std::istream& is) {
    const Shape s = read_header(is, kUint32, 1);
    LabelGrid g(s);
    is.read(reinterpret_cast<char*>(g.values().data()),
            static_cast<std::streamsize>(g.size() * sizeof(std::uint32_t)));
    if (!is) throw DataError("grid file truncated");
    return g;
}

DisplacementField read_displacement_field(std::istream& is) {
    const Shape s = read_header(is, kFloat64, 2);
    DisplacementField f(s);
    for (Vec2& v : f) {
        v.x = get<double>(is);
        v.y = get<double>(is);
    }
    return f;
}

void save_grid(const std::filesystem::path& path, const ScalarGrid& grid) {
    auto os = open_out(path);
    write_grid(os, grid);
}

void save_grid(const std::filesystem::path& path, const LabelGrid& grid) {
    auto os = open_out(path);
    write_grid(os, grid);
}

void save_grid(const std::filesystem::path& path, const DisplacementField& field) {
    auto os = open_out(path);
    write_grid(os, field);
}

ScalarGrid load_scalar_grid(const std::filesystem::path& path) {
    auto is = open_in(path);
    return read_scalar_grid(is);
}

LabelGrid load_label_grid(const std::filesystem::path& path) {
    auto is = open_in(path);
    return read_label_grid(is);
}

DisplacementField load_displacement_field(const std::filesystem::path& path) {
    auto is = open_in(path);
    return read_displacement_field(is);
}

}  // namespace hyperpredict
