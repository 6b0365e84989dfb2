#include "refmesh/serial.hpp"

#include <bit>
#include <fstream>

#include "refmesh/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary tables are little-endian; big-endian hosts need byte swaps");

namespace refmesh {

namespace {

void write_u64(std::ostream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint64_t read_u64(std::istream& in, const std::string& path) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw ParseError(path + ": truncated table header");
    return v;
}

}  // namespace

void write_point_table(const std::string& path, uint64_t rows, uint64_t cols,
                       const std::vector<Vec3>& data) {
    if (data.size() != rows * cols) throw Error("write_point_table: size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_u64(out, rows);
    write_u64(out, cols);
    for (const auto& p : data) {
        const double xyz[3] = {p.x(), p.y(), p.z()};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
    if (!out) throw IoError("write failed for " + path);
}

std::vector<Vec3> read_point_table(const std::string& path, uint64_t* rows, uint64_t* cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    const uint64_t r = read_u64(in, path);
    const uint64_t c = read_u64(in, path);
    std::vector<Vec3> data(r * c);
    for (auto& p : data) {
        double xyz[3];
        in.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
        if (!in) throw ParseError(path + ": truncated table body");
        p = Vec3(xyz[0], xyz[1], xyz[2]);
    }
    if (rows) *rows = r;
    if (cols) *cols = c;
    return data;
}

void write_scalar_table(const std::string& path, uint64_t rows, uint64_t cols,
                        const std::vector<double>& data) {
    if (data.size() != rows * cols) throw Error("write_scalar_table: size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_u64(out, rows);
    write_u64(out, cols);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!out) throw IoError("write failed for " + path);
}

std::vector<double> read_scalar_table(const std::string& path, uint64_t* rows, uint64_t* cols) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    const uint64_t r = read_u64(in, path);
    const uint64_t c = read_u64(in, path);
    std::vector<double> data(r * c);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw ParseError(path + ": truncated table body");
    if (rows) *rows = r;
    if (cols) *cols = c;
    return data;
}

}  // namespace refmesh
