#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "refmesh/geometry.hpp"

namespace refmesh {

// Binary table of 3D points: header = two little-endian u64 (rows, cols),
// body = rows*cols*3 little-endian f64.
void write_point_table(const std::string& path, uint64_t rows, uint64_t cols,
                       const std::vector<Vec3>& data);
std::vector<Vec3> read_point_table(const std::string& path, uint64_t* rows, uint64_t* cols);

// Same header, body = rows*cols little-endian f64.
void write_scalar_table(const std::string& path, uint64_t rows, uint64_t cols,
                        const std::vector<double>& data);
std::vector<double> read_scalar_table(const std::string& path, uint64_t* rows, uint64_t* cols);

}  // namespace refmesh
