#pragma once

#include <optional>
#include <string>
#include <vector>

#include "refmesh/mesh.hpp"

namespace refmesh {

enum class MeshFormat { Obj, PlyAscii, PlyBinary };

struct LoadReport {
    int fan_triangulated_polygons = 0;
};

// Format inferred from extension (.obj / .ply). PLY variant detected from the header.
TriMesh load_mesh(const std::string& path, LoadReport* report = nullptr);

void save_mesh(const TriMesh& mesh, const std::string& path, MeshFormat format);

// Saves by extension: .obj -> OBJ, .ply -> binary little-endian PLY.
void save_mesh(const TriMesh& mesh, const std::string& path);

// Point cloud PLY, optionally with unit normals and a per-point `quality` scalar.
void save_point_cloud_ply(const std::vector<Vec3>& points,
                          const std::vector<Vec3>* normals,
                          const std::vector<double>* quality,
                          const std::string& path,
                          bool binary = true);

}  // namespace refmesh
