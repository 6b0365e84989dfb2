#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "refmesh/mesh.hpp"

namespace refmesh {

// Placement of a voxel lattice in space. Two grids are index-compatible iff
// their frames agree.
struct GridFrame {
    Vec3 origin = Vec3::Zero();
    double voxel_size = 1.0;
    std::array<int, 3> dims = {0, 0, 0};

    size_t cell_count() const {
        return static_cast<size_t>(dims[0]) * dims[1] * dims[2];
    }
    size_t cell_index(int i, int j, int k) const {
        return static_cast<size_t>(i) + static_cast<size_t>(dims[0]) * (j + static_cast<size_t>(dims[1]) * k);
    }
    Vec3 cell_center(int i, int j, int k) const {
        return origin + voxel_size * Vec3(i + 0.5, j + 0.5, k + 0.5);
    }
    // Grid coordinates of the cell containing p, or nullopt when outside.
    std::optional<std::array<int, 3>> cell_of(const Vec3& p) const {
        const Vec3 rel = (p - origin) / voxel_size;
        const int i = static_cast<int>(std::floor(rel.x()));
        const int j = static_cast<int>(std::floor(rel.y()));
        const int k = static_cast<int>(std::floor(rel.z()));
        if (i < 0 || j < 0 || k < 0 || i >= dims[0] || j >= dims[1] || k >= dims[2])
            return std::nullopt;
        return std::array<int, 3>{i, j, k};
    }
    bool same_as(const GridFrame& other) const {
        return dims == other.dims && voxel_size == other.voxel_size && origin == other.origin;
    }
};

// Box padded by one voxel on all sides; cell size set by the count along the
// longest box axis.
GridFrame grid_from_resolution(const Aabb& box, int resolution);
GridFrame grid_from_voxel_size(const Aabb& box, double voxel_size);

// Interior-occupancy grid: a cell is occupied iff its center lies inside the
// enclosed volume of the source mesh.
struct VoxelGrid {
    GridFrame frame;
    std::vector<uint64_t> words;

    bool occupied(size_t cell) const {
        return (words[cell >> 6] >> (cell & 63)) & 1u;
    }
    void set(size_t cell) { words[cell >> 6] |= uint64_t(1) << (cell & 63); }
    size_t occupied_count() const;
};

// Parity inside test over the mesh's triangles, shared by voxelization and
// interior sampling. Rays run along +x; near-degenerate hits retried with a
// deterministic perturbation of the ray's (y, z).
class InteriorTester {
public:
    InteriorTester(const TriMesh& mesh, const GridFrame& frame);

    bool inside(const Vec3& p) const;

    // All crossing x-values for the column ray at (y, z), sorted ascending.
    // Deterministically perturbs (y, z) when a triangle is hit near an edge.
    std::vector<double> column_crossings(double y, double z) const;

    const GridFrame& frame() const { return frame_; }

private:
    std::vector<double> crossings_for(double y, double z, bool* degenerate) const;

    const std::vector<Vec3>& vertices_;
    std::vector<std::array<int, 3>> faces_;
    GridFrame frame_;
    // triangles binned by the (y,z) footprint of their projection
    std::vector<std::vector<int32_t>> column_tris_;
    double scale_ = 1.0;
};

// Throws NotWatertight / DegenerateExtent. Grid box = mesh bounding box padded
// by one voxel.
VoxelGrid voxelize_interior(const TriMesh& mesh, int resolution);
VoxelGrid voxelize_interior(const TriMesh& mesh, double voxel_size);
// Voxelize on an externally fixed frame (the common-grid rule for IoU).
VoxelGrid voxelize_interior(const TriMesh& mesh, const GridFrame& frame);

// |intersection| / |union|; 1.0 when both grids are empty.
// Throws GridMismatch unless the frames agree.
double iou(const VoxelGrid& a, const VoxelGrid& b);

// Uniform over occupied voxels, jittered within the voxel, rejected against
// the inside test. Deterministic per seed.
std::vector<Vec3> sample_interior(const TriMesh& mesh, int count, uint64_t seed);

std::vector<Vec3> occupied_centers(const VoxelGrid& grid);
std::vector<size_t> occupied_cells(const VoxelGrid& grid);

// 6-connected flood-fill labels over occupied cells (-1 for empty cells).
// Returns the component count.
int volume_components(const VoxelGrid& grid, std::vector<int>& labels);

void dump_occupied_ply(const VoxelGrid& grid, const std::string& path);

}  // namespace refmesh
