#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "refmesh/kdtree.hpp"
#include "refmesh/mesh.hpp"

namespace refmesh {

// Closest distance from a point to a mesh. Uses a triangle BVH when the mesh
// has faces, otherwise a kd-tree over the vertices (point-cloud mode).
class SurfaceDistance {
public:
    explicit SurfaceDistance(const TriMesh& mesh);

    double distance(const Vec3& p) const;

private:
    struct Node {
        Aabb box;
        int left = -1, right = -1;
        int first = 0, count = 0;  // leaf triangle range
    };

    double query(int node, const Vec3& p, double best) const;

    std::vector<Vec3> vertices_;
    std::vector<std::array<int, 3>> faces_;
    std::vector<int> tri_order_;
    std::vector<Node> nodes_;
    KdTree3 vertex_tree_;  // point-cloud fallback
    bool use_bvh_ = false;
};

struct HausdorffResult {
    double forward = 0.0;
    double backward = 0.0;
    double symmetric = 0.0;
};

// Two-sided Hausdorff between surfaces, approximated by vertex samples plus
// `samples_per_mean_area` seeded uniform samples per mean triangle area.
// density = 0 compares vertex sets only (exact for point clouds).
HausdorffResult hausdorff(const TriMesh& a, const TriMesh& b,
                          double samples_per_mean_area = 10.0, uint64_t seed = 0);

// Per-vertex distance from `deformed` vertices to the `target` surface.
std::vector<double> vertex_error_field(const TriMesh& deformed, const TriMesh& target);

// Distance from p to triangle (a, b, c).
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace refmesh
