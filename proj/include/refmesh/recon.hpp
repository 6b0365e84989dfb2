#pragma once

#include <vector>

#include "refmesh/mesh.hpp"
#include "refmesh/rbf.hpp"

namespace refmesh {

struct OrientedPoints {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;  // unit length
};

// Area-weighted vertex normals of `frame` (components re-oriented outward
// first), carried through the map's Jacobian and re-normalized. Vertices on no
// face come back as zero vectors; callers drop them.
std::vector<Vec3> transport_normals(const TriMesh& frame, const RbfMap& map);

struct ReconParams {
    int resolution = 256;           // cells along the longest soup bbox axis
    int neighbors = 12;             // field support size
    double support_scale = 1.05;    // h = scale * distance to the k-th neighbor
    double min_component_frac = 0.005;
};

// Signed-field surface reconstruction: weighted point-to-plane field over the
// k nearest soup points (Wendland weights), isosurface extracted over a
// tetrahedral decomposition of the sample grid, small components culled.
// Output is closed; throws EmptyField when the soup is empty or no surface
// crossing exists.
TriMesh reconstruct(const OrientedPoints& soup, const ReconParams& params = {});

}  // namespace refmesh
