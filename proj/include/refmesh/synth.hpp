#pragma once

#include <cstdint>

#include "refmesh/mesh.hpp"

namespace refmesh {

// Watertight axis-aligned box with each face subdivided into a grid.
TriMesh make_box(const Vec3& lo, const Vec3& hi, int subdiv_x, int subdiv_y, int subdiv_z);
inline TriMesh make_box(const Vec3& lo, const Vec3& hi, int subdiv = 1) {
    return make_box(lo, hi, subdiv, subdiv, subdiv);
}

// Watertight UV sphere (poles welded).
TriMesh make_uv_sphere(const Vec3& center, double radius, int slices, int stacks);

// Concatenation; components stay disjoint.
TriMesh merge_meshes(const TriMesh& a, const TriMesh& b);

// Sphere approaching a static cuboid, tangent (quarter-voxel gap) at the middle
// frame, then separating back to the initial gap which holds for the last frames.
MeshSequence gen_collision(int frames, int resolution, uint64_t seed);

// frame f = per_frame_transform applied f times to base.
MeshSequence gen_rigid_motion(const TriMesh& base, int frames,
                              const RigidTransform& per_frame_transform);

// Straight bar at frame 0, bending progressively up to max_bend radians.
MeshSequence gen_articulated_bar(int frames, double max_bend);

}  // namespace refmesh
