#pragma once

#include <vector>

#include "refmesh/keypoints.hpp"
#include "refmesh/mesh.hpp"

namespace refmesh {

struct DeformConstraint {
    int vertex = -1;
    Vec3 target = Vec3::Zero();
};

struct DeformParams {
    double alpha = 0.02;            // rotation-smoothing trade-off
    int max_iter = 200;
    double tol = 0.0;               // max-displacement stop; <=0 -> 1e-6 * bbox diag
    double constraint_weight_scale = 1e4;  // times the mean cotangent weight
};

struct DeformTrace {
    std::vector<double> energy;  // fit + smoothing + constraint penalty, per iteration
};

// Local-global as-rigid-as-possible deformation with cotangent weights and a
// neighbor rotation-smoothing term weighted by alpha times the surface area.
// Constraints are soft; components without any constraint are pinned at their
// rest centroid vertex. Output connectivity is identical to the input.
TriMesh arap_deform(const TriMesh& mesh, const std::vector<DeformConstraint>& constraints,
                    const DeformParams& params = {}, DeformTrace* trace = nullptr);

struct RemeshParams {
    double salient_radius_rel = 0.05;       // x ref bbox diag
    double nms_radius_rel = 0.075;
    double saliency_floor_rel = 0.35;       // x strongest saliency per mesh
    double neighborhood_radius_rel = 0.08;  // x ref bbox diag
    double sigma_th_rel = 0.25;             // x neighborhood radius
    double candidate_radius_rel = 0.25;     // x ref bbox diag; <=0 -> all candidates
    int min_matches = 4;
    DeformParams deform;
};

// Keypoint detection on both meshes, rotation-constrained matching, then
// keypoint-driven deformation of `ref` toward `frame`. Throws
// InsufficientMatches when fewer than min_matches pairs survive the filter.
TriMesh remesh_frame(const TriMesh& ref, const TriMesh& frame, const RemeshParams& params = {},
                     KeypointMatchSet* out_matches = nullptr);

}  // namespace refmesh
