#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "refmesh/mesh.hpp"

namespace refmesh {

struct Keypoint {
    Vec3 position;
    int vertex_index = -1;
    double saliency = 0.0;  // smallest covariance eigenvalue
};

struct IssParams {
    double salient_radius = 0.0;  // required, model units
    double nms_radius = 0.0;      // required
    double gamma21 = 0.975;
    double gamma32 = 0.975;
    int min_neighbors = 6;
    // drop candidates below this fraction of the strongest saliency; filters
    // extraction-scale surface texture on reconstructed meshes
    double min_saliency_rel = 0.0;
};

// Covariance-eigenvalue keypoints: lambda2/lambda1 < gamma21 and
// lambda3/lambda2 < gamma32 with a strictly 3D spread, non-max suppressed on
// the smallest eigenvalue. Deterministic.
std::vector<Keypoint> detect_keypoints(const TriMesh& mesh, const IssParams& params);

struct KeypointMatch {
    int ref_vertex = -1;
    int frame_vertex = -1;
    double error = 0.0;
    Vec3 rotation = Vec3::Zero();  // axis-angle of the aligning rotation
};

struct KeypointMatchSet {
    std::vector<KeypointMatch> pairs;
    double sigma_th = 0.0;
};

struct MatchParams {
    double neighborhood_radius = 0.0;  // required
    double sigma_th = 0.0;             // required; pairs above it are dropped
    // candidate gate after whole-mesh centroid pre-alignment; <=0 means all
    double candidate_radius = 0.0;
    int refine_iters = 80;
};

// Distance between `fixed` and `moving` rotated about the shared origin:
// mean closest-point distance fixed -> rotated(moving) plus the two-sided
// point-set Hausdorff distance. Sets are given relative to their keypoints.
double neighborhood_error(const std::vector<Vec3>& fixed, const std::vector<Vec3>& moving,
                          const Mat3& rotation);

// Minimum of neighborhood_error over rotations: multi-start (the 24 octahedral
// rotations) with simplex refinement in axis-angle coordinates.
double min_rotation_error(const std::vector<Vec3>& fixed, const std::vector<Vec3>& moving,
                          Vec3* best_rotation = nullptr, int refine_iters = 80);

// For each reference keypoint, the lowest-error frame keypoint whose rotated
// neighborhood matches; pairs above sigma_th dropped; one-to-one by ascending
// error.
KeypointMatchSet match_keypoints(const TriMesh& ref, const std::vector<Keypoint>& ref_keypoints,
                                 const TriMesh& frame,
                                 const std::vector<Keypoint>& frame_keypoints,
                                 const MatchParams& params);

void save_matches_csv(const KeypointMatchSet& matches, const std::string& path);

}  // namespace refmesh
