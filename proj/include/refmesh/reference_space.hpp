#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "refmesh/tracking.hpp"

namespace refmesh {

// K x K symmetric matrix of max-over-time center distances.
struct DistanceMatrix {
    int K = 0;
    std::vector<double> d;  // row-major

    double at(int i, int j) const { return d[static_cast<size_t>(i) * K + j]; }
    double& at(int i, int j) { return d[static_cast<size_t>(i) * K + j]; }
};

// d[i][j] = max over f in [f0, f1] of |c_i(f) - c_j(f)|.
DistanceMatrix build_distance_matrix(const CenterTrajectories& traj, int f0, int f1);

struct ReferenceCenters {
    std::vector<Vec3> points;
    double stress = 0.0;  // normalized: sqrt(raw / sum d_ij^2)
    bool converged = false;
};

struct MdsParams {
    double eps = 1e-20;  // absolute raw-stress decrease threshold
    int max_iter = 300;
    uint64_t seed = 0;  // fallback random init when the spectral init degenerates
};

// Stress-majorization (SMACOF) embedding into 3D, spectral initialization.
// Per-iteration raw stress is appended to stress_trace when given.
ReferenceCenters mds_embed(const DistanceMatrix& dm, const MdsParams& params = {},
                           std::vector<double>* stress_trace = nullptr);

// Least-squares proper rigid transform source -> target (SVD, reflection
// excluded). Throws DegenerateConfiguration for <3 points or collinear input.
RigidTransform rigid_align(const std::vector<Vec3>& source, const std::vector<Vec3>& target);

// RMSE between b and the best rigid fit of a onto b.
double procrustes_rmse(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// An MDS embedding is determined only up to isometry, including reflection.
// Mirrors `source` if that lowers the rigid residual against `target`, then
// returns the proper rigid alignment of the (possibly mirrored) points.
std::vector<Vec3> orient_and_align(const std::vector<Vec3>& source,
                                   const std::vector<Vec3>& target);

void save_distance_matrix(const DistanceMatrix& dm, const std::string& path);
DistanceMatrix load_distance_matrix(const std::string& path);
void save_reference_centers(const ReferenceCenters& rc, const std::string& path);
ReferenceCenters load_reference_centers(const std::string& path);

double normalized_stress(const DistanceMatrix& dm, const std::vector<Vec3>& points);

}  // namespace refmesh
