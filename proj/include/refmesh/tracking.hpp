#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "refmesh/mesh.hpp"
#include "refmesh/voxel.hpp"

namespace refmesh {

// K tracked volume-center trajectories over N frames. positions[i*N + f] is
// center i at frame f. The neighbor graph is fixed over the whole sequence.
struct CenterTrajectories {
    int K = 0;
    int N = 0;
    std::vector<Vec3> positions;
    std::vector<std::vector<int>> neighbor_graph;

    Vec3& at(int i, int f) { return positions[static_cast<size_t>(i) * N + f]; }
    const Vec3& at(int i, int f) const { return positions[static_cast<size_t>(i) * N + f]; }
};

struct CenterInit {
    std::vector<Vec3> centers;
    std::vector<std::vector<int>> graph;
};

struct TrackingParams {
    double lambda = 1.0;      // neighbor-rigidity weight
    double nu = 1.0;          // interior spring weight
    int max_iters = 50;
    double rel_tol = 1e-6;
    int lloyd_iters = 300;  // cap; stops at stationarity
    int polish_iters = 100;   // frame-0 relaxation to a stationary layout
    double polish_tol = 1e-9;
};

// Per-frame solver energies, one series per frame (non-increasing within each).
struct TrackingTrace {
    std::vector<std::vector<double>> frame_energy;
};

// Farthest-point seeding over occupied voxel centers, Lloyd relaxation
// restricted to the interior, then a neighbor graph linking each center to its
// nearest peers reachable through the volume.
CenterInit initialize_centers(const TriMesh& mesh, int K, int resolution, uint64_t seed);

// <=8 nearest neighbors per center whose connecting segment stays inside the
// occupancy; symmetrized, then patched so centers sharing a volume component
// form one graph component.
std::vector<std::vector<int>> build_neighbor_graph(const std::vector<Vec3>& centers,
                                                   const VoxelGrid& grid);

// Propagates frame-0 centers through all frames by alternating assignment /
// rotation / position steps on a uniformity + rigidity energy, warm-starting
// each frame from the previous one.
CenterTrajectories track_sequence(const MeshSequence& seq, int K, int resolution, uint64_t seed,
                                  const TrackingParams& params = {},
                                  TrackingTrace* trace = nullptr);

// Tracking energy of an arbitrary center configuration against one frame,
// with per-voxel assignment, spring targets and per-center rotations all chosen
// optimally for that configuration. Used to compare solver output against
// closed-form candidates.
double evaluate_tracking_energy(const std::vector<Vec3>& centers, const TriMesh& frame,
                                int resolution, const std::vector<std::vector<int>>& graph,
                                const std::vector<Vec3>& rest,
                                const TrackingParams& params = {});

void save_trajectories(const CenterTrajectories& traj, const std::string& path);
// Re-reads the binary table; the neighbor graph is left empty (rebuild it from
// frame 0 with build_neighbor_graph).
CenterTrajectories load_trajectories(const std::string& path);
void save_trajectories_csv(const CenterTrajectories& traj, const std::string& path);

}  // namespace refmesh
