#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "refmesh/recon.hpp"
#include "refmesh/reference_space.hpp"
#include "refmesh/tracking.hpp"
#include "refmesh/voxel.hpp"

namespace refmesh {

// One group of frames sharing a reference-center set and an R-frame target.
struct GroupPlan {
    int group_index = 0;
    int f0 = 0, f1 = 0;  // inclusive frame range
    int r_frame = 0;     // middle frame of the range
    ReferenceCenters reference_centers;              // X_g, aligned to the R-frame centers
    std::vector<std::vector<Vec3>> optimized_centers;  // [f - f0] -> K targets

    int frame_count() const { return f1 - f0 + 1; }
};

// Consecutive non-overlapping ranges; the last group may be short; r_frame is
// the middle frame of each range.
std::vector<GroupPlan> make_groups(int frame_count, int gof_size);

struct AlignParams {
    double voxel_size = 0.0;        // IoU grid cell; <= 0 uses voxel_rel
    double voxel_rel = 1.0 / 64.0;  // fraction of the mapped bbox longest axis
    bool global_stage = true;       // 7-parameter similarity pre-alignment
    int pattern_rounds = 10;        // step-halving rounds of the global stage
    int block_passes = 2;           // sweeps of randomized block descent
    double initial_step_voxels = 1.0;
    int block_subset = 0;           // centers touched per pass; 0 = all
    uint64_t seed = 0;
    RbfKernel kernel = RbfKernel::ThinPlateSpline;
};

struct AlignTraceEntry {
    int frame = 0;
    int iter = 0;
    double iou = 0.0;
};

// Shared per-group state: the fixed voxel frame, the voxelized mapped R-frame,
// and factored interpolation systems per frame.
class GroupAligner {
public:
    GroupAligner(const MeshSequence& seq, const CenterTrajectories& traj, const GroupPlan& plan,
                 const AlignParams& params);

    // Maximizes IoU against the mapped R-frame over per-center offsets of the
    // frame's targets. Never returns a configuration worse than X_g.
    std::vector<Vec3> optimize_frame(int frame, std::vector<AlignTraceEntry>* trace = nullptr);

    // IoU of frame f mapped with the given targets, against the mapped R-frame.
    double evaluate_iou(int frame, const std::vector<Vec3>& targets) const;

    const GridFrame& grid() const { return grid_; }
    double voxel_size() const { return grid_.voxel_size; }

private:
    const MeshSequence& seq_;
    const CenterTrajectories& traj_;
    const GroupPlan& plan_;
    AlignParams params_;
    GridFrame grid_;
    VoxelGrid r_grid_;
    struct FrameMapper {
        std::unique_ptr<TpsSystem> system;
        std::unique_ptr<RbfBasis> basis;
    };
    std::vector<FrameMapper> mappers_;  // per frame in range

    VoxelGrid voxelize_mapped(int frame, const std::vector<Vec3>& targets) const;
};

// Runs the aligner over every non-R frame of the plan, filling
// plan.optimized_centers (the R-frame slot holds X_g itself).
void optimize_group_alignment(const MeshSequence& seq, const CenterTrajectories& traj,
                              GroupPlan& plan, const AlignParams& params,
                              std::vector<AlignTraceEntry>* trace = nullptr);

// Concatenated mapped vertices of all frames with transported normals,
// deduplicated within 1e-7; zero-normal vertices are dropped.
OrientedPoints build_group_soup(const MeshSequence& seq, const CenterTrajectories& traj,
                                const GroupPlan& plan,
                                RbfKernel kernel = RbfKernel::ThinPlateSpline);

void save_alignment_trace_csv(const std::vector<AlignTraceEntry>& trace, const std::string& path);

}  // namespace refmesh
