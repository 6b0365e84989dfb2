#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "refmesh/rbf.hpp"

namespace refmesh {

struct PipelineConfig {
    std::string input_dir;
    std::string out_dir;
    int K = 1000;
    int gof_size = 5;
    int tracking_resolution = 512;
    double mds_eps = 1e-20;
    int mds_max_iter = 300;
    std::string kernel = "thin_plate_spline";  // or "tps_r2logr"
    double iou_voxel_size = 0.0;  // absolute; 0 -> iou_voxel_rel of the mapped bbox
    double iou_voxel_rel = 1.0 / 64.0;
    int recon_resolution = 256;
    uint64_t seed = 0;
    bool global_centers = false;
    std::string stop_after;  // "", track, mds, align, soup, recon, deform

    bool align_global_stage = true;
    int align_pattern_rounds = 10;
    int align_block_passes = 2;

    double salient_radius_rel = 0.05;
    double nms_radius_rel = 0.075;
    double saliency_floor_rel = 0.35;
    double neighborhood_radius_rel = 0.08;
    double sigma_th_rel = 0.25;
    double candidate_radius_rel = 0.25;
    double deform_alpha = 0.02;
    int deform_max_iter = 200;

    double hausdorff_density = 10.0;

    RbfKernel kernel_enum() const;
};

// Plain-text "key = value" lines; '#' starts a comment.
std::map<std::string, std::string> read_config_file(const std::string& path);

// Fills `out` from defaults plus the given overrides. Returns every violation
// found; an empty list means `out` is valid.
std::vector<std::string> validate_config(const std::map<std::string, std::string>& kv,
                                         PipelineConfig& out);

struct PipelineResult {
    std::filesystem::path out_dir;
    std::string report_json;  // also persisted as report.json
};

// track -> distance matrix -> MDS -> GoF split -> RBF map -> IoU optimize ->
// soup -> reconstruct -> keypoint match -> ARAP deform -> metrics.
// Artifacts persist per stage; existing artifacts are reused on resume.
PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace refmesh
