#include "refmesh/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "refmesh/alignment.hpp"
#include "refmesh/deform.hpp"
#include "refmesh/errors.hpp"
#include "refmesh/mesh_io.hpp"
#include "refmesh/metrics.hpp"
#include "refmesh/serial.hpp"

namespace refmesh {

namespace fs = std::filesystem;
using nlohmann::json;

RbfKernel PipelineConfig::kernel_enum() const {
    if (kernel == "thin_plate_spline") return RbfKernel::ThinPlateSpline;
    if (kernel == "tps_r2logr") return RbfKernel::ThinPlateR2LogR;
    throw ConfigError("unknown kernel '" + kernel + "'");
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw ParseError(path + ":" + std::to_string(line_no) + ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ParseError(path + ":" + std::to_string(line_no) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

std::vector<std::string> validate_config(const std::map<std::string, std::string>& kv,
                                         PipelineConfig& out) {
    out = PipelineConfig{};
    std::vector<std::string> errors;

    auto parse_int = [&](const std::string& key, int& slot) {
        try {
            slot = std::stoi(kv.at(key));
        } catch (const std::exception&) {
            errors.push_back(key + ": not an integer ('" + kv.at(key) + "')");
        }
    };
    auto parse_double = [&](const std::string& key, double& slot) {
        try {
            slot = std::stod(kv.at(key));
        } catch (const std::exception&) {
            errors.push_back(key + ": not a number ('" + kv.at(key) + "')");
        }
    };
    auto parse_bool = [&](const std::string& key, bool& slot) {
        const std::string& v = kv.at(key);
        if (v == "true" || v == "1")
            slot = true;
        else if (v == "false" || v == "0")
            slot = false;
        else
            errors.push_back(key + ": not a boolean ('" + v + "')");
    };

    for (const auto& [key, value] : kv) {
        if (key == "input_dir") out.input_dir = value;
        else if (key == "out_dir") out.out_dir = value;
        else if (key == "K") parse_int(key, out.K);
        else if (key == "gof_size") parse_int(key, out.gof_size);
        else if (key == "tracking_resolution") parse_int(key, out.tracking_resolution);
        else if (key == "mds_eps") parse_double(key, out.mds_eps);
        else if (key == "mds_max_iter") parse_int(key, out.mds_max_iter);
        else if (key == "kernel") out.kernel = value;
        else if (key == "iou_voxel_size") parse_double(key, out.iou_voxel_size);
        else if (key == "iou_voxel_rel") parse_double(key, out.iou_voxel_rel);
        else if (key == "recon_resolution") parse_int(key, out.recon_resolution);
        else if (key == "seed") {
            try {
                out.seed = std::stoull(value);
            } catch (const std::exception&) {
                errors.push_back("seed: not an integer ('" + value + "')");
            }
        } else if (key == "global_centers") parse_bool(key, out.global_centers);
        else if (key == "stop_after") out.stop_after = value;
        else if (key == "align_global_stage") parse_bool(key, out.align_global_stage);
        else if (key == "align_pattern_rounds") parse_int(key, out.align_pattern_rounds);
        else if (key == "align_block_passes") parse_int(key, out.align_block_passes);
        else if (key == "salient_radius_rel") parse_double(key, out.salient_radius_rel);
        else if (key == "nms_radius_rel") parse_double(key, out.nms_radius_rel);
        else if (key == "saliency_floor_rel") parse_double(key, out.saliency_floor_rel);
        else if (key == "neighborhood_radius_rel") parse_double(key, out.neighborhood_radius_rel);
        else if (key == "sigma_th_rel") parse_double(key, out.sigma_th_rel);
        else if (key == "candidate_radius_rel") parse_double(key, out.candidate_radius_rel);
        else if (key == "deform_alpha") parse_double(key, out.deform_alpha);
        else if (key == "deform_max_iter") parse_int(key, out.deform_max_iter);
        else if (key == "hausdorff_density") parse_double(key, out.hausdorff_density);
        else errors.push_back("unknown key '" + key + "'");
    }

    if (out.K < 1) errors.push_back("K must be >= 1");
    if (out.gof_size < 1) errors.push_back("gof_size must be >= 1");
    if (out.tracking_resolution < 2) errors.push_back("tracking_resolution must be >= 2");
    if (out.mds_eps <= 0.0) errors.push_back("mds_eps must be positive");
    if (out.mds_max_iter < 1) errors.push_back("mds_max_iter must be >= 1");
    if (out.kernel != "thin_plate_spline" && out.kernel != "tps_r2logr")
        errors.push_back("kernel must be thin_plate_spline or tps_r2logr");
    if (out.iou_voxel_size < 0.0) errors.push_back("iou_voxel_size must be >= 0");
    if (out.iou_voxel_rel <= 0.0 && out.iou_voxel_size <= 0.0)
        errors.push_back("one of iou_voxel_rel / iou_voxel_size must be positive");
    if (out.recon_resolution < 8) errors.push_back("recon_resolution must be >= 8");
    if (!out.stop_after.empty()) {
        const std::vector<std::string> stages = {"track", "mds", "align", "soup", "recon",
                                                 "deform"};
        if (std::find(stages.begin(), stages.end(), out.stop_after) == stages.end())
            errors.push_back("stop_after must be one of track|mds|align|soup|recon|deform");
    }
    if (out.deform_alpha < 0.0) errors.push_back("deform_alpha must be >= 0");
    if (out.deform_max_iter < 1) errors.push_back("deform_max_iter must be >= 1");
    return errors;
}

namespace {

MeshSequence load_sequence(const std::string& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) throw StageError("input: '" + dir + "' is not a directory");
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".obj" || ext == ".ply") files.push_back(entry.path());
    }
    if (files.empty()) throw StageError("input: no .obj/.ply files in " + dir);
    std::sort(files.begin(), files.end());

    MeshSequence seq;
    seq.name = fs::path(dir).filename().string();
    for (size_t f = 0; f < files.size(); ++f) {
        TriMesh mesh = load_mesh(files[f].string());
        mesh.frame_index = static_cast<int>(f);
        const auto report = validate_watertight(mesh);
        if (!report.watertight)
            throw StageError("input: frame " + std::to_string(f) + " (" +
                             files[f].filename().string() + ") is not watertight: " +
                             std::to_string(report.boundary_edge_count) + " boundary edges");
        seq.frames.push_back(std::move(mesh));
    }
    return seq;
}

std::vector<Vec3> centers_at(const CenterTrajectories& traj, int frame) {
    std::vector<Vec3> out(traj.K);
    for (int i = 0; i < traj.K; ++i) out[i] = traj.at(i, frame);
    return out;
}

struct StageLog {
    std::ostream* out = nullptr;
    void line(const std::string& text) const {
        if (out) *out << "[refmesh] " << text << std::endl;
    }
};

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config) {
    StageLog log{&std::cout};
    const fs::path out_dir(config.out_dir.empty() ? "out" : config.out_dir);
    fs::create_directories(out_dir);

    const MeshSequence seq = load_sequence(config.input_dir);
    const int n = static_cast<int>(seq.frames.size());
    log.line("loaded " + std::to_string(n) + " frames from " + config.input_dir);

    // manifest first: config, seed, stage versions
    {
        json manifest;
        manifest["seed"] = config.seed;
        manifest["frames"] = n;
        manifest["stage_versions"] = {{"track", 1}, {"mds", 1},    {"align", 1},
                                      {"soup", 1},  {"recon", 1},  {"deform", 1}};
        json cfg;
        cfg["K"] = config.K;
        cfg["gof_size"] = config.gof_size;
        cfg["tracking_resolution"] = config.tracking_resolution;
        cfg["mds_eps"] = config.mds_eps;
        cfg["mds_max_iter"] = config.mds_max_iter;
        cfg["kernel"] = config.kernel;
        cfg["iou_voxel_size"] = config.iou_voxel_size;
        cfg["iou_voxel_rel"] = config.iou_voxel_rel;
        cfg["recon_resolution"] = config.recon_resolution;
        cfg["global_centers"] = config.global_centers;
        cfg["align_global_stage"] = config.align_global_stage;
        cfg["align_pattern_rounds"] = config.align_pattern_rounds;
        cfg["align_block_passes"] = config.align_block_passes;
        cfg["salient_radius_rel"] = config.salient_radius_rel;
        cfg["nms_radius_rel"] = config.nms_radius_rel;
        cfg["saliency_floor_rel"] = config.saliency_floor_rel;
        cfg["neighborhood_radius_rel"] = config.neighborhood_radius_rel;
        cfg["sigma_th_rel"] = config.sigma_th_rel;
        cfg["candidate_radius_rel"] = config.candidate_radius_rel;
        cfg["deform_alpha"] = config.deform_alpha;
        cfg["deform_max_iter"] = config.deform_max_iter;
        cfg["hausdorff_density"] = config.hausdorff_density;
        manifest["config"] = cfg;
        std::ofstream mf(out_dir / "manifest.json");
        mf << manifest.dump(2) << "\n";
    }

    // ---- stage: tracking
    CenterTrajectories traj;
    const fs::path traj_path = out_dir / "trajectories.bin";
    try {
        if (fs::exists(traj_path)) {
            traj = load_trajectories(traj_path.string());
            if (traj.N != n || traj.K != config.K)
                throw StageError("track: existing trajectories.bin does not match the input");
            traj.neighbor_graph = build_neighbor_graph(
                centers_at(traj, 0),
                voxelize_interior(seq.frames[0], config.tracking_resolution));
            log.line("track: resumed from " + traj_path.string());
        } else {
            traj = track_sequence(seq, config.K, config.tracking_resolution, config.seed);
            save_trajectories(traj, traj_path.string());
            save_trajectories_csv(traj, (out_dir / "trajectories.csv").string());
            log.line("track: " + std::to_string(traj.K) + " centers over " +
                     std::to_string(traj.N) + " frames");
        }
    } catch (const Error& e) {
        throw StageError("track: " + std::string(e.what()));
    }
    PipelineResult result;
    result.out_dir = out_dir;
    if (config.stop_after == "track") return result;

    // ---- stage: reference centers (per GoF, or once with global_centers)
    std::vector<GroupPlan> groups = make_groups(n, config.gof_size);
    ReferenceCenters global_embedding;
    if (config.global_centers) {
        try {
            const fs::path dm_path = out_dir / "dmatrix.bin";
            const fs::path rc_path = out_dir / "refcenters.bin";
            if (fs::exists(rc_path)) {
                global_embedding = load_reference_centers(rc_path.string());
            } else {
                const DistanceMatrix dm = build_distance_matrix(traj, 0, n - 1);
                save_distance_matrix(dm, dm_path.string());
                MdsParams mds;
                mds.eps = config.mds_eps;
                mds.max_iter = config.mds_max_iter;
                mds.seed = config.seed;
                global_embedding = mds_embed(dm, mds);
                save_reference_centers(global_embedding, rc_path.string());
            }
        } catch (const Error& e) {
            throw StageError("mds: " + std::string(e.what()));
        }
    }

    json report;
    report["groups"] = json::array();

    for (auto& plan : groups) {
        const fs::path gdir = out_dir / ("group_" + std::to_string(plan.group_index));
        fs::create_directories(gdir);
        const std::string gtag = "group " + std::to_string(plan.group_index);
        try {
            const fs::path xg_path = gdir / "xg.bin";
            if (fs::exists(xg_path)) {
                plan.reference_centers = load_reference_centers(xg_path.string());
                log.line("mds: " + gtag + " resumed");
            } else {
                ReferenceCenters embedding;
                if (config.global_centers) {
                    embedding = global_embedding;
                } else {
                    const DistanceMatrix dm = build_distance_matrix(traj, plan.f0, plan.f1);
                    save_distance_matrix(dm, (gdir / "dmatrix.bin").string());
                    MdsParams mds;
                    mds.eps = config.mds_eps;
                    mds.max_iter = config.mds_max_iter;
                    mds.seed = config.seed;
                    embedding = mds_embed(dm, mds);
                    save_reference_centers(embedding, (gdir / "refcenters.bin").string());
                }
                plan.reference_centers = embedding;
                plan.reference_centers.points =
                    orient_and_align(embedding.points, centers_at(traj, plan.r_frame));
                save_reference_centers(plan.reference_centers, xg_path.string());
                log.line("mds: " + gtag + " stress " +
                         std::to_string(plan.reference_centers.stress));
            }
        } catch (const Error& e) {
            throw StageError("mds: " + gtag + ": " + e.what());
        }
    }
    if (config.stop_after == "mds") return result;

    for (auto& plan : groups) {
        const fs::path gdir = out_dir / ("group_" + std::to_string(plan.group_index));
        const std::string gtag = "group " + std::to_string(plan.group_index);
        json greport;
        greport["group"] = plan.group_index;
        greport["frames"] = {plan.f0, plan.f1};
        greport["r_frame"] = plan.r_frame;
        greport["stress"] = plan.reference_centers.stress;

        // ---- stage: IoU alignment
        try {
            AlignParams align;
            align.voxel_size = config.iou_voxel_size;
            align.voxel_rel = config.iou_voxel_rel;
            align.global_stage = config.align_global_stage;
            align.pattern_rounds = config.align_pattern_rounds;
            align.block_passes = config.align_block_passes;
            align.seed = config.seed;
            align.kernel = config.kernel_enum();

            bool resumed = true;
            plan.optimized_centers.assign(plan.frame_count(), plan.reference_centers.points);
            for (int f = plan.f0; f <= plan.f1 && resumed; ++f) {
                if (f == plan.r_frame) continue;
                resumed = fs::exists(gdir / ("xprime_f" + std::to_string(f) + ".bin"));
            }
            if (resumed) {
                for (int f = plan.f0; f <= plan.f1; ++f) {
                    if (f == plan.r_frame) continue;
                    uint64_t rows = 0, cols = 0;
                    plan.optimized_centers[f - plan.f0] = read_point_table(
                        (gdir / ("xprime_f" + std::to_string(f) + ".bin")).string(), &rows, &cols);
                }
                log.line("align: " + gtag + " resumed");
            } else {
                std::vector<AlignTraceEntry> trace;
                optimize_group_alignment(seq, traj, plan, align, &trace);
                for (int f = plan.f0; f <= plan.f1; ++f) {
                    if (f == plan.r_frame) continue;
                    write_point_table((gdir / ("xprime_f" + std::to_string(f) + ".bin")).string(),
                                      plan.optimized_centers[f - plan.f0].size(), 1,
                                      plan.optimized_centers[f - plan.f0]);
                }
                save_alignment_trace_csv(trace, (gdir / "iou_trace.csv").string());
                log.line("align: " + gtag + " done");
            }
            {
                GroupAligner aligner(seq, traj, plan, align);
                json ious = json::object();
                for (int f = plan.f0; f <= plan.f1; ++f)
                    ious[std::to_string(f)] =
                        aligner.evaluate_iou(f, plan.optimized_centers[f - plan.f0]);
                greport["iou_final"] = ious;
            }
        } catch (const Error& e) {
            throw StageError("align: " + gtag + ": " + e.what());
        }
        if (config.stop_after == "align") {
            report["groups"].push_back(greport);
            continue;
        }

        // ---- stage: soup
        OrientedPoints soup;
        try {
            const fs::path pts_path = gdir / "soup_points.bin";
            const fs::path nrm_path = gdir / "soup_normals.bin";
            if (fs::exists(pts_path) && fs::exists(nrm_path)) {
                uint64_t rows = 0, cols = 0;
                soup.points = read_point_table(pts_path.string(), &rows, &cols);
                soup.normals = read_point_table(nrm_path.string(), &rows, &cols);
                log.line("soup: " + gtag + " resumed (" + std::to_string(soup.points.size()) +
                         " points)");
            } else {
                soup = build_group_soup(seq, traj, plan, config.kernel_enum());
                write_point_table(pts_path.string(), soup.points.size(), 1, soup.points);
                write_point_table(nrm_path.string(), soup.normals.size(), 1, soup.normals);
                save_point_cloud_ply(soup.points, &soup.normals, nullptr,
                                     (gdir / "soup.ply").string());
                log.line("soup: " + gtag + " " + std::to_string(soup.points.size()) + " points");
            }
        } catch (const Error& e) {
            throw StageError("soup: " + gtag + ": " + e.what());
        }
        greport["soup_points"] = soup.points.size();
        if (config.stop_after == "soup") {
            report["groups"].push_back(greport);
            continue;
        }

        // ---- stage: reconstruction
        TriMesh ref;
        try {
            const fs::path ref_path = gdir / "ref.obj";
            if (fs::exists(ref_path)) {
                ref = load_mesh(ref_path.string());
                log.line("recon: " + gtag + " resumed");
            } else {
                ReconParams recon;
                recon.resolution = config.recon_resolution;
                ref = reconstruct(soup, recon);
                save_mesh(ref, ref_path.string(), MeshFormat::Obj);
                log.line("recon: " + gtag + " " + std::to_string(ref.vertices.size()) +
                         " vertices");
            }
            const auto watertight = validate_watertight(ref);
            int components = 0;
            face_components(ref, &components);
            greport["ref_vertices"] = ref.vertices.size();
            greport["ref_faces"] = ref.faces.size();
            greport["ref_watertight"] = watertight.watertight;
            greport["ref_components"] = components;
            const double gap = min_component_gap(ref);
            greport["ref_min_gap"] = std::isfinite(gap) ? gap : -1.0;
        } catch (const Error& e) {
            throw StageError("recon: " + gtag + ": " + e.what());
        }
        if (config.stop_after == "recon") {
            report["groups"].push_back(greport);
            continue;
        }

        // ---- stage: deformation + metrics
        try {
            RemeshParams remesh;
            remesh.salient_radius_rel = config.salient_radius_rel;
            remesh.nms_radius_rel = config.nms_radius_rel;
            remesh.saliency_floor_rel = config.saliency_floor_rel;
            remesh.neighborhood_radius_rel = config.neighborhood_radius_rel;
            remesh.sigma_th_rel = config.sigma_th_rel;
            remesh.candidate_radius_rel = config.candidate_radius_rel;
            remesh.deform.alpha = config.deform_alpha;
            remesh.deform.max_iter = config.deform_max_iter;

            json hd = json::object();
            double worst = 0.0;
            for (int f = plan.f0; f <= plan.f1; ++f) {
                const fs::path dpath = gdir / ("deformed_f" + std::to_string(f) + ".obj");
                TriMesh deformed;
                if (fs::exists(dpath)) {
                    deformed = load_mesh(dpath.string());
                } else {
                    KeypointMatchSet matches;
                    deformed = remesh_frame(ref, seq.frames[f], remesh, &matches);
                    save_mesh(deformed, dpath.string(), MeshFormat::Obj);
                    save_matches_csv(matches,
                                     (gdir / ("matches_f" + std::to_string(f) + ".csv")).string());
                }
                const auto field = vertex_error_field(deformed, seq.frames[f]);
                save_point_cloud_ply(deformed.vertices, nullptr, &field,
                                     (gdir / ("error_f" + std::to_string(f) + ".ply")).string());
                const auto h =
                    hausdorff(deformed, seq.frames[f], config.hausdorff_density, config.seed);
                hd[std::to_string(f)] = h.symmetric;
                worst = std::max(worst, h.symmetric);
            }
            greport["hausdorff_sym"] = hd;
            greport["hausdorff_sym_max"] = worst;
            log.line("deform: " + gtag + " worst symmetric Hausdorff " + std::to_string(worst));
        } catch (const Error& e) {
            throw StageError("deform: " + gtag + ": " + e.what());
        }
        report["groups"].push_back(greport);
    }

    result.report_json = report.dump(2);
    {
        std::ofstream rf(out_dir / "report.json");
        rf << result.report_json << "\n";
    }
    return result;
}

}  // namespace refmesh
