#include "refmesh/alignment.hpp"

#include <fstream>
#include <random>
#include <unordered_map>

#include "refmesh/errors.hpp"

namespace refmesh {

std::vector<GroupPlan> make_groups(int frame_count, int gof_size) {
    if (gof_size < 1) throw Error("make_groups: gof_size must be >= 1");
    std::vector<GroupPlan> groups;
    for (int f0 = 0; f0 < frame_count; f0 += gof_size) {
        GroupPlan plan;
        plan.group_index = static_cast<int>(groups.size());
        plan.f0 = f0;
        plan.f1 = std::min(f0 + gof_size, frame_count) - 1;
        plan.r_frame = plan.f0 + (plan.f1 - plan.f0) / 2;
        groups.push_back(plan);
    }
    return groups;
}

namespace {

std::vector<Vec3> frame_centers(const CenterTrajectories& traj, int frame) {
    std::vector<Vec3> centers(traj.K);
    for (int i = 0; i < traj.K; ++i) centers[i] = traj.at(i, frame);
    return centers;
}

}  // namespace

GroupAligner::GroupAligner(const MeshSequence& seq, const CenterTrajectories& traj,
                           const GroupPlan& plan, const AlignParams& params)
    : seq_(seq), traj_(traj), plan_(plan), params_(params) {
    mappers_.resize(plan.frame_count());
    Aabb mapped_box;
    for (int f = plan.f0; f <= plan.f1; ++f) {
        auto& mapper = mappers_[f - plan.f0];
        mapper.system = std::make_unique<TpsSystem>(frame_centers(traj, f), params.kernel);
        mapper.basis = std::make_unique<RbfBasis>(mapper.system->anchors(), params.kernel,
                                                  seq.frames[f].vertices);
        const RbfMap map = mapper.system->fit(plan.reference_centers.points);
        const MappedFrame mapped = map_vertices(map, seq.frames[f]);
        for (const auto& v : mapped.mapped_vertices) mapped_box.expand(v);
    }
    double voxel = params.voxel_size;
    if (voxel <= 0.0) voxel = mapped_box.longest_extent() * params.voxel_rel;
    // margin for the offsets the optimizer may apply
    grid_ = grid_from_voxel_size(mapped_box.padded(4.0 * voxel), voxel);
    r_grid_ = voxelize_mapped(plan.r_frame, plan.reference_centers.points);
}

VoxelGrid GroupAligner::voxelize_mapped(int frame, const std::vector<Vec3>& targets) const {
    const auto& mapper = mappers_[frame - plan_.f0];
    std::vector<Vec3> mapped;
    mapper.basis->apply(mapper.system->fit_coeffs(targets), mapped);
    TriMesh mesh;
    mesh.vertices = std::move(mapped);
    mesh.faces = seq_.frames[frame].faces;
    mesh.frame_index = frame;
    return voxelize_interior(mesh, grid_);
}

double GroupAligner::evaluate_iou(int frame, const std::vector<Vec3>& targets) const {
    return iou(voxelize_mapped(frame, targets), r_grid_);
}

std::vector<Vec3> GroupAligner::optimize_frame(int frame, std::vector<AlignTraceEntry>* trace) {
    if (frame < plan_.f0 || frame > plan_.f1)
        throw Error("optimize_frame: frame outside the group range");
    const std::vector<Vec3>& base = plan_.reference_centers.points;
    const int k = static_cast<int>(base.size());

    std::vector<Vec3> best = base;
    double best_iou = evaluate_iou(frame, best);
    int iter = 0;
    auto log = [&](double value) {
        if (trace) trace->push_back({frame, iter, value});
        ++iter;
    };
    log(best_iou);
    if (best_iou >= 1.0) return best;  // already aligned

    // stage 1: global similarity (translation, rotation, log-scale) by
    // greedy pattern search
    if (params_.global_stage) {
        Vec3 centroid = Vec3::Zero();
        for (const auto& p : base) centroid += p;
        centroid /= k;

        Eigen::Matrix<double, 7, 1> x = Eigen::Matrix<double, 7, 1>::Zero();
        Eigen::Matrix<double, 7, 1> step;
        const double voxel = grid_.voxel_size;
        step << 2.0 * voxel, 2.0 * voxel, 2.0 * voxel, 0.1, 0.1, 0.1, 0.05;

        auto targets_of = [&](const Eigen::Matrix<double, 7, 1>& v) {
            const Mat3 rot = axis_angle_to_matrix(Vec3(v[3], v[4], v[5]));
            const double scale = std::exp(v[6]);
            std::vector<Vec3> out(k);
            for (int i = 0; i < k; ++i)
                out[i] = centroid + scale * (rot * (base[i] - centroid)) + Vec3(v[0], v[1], v[2]);
            return out;
        };

        for (int round = 0; round < params_.pattern_rounds; ++round) {
            bool improved = false;
            for (int p = 0; p < 7; ++p) {
                for (double sign : {+1.0, -1.0}) {
                    Eigen::Matrix<double, 7, 1> cand = x;
                    cand[p] += sign * step[p];
                    const auto cand_targets = targets_of(cand);
                    const double value = evaluate_iou(frame, cand_targets);
                    if (value > best_iou) {
                        best_iou = value;
                        best = cand_targets;
                        x = cand;
                        improved = true;
                        log(best_iou);
                        break;
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
    }

    // stage 2: randomized block-coordinate descent over per-center offsets,
    // block = center plus graph neighbors, shared offset, shrinking steps
    {
        std::mt19937_64 rng(params_.seed + static_cast<uint64_t>(frame) * 7919);
        std::vector<int> order(k);
        std::iota(order.begin(), order.end(), 0);
        const bool have_graph = static_cast<int>(traj_.neighbor_graph.size()) == k;

        for (int pass = 0; pass < params_.block_passes; ++pass) {
            const double step =
                params_.initial_step_voxels * grid_.voxel_size / std::pow(2.0, pass);
            std::shuffle(order.begin(), order.end(), rng);
            const int touch = params_.block_subset > 0
                                  ? std::min(params_.block_subset, k)
                                  : k;
            for (int n = 0; n < touch; ++n) {
                const int i = order[n];
                std::vector<int> block{i};
                if (have_graph)
                    block.insert(block.end(), traj_.neighbor_graph[i].begin(),
                                 traj_.neighbor_graph[i].end());

                double best_gain_iou = best_iou;
                std::vector<Vec3> best_cand;
                for (int axis = 0; axis < 3; ++axis) {
                    for (double sign : {+1.0, -1.0}) {
                        Vec3 delta = Vec3::Zero();
                        delta[axis] = sign * step;
                        std::vector<Vec3> cand = best;
                        for (int b : block) cand[b] += delta;
                        const double value = evaluate_iou(frame, cand);
                        if (value > best_gain_iou) {
                            best_gain_iou = value;
                            best_cand = std::move(cand);
                        }
                    }
                }
                if (!best_cand.empty()) {
                    best = std::move(best_cand);
                    best_iou = best_gain_iou;
                    log(best_iou);
                }
            }
        }
    }
    return best;
}

void optimize_group_alignment(const MeshSequence& seq, const CenterTrajectories& traj,
                              GroupPlan& plan, const AlignParams& params,
                              std::vector<AlignTraceEntry>* trace) {
    GroupAligner aligner(seq, traj, plan, params);
    plan.optimized_centers.assign(plan.frame_count(), plan.reference_centers.points);
    for (int f = plan.f0; f <= plan.f1; ++f) {
        if (f == plan.r_frame) continue;  // the R-frame is the fixed target
        plan.optimized_centers[f - plan.f0] = aligner.optimize_frame(f, trace);
    }
}

OrientedPoints build_group_soup(const MeshSequence& seq, const CenterTrajectories& traj,
                                const GroupPlan& plan, RbfKernel kernel) {
    if (static_cast<int>(plan.optimized_centers.size()) != plan.frame_count())
        throw Error("build_group_soup: plan has no optimized centers");

    OrientedPoints soup;
    for (int f = plan.f0; f <= plan.f1; ++f) {
        const TpsSystem system(frame_centers(traj, f), kernel);
        const RbfMap map = system.fit(plan.optimized_centers[f - plan.f0]);
        const MappedFrame mapped = map_vertices(map, seq.frames[f]);
        const auto normals = transport_normals(seq.frames[f], map);
        for (size_t i = 0; i < mapped.mapped_vertices.size(); ++i) {
            if (normals[i].squaredNorm() < 0.25) continue;  // dropped vertices are zero
            soup.points.push_back(mapped.mapped_vertices[i]);
            soup.normals.push_back(normals[i]);
        }
    }

    // dedup within 1e-7, first occurrence wins
    const double cell = 1e-7;
    std::unordered_map<uint64_t, std::vector<int>> buckets;
    auto key_of = [&](const Vec3& p, int dx, int dy, int dz) {
        const int64_t ix = static_cast<int64_t>(std::floor(p.x() / cell)) + dx;
        const int64_t iy = static_cast<int64_t>(std::floor(p.y() / cell)) + dy;
        const int64_t iz = static_cast<int64_t>(std::floor(p.z() / cell)) + dz;
        uint64_t h = static_cast<uint64_t>(ix) * 73856093ull;
        h ^= static_cast<uint64_t>(iy) * 19349663ull;
        h ^= static_cast<uint64_t>(iz) * 83492791ull;
        return h;
    };
    OrientedPoints dedup;
    for (size_t n = 0; n < soup.points.size(); ++n) {
        const Vec3& p = soup.points[n];
        bool duplicate = false;
        for (int dx = -1; dx <= 1 && !duplicate; ++dx)
            for (int dy = -1; dy <= 1 && !duplicate; ++dy)
                for (int dz = -1; dz <= 1 && !duplicate; ++dz) {
                    const auto it = buckets.find(key_of(p, dx, dy, dz));
                    if (it == buckets.end()) continue;
                    for (int idx : it->second)
                        if ((dedup.points[idx] - p).norm() <= cell) {
                            duplicate = true;
                            break;
                        }
                }
        if (duplicate) continue;
        const int id = static_cast<int>(dedup.points.size());
        dedup.points.push_back(p);
        dedup.normals.push_back(soup.normals[n]);
        buckets[key_of(p, 0, 0, 0)].push_back(id);
    }
    return dedup;
}

void save_alignment_trace_csv(const std::vector<AlignTraceEntry>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "frame,iter,iou\n";
    out.precision(10);
    for (const auto& entry : trace) out << entry.frame << ',' << entry.iter << ',' << entry.iou << '\n';
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace refmesh
