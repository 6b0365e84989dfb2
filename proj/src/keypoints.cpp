#include "refmesh/keypoints.hpp"

#include <Eigen/Eigenvalues>
#include <fstream>

#include "refmesh/errors.hpp"
#include "refmesh/kdtree.hpp"
#include "refmesh/optim.hpp"

namespace refmesh {

std::vector<Keypoint> detect_keypoints(const TriMesh& mesh, const IssParams& params) {
    if (params.salient_radius <= 0.0 || params.nms_radius <= 0.0)
        throw Error("detect_keypoints: radii must be positive");
    const int n = static_cast<int>(mesh.vertices.size());
    const KdTree3 tree(mesh.vertices);

    std::vector<double> saliency(n, -1.0);  // lambda3 of accepted candidates
#pragma omp parallel for schedule(dynamic, 64)
    for (int i = 0; i < n; ++i) {
        const auto nbrs = tree.radius(mesh.vertices[i], params.salient_radius);
        int count = 0;
        Mat3 scatter = Mat3::Zero();
        for (int j : nbrs) {
            if (j == i) continue;
            const Vec3 d = mesh.vertices[j] - mesh.vertices[i];
            scatter += d * d.transpose();
            ++count;
        }
        if (count < params.min_neighbors) continue;
        scatter /= static_cast<double>(count);
        Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
        const double l1 = eig.eigenvalues()(2);
        const double l2 = eig.eigenvalues()(1);
        const double l3 = eig.eigenvalues()(0);
        if (l1 <= 0.0 || l2 <= 0.0) continue;
        if (l3 <= 1e-12 * l1) continue;  // planar neighborhood, no 3D spread
        if (l2 / l1 >= params.gamma21) continue;
        if (l3 / l2 >= params.gamma32) continue;
        saliency[i] = l3;
    }

    if (params.min_saliency_rel > 0.0) {
        double strongest = 0.0;
        for (double s : saliency) strongest = std::max(strongest, s);
        const double floor = params.min_saliency_rel * strongest;
        for (double& s : saliency)
            if (s >= 0.0 && s < floor) s = -1.0;
    }

    std::vector<Keypoint> keypoints;
    for (int i = 0; i < n; ++i) {
        if (saliency[i] < 0.0) continue;
        bool maximal = true;
        for (int j : tree.radius(mesh.vertices[i], params.nms_radius)) {
            if (j == i || saliency[j] < 0.0) continue;
            if (saliency[j] > saliency[i] || (saliency[j] == saliency[i] && j < i)) {
                maximal = false;
                break;
            }
        }
        if (maximal) keypoints.push_back({mesh.vertices[i], i, saliency[i]});
    }
    return keypoints;
}

namespace {

double pair_error(const KdTree3& fixed_tree, const KdTree3& moving_tree, const Mat3& rotation) {
    const auto& fixed = fixed_tree.points();
    const auto& moving = moving_tree.points();
    const Mat3 inv = rotation.transpose();
    double mean = 0.0, haus_fwd = 0.0, haus_bwd = 0.0;
    for (const auto& a : fixed) {
        double d2 = 0.0;
        moving_tree.nearest(inv * a, &d2);  // |a - R b| = |R^T a - b|
        const double d = std::sqrt(d2);
        mean += d;
        haus_fwd = std::max(haus_fwd, d);
    }
    mean /= static_cast<double>(fixed.size());
    for (const auto& b : moving) {
        double d2 = 0.0;
        fixed_tree.nearest(rotation * b, &d2);
        haus_bwd = std::max(haus_bwd, std::sqrt(d2));
    }
    return mean + std::max(haus_fwd, haus_bwd);
}

std::vector<Mat3> octahedral_rotations() {
    std::vector<Mat3> rotations;
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& perm : perms) {
        for (int bits = 0; bits < 8; ++bits) {
            Mat3 m = Mat3::Zero();
            for (int r = 0; r < 3; ++r)
                m(r, perm[r]) = (bits >> r) & 1 ? -1.0 : 1.0;
            if (m.determinant() > 0.5) rotations.push_back(m);
        }
    }
    return rotations;
}

// Deterministic principal frame: columns are scatter eigenvectors in
// descending eigenvalue order, each signed so the third moment along it is
// positive, right-handed. Every choice depends only on rotation-invariant
// statistics, so canon(G*X) computes the same numbers as canon(X).
Mat3 canonical_frame(const std::vector<Vec3>& points) {
    Mat3 scatter = Mat3::Zero();
    for (const auto& p : points) scatter += p * p.transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
    Mat3 u;
    for (int c = 0; c < 3; ++c) u.col(c) = eig.eigenvectors().col(2 - c);
    for (int c = 0; c < 3; ++c) {
        double moment = 0.0;
        for (const auto& p : points) {
            const double t = p.dot(u.col(c));
            moment += t * t * t;
        }
        if (moment < 0.0) u.col(c) *= -1.0;
    }
    if (u.determinant() < 0.0) u.col(2) *= -1.0;
    return u;
}

// Search runs in the canonical frames of both sets, which aligns the principal
// structure before any optimization and keeps the whole computation
// equivariant under shared rigid motions of the inputs.
double min_rotation_error_sets(const std::vector<Vec3>& fixed, const std::vector<Vec3>& moving,
                               Vec3* best_rotation, int refine_iters) {
    const Mat3 uf = canonical_frame(fixed);
    const Mat3 um = canonical_frame(moving);
    std::vector<Vec3> fixed_c(fixed.size()), moving_c(moving.size());
    for (size_t i = 0; i < fixed.size(); ++i) fixed_c[i] = uf.transpose() * fixed[i];
    for (size_t i = 0; i < moving.size(); ++i) moving_c[i] = um.transpose() * moving[i];
    const KdTree3 fixed_tree(fixed_c);
    const KdTree3 moving_tree(moving_c);

    static const std::vector<Mat3> starts = octahedral_rotations();
    std::vector<std::pair<double, int>> coarse;
    coarse.reserve(starts.size());
    for (size_t s = 0; s < starts.size(); ++s)
        coarse.emplace_back(pair_error(fixed_tree, moving_tree, starts[s]), static_cast<int>(s));
    std::sort(coarse.begin(), coarse.end());

    auto objective = [&](const Eigen::VectorXd& v) {
        return pair_error(fixed_tree, moving_tree, axis_angle_to_matrix(Vec3(v[0], v[1], v[2])));
    };

    double best = coarse[0].first;
    Vec3 best_aa = matrix_to_axis_angle(starts[coarse[0].second]);
    const int refine_starts = std::min<size_t>(8, coarse.size());
    for (int s = 0; s < refine_starts; ++s) {
        const Vec3 start_aa = matrix_to_axis_angle(starts[coarse[s].second]);
        Eigen::VectorXd x0(3);
        x0 << start_aa.x(), start_aa.y(), start_aa.z();
        double refined = 0.0;
        const Eigen::VectorXd xr = nelder_mead(objective, x0, 0.3, refine_iters, &refined);
        if (refined < best) {
            best = refined;
            best_aa = Vec3(xr[0], xr[1], xr[2]);
        }
    }
    // shrinking-step polish around the winner
    for (double step : {0.05, 0.01}) {
        Eigen::VectorXd x0(3);
        x0 << best_aa.x(), best_aa.y(), best_aa.z();
        double refined = 0.0;
        const Eigen::VectorXd xr = nelder_mead(objective, x0, step, refine_iters, &refined);
        if (refined < best) {
            best = refined;
            best_aa = Vec3(xr[0], xr[1], xr[2]);
        }
    }

    if (best_rotation)
        *best_rotation = matrix_to_axis_angle(uf * axis_angle_to_matrix(best_aa) * um.transpose());
    return best;
}

}  // namespace

double neighborhood_error(const std::vector<Vec3>& fixed, const std::vector<Vec3>& moving,
                          const Mat3& rotation) {
    if (fixed.empty() || moving.empty()) return std::numeric_limits<double>::infinity();
    return pair_error(KdTree3(fixed), KdTree3(moving), rotation);
}

double min_rotation_error(const std::vector<Vec3>& fixed, const std::vector<Vec3>& moving,
                          Vec3* best_rotation, int refine_iters) {
    if (fixed.empty() || moving.empty()) return std::numeric_limits<double>::infinity();
    return min_rotation_error_sets(fixed, moving, best_rotation, refine_iters);
}

KeypointMatchSet match_keypoints(const TriMesh& ref, const std::vector<Keypoint>& ref_keypoints,
                                 const TriMesh& frame,
                                 const std::vector<Keypoint>& frame_keypoints,
                                 const MatchParams& params) {
    if (params.neighborhood_radius <= 0.0)
        throw Error("match_keypoints: neighborhood_radius must be positive");
    KeypointMatchSet result;
    result.sigma_th = params.sigma_th;
    if (ref_keypoints.empty() || frame_keypoints.empty()) return result;

    const KdTree3 ref_tree(ref.vertices);
    const KdTree3 frame_tree(frame.vertices);

    auto neighborhood = [&](const KdTree3& tree, const std::vector<Vec3>& vertices,
                            const Vec3& at) {
        std::vector<Vec3> out;
        for (int j : tree.radius(at, params.neighborhood_radius)) out.push_back(vertices[j] - at);
        return out;
    };

    // whole-mesh pre-alignment for the candidate gate; area-weighted so the
    // shift does not depend on how densely each surface is sampled
    auto surface_centroid = [](const TriMesh& mesh) {
        if (mesh.faces.empty()) {
            Vec3 c = Vec3::Zero();
            for (const auto& v : mesh.vertices) c += v;
            return Vec3(c / static_cast<double>(mesh.vertices.size()));
        }
        Vec3 c = Vec3::Zero();
        double area = 0.0;
        for (const auto& f : mesh.faces) {
            const Vec3& a = mesh.vertices[f[0]];
            const Vec3& b = mesh.vertices[f[1]];
            const Vec3& d = mesh.vertices[f[2]];
            const double w = 0.5 * (b - a).cross(d - a).norm();
            c += w * (a + b + d) / 3.0;
            area += w;
        }
        return Vec3(c / std::max(area, 1e-300));
    };
    const Vec3 shift = surface_centroid(frame) - surface_centroid(ref);

    struct Candidate {
        double error = std::numeric_limits<double>::infinity();
        int frame_kp = -1;
        Vec3 rotation = Vec3::Zero();
    };
    std::vector<Candidate> best(ref_keypoints.size());

#pragma omp parallel for schedule(dynamic, 1)
    for (long r = 0; r < static_cast<long>(ref_keypoints.size()); ++r) {
        const auto moving = neighborhood(ref_tree, ref.vertices, ref_keypoints[r].position);
        if (moving.empty()) continue;
        const Vec3 expected = ref_keypoints[r].position + shift;
        for (size_t t = 0; t < frame_keypoints.size(); ++t) {
            if (params.candidate_radius > 0.0 &&
                (frame_keypoints[t].position - expected).norm() > params.candidate_radius)
                continue;
            const auto fixed = neighborhood(frame_tree, frame.vertices, frame_keypoints[t].position);
            if (fixed.empty()) continue;
            Vec3 rotation;
            const double err = min_rotation_error_sets(fixed, moving, &rotation, params.refine_iters);
            if (err < best[r].error) {
                best[r].error = err;
                best[r].frame_kp = static_cast<int>(t);
                best[r].rotation = rotation;
            }
        }
    }

    // sigma filter, then one-to-one by ascending error
    std::vector<std::pair<double, int>> order;
    for (size_t r = 0; r < best.size(); ++r)
        if (best[r].frame_kp >= 0 && best[r].error <= params.sigma_th)
            order.emplace_back(best[r].error, static_cast<int>(r));
    std::sort(order.begin(), order.end());
    std::vector<bool> frame_used(frame_keypoints.size(), false);
    for (const auto& [err, r] : order) {
        const int t = best[r].frame_kp;
        if (frame_used[t]) continue;
        frame_used[t] = true;
        result.pairs.push_back({ref_keypoints[r].vertex_index, frame_keypoints[t].vertex_index,
                                err, best[r].rotation});
    }
    return result;
}

void save_matches_csv(const KeypointMatchSet& matches, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "ref_vertex,frame_vertex,error\n";
    out.precision(10);
    for (const auto& m : matches.pairs)
        out << m.ref_vertex << ',' << m.frame_vertex << ',' << m.error << '\n';
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace refmesh
