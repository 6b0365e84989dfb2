#include "refmesh/deform.hpp"

#include <Eigen/SVD>
#include <Eigen/Sparse>
#include <unordered_map>

#include "refmesh/errors.hpp"
#include "refmesh/reference_space.hpp"

namespace refmesh {

namespace {

struct EdgeGraph {
    std::vector<std::vector<int>> neighbors;
    std::vector<std::vector<double>> weights;  // aligned with neighbors
    double mean_weight = 0.0;
};

double cotangent(const Vec3& a, const Vec3& b) {
    // cot of the angle between a and b
    const double cos_part = a.dot(b);
    const double sin_part = a.cross(b).norm();
    return cos_part / std::max(sin_part, 1e-12);
}

EdgeGraph build_cotangent_graph(const TriMesh& mesh) {
    const int n = static_cast<int>(mesh.vertices.size());
    std::unordered_map<uint64_t, double> edge_weight;
    auto key = [](int a, int b) {
        if (a > b) std::swap(a, b);
        return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) |
               static_cast<uint32_t>(b);
    };
    for (const auto& f : mesh.faces) {
        for (int c = 0; c < 3; ++c) {
            const int opp = f[c];
            const int u = f[(c + 1) % 3];
            const int v = f[(c + 2) % 3];
            const double w = 0.5 * cotangent(mesh.vertices[u] - mesh.vertices[opp],
                                             mesh.vertices[v] - mesh.vertices[opp]);
            edge_weight[key(u, v)] += w;
        }
    }

    EdgeGraph graph;
    graph.neighbors.assign(n, {});
    graph.weights.assign(n, {});
    double sum = 0.0;
    size_t count = 0;
    for (const auto& [k, w] : edge_weight) {
        const int a = static_cast<int>(k >> 32);
        const int b = static_cast<int>(k & 0xffffffffu);
        const double clamped = std::max(w, 0.0);
        graph.neighbors[a].push_back(b);
        graph.weights[a].push_back(clamped);
        graph.neighbors[b].push_back(a);
        graph.weights[b].push_back(clamped);
        sum += clamped;
        ++count;
    }
    graph.mean_weight = count ? sum / static_cast<double>(count) : 1.0;
    return graph;
}

Mat3 rotation_maximizing(const Mat3& m) {
    // argmax_R tr(R m) over SO(3)
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 v = svd.matrixV();
    if ((v * svd.matrixU().transpose()).determinant() < 0.0) v.col(2) *= -1.0;
    return v * svd.matrixU().transpose();
}

}  // namespace

TriMesh arap_deform(const TriMesh& mesh, const std::vector<DeformConstraint>& constraints,
                    const DeformParams& params, DeformTrace* trace) {
    const int n = static_cast<int>(mesh.vertices.size());
    if (n == 0) throw EmptyMesh("arap_deform: empty mesh");
    for (const auto& c : constraints)
        if (c.vertex < 0 || c.vertex >= n) throw Error("arap_deform: constraint index out of range");

    const EdgeGraph graph = build_cotangent_graph(mesh);
    const double area = surface_area(mesh);
    const double smooth_w = params.alpha * area;
    const double tol = params.tol > 0.0 ? params.tol : 1e-6 * bounding_box(mesh).diagonal();

    // soft constraint weights; unconstrained components get their
    // centroid-nearest vertex pinned at rest
    std::vector<double> pin_weight(n, 0.0);
    std::vector<Vec3> pin_target(n, Vec3::Zero());
    const double wc = params.constraint_weight_scale * std::max(graph.mean_weight, 1e-12);
    for (const auto& c : constraints) {
        pin_weight[c.vertex] = wc;
        pin_target[c.vertex] = c.target;
    }
    {
        int comp_count = 0;
        const auto comp = vertex_components(mesh, &comp_count);
        std::vector<bool> constrained(comp_count, false);
        for (const auto& c : constraints)
            if (comp[c.vertex] >= 0) constrained[comp[c.vertex]] = true;
        std::vector<Vec3> centroid(comp_count, Vec3::Zero());
        std::vector<int> count(comp_count, 0);
        for (int i = 0; i < n; ++i)
            if (comp[i] >= 0) {
                centroid[comp[i]] += mesh.vertices[i];
                ++count[comp[i]];
            }
        for (int c = 0; c < comp_count; ++c) {
            if (constrained[c] || count[c] == 0) continue;
            centroid[c] /= count[c];
            int best = -1;
            double best_d = std::numeric_limits<double>::max();
            for (int i = 0; i < n; ++i) {
                if (comp[i] != c) continue;
                const double d = (mesh.vertices[i] - centroid[c]).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            pin_weight[best] = wc;
            pin_target[best] = mesh.vertices[best];
        }
    }

    // global-step matrix is constant: factor once
    using Triplet = Eigen::Triplet<double>;
    std::vector<Triplet> triplets;
    for (int i = 0; i < n; ++i) {
        double diag = pin_weight[i];
        for (size_t e = 0; e < graph.neighbors[i].size(); ++e) {
            const double w = graph.weights[i][e];
            diag += 2.0 * w;
            triplets.emplace_back(i, graph.neighbors[i][e], -2.0 * w);
        }
        diag = std::max(diag, 1e-12);  // isolated vertices stay where they are
        triplets.emplace_back(i, i, diag);
    }
    Eigen::SparseMatrix<double> a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
    if (solver.info() != Eigen::Success)
        throw SolverSingular("arap_deform: global system not factorizable");

    std::vector<Vec3> positions = mesh.vertices;
    std::vector<Mat3> rotations(n, Mat3::Identity());

    // warm start from the best-fit rigid motion of the constraint pairs;
    // when the target pose is rigid this is already the optimum
    if (constraints.size() >= 3) {
        std::vector<Vec3> from, to;
        for (const auto& c : constraints) {
            from.push_back(mesh.vertices[c.vertex]);
            to.push_back(c.target);
        }
        try {
            const RigidTransform fit = rigid_align(from, to);
            for (auto& p : positions) p = fit.apply(p);
            for (auto& r : rotations) r = fit.rotation;
        } catch (const DegenerateConfiguration&) {
            // collinear constraints: keep the identity start
        }
    }

    auto energy_of = [&]() {
        double e = 0.0;
        for (int i = 0; i < n; ++i) {
            for (size_t k = 0; k < graph.neighbors[i].size(); ++k) {
                const int j = graph.neighbors[i][k];
                const Vec3 rest = mesh.vertices[i] - mesh.vertices[j];
                e += graph.weights[i][k] *
                     ((positions[i] - positions[j]) - rotations[i] * rest).squaredNorm();
                e += smooth_w * (rotations[i] - rotations[j]).squaredNorm();
            }
            if (pin_weight[i] > 0.0)
                e += pin_weight[i] * (positions[i] - pin_target[i]).squaredNorm();
        }
        return e;
    };

    for (int iter = 0; iter < params.max_iter; ++iter) {
        // local step: Gauss-Seidel rotation fits with neighbor-rotation coupling
        for (int i = 0; i < n; ++i) {
            Mat3 m = Mat3::Zero();
            for (size_t k = 0; k < graph.neighbors[i].size(); ++k) {
                const int j = graph.neighbors[i][k];
                const Vec3 rest = mesh.vertices[i] - mesh.vertices[j];
                const Vec3 cur = positions[i] - positions[j];
                m += graph.weights[i][k] * (rest * cur.transpose());
                m += 2.0 * smooth_w * rotations[j].transpose();
            }
            if (!graph.neighbors[i].empty()) rotations[i] = rotation_maximizing(m);
        }

        // global step
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 3);
        for (int i = 0; i < n; ++i) {
            Vec3 r = pin_weight[i] * pin_target[i];
            for (size_t k = 0; k < graph.neighbors[i].size(); ++k) {
                const int j = graph.neighbors[i][k];
                const Vec3 rest = mesh.vertices[i] - mesh.vertices[j];
                r += graph.weights[i][k] * ((rotations[i] + rotations[j]) * rest);
            }
            if (pin_weight[i] == 0.0 && graph.neighbors[i].empty())
                r = 1e-12 * mesh.vertices[i];  // matches the diagonal fallback
            rhs.row(i) = r.transpose();
        }
        const Eigen::MatrixXd solution = solver.solve(rhs);

        double max_move = 0.0;
        for (int i = 0; i < n; ++i) {
            const Vec3 updated = solution.row(i).transpose();
            max_move = std::max(max_move, (updated - positions[i]).norm());
            positions[i] = updated;
        }
        if (trace) trace->energy.push_back(energy_of());
        if (max_move < tol) break;
    }

    TriMesh out = mesh;
    out.vertices = std::move(positions);
    return out;
}

TriMesh remesh_frame(const TriMesh& ref, const TriMesh& frame, const RemeshParams& params,
                     KeypointMatchSet* out_matches) {
    const double diag = bounding_box(ref).diagonal();

    IssParams iss;
    iss.salient_radius = params.salient_radius_rel * diag;
    iss.nms_radius = params.nms_radius_rel * diag;
    iss.min_saliency_rel = params.saliency_floor_rel;
    const auto ref_kps = detect_keypoints(ref, iss);
    const auto frame_kps = detect_keypoints(frame, iss);

    MatchParams match;
    match.neighborhood_radius = params.neighborhood_radius_rel * diag;
    match.sigma_th = params.sigma_th_rel * match.neighborhood_radius;
    match.candidate_radius = params.candidate_radius_rel * diag;
    const KeypointMatchSet matches = match_keypoints(ref, ref_kps, frame, frame_kps, match);
    if (out_matches) *out_matches = matches;

    if (static_cast<int>(matches.pairs.size()) < params.min_matches)
        throw InsufficientMatches("remesh_frame: only " + std::to_string(matches.pairs.size()) +
                                  " keypoint pairs survived (need " +
                                  std::to_string(params.min_matches) + ")");

    std::vector<DeformConstraint> constraints;
    constraints.reserve(matches.pairs.size());
    for (const auto& m : matches.pairs)
        constraints.push_back({m.ref_vertex, frame.vertices[m.frame_vertex]});
    return arap_deform(ref, constraints, params.deform);
}

}  // namespace refmesh
