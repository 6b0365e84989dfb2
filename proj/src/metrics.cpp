#include "refmesh/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "refmesh/errors.hpp"

namespace refmesh {

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // closest point on triangle via Voronoi-region classification
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return (p - a).norm();

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return (p - b).norm();

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return (p - (a + v * ab)).norm();
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return (p - c).norm();

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return (p - (a + w * ac)).norm();
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + w * (c - b))).norm();
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return (p - (a + v * ab + w * ac)).norm();
}

namespace {

double box_distance(const Aabb& box, const Vec3& p) {
    const Vec3 clamped = p.cwiseMax(box.min).cwiseMin(box.max);
    return (p - clamped).norm();
}

}  // namespace

SurfaceDistance::SurfaceDistance(const TriMesh& mesh)
    : vertices_(mesh.vertices), faces_(mesh.faces) {
    if (vertices_.empty()) throw EmptyMesh("SurfaceDistance: mesh has no vertices");
    if (faces_.empty()) {
        vertex_tree_ = KdTree3(vertices_);
        return;
    }
    use_bvh_ = true;
    tri_order_.resize(faces_.size());
    std::iota(tri_order_.begin(), tri_order_.end(), 0);

    std::vector<Vec3> centroids(faces_.size());
    for (size_t t = 0; t < faces_.size(); ++t)
        centroids[t] = (vertices_[faces_[t][0]] + vertices_[faces_[t][1]] +
                        vertices_[faces_[t][2]]) / 3.0;

    struct Range {
        int node, lo, hi;
    };
    nodes_.push_back({});
    std::vector<Range> stack{{0, 0, static_cast<int>(faces_.size())}};
    while (!stack.empty()) {
        const auto [node, lo, hi] = stack.back();
        stack.pop_back();
        Aabb box;
        for (int i = lo; i < hi; ++i) {
            const auto& f = faces_[tri_order_[i]];
            for (int k = 0; k < 3; ++k) box.expand(vertices_[f[k]]);
        }
        nodes_[node].box = box;
        if (hi - lo <= 4) {
            nodes_[node].first = lo;
            nodes_[node].count = hi - lo;
            continue;
        }
        Aabb cbox;
        for (int i = lo; i < hi; ++i) cbox.expand(centroids[tri_order_[i]]);
        int axis = 0;
        const Vec3 ext = cbox.extent();
        if (ext.y() > ext.x()) axis = 1;
        if (ext.z() > ext[axis]) axis = 2;
        const int mid = (lo + hi) / 2;
        std::nth_element(tri_order_.begin() + lo, tri_order_.begin() + mid,
                         tri_order_.begin() + hi, [&](int ta, int tb) {
                             if (centroids[ta][axis] != centroids[tb][axis])
                                 return centroids[ta][axis] < centroids[tb][axis];
                             return ta < tb;
                         });
        const int left = static_cast<int>(nodes_.size());
        nodes_.push_back({});
        nodes_.push_back({});
        nodes_[node].left = left;
        nodes_[node].right = left + 1;
        stack.push_back({left, lo, mid});
        stack.push_back({left + 1, mid, hi});
    }
}

double SurfaceDistance::query(int node, const Vec3& p, double best) const {
    const Node& n = nodes_[node];
    if (box_distance(n.box, p) >= best) return best;
    if (n.left < 0) {
        for (int i = n.first; i < n.first + n.count; ++i) {
            const auto& f = faces_[tri_order_[i]];
            best = std::min(best, point_triangle_distance(p, vertices_[f[0]], vertices_[f[1]],
                                                          vertices_[f[2]]));
        }
        return best;
    }
    const double dl = box_distance(nodes_[n.left].box, p);
    const double dr = box_distance(nodes_[n.right].box, p);
    if (dl < dr) {
        best = query(n.left, p, best);
        if (dr < best) best = query(n.right, p, best);
    } else {
        best = query(n.right, p, best);
        if (dl < best) best = query(n.left, p, best);
    }
    return best;
}

double SurfaceDistance::distance(const Vec3& p) const {
    if (!use_bvh_) {
        double d2 = 0.0;
        vertex_tree_.nearest(p, &d2);
        return std::sqrt(d2);
    }
    return query(0, p, std::numeric_limits<double>::max());
}

namespace {

// vertices plus seeded uniform surface samples, `density` per mean triangle area
std::vector<Vec3> sample_shape(const TriMesh& mesh, double density, uint64_t seed) {
    std::vector<Vec3> samples = mesh.vertices;
    if (density <= 0.0 || mesh.faces.empty()) return samples;
    double total_area = 0.0;
    std::vector<double> areas(mesh.faces.size());
    for (size_t t = 0; t < mesh.faces.size(); ++t) {
        const auto& f = mesh.faces[t];
        areas[t] = 0.5 * (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                             .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]])
                             .norm();
        total_area += areas[t];
    }
    if (total_area <= 0.0) return samples;
    const double mean_area = total_area / static_cast<double>(mesh.faces.size());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (size_t t = 0; t < mesh.faces.size(); ++t) {
        const int count = static_cast<int>(std::lround(density * areas[t] / mean_area));
        const auto& f = mesh.faces[t];
        for (int s = 0; s < count; ++s) {
            double u = uni(rng), v = uni(rng);
            if (u + v > 1.0) {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            samples.push_back(mesh.vertices[f[0]] +
                              u * (mesh.vertices[f[1]] - mesh.vertices[f[0]]) +
                              v * (mesh.vertices[f[2]] - mesh.vertices[f[0]]));
        }
    }
    return samples;
}

double directed_max(const std::vector<Vec3>& samples, const SurfaceDistance& target) {
    double worst = 0.0;
#pragma omp parallel for reduction(max : worst) schedule(dynamic, 256)
    for (long i = 0; i < static_cast<long>(samples.size()); ++i)
        worst = std::max(worst, target.distance(samples[i]));
    return worst;
}

}  // namespace

HausdorffResult hausdorff(const TriMesh& a, const TriMesh& b, double samples_per_mean_area,
                          uint64_t seed) {
    if (a.vertices.empty() || b.vertices.empty())
        throw EmptyMesh("hausdorff: empty input mesh");
    const SurfaceDistance to_a(a), to_b(b);
    HausdorffResult result;
    result.forward = directed_max(sample_shape(a, samples_per_mean_area, seed), to_b);
    result.backward = directed_max(sample_shape(b, samples_per_mean_area, seed + 1), to_a);
    result.symmetric = std::max(result.forward, result.backward);
    return result;
}

std::vector<double> vertex_error_field(const TriMesh& deformed, const TriMesh& target) {
    if (deformed.vertices.empty()) throw EmptyMesh("vertex_error_field: empty mesh");
    const SurfaceDistance to_target(target);
    std::vector<double> field(deformed.vertices.size());
#pragma omp parallel for schedule(dynamic, 256)
    for (long i = 0; i < static_cast<long>(deformed.vertices.size()); ++i)
        field[i] = to_target.distance(deformed.vertices[i]);
    return field;
}

}  // namespace refmesh
