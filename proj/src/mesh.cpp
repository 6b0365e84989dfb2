#include "refmesh/mesh.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "refmesh/errors.hpp"
#include "refmesh/kdtree.hpp"

namespace refmesh {

namespace {

inline uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) | static_cast<uint32_t>(b);
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[b] = a;
    }
};

}  // namespace

void validate_mesh(const TriMesh& mesh) {
    const int n = static_cast<int>(mesh.vertices.size());
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            if (face[k] < 0 || face[k] >= n)
                throw ParseError("face " + std::to_string(f) + " references vertex " +
                                 std::to_string(face[k]) + " outside [0, " + std::to_string(n) + ")");
        }
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
            throw ParseError("face " + std::to_string(f) + " repeats a vertex index");
    }
}

WatertightReport validate_watertight(const TriMesh& mesh) {
    std::unordered_map<uint64_t, int> edge_count;
    edge_count.reserve(mesh.faces.size() * 3);
    for (const auto& face : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            ++edge_count[edge_key(face[k], face[(k + 1) % 3])];
        }
    }
    WatertightReport report;
    report.watertight = true;
    for (const auto& [key, count] : edge_count) {
        (void)key;
        if (count == 1) ++report.boundary_edge_count;
        if (count != 2) report.watertight = false;
    }
    return report;
}

Aabb bounding_box(const TriMesh& mesh) {
    if (mesh.vertices.empty()) throw EmptyMesh("bounding_box: mesh has no vertices");
    Aabb box;
    for (const auto& v : mesh.vertices) box.expand(v);
    return box;
}

std::vector<int> face_components(const TriMesh& mesh, int* component_count) {
    const int nf = static_cast<int>(mesh.faces.size());
    UnionFind uf(nf);
    std::unordered_map<uint64_t, int> first_face;
    first_face.reserve(nf * 3);
    for (int f = 0; f < nf; ++f) {
        const auto& face = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            const uint64_t key = edge_key(face[k], face[(k + 1) % 3]);
            auto [it, inserted] = first_face.try_emplace(key, f);
            if (!inserted) uf.unite(it->second, f);
        }
    }
    std::vector<int> labels(nf, -1);
    std::unordered_map<int, int> remap;
    for (int f = 0; f < nf; ++f) {
        const int root = uf.find(f);
        auto [it, inserted] = remap.try_emplace(root, static_cast<int>(remap.size()));
        labels[f] = it->second;
    }
    if (component_count) *component_count = static_cast<int>(remap.size());
    return labels;
}

std::vector<int> vertex_components(const TriMesh& mesh, int* component_count) {
    int count = 0;
    const auto face_labels = face_components(mesh, &count);
    std::vector<int> labels(mesh.vertices.size(), -1);
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) labels[mesh.faces[f][k]] = face_labels[f];
    }
    if (component_count) *component_count = count;
    return labels;
}

double signed_volume(const TriMesh& mesh) {
    double vol = 0.0;
    for (const auto& face : mesh.faces) {
        const Vec3& a = mesh.vertices[face[0]];
        const Vec3& b = mesh.vertices[face[1]];
        const Vec3& c = mesh.vertices[face[2]];
        vol += a.dot(b.cross(c));
    }
    return vol / 6.0;
}

double signed_volume(const TriMesh& mesh, const std::vector<int>& face_subset) {
    double vol = 0.0;
    for (int f : face_subset) {
        const auto& face = mesh.faces[f];
        const Vec3& a = mesh.vertices[face[0]];
        const Vec3& b = mesh.vertices[face[1]];
        const Vec3& c = mesh.vertices[face[2]];
        vol += a.dot(b.cross(c));
    }
    return vol / 6.0;
}

TriMesh with_outward_orientation(const TriMesh& mesh) {
    int count = 0;
    const auto labels = face_components(mesh, &count);
    std::vector<double> component_volume(count, 0.0);
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        const Vec3& a = mesh.vertices[face[0]];
        const Vec3& b = mesh.vertices[face[1]];
        const Vec3& c = mesh.vertices[face[2]];
        component_volume[labels[f]] += a.dot(b.cross(c)) / 6.0;
    }
    TriMesh out = mesh;
    for (size_t f = 0; f < out.faces.size(); ++f) {
        if (component_volume[labels[f]] < 0.0) std::swap(out.faces[f][1], out.faces[f][2]);
    }
    return out;
}

std::vector<Vec3> vertex_normals(const TriMesh& mesh) {
    std::vector<Vec3> normals(mesh.vertices.size(), Vec3::Zero());
    for (const auto& face : mesh.faces) {
        const Vec3& a = mesh.vertices[face[0]];
        const Vec3& b = mesh.vertices[face[1]];
        const Vec3& c = mesh.vertices[face[2]];
        const Vec3 cross = (b - a).cross(c - a);  // magnitude = 2*area
        for (int k = 0; k < 3; ++k) normals[face[k]] += cross;
    }
    for (auto& n : normals) {
        const double len = n.norm();
        if (len > 1e-300)
            n /= len;
        else
            n.setZero();
    }
    return normals;
}

double surface_area(const TriMesh& mesh) {
    double area = 0.0;
    for (const auto& face : mesh.faces) {
        const Vec3& a = mesh.vertices[face[0]];
        const Vec3& b = mesh.vertices[face[1]];
        const Vec3& c = mesh.vertices[face[2]];
        area += 0.5 * (b - a).cross(c - a).norm();
    }
    return area;
}

double min_component_gap(const TriMesh& mesh) {
    int count = 0;
    const auto labels = vertex_components(mesh, &count);
    if (count < 2) return std::numeric_limits<double>::infinity();
    std::vector<std::vector<Vec3>> groups(count);
    for (size_t i = 0; i < mesh.vertices.size(); ++i)
        if (labels[i] >= 0) groups[labels[i]].push_back(mesh.vertices[i]);

    double best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < count; ++a) {
        if (groups[a].empty()) continue;
        const KdTree3 tree(groups[a]);
        for (int b = a + 1; b < count; ++b) {
            for (const auto& p : groups[b]) {
                double d2 = 0.0;
                tree.nearest(p, &d2);
                best = std::min(best, std::sqrt(d2));
            }
        }
    }
    return best;
}

}  // namespace refmesh
