#include "refmesh/recon.hpp"

#include <cmath>
#include <unordered_map>

#include "refmesh/errors.hpp"
#include "refmesh/kdtree.hpp"

namespace refmesh {

std::vector<Vec3> transport_normals(const TriMesh& frame, const RbfMap& map) {
    const TriMesh oriented = with_outward_orientation(frame);
    const auto normals = vertex_normals(oriented);
    const double h = 1e-4 * bounding_box(frame).diagonal();

    std::vector<Vec3> out(normals.size(), Vec3::Zero());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(normals.size()); ++i) {
        if (normals[i].squaredNorm() < 1e-24) continue;  // isolated vertex
        const Mat3 j = map.jacobian(frame.vertices[i], h);
        // normals transform by the cofactor matrix: cof(J) e3 = (J e1) x (J e2)
        Mat3 cof;
        cof.col(0) = j.col(1).cross(j.col(2));
        cof.col(1) = j.col(2).cross(j.col(0));
        cof.col(2) = j.col(0).cross(j.col(1));
        const Vec3 n = cof * normals[i];
        const double len = n.norm();
        if (len > 1e-18) out[i] = n / len;
    }
    return out;
}

namespace {

struct SampleGrid {
    Vec3 origin;
    double cell = 1.0;
    int sx = 0, sy = 0, sz = 0;  // sample counts per axis

    size_t index(int i, int j, int k) const {
        return static_cast<size_t>(i) + static_cast<size_t>(sx) * (j + static_cast<size_t>(sy) * k);
    }
    Vec3 position(int i, int j, int k) const { return origin + cell * Vec3(i, j, k); }
};

double wendland(double r, double h) {
    const double t = r / h;
    if (t >= 1.0) return 0.0;
    const double s = 1.0 - t;
    return s * s * s * s * (4.0 * t + 1.0);
}

// one triangle of the isosurface, oriented so the normal points toward the
// positive (outside) field region
void emit_triangle(std::vector<std::array<int, 3>>& faces, const std::vector<Vec3>& verts, int a,
                   int b, int c, const Vec3& toward_positive) {
    const Vec3 n = (verts[b] - verts[a]).cross(verts[c] - verts[a]);
    if (n.dot(toward_positive) >= 0.0)
        faces.push_back({a, b, c});
    else
        faces.push_back({a, c, b});
}

}  // namespace

TriMesh reconstruct(const OrientedPoints& soup, const ReconParams& params) {
    if (soup.points.empty()) throw EmptyField("reconstruct: empty point soup");
    if (soup.points.size() != soup.normals.size())
        throw Error("reconstruct: points/normals size mismatch");

    Aabb box;
    for (const auto& p : soup.points) box.expand(p);
    const double longest = box.longest_extent();
    if (!(longest > 0.0)) throw EmptyField("reconstruct: degenerate soup extent");

    SampleGrid grid;
    grid.cell = longest / params.resolution;
    const int pad = 4;
    grid.origin = box.min - Vec3::Constant(pad * grid.cell);
    const Vec3 ext = box.extent();
    grid.sx = static_cast<int>(std::ceil(ext.x() / grid.cell)) + 2 * pad + 1;
    grid.sy = static_cast<int>(std::ceil(ext.y() / grid.cell)) + 2 * pad + 1;
    grid.sz = static_cast<int>(std::ceil(ext.z() / grid.cell)) + 2 * pad + 1;

    const KdTree3 tree(soup.points);
    const int k = std::min<int>(params.neighbors, static_cast<int>(soup.points.size()));

    std::vector<double> field(static_cast<size_t>(grid.sx) * grid.sy * grid.sz);
#pragma omp parallel for schedule(dynamic, 2)
    for (int kz = 0; kz < grid.sz; ++kz) {
        for (int jy = 0; jy < grid.sy; ++jy) {
            for (int ix = 0; ix < grid.sx; ++ix) {
                const Vec3 p = grid.position(ix, jy, kz);
                const auto nn = tree.knn(p, k);
                const double h =
                    params.support_scale * (p - soup.points[nn.back()]).norm() + 1e-300;
                double wsum = 0.0, fsum = 0.0;
                for (int idx : nn) {
                    const Vec3& q = soup.points[idx];
                    const double w = wendland((p - q).norm(), h);
                    wsum += w;
                    fsum += w * soup.normals[idx].dot(p - q);
                }
                field[grid.index(ix, jy, kz)] = wsum > 0.0 ? fsum / wsum : 1.0;
            }
        }
    }

    // Freudenthal 6-tet decomposition; shared cube faces get matching diagonals
    static const int tet_paths[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                        {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    TriMesh mesh;
    std::unordered_map<uint64_t, int> edge_vertex;
    auto edge_point = [&](size_t sa, size_t sb) -> int {
        size_t lo = sa, hi = sb;
        if (lo > hi) std::swap(lo, hi);
        const uint64_t key = (static_cast<uint64_t>(lo) << 32) | static_cast<uint64_t>(hi);
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;

        const double fa = field[lo], fb = field[hi];
        const int ia = static_cast<int>(lo % grid.sx);
        const int ja = static_cast<int>((lo / grid.sx) % grid.sy);
        const int ka = static_cast<int>(lo / (static_cast<size_t>(grid.sx) * grid.sy));
        const int ib = static_cast<int>(hi % grid.sx);
        const int jb = static_cast<int>((hi / grid.sx) % grid.sy);
        const int kb = static_cast<int>(hi / (static_cast<size_t>(grid.sx) * grid.sy));
        const Vec3 pa = grid.position(ia, ja, ka);
        const Vec3 pb = grid.position(ib, jb, kb);
        double t = 0.5;
        if (fa != fb) t = std::clamp(fa / (fa - fb), 0.0, 1.0);
        const int id = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(pa + t * (pb - pa));
        edge_vertex.emplace(key, id);
        return id;
    };

    for (int kz = 0; kz + 1 < grid.sz; ++kz) {
        for (int jy = 0; jy + 1 < grid.sy; ++jy) {
            for (int ix = 0; ix + 1 < grid.sx; ++ix) {
                for (const auto& path : tet_paths) {
                    int corner[4][3] = {{ix, jy, kz}, {}, {}, {}};
                    int cur[3] = {ix, jy, kz};
                    for (int s = 0; s < 3; ++s) {
                        ++cur[path[s]];
                        corner[s + 1][0] = cur[0];
                        corner[s + 1][1] = cur[1];
                        corner[s + 1][2] = cur[2];
                    }
                    size_t sample[4];
                    double value[4];
                    Vec3 pos[4];
                    for (int c = 0; c < 4; ++c) {
                        sample[c] = grid.index(corner[c][0], corner[c][1], corner[c][2]);
                        value[c] = field[sample[c]];
                        pos[c] = grid.position(corner[c][0], corner[c][1], corner[c][2]);
                    }
                    int neg[4], posi[4], nneg = 0, npos = 0;
                    for (int c = 0; c < 4; ++c) {
                        if (value[c] < 0.0)
                            neg[nneg++] = c;
                        else
                            posi[npos++] = c;
                    }
                    if (nneg == 0 || nneg == 4) continue;
                    if (nneg == 1) {
                        const int a = edge_point(sample[neg[0]], sample[posi[0]]);
                        const int b = edge_point(sample[neg[0]], sample[posi[1]]);
                        const int c = edge_point(sample[neg[0]], sample[posi[2]]);
                        const Vec3 outward =
                            (pos[posi[0]] + pos[posi[1]] + pos[posi[2]]) / 3.0 - pos[neg[0]];
                        emit_triangle(mesh.faces, mesh.vertices, a, b, c, outward);
                    } else if (nneg == 3) {
                        const int a = edge_point(sample[posi[0]], sample[neg[0]]);
                        const int b = edge_point(sample[posi[0]], sample[neg[1]]);
                        const int c = edge_point(sample[posi[0]], sample[neg[2]]);
                        const Vec3 outward =
                            pos[posi[0]] - (pos[neg[0]] + pos[neg[1]] + pos[neg[2]]) / 3.0;
                        emit_triangle(mesh.faces, mesh.vertices, a, b, c, outward);
                    } else {
                        // two-two: quad perimeter AC, AD, BD, BC
                        const int a = neg[0], b = neg[1], c = posi[0], d = posi[1];
                        const int p_ac = edge_point(sample[a], sample[c]);
                        const int p_ad = edge_point(sample[a], sample[d]);
                        const int p_bd = edge_point(sample[b], sample[d]);
                        const int p_bc = edge_point(sample[b], sample[c]);
                        const Vec3 outward =
                            (pos[c] + pos[d]) * 0.5 - (pos[a] + pos[b]) * 0.5;
                        emit_triangle(mesh.faces, mesh.vertices, p_ac, p_ad, p_bd, outward);
                        emit_triangle(mesh.faces, mesh.vertices, p_ac, p_bd, p_bc, outward);
                    }
                }
            }
        }
    }

    if (mesh.faces.empty()) throw EmptyField("reconstruct: no isosurface crossing found");

    // cull marching noise below the component-size floor
    int count = 0;
    const auto labels = face_components(mesh, &count);
    std::vector<size_t> component_faces(count, 0);
    for (int label : labels) ++component_faces[label];
    const size_t floor_faces = std::max<size_t>(
        1, static_cast<size_t>(params.min_component_frac * mesh.faces.size()));

    TriMesh out;
    std::vector<int> vertex_remap(mesh.vertices.size(), -1);
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        if (component_faces[labels[f]] < floor_faces) continue;
        std::array<int, 3> face;
        for (int c = 0; c < 3; ++c) {
            const int v = mesh.faces[f][c];
            if (vertex_remap[v] < 0) {
                vertex_remap[v] = static_cast<int>(out.vertices.size());
                out.vertices.push_back(mesh.vertices[v]);
            }
            face[c] = vertex_remap[v];
        }
        out.faces.push_back(face);
    }
    return out;
}

}  // namespace refmesh
