#include "refmesh/synth.hpp"

#include <cmath>
#include <map>

#include "refmesh/errors.hpp"

namespace refmesh {

TriMesh make_box(const Vec3& lo, const Vec3& hi, int sx, int sy, int sz) {
    const int s[3] = {sx, sy, sz};
    TriMesh mesh;
    std::map<std::array<int, 3>, int> lattice;  // boundary lattice point -> vertex id
    auto vertex_at = [&](int i, int j, int k) {
        const std::array<int, 3> key = {i, j, k};
        auto it = lattice.find(key);
        if (it != lattice.end()) return it->second;
        const Vec3 p(lo.x() + (hi.x() - lo.x()) * i / s[0],
                     lo.y() + (hi.y() - lo.y()) * j / s[1],
                     lo.z() + (hi.z() - lo.z()) * k / s[2]);
        const int id = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(p);
        lattice.emplace(key, id);
        return id;
    };
    // axis = face normal direction; side = 0 (min face) or 1 (max face)
    for (int axis = 0; axis < 3; ++axis) {
        const int u = (axis + 1) % 3;
        const int v = (axis + 2) % 3;
        for (int side = 0; side < 2; ++side) {
            const int w = side == 0 ? 0 : s[axis];
            for (int a = 0; a < s[u]; ++a) {
                for (int b = 0; b < s[v]; ++b) {
                    std::array<int, 3> c00{}, c10{}, c01{}, c11{};
                    c00[axis] = c10[axis] = c01[axis] = c11[axis] = w;
                    c00[u] = a, c00[v] = b;
                    c10[u] = a + 1, c10[v] = b;
                    c01[u] = a, c01[v] = b + 1;
                    c11[u] = a + 1, c11[v] = b + 1;
                    const int v00 = vertex_at(c00[0], c00[1], c00[2]);
                    const int v10 = vertex_at(c10[0], c10[1], c10[2]);
                    const int v01 = vertex_at(c01[0], c01[1], c01[2]);
                    const int v11 = vertex_at(c11[0], c11[1], c11[2]);
                    if (side == 1) {
                        // +axis face: (u x v) already points outward
                        mesh.faces.push_back({v00, v10, v11});
                        mesh.faces.push_back({v00, v11, v01});
                    } else {
                        mesh.faces.push_back({v00, v11, v10});
                        mesh.faces.push_back({v00, v01, v11});
                    }
                }
            }
        }
    }
    return mesh;
}

TriMesh make_uv_sphere(const Vec3& center, double radius, int slices, int stacks) {
    TriMesh mesh;
    const int north = 0;
    mesh.vertices.push_back(center + Vec3(0, 0, radius));
    for (int st = 1; st < stacks; ++st) {
        const double phi = M_PI * st / stacks;
        for (int sl = 0; sl < slices; ++sl) {
            const double theta = 2.0 * M_PI * sl / slices;
            mesh.vertices.push_back(center + radius * Vec3(std::sin(phi) * std::cos(theta),
                                                           std::sin(phi) * std::sin(theta),
                                                           std::cos(phi)));
        }
    }
    const int south = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(center + Vec3(0, 0, -radius));

    auto ring = [&](int st, int sl) { return 1 + (st - 1) * slices + (sl % slices); };
    for (int sl = 0; sl < slices; ++sl) {
        mesh.faces.push_back({north, ring(1, sl), ring(1, sl + 1)});
        mesh.faces.push_back({south, ring(stacks - 1, sl + 1), ring(stacks - 1, sl)});
    }
    for (int st = 1; st + 1 < stacks; ++st) {
        for (int sl = 0; sl < slices; ++sl) {
            const int a = ring(st, sl), b = ring(st, sl + 1);
            const int c = ring(st + 1, sl), d = ring(st + 1, sl + 1);
            mesh.faces.push_back({a, c, d});
            mesh.faces.push_back({a, d, b});
        }
    }
    return mesh;
}

TriMesh merge_meshes(const TriMesh& a, const TriMesh& b) {
    TriMesh out = a;
    const int offset = static_cast<int>(a.vertices.size());
    out.vertices.insert(out.vertices.end(), b.vertices.begin(), b.vertices.end());
    for (const auto& f : b.faces)
        out.faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
    return out;
}

MeshSequence gen_collision(int frames, int resolution, uint64_t seed) {
    (void)seed;  // the construction is fully deterministic
    if (frames < 3) throw Error("gen_collision: frames must be >= 3");
    const double gap_far = 0.55;
    const double radius = 0.35;
    // x extent at maximum separation fixes the voxel scale
    const double longest = 1.0 + gap_far + 2.0 * radius;
    const double voxel = longest / resolution;
    const double gap_touch = 0.25 * voxel;

    const TriMesh cuboid = make_box(Vec3(0, 0, 0), Vec3(1, 1, 1), 12);
    const int mid = (frames - 1) / 2;
    const int rise = std::max(1, static_cast<int>(std::ceil((frames - 1 - mid) * 0.6)));

    MeshSequence seq;
    seq.name = "collision";
    for (int f = 0; f < frames; ++f) {
        double t;
        if (f <= mid) {
            t = static_cast<double>(mid - f) / mid;
        } else {
            t = std::min(1.0, static_cast<double>(f - mid) / rise);
        }
        const double gap = gap_touch + (gap_far - gap_touch) * t * t;
        const Vec3 center(1.0 + gap + radius, 0.5, 0.5);
        TriMesh frame = merge_meshes(cuboid, make_uv_sphere(center, radius, 40, 28));
        frame.frame_index = f;
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

MeshSequence gen_rigid_motion(const TriMesh& base, int frames,
                              const RigidTransform& per_frame_transform) {
    MeshSequence seq;
    seq.name = "rigid_motion";
    RigidTransform acc = RigidTransform::identity();
    for (int f = 0; f < frames; ++f) {
        TriMesh frame = base;
        frame.frame_index = f;
        for (auto& v : frame.vertices) v = acc.apply(v);
        seq.frames.push_back(std::move(frame));
        acc = per_frame_transform.compose(acc);
    }
    return seq;
}

MeshSequence gen_articulated_bar(int frames, double max_bend) {
    if (frames < 1) throw Error("gen_articulated_bar: frames must be >= 1");
    const double length = 4.0;
    const TriMesh base = make_box(Vec3(0, 0, 0), Vec3(length, 0.5, 0.5), 16, 2, 2);
    MeshSequence seq;
    seq.name = "articulated_bar";
    for (int f = 0; f < frames; ++f) {
        const double bend = frames == 1 ? 0.0 : max_bend * f / (frames - 1);
        TriMesh frame = base;
        frame.frame_index = f;
        if (bend > 1e-12) {
            const double arc_radius = length / bend;
            for (auto& v : frame.vertices) {
                const double phi = bend * v.x() / length;
                const double r = arc_radius - v.y();
                v = Vec3(r * std::sin(phi), arc_radius - r * std::cos(phi), v.z());
            }
        }
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

}  // namespace refmesh
