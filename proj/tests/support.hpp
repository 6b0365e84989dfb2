#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "refmesh/mesh.hpp"
#include "refmesh/synth.hpp"
#include "refmesh/voxel.hpp"

namespace testutil {

using namespace refmesh;

inline TriMesh unit_cube() { return make_box(Vec3(0, 0, 0), Vec3(1, 1, 1), 1); }

inline std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("refmesh_test_" + tag);
    std::filesystem::create_directories(dir);
    return dir;
}

// Independent per-cell inside test: Moeller-Trumbore ray casting in a fixed
// non-axis direction, perturbed deterministically on near-degenerate hits.
class ParityOracle {
public:
    explicit ParityOracle(const TriMesh& mesh) : mesh_(mesh) {}

    bool inside(const Vec3& p) const {
        Vec3 dir = Vec3(0.287514, 0.572301, 0.769443).normalized();
        for (int attempt = 0; attempt < 12; ++attempt) {
            int crossings = 0;
            bool degenerate = false;
            for (const auto& f : mesh_.faces) {
                const int hit = ray_hits(p, dir, mesh_.vertices[f[0]], mesh_.vertices[f[1]],
                                         mesh_.vertices[f[2]]);
                if (hit < 0) {
                    degenerate = true;
                    break;
                }
                crossings += hit;
            }
            if (!degenerate) return (crossings & 1) != 0;
            dir = Vec3(dir.x() + 1e-4 * (attempt + 1), dir.y() + 3e-5 * (attempt + 1),
                       dir.z() - 2e-5 * (attempt + 1))
                      .normalized();
        }
        return false;
    }

private:
    // 1 = proper hit, 0 = miss, -1 = degenerate (retry with a new direction)
    static int ray_hits(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                        const Vec3& c) {
        const Vec3 e1 = b - a, e2 = c - a;
        const Vec3 pvec = dir.cross(e2);
        const double det = e1.dot(pvec);
        const double scale = e1.norm() * e2.norm();
        if (std::abs(det) < 1e-12 * scale) {
            // ray parallel to triangle plane; degenerate only if nearly coplanar through it
            const Vec3 n = e1.cross(e2);
            if (std::abs(n.dot(origin - a)) < 1e-9 * scale) return -1;
            return 0;
        }
        const double inv = 1.0 / det;
        const Vec3 tvec = origin - a;
        const double u = tvec.dot(pvec) * inv;
        const Vec3 qvec = tvec.cross(e1);
        const double v = dir.dot(qvec) * inv;
        const double t = e2.dot(qvec) * inv;
        const double eps = 1e-10;
        if (u < -eps || v < -eps || u + v > 1 + eps || std::abs(t) < eps) {
            if ((u > -eps && u < eps) || (v > -eps && v < eps) ||
                (u + v > 1 - eps && u + v < 1 + eps) || std::abs(t) < eps) {
                if (u > -1e-6 && v > -1e-6 && u + v < 1 + 1e-6 && t > -1e-6) return -1;
            }
            return 0;
        }
        if (u < eps || v < eps || u + v > 1 - eps) return -1;
        return t > 0 ? 1 : 0;
    }

    const TriMesh& mesh_;
};

// sphere with seeded radial bumps; watertight and free of exact symmetries
inline TriMesh bumpy_blob(uint64_t seed, const Vec3& center = Vec3(0, 0, 0), double radius = 0.8) {
    TriMesh blob = make_uv_sphere(center, radius, 18, 13);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> bump(-0.12, 0.12);
    for (auto& v : blob.vertices) v = center + (v - center) * (1.0 + bump(rng));
    return blob;
}

// sphere with a few sharp bumps of distinct heights at irregular directions;
// every bump tip is a distinctive landmark
inline TriMesh knobby_blob(uint64_t seed, const Vec3& center = Vec3(0, 0, 0),
                           double radius = 0.5) {
    TriMesh blob = make_uv_sphere(center, radius, 48, 36);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> height(0.35, 0.75);
    std::vector<Vec3> dirs;
    std::vector<double> amps;
    for (int k = 0; k < 7; ++k) {
        Vec3 d(gauss(rng), gauss(rng), gauss(rng));
        d.normalize();
        dirs.push_back(d);
        amps.push_back(height(rng) * (1.0 + 0.15 * k));
    }
    const double width = 0.22;
    for (auto& v : blob.vertices) {
        const Vec3 dir = (v - center).normalized();
        double scale = 1.0;
        for (size_t k = 0; k < dirs.size(); ++k) {
            const double angle = std::acos(std::clamp(dir.dot(dirs[k]), -1.0, 1.0));
            scale += amps[k] * std::exp(-(angle * angle) / (width * width));
        }
        v = center + radius * scale * dir;
    }
    return blob;
}

inline std::vector<Vec3> random_points(int n, uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) pts.emplace_back(dist(rng), dist(rng), dist(rng));
    return pts;
}

}  // namespace testutil
