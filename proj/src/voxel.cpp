#include "refmesh/voxel.hpp"

#include <bit>
#include <cmath>
#include <deque>
#include <random>

#include "refmesh/errors.hpp"
#include "refmesh/mesh_io.hpp"

namespace refmesh {

namespace {

GridFrame make_frame(const Aabb& box, double voxel_size) {
    if (voxel_size <= 0.0) throw DegenerateExtent("voxel_size must be positive");
    GridFrame frame;
    frame.voxel_size = voxel_size;
    frame.origin = box.min - Vec3::Constant(voxel_size);
    const Vec3 ext = box.extent();
    for (int a = 0; a < 3; ++a) {
        frame.dims[a] = static_cast<int>(std::ceil(ext[a] / voxel_size)) + 2;
    }
    return frame;
}

void require_watertight(const TriMesh& mesh, const char* where) {
    const auto report = validate_watertight(mesh);
    if (!report.watertight)
        throw NotWatertight(std::string(where) + ": mesh has " +
                            std::to_string(report.boundary_edge_count) + " boundary edges");
}

}  // namespace

GridFrame grid_from_resolution(const Aabb& box, int resolution) {
    if (resolution < 2) throw DegenerateExtent("resolution must be >= 2");
    if (!(box.extent().minCoeff() > 0.0))
        throw DegenerateExtent("bounding box has zero volume");
    return make_frame(box, box.longest_extent() / resolution);
}

GridFrame grid_from_voxel_size(const Aabb& box, double voxel_size) {
    if (!(box.extent().minCoeff() > 0.0))
        throw DegenerateExtent("bounding box has zero volume");
    return make_frame(box, voxel_size);
}

size_t VoxelGrid::occupied_count() const {
    size_t count = 0;
    for (uint64_t w : words) count += std::popcount(w);
    return count;
}

// ---------------------------------------------------------------- inside test

InteriorTester::InteriorTester(const TriMesh& mesh, const GridFrame& frame)
    : vertices_(mesh.vertices), faces_(mesh.faces), frame_(frame) {
    const int ny = frame_.dims[1];
    const int nz = frame_.dims[2];
    column_tris_.assign(static_cast<size_t>(ny) * nz, {});
    const double inv = 1.0 / frame_.voxel_size;
    const double pad = 1e-3 * frame_.voxel_size;  // covers perturbation retries
    scale_ = frame_.voxel_size * std::max({frame_.dims[0], ny, nz});
    for (size_t t = 0; t < faces_.size(); ++t) {
        const auto& f = faces_[t];
        double ymin = vertices_[f[0]].y(), ymax = ymin;
        double zmin = vertices_[f[0]].z(), zmax = zmin;
        for (int k = 1; k < 3; ++k) {
            ymin = std::min(ymin, vertices_[f[k]].y());
            ymax = std::max(ymax, vertices_[f[k]].y());
            zmin = std::min(zmin, vertices_[f[k]].z());
            zmax = std::max(zmax, vertices_[f[k]].z());
        }
        int j0 = static_cast<int>(std::floor((ymin - pad - frame_.origin.y()) * inv));
        int j1 = static_cast<int>(std::floor((ymax + pad - frame_.origin.y()) * inv));
        int k0 = static_cast<int>(std::floor((zmin - pad - frame_.origin.z()) * inv));
        int k1 = static_cast<int>(std::floor((zmax + pad - frame_.origin.z()) * inv));
        j0 = std::max(j0, 0);
        k0 = std::max(k0, 0);
        j1 = std::min(j1, ny - 1);
        k1 = std::min(k1, nz - 1);
        for (int j = j0; j <= j1; ++j)
            for (int k = k0; k <= k1; ++k)
                column_tris_[static_cast<size_t>(j) + static_cast<size_t>(ny) * k].push_back(
                    static_cast<int32_t>(t));
    }
}

std::vector<double> InteriorTester::crossings_for(double y, double z, bool* degenerate) const {
    *degenerate = false;
    std::vector<double> xs;
    const double inv = 1.0 / frame_.voxel_size;
    const int j = static_cast<int>(std::floor((y - frame_.origin.y()) * inv));
    const int k = static_cast<int>(std::floor((z - frame_.origin.z()) * inv));
    if (j < 0 || k < 0 || j >= frame_.dims[1] || k >= frame_.dims[2]) return xs;
    const auto& tris = column_tris_[static_cast<size_t>(j) + static_cast<size_t>(frame_.dims[1]) * k];
    for (int32_t t : tris) {
        const auto& f = faces_[t];
        const Vec3& p0 = vertices_[f[0]];
        const Vec3& p1 = vertices_[f[1]];
        const Vec3& p2 = vertices_[f[2]];
        // edge functions of the (y,z) projection
        const double e0 = (p1.y() - y) * (p2.z() - z) - (p1.z() - z) * (p2.y() - y);
        const double e1 = (p2.y() - y) * (p0.z() - z) - (p2.z() - z) * (p0.y() - y);
        const double e2 = (p0.y() - y) * (p1.z() - z) - (p0.z() - z) * (p1.y() - y);
        const double area2 = e0 + e1 + e2;
        const double mag = std::abs(e0) + std::abs(e1) + std::abs(e2);
        const double tol = 1e-12 * (mag + scale_ * scale_ * 1e-6);
        if (std::abs(area2) <= tol) {
            // projection collapsed to a segment; a graze is ambiguous
            const double ylo = std::min({p0.y(), p1.y(), p2.y()}) - tol;
            const double yhi = std::max({p0.y(), p1.y(), p2.y()}) + tol;
            const double zlo = std::min({p0.z(), p1.z(), p2.z()}) - tol;
            const double zhi = std::max({p0.z(), p1.z(), p2.z()}) + tol;
            if (y >= ylo && y <= yhi && z >= zlo && z <= zhi) *degenerate = true;
            continue;
        }
        int pos = 0, neg = 0, zer = 0;
        for (double e : {e0, e1, e2}) {
            if (e > tol)
                ++pos;
            else if (e < -tol)
                ++neg;
            else
                ++zer;
        }
        if (zer > 0) {
            if (pos > 0 && neg > 0) continue;  // outside, near an extended edge line only
            *degenerate = true;
            continue;
        }
        if (pos != 3 && neg != 3) continue;
        const double w = 1.0 / area2;
        xs.push_back((e0 * p0.x() + e1 * p1.x() + e2 * p2.x()) * w);
    }
    std::sort(xs.begin(), xs.end());
    return xs;
}

std::vector<double> InteriorTester::column_crossings(double y, double z) const {
    bool degenerate = false;
    auto xs = crossings_for(y, z, &degenerate);
    for (int attempt = 1; degenerate && attempt <= 8; ++attempt) {
        const double amp = frame_.voxel_size * 1e-7 * std::pow(3.0, attempt);
        const double dy = amp * std::cos(0.7 + 1.3 * attempt);
        const double dz = amp * std::sin(0.7 + 1.3 * attempt);
        xs = crossings_for(y + dy, z + dz, &degenerate);
    }
    return xs;
}

bool InteriorTester::inside(const Vec3& p) const {
    const auto xs = column_crossings(p.y(), p.z());
    size_t greater = 0;
    for (auto it = xs.rbegin(); it != xs.rend() && *it > p.x(); ++it) ++greater;
    return (greater & 1) != 0;
}

// ---------------------------------------------------------------- voxelize

VoxelGrid voxelize_interior(const TriMesh& mesh, const GridFrame& frame) {
    require_watertight(mesh, "voxelize_interior");
    VoxelGrid grid;
    grid.frame = frame;
    grid.words.assign((frame.cell_count() + 63) / 64, 0);
    InteriorTester tester(mesh, frame);
    const int nx = frame.dims[0], ny = frame.dims[1], nz = frame.dims[2];
#pragma omp parallel for schedule(dynamic, 4)
    for (int k = 0; k < nz; ++k) {
        for (int j = 0; j < ny; ++j) {
            const Vec3 c = frame.cell_center(0, j, k);
            const auto xs = tester.column_crossings(c.y(), c.z());
            if (xs.empty()) continue;
            const size_t n = xs.size();
            size_t ptr = 0;
            for (int i = 0; i < nx; ++i) {
                const double cx = frame.origin.x() + frame.voxel_size * (i + 0.5);
                while (ptr < n && xs[ptr] < cx) ++ptr;
                if (((n - ptr) & 1) != 0) grid.set(frame.cell_index(i, j, k));
            }
        }
    }
    return grid;
}

VoxelGrid voxelize_interior(const TriMesh& mesh, int resolution) {
    return voxelize_interior(mesh, grid_from_resolution(bounding_box(mesh), resolution));
}

VoxelGrid voxelize_interior(const TriMesh& mesh, double voxel_size) {
    return voxelize_interior(mesh, grid_from_voxel_size(bounding_box(mesh), voxel_size));
}

double iou(const VoxelGrid& a, const VoxelGrid& b) {
    if (!a.frame.same_as(b.frame)) throw GridMismatch("iou: voxel grids use different frames");
    size_t inter = 0, uni = 0;
    for (size_t w = 0; w < a.words.size(); ++w) {
        inter += std::popcount(a.words[w] & b.words[w]);
        uni += std::popcount(a.words[w] | b.words[w]);
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Vec3> sample_interior(const TriMesh& mesh, int count, uint64_t seed) {
    require_watertight(mesh, "sample_interior");
    if (count < 1) throw Error("sample_interior: count must be >= 1");
    const VoxelGrid grid = voxelize_interior(mesh, 64);
    const auto cells = occupied_cells(grid);
    if (cells.empty()) throw EmptyVolume("sample_interior: no interior voxels");
    InteriorTester tester(mesh, grid.frame);

    const int nx = grid.frame.dims[0];
    const int ny = grid.frame.dims[1];
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<size_t> pick(0, cells.size() - 1);
    std::uniform_real_distribution<double> jitter(0.0, 1.0);
    std::vector<Vec3> points;
    points.reserve(count);
    while (static_cast<int>(points.size()) < count) {
        const size_t cell = cells[pick(rng)];
        const int i = static_cast<int>(cell % nx);
        const int j = static_cast<int>((cell / nx) % ny);
        const int k = static_cast<int>(cell / (static_cast<size_t>(nx) * ny));
        const Vec3 corner = grid.frame.origin + grid.frame.voxel_size * Vec3(i, j, k);
        Vec3 p;
        bool ok = false;
        for (int attempt = 0; attempt < 16 && !ok; ++attempt) {
            p = corner + grid.frame.voxel_size * Vec3(jitter(rng), jitter(rng), jitter(rng));
            ok = tester.inside(p);
        }
        if (!ok) p = grid.frame.cell_center(i, j, k);  // center is inside by construction
        points.push_back(p);
    }
    return points;
}

std::vector<Vec3> occupied_centers(const VoxelGrid& grid) {
    std::vector<Vec3> centers;
    const int nx = grid.frame.dims[0], ny = grid.frame.dims[1], nz = grid.frame.dims[2];
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                if (grid.occupied(grid.frame.cell_index(i, j, k)))
                    centers.push_back(grid.frame.cell_center(i, j, k));
    return centers;
}

std::vector<size_t> occupied_cells(const VoxelGrid& grid) {
    std::vector<size_t> cells;
    const size_t total = grid.frame.cell_count();
    for (size_t c = 0; c < total; ++c)
        if (grid.occupied(c)) cells.push_back(c);
    return cells;
}

int volume_components(const VoxelGrid& grid, std::vector<int>& labels) {
    const int nx = grid.frame.dims[0], ny = grid.frame.dims[1], nz = grid.frame.dims[2];
    const size_t total = grid.frame.cell_count();
    labels.assign(total, -1);
    int count = 0;
    std::deque<size_t> queue;
    for (size_t start = 0; start < total; ++start) {
        if (!grid.occupied(start) || labels[start] >= 0) continue;
        labels[start] = count;
        queue.push_back(start);
        while (!queue.empty()) {
            const size_t cell = queue.front();
            queue.pop_front();
            const int i = static_cast<int>(cell % nx);
            const int j = static_cast<int>((cell / nx) % ny);
            const int k = static_cast<int>(cell / (static_cast<size_t>(nx) * ny));
            const int di[6] = {1, -1, 0, 0, 0, 0};
            const int dj[6] = {0, 0, 1, -1, 0, 0};
            const int dk[6] = {0, 0, 0, 0, 1, -1};
            for (int d = 0; d < 6; ++d) {
                const int ni = i + di[d], nj = j + dj[d], nk = k + dk[d];
                if (ni < 0 || nj < 0 || nk < 0 || ni >= nx || nj >= ny || nk >= nz) continue;
                const size_t ncell = grid.frame.cell_index(ni, nj, nk);
                if (grid.occupied(ncell) && labels[ncell] < 0) {
                    labels[ncell] = count;
                    queue.push_back(ncell);
                }
            }
        }
        ++count;
    }
    return count;
}

void dump_occupied_ply(const VoxelGrid& grid, const std::string& path) {
    save_point_cloud_ply(occupied_centers(grid), nullptr, nullptr, path);
}

}  // namespace refmesh
