#include <doctest.h>

#include <random>

#include "refmesh/errors.hpp"
#include "refmesh/voxel.hpp"
#include "support.hpp"

using namespace refmesh;
using namespace testutil;

TEST_SUITE("voxel") {

TEST_CASE("unit cube occupancy matches the per-cell parity oracle exactly") {
    const TriMesh cube = unit_cube();
    const VoxelGrid grid = voxelize_interior(cube, 8);
    const ParityOracle oracle(cube);

    size_t oracle_count = 0;
    const auto& fr = grid.frame;
    for (int k = 0; k < fr.dims[2]; ++k)
        for (int j = 0; j < fr.dims[1]; ++j)
            for (int i = 0; i < fr.dims[0]; ++i) {
                const bool expected = oracle.inside(fr.cell_center(i, j, k));
                if (expected) ++oracle_count;
                CHECK(grid.occupied(fr.cell_index(i, j, k)) == expected);
            }
    CHECK(grid.occupied_count() == oracle_count);
    CHECK(grid.occupied_count() >= 6 * 6 * 6);
    CHECK(grid.occupied_count() <= 8 * 8 * 8);
}

TEST_CASE("sphere occupancy matches the oracle") {
    const TriMesh sphere = make_uv_sphere(Vec3(0.2, -0.1, 0.4), 0.7, 20, 14);
    const VoxelGrid grid = voxelize_interior(sphere, 12);
    const ParityOracle oracle(sphere);
    const auto& fr = grid.frame;
    for (int k = 0; k < fr.dims[2]; ++k)
        for (int j = 0; j < fr.dims[1]; ++j)
            for (int i = 0; i < fr.dims[0]; ++i)
                CHECK(grid.occupied(fr.cell_index(i, j, k)) ==
                      oracle.inside(fr.cell_center(i, j, k)));
}

TEST_CASE("disjoint spheres voxelize to the union of the parts") {
    const TriMesh a = make_uv_sphere(Vec3(0, 0, 0), 0.8, 16, 12);
    const TriMesh b = make_uv_sphere(Vec3(2.5, 0.3, 0), 0.6, 16, 12);
    const TriMesh merged = merge_meshes(a, b);
    const GridFrame frame = grid_from_resolution(bounding_box(merged), 24);

    const VoxelGrid ga = voxelize_interior(a, frame);
    const VoxelGrid gb = voxelize_interior(b, frame);
    const VoxelGrid gm = voxelize_interior(merged, frame);
    REQUIRE(ga.words.size() == gm.words.size());
    for (size_t w = 0; w < gm.words.size(); ++w) CHECK(gm.words[w] == (ga.words[w] | gb.words[w]));
}

TEST_CASE("non-watertight input is rejected") {
    TriMesh cube = unit_cube();
    cube.faces.pop_back();
    CHECK_THROWS_AS(voxelize_interior(cube, 8), NotWatertight);
}

TEST_CASE("iou identities") {
    const VoxelGrid g = voxelize_interior(unit_cube(), 8);
    CHECK(iou(g, g) == 1.0);

    VoxelGrid a, b;
    a.frame = b.frame = grid_from_resolution(Aabb{Vec3(0, 0, 0), Vec3(4, 4, 4)}, 4);
    a.words.assign((a.frame.cell_count() + 63) / 64, 0);
    b.words = a.words;
    // a = cells {1..8}, b = cells {5..12}: |I|=4, |U|=12
    for (size_t c = 1; c <= 8; ++c) a.set(c);
    for (size_t c = 5; c <= 12; ++c) b.set(c);
    CHECK(iou(a, b) == doctest::Approx(4.0 / 12.0));

    VoxelGrid d = a;
    d.words.assign(d.words.size(), 0);
    for (size_t c = 20; c <= 25; ++c) d.set(c);
    CHECK(iou(a, d) == 0.0);

    VoxelGrid e1 = a, e2 = a;
    e1.words.assign(e1.words.size(), 0);
    e2.words.assign(e2.words.size(), 0);
    CHECK(iou(e1, e2) == 1.0);

    VoxelGrid other;
    other.frame = grid_from_resolution(Aabb{Vec3(0, 0, 0), Vec3(2, 2, 2)}, 4);
    other.words.assign((other.frame.cell_count() + 63) / 64, 0);
    CHECK_THROWS_AS(iou(a, other), GridMismatch);
}

TEST_CASE("iou randomized: symmetry and disjointness") {
    std::mt19937_64 rng(3);
    GridFrame frame = grid_from_resolution(Aabb{Vec3(0, 0, 0), Vec3(1, 1, 1)}, 6);
    for (int trial = 0; trial < 20; ++trial) {
        VoxelGrid a, b;
        a.frame = b.frame = frame;
        a.words.assign((frame.cell_count() + 63) / 64, 0);
        b.words = a.words;
        for (size_t c = 0; c < frame.cell_count(); ++c) {
            if (rng() % 3 == 0) a.set(c);
            if (rng() % 3 == 0) b.set(c);
        }
        CHECK(iou(a, b) == iou(b, a));
        size_t inter = 0;
        for (size_t w = 0; w < a.words.size(); ++w)
            inter += std::popcount(a.words[w] & b.words[w]);
        if (a.occupied_count() > 0 && b.occupied_count() > 0)
            CHECK((iou(a, b) == 0.0) == (inter == 0));
    }
}

TEST_CASE("volume converges to the analytic cube volume") {
    double prev_err = 1e9;
    for (int res : {16, 32, 64}) {
        const VoxelGrid grid = voxelize_interior(unit_cube(), res);
        const double vol = static_cast<double>(grid.occupied_count()) *
                           std::pow(grid.frame.voxel_size, 3);
        const double err = std::abs(vol - 1.0);
        CHECK(err < prev_err + 1e-12);
        prev_err = err;
        if (res == 64) CHECK(err < 0.05);
    }
}

TEST_CASE("sample_interior: containment, determinism, mean") {
    const TriMesh cube = unit_cube();
    const auto pts = sample_interior(cube, 1000, 42);
    REQUIRE(pts.size() == 1000);
    for (const auto& p : pts) {
        CHECK(p.x() > 0.0);
        CHECK(p.x() < 1.0);
        CHECK(p.y() > 0.0);
        CHECK(p.y() < 1.0);
        CHECK(p.z() > 0.0);
        CHECK(p.z() < 1.0);
    }

    const auto again = sample_interior(cube, 1000, 42);
    for (size_t i = 0; i < pts.size(); ++i) CHECK(pts[i] == again[i]);

    const auto many = sample_interior(cube, 100000, 9);
    Vec3 mean = Vec3::Zero();
    for (const auto& p : many) mean += p;
    mean /= static_cast<double>(many.size());
    CHECK((mean - Vec3(0.5, 0.5, 0.5)).norm() < 0.01);
}

TEST_CASE("sample_interior points pass the voxelizer's inside test") {
    const TriMesh sphere = make_uv_sphere(Vec3(0, 0, 0), 1.0, 16, 12);
    const auto pts = sample_interior(sphere, 500, 5);
    const GridFrame frame = grid_from_resolution(bounding_box(sphere), 64);
    const InteriorTester tester(sphere, frame);
    for (const auto& p : pts) CHECK(tester.inside(p));
}

TEST_CASE("volume components: merged disjoint solids") {
    const TriMesh two = merge_meshes(make_uv_sphere(Vec3(0, 0, 0), 0.8, 16, 12),
                                     make_box(Vec3(3, -0.5, -0.5), Vec3(4, 0.5, 0.5), 2));
    const VoxelGrid grid = voxelize_interior(two, 32);
    std::vector<int> labels;
    CHECK(volume_components(grid, labels) == 2);
}

}  // TEST_SUITE
