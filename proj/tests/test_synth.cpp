#include <doctest.h>

#include "refmesh/mesh.hpp"
#include "refmesh/synth.hpp"
#include "support.hpp"

using namespace refmesh;
using namespace testutil;

namespace {

// closest gap between the sphere component and the cuboid component
double sphere_cuboid_gap(const TriMesh& frame) { return min_component_gap(frame); }

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("collision: gap profile and watertightness") {
    const int frames = 10, resolution = 64;
    const MeshSequence seq = gen_collision(frames, resolution, 1);
    REQUIRE(static_cast<int>(seq.frames.size()) == frames);

    Aabb box;
    for (const auto& f : seq.frames) box.expand(bounding_box(f));

    const double gap0 = sphere_cuboid_gap(seq.frames[0]);
    const double gap4 = sphere_cuboid_gap(seq.frames[4]);
    const double gap9 = sphere_cuboid_gap(seq.frames[9]);
    CHECK(gap0 > gap4);
    CHECK(gap4 < 0.01 * box.diagonal());
    CHECK(gap9 == doctest::Approx(gap0).epsilon(0.05));

    for (const auto& frame : seq.frames) {
        const auto report = validate_watertight(frame);
        CHECK(report.watertight);
        int count = 0;
        face_components(frame, &count);
        CHECK(count == 2);
    }
}

TEST_CASE("collision: deterministic per seed") {
    const MeshSequence a = gen_collision(8, 64, 7);
    const MeshSequence b = gen_collision(8, 64, 7);
    REQUIRE(a.frames.size() == b.frames.size());
    for (size_t f = 0; f < a.frames.size(); ++f) {
        REQUIRE(a.frames[f].faces == b.frames[f].faces);
        for (size_t i = 0; i < a.frames[f].vertices.size(); ++i)
            CHECK(a.frames[f].vertices[i] == b.frames[f].vertices[i]);
    }
}

TEST_CASE("rigid motion: identity and translation") {
    const TriMesh base = unit_cube();
    const MeshSequence still = gen_rigid_motion(base, 4, RigidTransform::identity());
    for (const auto& frame : still.frames)
        for (size_t i = 0; i < frame.vertices.size(); ++i)
            CHECK(frame.vertices[i] == base.vertices[i]);

    RigidTransform shift;
    shift.translation = Vec3(0.1, 0, 0);
    const MeshSequence moving = gen_rigid_motion(base, 5, shift);
    for (int f = 0; f < 5; ++f)
        for (size_t i = 0; i < base.vertices.size(); ++i)
            CHECK((moving.frames[f].vertices[i] - (base.vertices[i] + Vec3(0.1 * f, 0, 0))).norm() <
                  1e-12);
}

TEST_CASE("rigid motion: rotations compose") {
    const TriMesh base = unit_cube();
    RigidTransform rot;
    rot.rotation = Eigen::AngleAxisd(M_PI / 18.0, Vec3::UnitZ()).toRotationMatrix();
    const MeshSequence seq = gen_rigid_motion(base, 10, rot);
    const Mat3 quarter = Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitZ()).toRotationMatrix();
    for (size_t i = 0; i < base.vertices.size(); ++i)
        CHECK((seq.frames[9].vertices[i] - quarter * base.vertices[i]).norm() < 1e-9);
}

TEST_CASE("articulated bar: straight start, monotone tip, watertight") {
    const MeshSequence seq = gen_articulated_bar(6, 1.2);
    const TriMesh straight = seq.frames[0];
    Aabb box = bounding_box(straight);
    CHECK(box.extent().x() == doctest::Approx(4.0));

    double prev_tip = -1.0;
    for (const auto& frame : seq.frames) {
        CHECK(validate_watertight(frame).watertight);
        double tip_y = 0.0;
        for (const auto& v : frame.vertices) tip_y = std::max(tip_y, v.y());
        CHECK(tip_y >= prev_tip - 1e-12);
        prev_tip = tip_y;
    }
    CHECK(prev_tip > 0.5);
}

}  // TEST_SUITE
