#include <doctest.h>

#include <random>

#include "refmesh/errors.hpp"
#include "refmesh/metrics.hpp"
#include "refmesh/recon.hpp"
#include "support.hpp"

using namespace refmesh;
using namespace testutil;

namespace {

OrientedPoints sphere_soup(const Vec3& center, double radius, int count, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    OrientedPoints soup;
    for (int i = 0; i < count; ++i) {
        Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
        dir.normalize();
        soup.points.push_back(center + radius * dir);
        soup.normals.push_back(dir);
    }
    return soup;
}

RbfMap identity_map(uint64_t seed) {
    const auto anchors = random_points(12, seed, -2.0, 2.0);
    return fit_rbf(anchors, anchors);
}

RbfMap translation_map(const Vec3& offset, uint64_t seed) {
    const auto anchors = random_points(12, seed, -2.0, 2.0);
    std::vector<Vec3> targets;
    for (const auto& a : anchors) targets.push_back(a + offset);
    return fit_rbf(anchors, targets);
}

}  // namespace

TEST_SUITE("recon") {

TEST_CASE("identity map keeps sphere normals radial") {
    const TriMesh sphere = make_uv_sphere(Vec3(0, 0, 0), 1.0, 32, 24);
    const auto normals = transport_normals(sphere, identity_map(3));
    double worst_angle = 0.0;
    for (size_t i = 0; i < sphere.vertices.size(); ++i) {
        const Vec3 radial = sphere.vertices[i].normalized();
        const double cosine = std::clamp(normals[i].dot(radial), -1.0, 1.0);
        worst_angle = std::max(worst_angle, std::acos(cosine));
    }
    CHECK(worst_angle < 5.0 * M_PI / 180.0);
}

TEST_CASE("translation map leaves normals unchanged") {
    const TriMesh blob = bumpy_blob(7);
    const auto before = vertex_normals(with_outward_orientation(blob));
    const auto after = transport_normals(blob, translation_map(Vec3(1.5, -0.3, 0.8), 9));
    for (size_t i = 0; i < before.size(); ++i)
        CHECK((after[i] - before[i]).norm() < 1e-6);
}

TEST_CASE("inward-oriented cube is flipped before transport") {
    TriMesh cube = unit_cube();
    for (auto& f : cube.faces) std::swap(f[1], f[2]);  // make it inward
    REQUIRE(signed_volume(cube) < 0.0);
    const auto normals = transport_normals(cube, identity_map(5));
    // every cube vertex is a corner: outward normal points away from the center
    for (size_t i = 0; i < cube.vertices.size(); ++i) {
        const Vec3 outward_dir = cube.vertices[i] - Vec3(0.5, 0.5, 0.5);
        CHECK(normals[i].dot(outward_dir) > 0.0);
    }
}

TEST_CASE("sphere soup reconstructs within two cells of the analytic sphere") {
    const OrientedPoints soup = sphere_soup(Vec3(0, 0, 0), 1.0, 10000, 17);
    ReconParams params;
    params.resolution = 64;
    const TriMesh recon = reconstruct(soup, params);
    const double cell = 2.0 / 64.0;

    CHECK(validate_watertight(recon).watertight);

    // analytic oracle, both directions
    double forward = 0.0;
    for (const auto& v : recon.vertices) forward = std::max(forward, std::abs(v.norm() - 1.0));
    const SurfaceDistance to_recon(recon);
    double backward = 0.0;
    for (const auto& p : sphere_soup(Vec3(0, 0, 0), 1.0, 5000, 23).points)
        backward = std::max(backward, to_recon.distance(p));
    CHECK(std::max(forward, backward) < 2.0 * cell);
}

TEST_CASE("disjoint sphere soups reconstruct as two closed components") {
    OrientedPoints soup = sphere_soup(Vec3(0, 0, 0), 0.8, 6000, 29);
    const OrientedPoints other = sphere_soup(Vec3(3, 0, 0), 0.6, 6000, 31);
    soup.points.insert(soup.points.end(), other.points.begin(), other.points.end());
    soup.normals.insert(soup.normals.end(), other.normals.begin(), other.normals.end());

    ReconParams params;
    params.resolution = 64;
    const TriMesh recon = reconstruct(soup, params);
    int count = 0;
    face_components(recon, &count);
    CHECK(count == 2);
    CHECK(validate_watertight(recon).watertight);
    CHECK(min_component_gap(recon) > 0.0);
}

TEST_CASE("adding a distant cluster adds exactly one component") {
    OrientedPoints soup = sphere_soup(Vec3(0, 0, 0), 0.8, 6000, 37);
    ReconParams params;
    params.resolution = 48;
    int base_count = 0;
    face_components(reconstruct(soup, params), &base_count);

    const OrientedPoints extra = sphere_soup(Vec3(4, 0.5, 0), 0.5, 4000, 41);
    soup.points.insert(soup.points.end(), extra.points.begin(), extra.points.end());
    soup.normals.insert(soup.normals.end(), extra.normals.begin(), extra.normals.end());
    int new_count = 0;
    face_components(reconstruct(soup, params), &new_count);
    CHECK(new_count == base_count + 1);
}

TEST_CASE("reconstruction is deterministic") {
    const OrientedPoints soup = sphere_soup(Vec3(0, 0, 0), 1.0, 3000, 43);
    ReconParams params;
    params.resolution = 32;
    const TriMesh a = reconstruct(soup, params);
    const TriMesh b = reconstruct(soup, params);
    REQUIRE(a.faces == b.faces);
    for (size_t i = 0; i < a.vertices.size(); ++i) CHECK(a.vertices[i] == b.vertices[i]);
}

TEST_CASE("empty soup is rejected") {
    OrientedPoints empty;
    CHECK_THROWS_AS(reconstruct(empty), EmptyField);
}

}  // TEST_SUITE
