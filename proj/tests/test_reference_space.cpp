#include <doctest.h>

#include <random>

#include "refmesh/errors.hpp"
#include "refmesh/optim.hpp"
#include "refmesh/reference_space.hpp"
#include "support.hpp"

using namespace refmesh;
using namespace testutil;

namespace {

// trajectories from explicit per-frame center lists: frames[f][i]
CenterTrajectories from_frames(const std::vector<std::vector<Vec3>>& frames) {
    CenterTrajectories traj;
    traj.N = static_cast<int>(frames.size());
    traj.K = static_cast<int>(frames[0].size());
    traj.positions.resize(static_cast<size_t>(traj.K) * traj.N);
    for (int f = 0; f < traj.N; ++f)
        for (int i = 0; i < traj.K; ++i) traj.at(i, f) = frames[f][i];
    return traj;
}

DistanceMatrix matrix_of_points(const std::vector<Vec3>& pts) {
    DistanceMatrix dm;
    dm.K = static_cast<int>(pts.size());
    dm.d.assign(static_cast<size_t>(dm.K) * dm.K, 0.0);
    for (int i = 0; i < dm.K; ++i)
        for (int j = 0; j < dm.K; ++j) dm.at(i, j) = (pts[i] - pts[j]).norm();
    return dm;
}

}  // namespace

TEST_SUITE("reference_space") {

TEST_CASE("distance matrix: static trajectories reduce to single-frame distances") {
    const auto pts = random_points(12, 44);
    const CenterTrajectories traj = from_frames({pts, pts, pts});
    const DistanceMatrix dm = build_distance_matrix(traj, 0, 2);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j)
            CHECK(dm.at(i, j) == doctest::Approx((pts[i] - pts[j]).norm()).epsilon(1e-14));
}

TEST_CASE("distance matrix: max over frames") {
    std::vector<std::vector<Vec3>> frames = {
        {Vec3(0, 0, 0), Vec3(1, 0, 0)},
        {Vec3(0, 0, 0), Vec3(3, 0, 0)},
        {Vec3(0, 0, 0), Vec3(2, 0, 0)},
    };
    const DistanceMatrix dm = build_distance_matrix(from_frames(frames), 0, 2);
    CHECK(dm.at(0, 1) == 3.0);
    CHECK(dm.at(1, 0) == 3.0);
    CHECK(dm.at(0, 0) == 0.0);
}

TEST_CASE("distance matrix: matches the brute-force triple loop") {
    std::mt19937_64 rng(9);
    std::vector<std::vector<Vec3>> frames;
    for (int f = 0; f < 5; ++f) frames.push_back(random_points(20, rng()));
    const CenterTrajectories traj = from_frames(frames);
    const DistanceMatrix dm = build_distance_matrix(traj, 0, 4);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 20; ++j) {
            double expect = 0.0;
            for (int f = 0; f < 5; ++f)
                expect = std::max(expect, (frames[f][i] - frames[f][j]).norm());
            CHECK(dm.at(i, j) == expect);
        }

    CHECK_THROWS_AS(build_distance_matrix(traj, 3, 2), EmptyRange);
    CHECK_THROWS_AS(build_distance_matrix(traj, 0, 5), EmptyRange);
}

TEST_CASE("mds: recovers a unit tetrahedron") {
    const double s = 1.0 / std::sqrt(2.0);
    const std::vector<Vec3> tetra = {Vec3(1, 0, -s), Vec3(-1, 0, -s), Vec3(0, 1, s),
                                     Vec3(0, -1, s)};
    const DistanceMatrix dm = matrix_of_points(tetra);
    const ReferenceCenters rc = mds_embed(dm);
    CHECK(rc.stress < 1e-8);
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            CHECK((rc.points[i] - rc.points[j]).norm() ==
                  doctest::Approx(dm.at(i, j)).epsilon(1e-6));
}

TEST_CASE("mds: all-zero distances collapse to coincident points") {
    DistanceMatrix dm;
    dm.K = 5;
    dm.d.assign(25, 0.0);
    const ReferenceCenters rc = mds_embed(dm);
    REQUIRE(rc.points.size() == 5);
    CHECK(rc.stress == 0.0);
    CHECK(rc.converged);
    for (const auto& p : rc.points) CHECK(p.norm() == 0.0);
}

TEST_CASE("mds: stress is non-increasing and the stress field is recomputable") {
    const auto pts = random_points(30, 77);
    DistanceMatrix dm = matrix_of_points(pts);
    // make it non-Euclidean so SMACOF has work to do
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> noise(0.9, 1.1);
    for (int i = 0; i < dm.K; ++i)
        for (int j = i + 1; j < dm.K; ++j) {
            const double v = dm.at(i, j) * noise(rng);
            dm.at(i, j) = v;
            dm.at(j, i) = v;
        }
    std::vector<double> trace;
    const ReferenceCenters rc = mds_embed(dm, {}, &trace);
    REQUIRE(trace.size() >= 2);
    for (size_t k = 1; k < trace.size(); ++k) CHECK(trace[k] <= trace[k - 1] + 1e-12);
    CHECK(normalized_stress(dm, rc.points) == doctest::Approx(rc.stress).epsilon(1e-12));
}

TEST_CASE("mds: rigid-motion distance matrix embeds onto the frame-0 centers") {
    // distances are invariant along a rigid trajectory, so the matrix is
    // realized exactly by the frame-0 configuration
    const auto pts = random_points(25, 3);
    RigidTransform step;
    step.rotation = Eigen::AngleAxisd(0.15, Vec3(0.3, 1, 0.2).normalized()).toRotationMatrix();
    step.translation = Vec3(0.1, -0.05, 0.2);
    std::vector<std::vector<Vec3>> frames{pts};
    for (int f = 1; f < 6; ++f) {
        std::vector<Vec3> next;
        for (const auto& p : frames.back()) next.push_back(step.apply(p));
        frames.push_back(next);
    }
    const DistanceMatrix dm = build_distance_matrix(from_frames(frames), 0, 5);
    const ReferenceCenters rc = mds_embed(dm);

    Aabb box;
    for (const auto& p : pts) box.expand(p);
    CHECK(rc.stress < 1e-6);
    // the embedding is defined up to isometry including reflection
    const auto aligned = orient_and_align(rc.points, pts);
    double sq = 0.0;
    for (size_t i = 0; i < pts.size(); ++i) sq += (aligned[i] - pts[i]).squaredNorm();
    CHECK(std::sqrt(sq / pts.size()) < 1e-6 * box.diagonal());
}

TEST_CASE("mds: seed does not change the embedding shape") {
    const auto pts = random_points(15, 21);
    const DistanceMatrix dm = matrix_of_points(pts);
    MdsParams a, b;
    a.seed = 1;
    b.seed = 999;
    const ReferenceCenters ra = mds_embed(dm, a);
    const ReferenceCenters rb = mds_embed(dm, b);
    CHECK(procrustes_rmse(ra.points, rb.points) < 1e-6);
}

TEST_CASE("rigid_align: identity and exact recovery") {
    const auto pts = random_points(30, 8);
    const RigidTransform id = rigid_align(pts, pts);
    CHECK((id.rotation - Mat3::Identity()).norm() < 1e-12);
    CHECK(id.translation.norm() < 1e-12);

    RigidTransform gt;
    gt.rotation = Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitZ()).toRotationMatrix();
    gt.translation = Vec3(1, 2, 3);
    std::vector<Vec3> moved;
    for (const auto& p : pts) moved.push_back(gt.apply(p));
    const RigidTransform rec = rigid_align(pts, moved);
    CHECK((rec.rotation - gt.rotation).norm() < 1e-9);
    CHECK((rec.translation - gt.translation).norm() < 1e-9);
}

TEST_CASE("rigid_align: orthonormal rotation with det +1") {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_points(10, rng());
        const auto b = random_points(10, rng());
        const RigidTransform rt = rigid_align(a, b);
        CHECK((rt.rotation.transpose() * rt.rotation - Mat3::Identity()).norm() < 1e-12);
        CHECK(rt.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("rigid_align: least-squares optimal under jitter") {
    std::mt19937_64 rng(31);
    const auto pts = random_points(100, 62);
    RigidTransform gt;
    gt.rotation = Eigen::AngleAxisd(0.6, Vec3(1, 1, 0).normalized()).toRotationMatrix();
    gt.translation = Vec3(0.5, -1, 2);
    std::normal_distribution<double> jitter(0.0, 0.01);
    std::vector<Vec3> noisy;
    for (const auto& p : pts)
        noisy.push_back(gt.apply(p) + Vec3(jitter(rng), jitter(rng), jitter(rng)));

    auto rmse_of = [&](const RigidTransform& rt) {
        double sq = 0.0;
        for (size_t i = 0; i < pts.size(); ++i) sq += (rt.apply(pts[i]) - noisy[i]).squaredNorm();
        return std::sqrt(sq / static_cast<double>(pts.size()));
    };

    const RigidTransform kabsch = rigid_align(pts, noisy);
    const double kabsch_rmse = rmse_of(kabsch);

    // independent numeric refinement over (axis-angle, translation)
    auto objective = [&](const Eigen::VectorXd& v) {
        RigidTransform rt;
        rt.rotation = axis_angle_to_matrix(Vec3(v[0], v[1], v[2]));
        rt.translation = Vec3(v[3], v[4], v[5]);
        return rmse_of(rt);
    };
    Eigen::VectorXd start(6);
    const Vec3 aa = matrix_to_axis_angle(kabsch.rotation);
    start << aa.x() + 0.05, aa.y() - 0.03, aa.z() + 0.02, kabsch.translation.x() + 0.02,
        kabsch.translation.y(), kabsch.translation.z() - 0.01;
    double refined = 0.0;
    nelder_mead(objective, start, 0.02, 2000, &refined);

    CHECK(kabsch_rmse <= refined + 1e-9);
}

TEST_CASE("rigid_align: degenerate input rejected") {
    std::vector<Vec3> line = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)};
    CHECK_THROWS_AS(rigid_align(line, line), DegenerateConfiguration);
    std::vector<Vec3> two = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    CHECK_THROWS_AS(rigid_align(two, two), DegenerateConfiguration);
}

TEST_CASE("separation: embedded clusters keep the max-over-time gap") {
    const MeshSequence seq = gen_collision(9, 48, 2);
    const CenterTrajectories traj = track_sequence(seq, 40, 48, 3);
    const DistanceMatrix dm = build_distance_matrix(traj, 0, traj.N - 1);
    const ReferenceCenters rc = mds_embed(dm);

    // cluster identity from the neighbor graph (two components)
    std::vector<int> label(traj.K, -1);
    int components = 0;
    for (int start = 0; start < traj.K; ++start) {
        if (label[start] >= 0) continue;
        std::vector<int> stack{start};
        label[start] = components;
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            for (int j : traj.neighbor_graph[i])
                if (label[j] < 0) {
                    label[j] = components;
                    stack.push_back(j);
                }
        }
        ++components;
    }
    REQUIRE(components == 2);

    auto cluster_gap = [&](const std::vector<Vec3>& pts) {
        double gap = std::numeric_limits<double>::max();
        for (int i = 0; i < traj.K; ++i)
            for (int j = 0; j < traj.K; ++j)
                if (label[i] == 0 && label[j] == 1)
                    gap = std::min(gap, (pts[i] - pts[j]).norm());
        return gap;
    };

    double best_frame_gap = 0.0;
    for (int f = 0; f < traj.N; ++f) {
        std::vector<Vec3> frame_pts(traj.K);
        for (int i = 0; i < traj.K; ++i) frame_pts[i] = traj.at(i, f);
        best_frame_gap = std::max(best_frame_gap, cluster_gap(frame_pts));
    }
    const double embedded_gap = cluster_gap(rc.points);
    CHECK(embedded_gap > 0.0);
    CHECK(embedded_gap >= 0.9 * best_frame_gap);
}

TEST_CASE("serialization round-trips") {
    const auto dir = temp_dir("refspace");
    const auto pts = random_points(9, 5);
    const DistanceMatrix dm = matrix_of_points(pts);
    save_distance_matrix(dm, (dir / "dm.bin").string());
    const DistanceMatrix dm2 = load_distance_matrix((dir / "dm.bin").string());
    CHECK(dm2.K == dm.K);
    CHECK(dm2.d == dm.d);

    ReferenceCenters rc = mds_embed(dm);
    save_reference_centers(rc, (dir / "rc.bin").string());
    const ReferenceCenters rc2 = load_reference_centers((dir / "rc.bin").string());
    REQUIRE(rc2.points.size() == rc.points.size());
    for (size_t i = 0; i < rc.points.size(); ++i) CHECK(rc2.points[i] == rc.points[i]);
    CHECK(rc2.converged == rc.converged);
    CHECK(rc2.stress == doctest::Approx(rc.stress).epsilon(1e-6));
}

}  // TEST_SUITE
