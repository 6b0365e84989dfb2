#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "refmesh/errors.hpp"
#include "refmesh/mesh_io.hpp"
#include "refmesh/pipeline.hpp"
#include "refmesh/synth.hpp"
#include "support.hpp"

using namespace refmesh;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

void write_sequence(const MeshSequence& seq, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& frame : seq.frames) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04d.obj", frame.frame_index);
        save_mesh(frame, (dir / name).string(), MeshFormat::Obj);
    }
}

std::map<std::string, std::string> mini_collision_config(const fs::path& input,
                                                         const fs::path& out) {
    return {
        {"input_dir", input.string()},
        {"out_dir", out.string()},
        {"K", "25"},
        {"gof_size", "2"},
        {"tracking_resolution", "24"},
        {"iou_voxel_rel", "0.02"},
        {"recon_resolution", "40"},
        {"align_block_passes", "1"},
        {"align_pattern_rounds", "6"},
        {"deform_max_iter", "25"},
        {"salient_radius_rel", "0.07"},
        {"nms_radius_rel", "0.1"},
        {"neighborhood_radius_rel", "0.09"},
        // reconstruction at this coarse resolution rounds corners by ~a cell,
        // which is what the match error measures against the sharp frames
        {"sigma_th_rel", "0.5"},
        {"hausdorff_density", "2"},
    };
}

std::vector<char> slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config: defaults, violations, accepted values") {
    PipelineConfig config;
    CHECK(validate_config({}, config).empty());
    CHECK(config.K == 1000);
    CHECK(config.gof_size == 5);
    CHECK(config.tracking_resolution == 512);
    CHECK(config.mds_eps == 1e-20);
    CHECK(config.kernel == "thin_plate_spline");

    CHECK(!validate_config({{"K", "-3"}}, config).empty());
    CHECK(!validate_config({{"unknown_key", "1"}}, config).empty());
    CHECK(!validate_config({{"kernel", "gaussian"}}, config).empty());
    CHECK(!validate_config({{"stop_after", "bogus"}}, config).empty());

    CHECK(validate_config({{"gof_size", "3"}}, config).empty());
    CHECK(config.gof_size == 3);
}

TEST_CASE("config file parsing") {
    const auto dir = temp_dir("pipeline_cfg");
    const auto path = (dir / "run.cfg").string();
    {
        std::ofstream out(path);
        out << "# comment line\n";
        out << "K = 42\n";
        out << "kernel = thin_plate_spline  # trailing comment\n";
        out << "\n";
    }
    const auto kv = read_config_file(path);
    CHECK(kv.at("K") == "42");
    CHECK(kv.at("kernel") == "thin_plate_spline");
    PipelineConfig config;
    CHECK(validate_config(kv, config).empty());
    CHECK(config.K == 42);
}

TEST_CASE("missing input directory fails cleanly") {
    PipelineConfig config;
    REQUIRE(validate_config({}, config).empty());
    config.input_dir = "/nonexistent_refmesh_input";
    config.out_dir = (temp_dir("pipeline_missing") / "out").string();
    CHECK_THROWS_AS(run_pipeline(config), StageError);
}

TEST_CASE("non-watertight input frame is rejected with frame context") {
    const auto dir = temp_dir("pipeline_open");
    const auto input = dir / "seq";
    fs::create_directories(input);
    TriMesh cube = unit_cube();
    save_mesh(cube, (input / "frame_0000.obj").string(), MeshFormat::Obj);
    cube.faces.pop_back();
    save_mesh(cube, (input / "frame_0001.obj").string(), MeshFormat::Obj);

    PipelineConfig config;
    REQUIRE(validate_config({}, config).empty());
    config.input_dir = input.string();
    config.out_dir = (dir / "out").string();
    try {
        run_pipeline(config);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(std::string(e.what()).find("frame 1") != std::string::npos);
    }
}

TEST_CASE("stop-after mds persists only the early artifacts") {
    const auto dir = temp_dir("pipeline_stop");
    const auto input = dir / "seq";
    fs::remove_all(dir / "out");
    write_sequence(gen_collision(4, 24, 1), input);

    auto kv = mini_collision_config(input, dir / "out");
    kv["stop_after"] = "mds";
    PipelineConfig config;
    REQUIRE(validate_config(kv, config).empty());
    run_pipeline(config);

    CHECK(fs::exists(dir / "out" / "trajectories.bin"));
    CHECK(fs::exists(dir / "out" / "manifest.json"));
    CHECK(fs::exists(dir / "out" / "group_0" / "dmatrix.bin"));
    CHECK(fs::exists(dir / "out" / "group_0" / "xg.bin"));
    CHECK_FALSE(fs::exists(dir / "out" / "group_0" / "xprime_f1.bin"));
    CHECK_FALSE(fs::exists(dir / "out" / "group_0" / "ref.obj"));
    CHECK_FALSE(fs::exists(dir / "out" / "report.json"));
}

TEST_CASE("end-to-end mini run produces the full artifact tree") {
    const auto dir = temp_dir("pipeline_full");
    const auto input = dir / "seq";
    fs::remove_all(dir / "out");
    write_sequence(gen_collision(4, 24, 1), input);

    PipelineConfig config;
    REQUIRE(validate_config(mini_collision_config(input, dir / "out"), config).empty());
    const PipelineResult result = run_pipeline(config);

    for (int g = 0; g < 2; ++g) {
        const fs::path gdir = dir / "out" / ("group_" + std::to_string(g));
        CHECK(fs::exists(gdir / "ref.obj"));
        CHECK(fs::exists(gdir / "soup.ply"));
        CHECK(fs::exists(gdir / "iou_trace.csv"));
        const TriMesh ref = load_mesh((gdir / "ref.obj").string());
        CHECK(validate_watertight(ref).watertight);
        int components = 0;
        face_components(ref, &components);
        CHECK(components == 2);
    }
    CHECK(fs::exists(dir / "out" / "report.json"));
    CHECK(result.report_json.find("hausdorff_sym") != std::string::npos);
}

TEST_CASE("resume reproduces the fresh run bit for bit") {
    const auto dir = temp_dir("pipeline_resume");
    const auto input = dir / "seq";
    fs::remove_all(dir / "fresh");
    fs::remove_all(dir / "resumed");
    write_sequence(gen_collision(4, 24, 1), input);

    PipelineConfig config;
    REQUIRE(validate_config(mini_collision_config(input, dir / "fresh"), config).empty());
    run_pipeline(config);

    PipelineConfig staged;
    auto kv = mini_collision_config(input, dir / "resumed");
    kv["stop_after"] = "track";
    REQUIRE(validate_config(kv, staged).empty());
    run_pipeline(staged);
    kv.erase("stop_after");
    REQUIRE(validate_config(kv, staged).empty());
    run_pipeline(staged);  // resumes from trajectories.bin

    const std::vector<std::string> artifacts = {
        "trajectories.bin",
        "group_0/xg.bin",
        "group_0/xprime_f1.bin",
        "group_0/soup_points.bin",
        "group_0/ref.obj",
        "group_0/deformed_f0.obj",
        "group_0/deformed_f1.obj",
        "group_1/ref.obj",
        "group_1/deformed_f3.obj",
    };
    for (const auto& name : artifacts) {
        CAPTURE(name);
        CHECK(slurp(dir / "fresh" / name) == slurp(dir / "resumed" / name));
    }
}

}  // TEST_SUITE
