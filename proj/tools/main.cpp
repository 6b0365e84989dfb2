#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "refmesh/alignment.hpp"
#include "refmesh/errors.hpp"
#include "refmesh/mesh_io.hpp"
#include "refmesh/metrics.hpp"
#include "refmesh/pipeline.hpp"
#include "refmesh/serial.hpp"
#include "refmesh/synth.hpp"

namespace fs = std::filesystem;
using namespace refmesh;

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::string>& sets,
            const std::string& input, const std::string& out, const std::string& stop_after) {
    std::map<std::string, std::string> kv;
    try {
        if (!config_path.empty()) kv = read_config_file(config_path);
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            std::cerr << "config error: --set expects key=value, got '" << s << "'\n";
            return 1;
        }
        kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    if (!input.empty()) kv["input_dir"] = input;
    if (!out.empty()) kv["out_dir"] = out;
    if (!stop_after.empty()) kv["stop_after"] = stop_after;

    PipelineConfig config;
    const auto errors = validate_config(kv, config);
    if (!errors.empty()) {
        std::cerr << "config errors:\n";
        for (const auto& e : errors) std::cerr << "  - " << e << "\n";
        return 1;
    }
    if (config.input_dir.empty()) {
        std::cerr << "config error: input_dir is required\n";
        return 1;
    }

    try {
        const PipelineResult result = run_pipeline(config);
        std::cout << "artifacts in " << result.out_dir.string() << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "stage failure: " << e.what() << "\n";
        return 2;
    }
}

int cmd_gen(const std::string& type, int frames, int resolution, uint64_t seed,
            const std::string& out) {
    MeshSequence seq;
    try {
        if (type == "collision") {
            seq = gen_collision(frames, resolution, seed);
        } else if (type == "rigid") {
            RigidTransform step;
            step.translation = Vec3(0.1, 0, 0);
            seq = gen_rigid_motion(make_box(Vec3(0, 0, 0), Vec3(1, 1, 1), 8), frames, step);
        } else if (type == "bar") {
            seq = gen_articulated_bar(frames, 1.0);
        } else {
            std::cerr << "unknown sequence type '" << type << "'\n";
            return 1;
        }
        fs::create_directories(out);
        for (const auto& frame : seq.frames) {
            char name[32];
            std::snprintf(name, sizeof(name), "frame_%04d.obj", frame.frame_index);
            save_mesh(frame, (fs::path(out) / name).string(), MeshFormat::Obj);
        }
        std::cout << "wrote " << seq.frames.size() << " frames to " << out << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "generation failed: " << e.what() << "\n";
        return 2;
    }
}

int cmd_metrics(const std::string& a_path, const std::string& b_path, double density) {
    try {
        const TriMesh a = load_mesh(a_path);
        const TriMesh b = load_mesh(b_path);
        const auto h = hausdorff(a, b, density);
        nlohmann::json out;
        out["forward"] = h.forward;
        out["backward"] = h.backward;
        out["symmetric"] = h.symmetric;
        std::cout << out.dump(2) << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "metrics failed: " << e.what() << "\n";
        return 2;
    }
}

int cmd_inspect(const std::string& path) {
    try {
        const fs::path p(path);
        const std::string ext = p.extension().string();
        if (ext == ".obj" || ext == ".ply") {
            const TriMesh mesh = load_mesh(path);
            const auto wt = validate_watertight(mesh);
            int components = 0;
            face_components(mesh, &components);
            std::cout << path << ": " << mesh.vertices.size() << " vertices, "
                      << mesh.faces.size() << " faces, " << components << " components, "
                      << (wt.watertight
                              ? std::string("watertight")
                              : "open (" + std::to_string(wt.boundary_edge_count) +
                                    " boundary edges)")
                      << "\n";
        } else if (ext == ".bin") {
            std::ifstream in(path, std::ios::binary);
            if (!in) throw IoError("cannot open " + path);
            uint64_t rows = 0, cols = 0;
            in.read(reinterpret_cast<char*>(&rows), 8);
            in.read(reinterpret_cast<char*>(&cols), 8);
            in.seekg(0, std::ios::end);
            const auto payload = static_cast<uint64_t>(in.tellg()) - 16;
            const std::string kind = payload == rows * cols * 24  ? "points"
                                     : payload == rows * cols * 8 ? "scalars"
                                                                  : "unknown";
            std::cout << path << ": table " << rows << " x " << cols << " (" << kind << ")\n";
        } else if (ext == ".json" || ext == ".csv") {
            std::ifstream in(path);
            if (!in) throw IoError("cannot open " + path);
            std::cout << in.rdbuf();
        } else {
            std::cerr << "inspect: unsupported file " << path << "\n";
            return 1;
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "inspect failed: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reference-mesh extraction pipeline for time-varying mesh sequences"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run the pipeline on a mesh sequence");
    std::string config_path, input, out, stop_after;
    std::vector<std::string> sets;
    run->add_option("--config", config_path, "key=value config file");
    run->add_option("--set", sets, "override a config key (key=value)");
    run->add_option("--input", input, "input directory of .obj/.ply frames");
    run->add_option("--out", out, "artifact directory");
    run->add_option("--stop-after", stop_after, "track|mds|align|soup|recon|deform");

    auto* gen = app.add_subcommand("gen", "generate a synthetic test sequence");
    std::string gen_type = "collision", gen_out = "seq";
    int gen_frames = 10, gen_resolution = 64;
    uint64_t gen_seed = 0;
    gen->add_option("--type", gen_type, "collision|rigid|bar");
    gen->add_option("--frames", gen_frames, "frame count");
    gen->add_option("--resolution", gen_resolution, "voxel resolution (sets the tangency gap)");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output directory")->required();

    auto* metrics = app.add_subcommand("metrics", "Hausdorff distance between two meshes");
    std::string mesh_a, mesh_b;
    double density = 10.0;
    metrics->add_option("--a", mesh_a, "first mesh")->required();
    metrics->add_option("--b", mesh_b, "second mesh")->required();
    metrics->add_option("--density", density, "surface samples per mean triangle area");

    auto* inspect = app.add_subcommand("inspect", "summarize an artifact file");
    std::string artifact;
    inspect->add_option("path", artifact, "mesh / table / report file")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(config_path, sets, input, out, stop_after);
    if (gen->parsed()) return cmd_gen(gen_type, gen_frames, gen_resolution, gen_seed, gen_out);
    if (metrics->parsed()) return cmd_metrics(mesh_a, mesh_b, density);
    if (inspect->parsed()) return cmd_inspect(artifact);
    return 1;
}
