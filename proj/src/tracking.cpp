#include "refmesh/tracking.hpp"

#include <Eigen/SVD>
#include <Eigen/Sparse>
#include <fstream>
#include <random>

#include "refmesh/errors.hpp"
#include "refmesh/kdtree.hpp"
#include "refmesh/serial.hpp"

namespace refmesh {

namespace {

// All solver math runs in lattice coordinates of the frame's grid
// ((p - origin) / voxel_size), so a translated input sequence reproduces the
// baseline computation on identical lattice values.
struct FrameData {
    VoxelGrid grid;
    std::vector<std::array<int, 3>> cells;  // occupied lattice cells
    std::vector<Vec3> voxels;               // their centers, lattice units
    KdTree3 voxel_tree;

    Vec3 to_lattice(const Vec3& world) const {
        return (world - grid.frame.origin) / grid.frame.voxel_size;
    }
    Vec3 to_world(const Vec3& lattice) const {
        return grid.frame.origin + grid.frame.voxel_size * lattice;
    }
};

FrameData make_frame_data(const TriMesh& mesh, int resolution, int frame_index) {
    FrameData fd;
    fd.grid = voxelize_interior(mesh, resolution);
    const auto& fr = fd.grid.frame;
    for (int k = 0; k < fr.dims[2]; ++k)
        for (int j = 0; j < fr.dims[1]; ++j)
            for (int i = 0; i < fr.dims[0]; ++i)
                if (fd.grid.occupied(fr.cell_index(i, j, k))) {
                    fd.cells.push_back({i, j, k});
                    fd.voxels.push_back(Vec3(i + 0.5, j + 0.5, k + 0.5));
                }
    if (fd.voxels.empty())
        throw EmptyVolume("track_sequence: frame " + std::to_string(frame_index) +
                          " has no interior voxels");
    fd.voxel_tree = KdTree3(fd.voxels);
    return fd;
}

Mat3 fit_rotation(const Mat3& s) {
    Eigen::JacobiSVD<Mat3> svd(s, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 v = svd.matrixV();
    if ((v * svd.matrixU().transpose()).determinant() < 0.0) v.col(2) *= -1.0;
    return v * svd.matrixU().transpose();
}

struct SolveSetup {
    const FrameData& fd;
    double mu;      // uniformity weight per voxel
    double nu;      // interior spring weight
    double lambda;  // rigidity weight; 0 disables the graph term
    const std::vector<std::vector<int>>* graph = nullptr;
    const std::vector<Vec3>* rest = nullptr;  // lattice units of this frame
};

// One assignment / rotation / position pass over lattice-space centers.
// Returns the energy at the new positions with this pass's assignment, spring
// targets and rotations, so the logged series is non-increasing.
double solve_iteration(std::vector<Vec3>& centers, const SolveSetup& setup,
                       std::vector<Mat3>* rotations) {
    const int k = static_cast<int>(centers.size());
    const auto& voxels = setup.fd.voxels;

    KdTree3 center_tree(centers);
    std::vector<int> owner(voxels.size());
#pragma omp parallel for schedule(static)
    for (long v = 0; v < static_cast<long>(voxels.size()); ++v)
        owner[v] = center_tree.nearest(voxels[v]);

    std::vector<double> count(k, 0.0), sq_sum(k, 0.0);
    std::vector<Vec3> sum(k, Vec3::Zero());
    for (size_t v = 0; v < voxels.size(); ++v) {
        const int i = owner[v];
        count[i] += 1.0;
        sum[i] += voxels[v];
        sq_sum[i] += voxels[v].squaredNorm();
    }

    std::vector<Vec3> spring(k);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < k; ++i) spring[i] = voxels[setup.fd.voxel_tree.nearest(centers[i])];

    const bool rigid = setup.lambda > 0.0 && setup.graph && setup.rest;
    if (rigid) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < k; ++i) {
            Mat3 s = Mat3::Zero();
            for (int j : (*setup.graph)[i]) {
                const Vec3 rest_edge = (*setup.rest)[i] - (*setup.rest)[j];
                const Vec3 edge = centers[i] - centers[j];
                s += rest_edge * edge.transpose();
            }
            (*rotations)[i] = fit_rotation(s);
        }
    }

    using Triplet = Eigen::Triplet<double>;
    std::vector<Triplet> triplets;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(k, 3);
    for (int i = 0; i < k; ++i) {
        double diag = setup.mu * count[i] + setup.nu;
        Vec3 r = setup.mu * sum[i] + setup.nu * spring[i];
        if (rigid) {
            const auto& nbrs = (*setup.graph)[i];
            diag += 2.0 * setup.lambda * static_cast<double>(nbrs.size());
            for (int j : nbrs) {
                triplets.emplace_back(i, j, -2.0 * setup.lambda);
                const Vec3 rest_edge = (*setup.rest)[i] - (*setup.rest)[j];
                r += setup.lambda * (((*rotations)[i] + (*rotations)[j]) * rest_edge);
            }
        }
        triplets.emplace_back(i, i, diag);
        rhs.row(i) = r.transpose();
    }
    Eigen::SparseMatrix<double> a(k, k);
    a.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
    if (solver.info() != Eigen::Success)
        throw SolverSingular("track_sequence: position solve failed");
    const Eigen::MatrixXd solution = solver.solve(rhs);
    for (int i = 0; i < k; ++i) centers[i] = solution.row(i).transpose();

    double energy = 0.0;
    for (int i = 0; i < k; ++i) {
        // sum_{v in cell i} |v - p_i|^2 = n|p_i - b|^2 + (sum|v|^2 - n|b|^2)
        if (count[i] > 0.0) {
            const Vec3 mean = sum[i] / count[i];
            energy += setup.mu * (count[i] * (centers[i] - mean).squaredNorm() + sq_sum[i] -
                                  count[i] * mean.squaredNorm());
        }
        energy += setup.nu * (centers[i] - spring[i]).squaredNorm();
        if (rigid) {
            for (int j : (*setup.graph)[i]) {
                const Vec3 rest_edge = (*setup.rest)[i] - (*setup.rest)[j];
                energy += setup.lambda *
                          ((centers[i] - centers[j]) - (*rotations)[i] * rest_edge).squaredNorm();
            }
        }
    }
    return energy;
}

std::vector<int> graph_component_labels(const std::vector<std::vector<int>>& graph, int* count) {
    const int k = static_cast<int>(graph.size());
    std::vector<int> label(k, -1);
    int n = 0;
    for (int start = 0; start < k; ++start) {
        if (label[start] >= 0) continue;
        std::vector<int> stack{start};
        label[start] = n;
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            for (int j : graph[i])
                if (label[j] < 0) {
                    label[j] = n;
                    stack.push_back(j);
                }
        }
        ++n;
    }
    if (count) *count = n;
    return label;
}

// world-space centroid of the occupied voxels owned by each graph component,
// ownership by nearest center
std::vector<Vec3> component_voxel_centroids(const FrameData& fd,
                                            const std::vector<Vec3>& centers_world,
                                            const std::vector<int>& comp_of, int ncomp) {
    KdTree3 tree(centers_world);
    std::vector<Vec3> sum(ncomp, Vec3::Zero());
    std::vector<double> count(ncomp, 0.0);
    for (const auto& v : fd.voxels) {
        const Vec3 w = fd.to_world(v);
        const int comp = comp_of[tree.nearest(w)];
        sum[comp] += w;
        count[comp] += 1.0;
    }
    std::vector<Vec3> centroid(ncomp, Vec3::Zero());
    for (int c = 0; c < ncomp; ++c)
        if (count[c] > 0.0) centroid[c] = sum[c] / count[c];
    return centroid;
}

std::vector<double> solve_frame(std::vector<Vec3>& centers, const SolveSetup& setup,
                                int max_iters, double rel_tol) {
    std::vector<Mat3> rotations(centers.size(), Mat3::Identity());
    std::vector<double> energies;
    double prev = std::numeric_limits<double>::max();
    for (int iter = 0; iter < max_iters; ++iter) {
        const double energy = solve_iteration(centers, setup, &rotations);
        energies.push_back(energy);
        if (iter > 0 && prev - energy < rel_tol * std::max(std::abs(prev), 1e-30)) break;
        prev = energy;
    }
    return energies;
}

// graph over lattice-space centers; step 0.5 lattice units = half a voxel
std::vector<std::vector<int>> lattice_neighbor_graph(const std::vector<Vec3>& centers,
                                                     const FrameData& fd) {
    const int k = static_cast<int>(centers.size());
    auto segment_inside = [&](const Vec3& a, const Vec3& b) {
        const double len = (b - a).norm();
        const int samples = std::max(1, static_cast<int>(std::ceil(len / 0.5)));
        const auto& fr = fd.grid.frame;
        for (int s = 0; s <= samples; ++s) {
            const Vec3 p = a + (b - a) * (static_cast<double>(s) / samples);
            const int i = static_cast<int>(std::floor(p.x()));
            const int j = static_cast<int>(std::floor(p.y()));
            const int kk = static_cast<int>(std::floor(p.z()));
            if (i < 0 || j < 0 || kk < 0 || i >= fr.dims[0] || j >= fr.dims[1] || kk >= fr.dims[2])
                return false;
            if (!fd.grid.occupied(fr.cell_index(i, j, kk))) return false;
        }
        return true;
    };

    std::vector<std::vector<int>> graph(k);
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < k; ++i) {
        std::vector<std::pair<double, int>> order;
        order.reserve(k - 1);
        for (int j = 0; j < k; ++j)
            if (j != i) order.emplace_back((centers[i] - centers[j]).squaredNorm(), j);
        std::sort(order.begin(), order.end());
        for (const auto& [d2, j] : order) {
            (void)d2;
            if (segment_inside(centers[i], centers[j])) {
                graph[i].push_back(j);
                if (graph[i].size() >= 8) break;
            }
        }
    }
    for (int i = 0; i < k; ++i)
        for (int j : graph[i])
            if (std::find(graph[j].begin(), graph[j].end(), i) == graph[j].end())
                graph[j].push_back(i);
    for (auto& nbrs : graph) std::sort(nbrs.begin(), nbrs.end());

    // centers in one volume component must form one graph component
    std::vector<int> cell_labels;
    volume_components(fd.grid, cell_labels);
    std::vector<int> volume_of(k, -1);
    for (int i = 0; i < k; ++i) {
        const int label_cell = cell_labels[fd.grid.frame.cell_index(
            static_cast<int>(std::floor(centers[i].x())),
            static_cast<int>(std::floor(centers[i].y())),
            static_cast<int>(std::floor(centers[i].z())))];
        volume_of[i] = label_cell;
    }
    auto graph_components = [&]() {
        std::vector<int> label(k, -1);
        int count = 0;
        for (int start = 0; start < k; ++start) {
            if (label[start] >= 0) continue;
            std::vector<int> stack{start};
            label[start] = count;
            while (!stack.empty()) {
                const int i = stack.back();
                stack.pop_back();
                for (int j : graph[i])
                    if (label[j] < 0) {
                        label[j] = count;
                        stack.push_back(j);
                    }
            }
            ++count;
        }
        return label;
    };
    for (;;) {
        const auto label = graph_components();
        double best_d2 = std::numeric_limits<double>::max();
        int best_i = -1, best_j = -1;
        for (int i = 0; i < k; ++i) {
            for (int j = i + 1; j < k; ++j) {
                if (label[i] == label[j]) continue;
                if (volume_of[i] != volume_of[j] || volume_of[i] < 0) continue;
                const double d2 = (centers[i] - centers[j]).squaredNorm();
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best_i = i;
                    best_j = j;
                }
            }
        }
        if (best_i < 0) break;
        graph[best_i].push_back(best_j);
        graph[best_j].push_back(best_i);
        std::sort(graph[best_i].begin(), graph[best_i].end());
        std::sort(graph[best_j].begin(), graph[best_j].end());
    }
    return graph;
}

// farthest-point seeding on integer lattice distances (exact, so ties resolve
// identically for any translated copy of the same occupancy pattern), then
// Lloyd relaxation restricted to the interior, all in lattice units. The first
// site is the cell farthest from the occupied centroid, which makes the seeding
// independent of the RNG state.
std::vector<Vec3> seed_and_relax(const FrameData& fd, int K, uint64_t seed, int lloyd_iters) {
    (void)seed;
    const auto& cells = fd.cells;
    std::vector<int> chosen;
    chosen.reserve(K);
    std::vector<int64_t> min_d2(cells.size(), std::numeric_limits<int64_t>::max());
    size_t pick = 0;
    {
        int64_t si = 0, sj = 0, sk = 0;
        for (const auto& c : cells) {
            si += c[0];
            sj += c[1];
            sk += c[2];
        }
        const double n = static_cast<double>(cells.size());
        const double mi = si / n, mj = sj / n, mk = sk / n;
        double far_d2 = -1.0;
        for (size_t v = 0; v < cells.size(); ++v) {
            const double di = cells[v][0] - mi, dj = cells[v][1] - mj, dk = cells[v][2] - mk;
            const double d2 = di * di + dj * dj + dk * dk;
            if (d2 > far_d2) {
                far_d2 = d2;
                pick = v;
            }
        }
    }
    for (int c = 0; c < K; ++c) {
        chosen.push_back(static_cast<int>(pick));
        size_t next = 0;
        int64_t far_d2 = -1;
        for (size_t v = 0; v < cells.size(); ++v) {
            const int64_t di = cells[v][0] - cells[pick][0];
            const int64_t dj = cells[v][1] - cells[pick][1];
            const int64_t dk = cells[v][2] - cells[pick][2];
            min_d2[v] = std::min(min_d2[v], di * di + dj * dj + dk * dk);
            if (min_d2[v] > far_d2) {
                far_d2 = min_d2[v];
                next = v;
            }
        }
        pick = next;
    }

    std::vector<Vec3> centers;
    centers.reserve(K);
    for (int idx : chosen) centers.push_back(fd.voxels[idx]);

    // run to stationarity: a fixed small iteration count leaves the layout
    // visibly short of the centroidal configuration
    for (int iter = 0; iter < lloyd_iters; ++iter) {
        KdTree3 center_tree(centers);
        std::vector<int> count(K, 0);
        std::vector<Vec3> sum(K, Vec3::Zero());
        for (const auto& v : fd.voxels) {
            const int i = center_tree.nearest(v);
            ++count[i];
            sum[i] += v;
        }
        const auto& fr = fd.grid.frame;
        double max_move = 0.0;
        for (int i = 0; i < K; ++i) {
            if (count[i] == 0) continue;
            const Vec3 centroid = sum[i] / count[i];
            const int ci = static_cast<int>(std::floor(centroid.x()));
            const int cj = static_cast<int>(std::floor(centroid.y()));
            const int ck = static_cast<int>(std::floor(centroid.z()));
            const bool interior = ci >= 0 && cj >= 0 && ck >= 0 && ci < fr.dims[0] &&
                                  cj < fr.dims[1] && ck < fr.dims[2] &&
                                  fd.grid.occupied(fr.cell_index(ci, cj, ck));
            const Vec3 updated = interior ? centroid : fd.voxels[fd.voxel_tree.nearest(centroid)];
            max_move = std::max(max_move, (updated - centers[i]).norm());
            centers[i] = updated;
        }
        if (max_move < 1e-7) break;  // lattice units
    }
    return centers;
}

}  // namespace

std::vector<std::vector<int>> build_neighbor_graph(const std::vector<Vec3>& centers,
                                                   const VoxelGrid& grid) {
    FrameData fd;
    fd.grid = grid;
    const auto& fr = grid.frame;
    for (int k = 0; k < fr.dims[2]; ++k)
        for (int j = 0; j < fr.dims[1]; ++j)
            for (int i = 0; i < fr.dims[0]; ++i)
                if (grid.occupied(fr.cell_index(i, j, k))) {
                    fd.cells.push_back({i, j, k});
                    fd.voxels.push_back(Vec3(i + 0.5, j + 0.5, k + 0.5));
                }
    std::vector<Vec3> lattice(centers.size());
    for (size_t i = 0; i < centers.size(); ++i) lattice[i] = fd.to_lattice(centers[i]);
    return lattice_neighbor_graph(lattice, fd);
}

CenterInit initialize_centers(const TriMesh& mesh, int K, int resolution, uint64_t seed) {
    if (K < 1) throw Error("initialize_centers: K must be >= 1");
    FrameData fd = make_frame_data(mesh, resolution, mesh.frame_index);
    if (static_cast<size_t>(K) > fd.voxels.size())
        throw TooManyCenters("initialize_centers: K=" + std::to_string(K) + " exceeds " +
                             std::to_string(fd.voxels.size()) + " occupied voxels");

    const auto lattice = seed_and_relax(fd, K, seed, 300);
    CenterInit init;
    init.centers.reserve(K);
    for (const auto& c : lattice) init.centers.push_back(fd.to_world(c));
    init.graph = lattice_neighbor_graph(lattice, fd);
    return init;
}

CenterTrajectories track_sequence(const MeshSequence& seq, int K, int resolution, uint64_t seed,
                                  const TrackingParams& params, TrackingTrace* trace) {
    if (seq.frames.empty()) throw Error("track_sequence: empty sequence");
    const int n = static_cast<int>(seq.frames.size());

    FrameData fd0 = make_frame_data(seq.frames[0], resolution, 0);
    if (static_cast<size_t>(K) > fd0.voxels.size())
        throw TooManyCenters("track_sequence: K exceeds occupied voxels of frame 0");
    const double mu0 = static_cast<double>(K) / static_cast<double>(fd0.voxels.size());

    // seed, relax, then settle frame 0 into a stationary layout before
    // anchoring rest edges
    std::vector<Vec3> current = seed_and_relax(fd0, K, seed, params.lloyd_iters);
    {
        SolveSetup setup{fd0, mu0, params.nu, 0.0, nullptr, nullptr};
        solve_frame(current, setup, params.polish_iters, params.polish_tol);
    }
    // round-trip through world coordinates so a graph rebuilt later from the
    // serialized positions reproduces this one bit-for-bit
    for (auto& c : current) c = fd0.to_lattice(fd0.to_world(c));
    const auto graph = lattice_neighbor_graph(current, fd0);

    CenterTrajectories traj;
    traj.K = K;
    traj.N = n;
    traj.positions.resize(static_cast<size_t>(K) * n);
    traj.neighbor_graph = graph;
    for (int i = 0; i < K; ++i) traj.at(i, 0) = fd0.to_world(current[i]);
    if (trace) trace->frame_energy.assign(n, {});

    std::vector<Vec3> world(K);
    for (int i = 0; i < K; ++i) world[i] = traj.at(i, 0);
    const std::vector<Vec3> rest_world = world;

    int ncomp = 0;
    const auto comp_of = graph_component_labels(graph, &ncomp);
    std::vector<Vec3> prev_centroids = component_voxel_centroids(fd0, world, comp_of, ncomp);

    for (int f = 1; f < n; ++f) {
        FrameData fd = make_frame_data(seq.frames[f], resolution, f);
        const double mu = static_cast<double>(K) / static_cast<double>(fd.voxels.size());

        // warm start: previous solution pre-shifted by each component's
        // voxel-centroid motion, which makes rigid translations exact
        const auto cur_centroids = component_voxel_centroids(fd, world, comp_of, ncomp);
        for (int i = 0; i < K; ++i)
            world[i] += cur_centroids[comp_of[i]] - prev_centroids[comp_of[i]];

        std::vector<Vec3> centers(K), rest(K);
        for (int i = 0; i < K; ++i) {
            centers[i] = fd.to_lattice(world[i]);
            rest[i] = fd.to_lattice(rest_world[i]);
        }
        SolveSetup setup{fd, mu, params.nu, params.lambda, &graph, &rest};
        auto energies = solve_frame(centers, setup, params.max_iters, params.rel_tol);
        if (trace) trace->frame_energy[f] = std::move(energies);
        for (int i = 0; i < K; ++i) {
            world[i] = fd.to_world(centers[i]);
            traj.at(i, f) = world[i];
        }
        prev_centroids = component_voxel_centroids(fd, world, comp_of, ncomp);
    }
    return traj;
}

double evaluate_tracking_energy(const std::vector<Vec3>& centers, const TriMesh& frame,
                                int resolution, const std::vector<std::vector<int>>& graph,
                                const std::vector<Vec3>& rest, const TrackingParams& params) {
    const FrameData fd = make_frame_data(frame, resolution, frame.frame_index);
    const int k = static_cast<int>(centers.size());
    const double mu = static_cast<double>(k) / static_cast<double>(fd.voxels.size());

    std::vector<Vec3> lat(k), lat_rest(k);
    for (int i = 0; i < k; ++i) {
        lat[i] = fd.to_lattice(centers[i]);
        lat_rest[i] = fd.to_lattice(rest[i]);
    }

    KdTree3 center_tree(lat);
    double energy = 0.0;
    for (const auto& v : fd.voxels) energy += mu * (v - lat[center_tree.nearest(v)]).squaredNorm();
    for (int i = 0; i < k; ++i) {
        double d2 = 0.0;
        fd.voxel_tree.nearest(lat[i], &d2);
        energy += params.nu * d2;
    }
    for (int i = 0; i < k; ++i) {
        Mat3 s = Mat3::Zero();
        for (int j : graph[i]) s += (lat_rest[i] - lat_rest[j]) * (lat[i] - lat[j]).transpose();
        const Mat3 r = fit_rotation(s);
        for (int j : graph[i])
            energy +=
                params.lambda * ((lat[i] - lat[j]) - r * (lat_rest[i] - lat_rest[j])).squaredNorm();
    }
    return energy;
}

void save_trajectories(const CenterTrajectories& traj, const std::string& path) {
    write_point_table(path, traj.K, traj.N, traj.positions);
}

CenterTrajectories load_trajectories(const std::string& path) {
    CenterTrajectories traj;
    uint64_t rows = 0, cols = 0;
    traj.positions = read_point_table(path, &rows, &cols);
    traj.K = static_cast<int>(rows);
    traj.N = static_cast<int>(cols);
    return traj;
}

void save_trajectories_csv(const CenterTrajectories& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "center_id,frame,x,y,z\n";
    out.precision(17);
    for (int i = 0; i < traj.K; ++i)
        for (int f = 0; f < traj.N; ++f) {
            const Vec3& p = traj.at(i, f);
            out << i << ',' << f << ',' << p.x() << ',' << p.y() << ',' << p.z() << '\n';
        }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace refmesh
