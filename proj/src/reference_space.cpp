#include "refmesh/reference_space.hpp"

#include <Eigen/Dense>
#include <fstream>
#include <random>

#include "refmesh/errors.hpp"
#include "refmesh/serial.hpp"

namespace refmesh {

DistanceMatrix build_distance_matrix(const CenterTrajectories& traj, int f0, int f1) {
    if (f0 < 0 || f1 >= traj.N || f0 > f1)
        throw EmptyRange("build_distance_matrix: frame range [" + std::to_string(f0) + "," +
                         std::to_string(f1) + "] invalid for N=" + std::to_string(traj.N));
    DistanceMatrix dm;
    dm.K = traj.K;
    dm.d.assign(static_cast<size_t>(traj.K) * traj.K, 0.0);
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < traj.K; ++i) {
        for (int j = i + 1; j < traj.K; ++j) {
            double worst = 0.0;
            for (int f = f0; f <= f1; ++f)
                worst = std::max(worst, (traj.at(i, f) - traj.at(j, f)).norm());
            dm.at(i, j) = worst;
            dm.at(j, i) = worst;
        }
    }
    return dm;
}

double normalized_stress(const DistanceMatrix& dm, const std::vector<Vec3>& points) {
    double raw = 0.0, denom = 0.0;
    for (int i = 0; i < dm.K; ++i) {
        for (int j = i + 1; j < dm.K; ++j) {
            const double delta = (points[i] - points[j]).norm();
            raw += (dm.at(i, j) - delta) * (dm.at(i, j) - delta);
            denom += dm.at(i, j) * dm.at(i, j);
        }
    }
    if (denom == 0.0) return 0.0;
    return std::sqrt(raw / denom);
}

namespace {

double raw_stress(const DistanceMatrix& dm, const Eigen::MatrixXd& x) {
    double raw = 0.0;
    for (int i = 0; i < dm.K; ++i)
        for (int j = i + 1; j < dm.K; ++j) {
            const double delta = (x.row(i) - x.row(j)).norm();
            raw += (dm.at(i, j) - delta) * (dm.at(i, j) - delta);
        }
    return raw;
}

// classical (spectral) embedding of the double-centered squared distances
Eigen::MatrixXd classical_init(const DistanceMatrix& dm, uint64_t seed) {
    const int k = dm.K;
    Eigen::MatrixXd d2(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) d2(i, j) = dm.at(i, j) * dm.at(i, j);
    const Eigen::VectorXd row_mean = d2.rowwise().mean();
    const double grand = d2.mean();
    Eigen::MatrixXd b(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            b(i, j) = -0.5 * (d2(i, j) - row_mean(i) - row_mean(j) + grand);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(k, 3);
    bool any = false;
    if (eig.info() == Eigen::Success) {
        for (int c = 0; c < 3 && c < k; ++c) {
            const int idx = k - 1 - c;  // eigenvalues ascending
            const double lambda = eig.eigenvalues()(idx);
            if (lambda > 0.0) {
                x.col(c) = eig.eigenvectors().col(idx) * std::sqrt(lambda);
                any = true;
            }
        }
    }
    if (!any || !x.allFinite()) {
        double scale = 0.0;
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j) scale = std::max(scale, dm.at(i, j));
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> uni(-0.5, 0.5);
        for (int i = 0; i < k; ++i)
            for (int c = 0; c < 3; ++c) x(i, c) = scale * uni(rng);
    }
    return x;
}

}  // namespace

ReferenceCenters mds_embed(const DistanceMatrix& dm, const MdsParams& params,
                           std::vector<double>* stress_trace) {
    if (params.eps <= 0.0) throw Error("mds_embed: eps must be positive");
    if (params.max_iter < 1) throw Error("mds_embed: max_iter must be >= 1");
    const int k = dm.K;
    ReferenceCenters rc;
    if (k == 0) {
        rc.converged = true;
        return rc;
    }

    double d_max = 0.0;
    for (double v : dm.d) d_max = std::max(d_max, v);
    if (d_max == 0.0) {
        // all distances zero: coincident points realize the matrix exactly
        rc.points.assign(k, Vec3::Zero());
        rc.stress = 0.0;
        rc.converged = true;
        if (stress_trace) stress_trace->push_back(0.0);
        return rc;
    }

    Eigen::MatrixXd x = classical_init(dm, params.seed);
    double prev = raw_stress(dm, x);
    if (stress_trace) stress_trace->push_back(prev);
    rc.converged = false;

    Eigen::MatrixXd bz(k, k);
    for (int iter = 0; iter < params.max_iter; ++iter) {
        bz.setZero();
        for (int i = 0; i < k; ++i) {
            double diag = 0.0;
            for (int j = 0; j < k; ++j) {
                if (j == i) continue;
                const double delta = (x.row(i) - x.row(j)).norm();
                if (delta > 1e-300) {
                    const double v = -dm.at(i, j) / delta;
                    bz(i, j) = v;
                    diag -= v;
                }
            }
            bz(i, i) = diag;
        }
        x = (bz * x) / static_cast<double>(k);  // Guttman transform
        const double stress = raw_stress(dm, x);
        if (stress_trace) stress_trace->push_back(stress);
        if (prev - stress < params.eps) {
            prev = stress;
            rc.converged = true;
            break;
        }
        prev = stress;
    }

    rc.points.resize(k);
    for (int i = 0; i < k; ++i) rc.points[i] = x.row(i).transpose();
    rc.stress = normalized_stress(dm, rc.points);
    return rc;
}

RigidTransform rigid_align(const std::vector<Vec3>& source, const std::vector<Vec3>& target) {
    if (source.size() != target.size() || source.size() < 3)
        throw DegenerateConfiguration("rigid_align: need matching point sets of size >= 3");
    const int n = static_cast<int>(source.size());
    Vec3 sc = Vec3::Zero(), tc = Vec3::Zero();
    for (int i = 0; i < n; ++i) {
        sc += source[i];
        tc += target[i];
    }
    sc /= n;
    tc /= n;
    Mat3 h = Mat3::Zero();
    for (int i = 0; i < n; ++i) h += (source[i] - sc) * (target[i] - tc).transpose();

    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(1) <= 1e-12 * std::max(sv(0), 1e-300))
        throw DegenerateConfiguration("rigid_align: source points are collinear or coincident");

    Mat3 v = svd.matrixV();
    if ((v * svd.matrixU().transpose()).determinant() < 0.0) v.col(2) *= -1.0;
    RigidTransform out;
    out.rotation = v * svd.matrixU().transpose();
    out.translation = tc - out.rotation * sc;
    return out;
}

double procrustes_rmse(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    const RigidTransform rt = rigid_align(a, b);
    double sq = 0.0;
    for (size_t i = 0; i < a.size(); ++i) sq += (rt.apply(a[i]) - b[i]).squaredNorm();
    return std::sqrt(sq / static_cast<double>(a.size()));
}

std::vector<Vec3> orient_and_align(const std::vector<Vec3>& source,
                                   const std::vector<Vec3>& target) {
    std::vector<Vec3> mirrored = source;
    for (auto& p : mirrored) p.z() = -p.z();
    const double direct = procrustes_rmse(source, target);
    const double flipped = procrustes_rmse(mirrored, target);
    const std::vector<Vec3>& chosen = flipped < direct ? mirrored : source;
    const RigidTransform rt = rigid_align(chosen, target);
    std::vector<Vec3> out(chosen.size());
    for (size_t i = 0; i < chosen.size(); ++i) out[i] = rt.apply(chosen[i]);
    return out;
}

void save_distance_matrix(const DistanceMatrix& dm, const std::string& path) {
    write_scalar_table(path, dm.K, dm.K, dm.d);
}

DistanceMatrix load_distance_matrix(const std::string& path) {
    DistanceMatrix dm;
    uint64_t rows = 0, cols = 0;
    dm.d = read_scalar_table(path, &rows, &cols);
    if (rows != cols) throw ParseError(path + ": distance matrix must be square");
    dm.K = static_cast<int>(rows);
    return dm;
}

void save_reference_centers(const ReferenceCenters& rc, const std::string& path) {
    write_point_table(path, rc.points.size(), 1, rc.points);
    std::ofstream meta(path + ".json");
    if (!meta) throw IoError("cannot write " + path + ".json");
    meta << "{\"stress\": " << rc.stress << ", \"converged\": " << (rc.converged ? "true" : "false")
         << "}\n";
}

ReferenceCenters load_reference_centers(const std::string& path) {
    ReferenceCenters rc;
    uint64_t rows = 0, cols = 0;
    rc.points = read_point_table(path, &rows, &cols);
    std::ifstream meta(path + ".json");
    if (meta) {
        std::string text((std::istreambuf_iterator<char>(meta)), std::istreambuf_iterator<char>());
        const auto spos = text.find("\"stress\":");
        if (spos != std::string::npos) rc.stress = std::stod(text.substr(spos + 9));
        rc.converged = text.find("\"converged\": true") != std::string::npos;
    }
    return rc;
}

}  // namespace refmesh
