#include "refmesh/rbf.hpp"

#include <cmath>

#include "refmesh/errors.hpp"

namespace refmesh {

double rbf_kernel_value(RbfKernel kernel, double r) {
    switch (kernel) {
        case RbfKernel::ThinPlateSpline: return r;
        case RbfKernel::ThinPlateR2LogR: return r > 0.0 ? r * r * std::log(r) : 0.0;
    }
    return 0.0;
}

Vec3 RbfMap::evaluate(const Vec3& p) const {
    const int k = static_cast<int>(anchors.size());
    Eigen::RowVector3d out = Eigen::RowVector3d::Zero();
    for (int i = 0; i < k; ++i)
        out += rbf_kernel_value(kernel, (p - anchors[i]).norm()) * coeffs.row(i);
    out += coeffs.row(k);
    out += p.x() * coeffs.row(k + 1);
    out += p.y() * coeffs.row(k + 2);
    out += p.z() * coeffs.row(k + 3);
    return out.transpose();
}

Mat3 RbfMap::jacobian(const Vec3& p, double h) const {
    Mat3 j;
    for (int axis = 0; axis < 3; ++axis) {
        Vec3 lo = p, hi = p;
        lo[axis] -= h;
        hi[axis] += h;
        j.col(axis) = (evaluate(hi) - evaluate(lo)) / (2.0 * h);
    }
    return j;
}

namespace {

Eigen::MatrixXd build_system(const std::vector<Vec3>& anchors, RbfKernel kernel,
                             double regularization) {
    const int k = static_cast<int>(anchors.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k + 4, k + 4);
    for (int i = 0; i < k; ++i) {
        for (int j = i + 1; j < k; ++j) {
            const double v = rbf_kernel_value(kernel, (anchors[i] - anchors[j]).norm());
            m(i, j) = v;
            m(j, i) = v;
        }
        m(i, i) = regularization;
        m(i, k) = 1.0;
        m(i, k + 1) = anchors[i].x();
        m(i, k + 2) = anchors[i].y();
        m(i, k + 3) = anchors[i].z();
        m(k, i) = 1.0;
        m(k + 1, i) = anchors[i].x();
        m(k + 2, i) = anchors[i].y();
        m(k + 3, i) = anchors[i].z();
    }
    return m;
}

void require_affine_rank(const std::vector<Vec3>& anchors) {
    if (anchors.size() < 4)
        throw SingularSystem("fit_rbf: need at least 4 anchors for the affine tail");
    Vec3 mean = Vec3::Zero();
    for (const auto& a : anchors) mean += a;
    mean /= static_cast<double>(anchors.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& a : anchors) cov += (a - mean) * (a - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    if (eig.eigenvalues()(0) <= 1e-12 * std::max(eig.eigenvalues()(2), 1e-300))
        throw SingularSystem("fit_rbf: anchors are coplanar; the affine tail is rank-deficient");
}

}  // namespace

TpsSystem::TpsSystem(std::vector<Vec3> anchors, RbfKernel kernel)
    : anchors_(std::move(anchors)), kernel_(kernel) {
    require_affine_rank(anchors_);
    const int k = static_cast<int>(anchors_.size());

    Aabb box;
    for (const auto& a : anchors_) box.expand(a);
    scale_ = std::max(box.diagonal(), 1e-300);

    // near-coincident anchors make the kernel block effectively singular;
    // retry with a trace-scaled Tikhonov shift when the plain solve degrades
    Eigen::MatrixXd m = build_system(anchors_, kernel_, 0.0);
    lu_ = Eigen::PartialPivLU<Eigen::MatrixXd>(m);
    Eigen::MatrixXd probe = Eigen::MatrixXd::Zero(k + 4, 3);
    for (int i = 0; i < k; ++i) probe.row(i) = anchors_[i].transpose();
    const Eigen::MatrixXd coeffs = lu_.solve(probe);
    double residual = (m * coeffs - probe).cwiseAbs().maxCoeff();
    if (!coeffs.allFinite() || residual > 1e-9 * scale_) {
        double trace = 0.0;
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                trace += std::abs(rbf_kernel_value(kernel_, (anchors_[i] - anchors_[j]).norm()));
        regularization_ = 1e-10 * trace / k;
        m = build_system(anchors_, kernel_, regularization_);
        lu_ = Eigen::PartialPivLU<Eigen::MatrixXd>(m);
    }
}

Eigen::MatrixXd TpsSystem::fit_coeffs(const std::vector<Vec3>& targets) const {
    const int k = static_cast<int>(anchors_.size());
    if (targets.size() != anchors_.size())
        throw Error("TpsSystem::fit_coeffs: |targets| != |anchors|");
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(k + 4, 3);
    for (int i = 0; i < k; ++i) rhs.row(i) = targets[i].transpose();
    return lu_.solve(rhs);
}

RbfMap TpsSystem::fit(const std::vector<Vec3>& targets) const {
    RbfMap map;
    map.anchors = anchors_;
    map.targets = targets;
    map.kernel = kernel_;
    map.coeffs = fit_coeffs(targets);
    if (!map.coeffs.allFinite()) throw SingularSystem("fit_rbf: interpolation system is singular");
    return map;
}

RbfBasis::RbfBasis(const std::vector<Vec3>& anchors, RbfKernel kernel,
                   const std::vector<Vec3>& points) {
    const int k = static_cast<int>(anchors.size());
    basis_.resize(static_cast<Eigen::Index>(points.size()), k + 4);
#pragma omp parallel for schedule(static)
    for (long p = 0; p < static_cast<long>(points.size()); ++p) {
        for (int i = 0; i < k; ++i)
            basis_(p, i) = rbf_kernel_value(kernel, (points[p] - anchors[i]).norm());
        basis_(p, k) = 1.0;
        basis_(p, k + 1) = points[p].x();
        basis_(p, k + 2) = points[p].y();
        basis_(p, k + 3) = points[p].z();
    }
}

void RbfBasis::apply(const Eigen::MatrixXd& coeffs, std::vector<Vec3>& out) const {
    const Eigen::MatrixXd mapped = basis_ * coeffs;
    out.resize(static_cast<size_t>(mapped.rows()));
    for (Eigen::Index i = 0; i < mapped.rows(); ++i) out[i] = mapped.row(i).transpose();
}

RbfMap fit_rbf(const std::vector<Vec3>& anchors, const std::vector<Vec3>& targets,
               RbfKernel kernel) {
    if (anchors.size() != targets.size()) throw Error("fit_rbf: |targets| != |anchors|");
    return TpsSystem(anchors, kernel).fit(targets);
}

MappedFrame map_vertices(const RbfMap& map, const TriMesh& mesh) {
    MappedFrame out;
    out.source_frame = mesh.frame_index;
    out.mapped_vertices.resize(mesh.vertices.size());
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(mesh.vertices.size()); ++i)
        out.mapped_vertices[i] = map.evaluate(mesh.vertices[i]);
    return out;
}

}  // namespace refmesh
