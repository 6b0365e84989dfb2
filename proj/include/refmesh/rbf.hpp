#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "refmesh/mesh.hpp"

namespace refmesh {

enum class RbfKernel {
    ThinPlateSpline,   // phi(r) = r, the 3D scattered-data convention
    ThinPlateR2LogR,   // phi(r) = r^2 log r
};

double rbf_kernel_value(RbfKernel kernel, double r);

// Interpolating map anchors -> targets: kernel weights plus an affine tail.
struct RbfMap {
    std::vector<Vec3> anchors;
    std::vector<Vec3> targets;
    RbfKernel kernel = RbfKernel::ThinPlateSpline;
    Eigen::MatrixXd coeffs;  // (K+4) x 3: K kernel weights, then [1 x y z] affine rows

    Vec3 evaluate(const Vec3& p) const;
    // central-difference Jacobian of the map at p
    Mat3 jacobian(const Vec3& p, double h) const;
};

// Factored interpolation system over a fixed anchor set; refitting for new
// targets is a single back-substitution.
class TpsSystem {
public:
    TpsSystem(std::vector<Vec3> anchors, RbfKernel kernel);

    RbfMap fit(const std::vector<Vec3>& targets) const;
    Eigen::MatrixXd fit_coeffs(const std::vector<Vec3>& targets) const;

    const std::vector<Vec3>& anchors() const { return anchors_; }
    RbfKernel kernel() const { return kernel_; }
    double regularization() const { return regularization_; }

private:
    std::vector<Vec3> anchors_;
    RbfKernel kernel_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    double regularization_ = 0.0;
    double scale_ = 1.0;
};

// Precomputed kernel/affine basis rows for a fixed query set, so candidate
// coefficient sets apply as one matrix product.
class RbfBasis {
public:
    RbfBasis(const std::vector<Vec3>& anchors, RbfKernel kernel,
             const std::vector<Vec3>& points);

    void apply(const Eigen::MatrixXd& coeffs, std::vector<Vec3>& out) const;
    size_t point_count() const { return static_cast<size_t>(basis_.rows()); }

private:
    Eigen::MatrixXd basis_;  // V x (K+4)
};

// One-shot fit. Throws SingularSystem when the anchor set cannot support the
// affine tail (fewer than 4 anchors or a coplanar set).
RbfMap fit_rbf(const std::vector<Vec3>& anchors, const std::vector<Vec3>& targets,
               RbfKernel kernel = RbfKernel::ThinPlateSpline);

struct MappedFrame {
    std::vector<Vec3> mapped_vertices;
    int source_frame = 0;
    int group = 0;
};

MappedFrame map_vertices(const RbfMap& map, const TriMesh& mesh);

}  // namespace refmesh
