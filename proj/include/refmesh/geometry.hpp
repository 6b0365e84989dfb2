#pragma once

#include <Eigen/Dense>
#include <array>
#include <limits>

namespace refmesh {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Axis-aligned bounding box, min <= max componentwise once non-empty.
struct Aabb {
    Vec3 min = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 max = Vec3::Constant(std::numeric_limits<double>::lowest());

    bool empty() const { return min.x() > max.x(); }

    void expand(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }

    void expand(const Aabb& other) {
        if (other.empty()) return;
        min = min.cwiseMin(other.min);
        max = max.cwiseMax(other.max);
    }

    Vec3 extent() const { return max - min; }
    Vec3 center() const { return 0.5 * (min + max); }
    double diagonal() const { return extent().norm(); }
    double longest_extent() const { return extent().maxCoeff(); }

    Aabb padded(double margin) const {
        Aabb out;
        out.min = min - Vec3::Constant(margin);
        out.max = max + Vec3::Constant(margin);
        return out;
    }

    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
};

// Proper rigid transform: p -> R*p + t with R in SO(3).
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    RigidTransform inverse() const {
        RigidTransform inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(rotation.transpose() * translation);
        return inv;
    }

    // this ∘ other: apply other first, then this.
    RigidTransform compose(const RigidTransform& other) const {
        RigidTransform out;
        out.rotation = rotation * other.rotation;
        out.translation = rotation * other.translation + translation;
        return out;
    }

    static RigidTransform identity() { return {}; }
};

inline Mat3 axis_angle_to_matrix(const Vec3& r) {
    const double angle = r.norm();
    if (angle < 1e-14) return Mat3::Identity();
    return Eigen::AngleAxisd(angle, r / angle).toRotationMatrix();
}

inline Vec3 matrix_to_axis_angle(const Mat3& m) {
    Eigen::AngleAxisd aa(m);
    return aa.angle() * aa.axis();
}

// Angle in radians between two rotations.
inline double rotation_distance(const Mat3& a, const Mat3& b) {
    const double c = ((a.transpose() * b).trace() - 1.0) * 0.5;
    return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace refmesh
