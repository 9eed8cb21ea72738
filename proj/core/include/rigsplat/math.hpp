#pragma once

#include "rigsplat/common.hpp"

#include <cmath>

namespace rigsplat {

// Quaternions are stored scalar-first: (w, x, y, z).

Vec4 quat_normalize(const Vec4 &q);

/// Jacobian of q / |q| with respect to q.
Mat4 quat_normalize_jacobian(const Vec4 &q);

/// Rotation matrix of a unit quaternion.
Mat3 quat_to_matrix(const Vec4 &q);

/// d(quat_to_matrix)/dq contracted with an upstream matrix gradient.
Vec4 quat_to_matrix_backward(const Vec4 &q, const Mat3 &dR);

/// Unit quaternion of a rotation matrix, with non-negative scalar part.
Vec4 matrix_to_quat(const Mat3 &R);

/// Hamilton product a ⊗ b.
Vec4 quat_multiply(const Vec4 &a, const Vec4 &b);

/// Matrix L(a) such that a ⊗ b = L(a) b.
Mat4 quat_left_matrix(const Vec4 &a);

/// Rodrigues' formula.
Mat3 axis_angle_to_matrix(const Vec3 &axis_angle);

/// Rigid transform x -> rotation * x + translation.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform identity() { return {}; }

    Vec3 apply(const Vec3 &x) const { return rotation * x + translation; }

    RigidTransform inverse() const {
        RigidTransform inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(inv.rotation * translation);
        return inv;
    }

    /// (*this ∘ other)(x) = this(other(x)).
    RigidTransform compose(const RigidTransform &other) const {
        RigidTransform out;
        out.rotation = rotation * other.rotation;
        out.translation = rotation * other.translation + translation;
        return out;
    }
};

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

} // namespace rigsplat
