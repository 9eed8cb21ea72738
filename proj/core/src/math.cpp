#include "rigsplat/math.hpp"

#include <cmath>

namespace rigsplat {

Vec4 quat_normalize(const Vec4 &q) {
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw NumericError("cannot normalize a zero or non-finite quaternion");
    }
    return q / n;
}

Mat4 quat_normalize_jacobian(const Vec4 &q) {
    const double n = q.norm();
    const Vec4 u = q / n;
    return (Mat4::Identity() - u * u.transpose()) / n;
}

Mat3 quat_to_matrix(const Vec4 &q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 R;
    R << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return R;
}

Vec4 quat_to_matrix_backward(const Vec4 &q, const Mat3 &dR) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 dw, dx, dy, dz;
    dw << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
    dx << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
    dy << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
    dz << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
    return Vec4(dR.cwiseProduct(dw).sum(), dR.cwiseProduct(dx).sum(), dR.cwiseProduct(dy).sum(),
                dR.cwiseProduct(dz).sum());
}

Vec4 matrix_to_quat(const Mat3 &R) {
    // Shepperd's method: pick the largest diagonal term for stability.
    const double tr = R.trace();
    Vec4 q;
    if (tr >= R(0, 0) && tr >= R(1, 1) && tr >= R(2, 2)) {
        const double s = std::sqrt(1.0 + tr) * 2.0;
        q << 0.25 * s, (R(2, 1) - R(1, 2)) / s, (R(0, 2) - R(2, 0)) / s, (R(1, 0) - R(0, 1)) / s;
    } else if (R(0, 0) >= R(1, 1) && R(0, 0) >= R(2, 2)) {
        const double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2.0;
        q << (R(2, 1) - R(1, 2)) / s, 0.25 * s, (R(0, 1) + R(1, 0)) / s, (R(0, 2) + R(2, 0)) / s;
    } else if (R(1, 1) >= R(2, 2)) {
        const double s = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2.0;
        q << (R(0, 2) - R(2, 0)) / s, (R(0, 1) + R(1, 0)) / s, 0.25 * s, (R(1, 2) + R(2, 1)) / s;
    } else {
        const double s = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2.0;
        q << (R(1, 0) - R(0, 1)) / s, (R(0, 2) + R(2, 0)) / s, (R(1, 2) + R(2, 1)) / s, 0.25 * s;
    }
    if (q[0] < 0.0) {
        q = -q;
    }
    return q.normalized();
}

Mat4 quat_left_matrix(const Vec4 &a) {
    const double w = a[0], x = a[1], y = a[2], z = a[3];
    Mat4 L;
    L << w, -x, -y, -z,
         x, w, -z, y,
         y, z, w, -x,
         z, -y, x, w;
    return L;
}

Vec4 quat_multiply(const Vec4 &a, const Vec4 &b) { return quat_left_matrix(a) * b; }

Mat3 axis_angle_to_matrix(const Vec3 &axis_angle) {
    const double angle = axis_angle.norm();
    if (angle < 1e-14) {
        // First-order expansion keeps the map smooth through zero.
        Mat3 K;
        K << 0, -axis_angle.z(), axis_angle.y(), axis_angle.z(), 0, -axis_angle.x(), -axis_angle.y(),
            axis_angle.x(), 0;
        return Mat3::Identity() + K;
    }
    const Vec3 k = axis_angle / angle;
    Mat3 K;
    K << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
    return Mat3::Identity() + std::sin(angle) * K + (1.0 - std::cos(angle)) * K * K;
}

} // namespace rigsplat
