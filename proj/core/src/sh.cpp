#include "rigsplat/sh.hpp"

#include "rigsplat/gaussian.hpp"

namespace rigsplat {
namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                          -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                          0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                          -0.5900435899266435};

} // namespace

void sh_basis(int degree, const Vec3 &dir, std::span<double> values, Eigen::Matrix<double, 16, 3> *jacobian) {
    const double x = dir.x(), y = dir.y(), z = dir.z();
    const double xx = x * x, yy = y * y, zz = z * z;
    values[0] = kC0;
    if (jacobian != nullptr) {
        jacobian->setZero();
    }
    if (degree < 1) {
        return;
    }
    values[1] = -kC1 * y;
    values[2] = kC1 * z;
    values[3] = -kC1 * x;
    if (jacobian != nullptr) {
        auto &J = *jacobian;
        J.row(1) << 0, -kC1, 0;
        J.row(2) << 0, 0, kC1;
        J.row(3) << -kC1, 0, 0;
    }
    if (degree < 2) {
        return;
    }
    values[4] = kC2[0] * x * y;
    values[5] = kC2[1] * y * z;
    values[6] = kC2[2] * (2.0 * zz - xx - yy);
    values[7] = kC2[3] * x * z;
    values[8] = kC2[4] * (xx - yy);
    if (jacobian != nullptr) {
        auto &J = *jacobian;
        J.row(4) << kC2[0] * y, kC2[0] * x, 0;
        J.row(5) << 0, kC2[1] * z, kC2[1] * y;
        J.row(6) << -2.0 * kC2[2] * x, -2.0 * kC2[2] * y, 4.0 * kC2[2] * z;
        J.row(7) << kC2[3] * z, 0, kC2[3] * x;
        J.row(8) << 2.0 * kC2[4] * x, -2.0 * kC2[4] * y, 0;
    }
    if (degree < 3) {
        return;
    }
    values[9] = kC3[0] * y * (3.0 * xx - yy);
    values[10] = kC3[1] * x * y * z;
    values[11] = kC3[2] * y * (4.0 * zz - xx - yy);
    values[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    values[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    values[14] = kC3[5] * z * (xx - yy);
    values[15] = kC3[6] * x * (xx - 3.0 * yy);
    if (jacobian != nullptr) {
        auto &J = *jacobian;
        J.row(9) << kC3[0] * 6.0 * x * y, kC3[0] * (3.0 * xx - 3.0 * yy), 0;
        J.row(10) << kC3[1] * y * z, kC3[1] * x * z, kC3[1] * x * y;
        J.row(11) << kC3[2] * (-2.0 * x * y), kC3[2] * (4.0 * zz - xx - 3.0 * yy), kC3[2] * 8.0 * y * z;
        J.row(12) << kC3[3] * (-6.0 * x * z), kC3[3] * (-6.0 * y * z), kC3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy);
        J.row(13) << kC3[4] * (4.0 * zz - 3.0 * xx - yy), kC3[4] * (-2.0 * x * y), kC3[4] * 8.0 * x * z;
        J.row(14) << kC3[5] * 2.0 * x * z, kC3[5] * (-2.0 * y * z), kC3[5] * (xx - yy);
        J.row(15) << kC3[6] * (3.0 * xx - 3.0 * yy), kC3[6] * (-6.0 * x * y), 0;
    }
}

Vec3 sh_to_color(std::span<const double> coeffs, int degree, const Vec3 &dir) {
    const int n = sh_coeff_count(degree);
    require_size(coeffs.size(), static_cast<std::size_t>(3 * n), "SH coefficients");
    double basis[16];
    sh_basis(degree, dir, basis);
    Vec3 c = Vec3::Constant(0.5);
    for (int k = 0; k < n; ++k) {
        for (int ch = 0; ch < 3; ++ch) {
            c[ch] += basis[k] * coeffs[3 * k + ch];
        }
    }
    return c.cwiseMax(0.0).cwiseMin(1.0);
}

Vec3 sh_to_color_backward(std::span<const double> coeffs, int degree, const Vec3 &dir, const Vec3 &d_color,
                          std::span<double> d_coeffs) {
    const int n = sh_coeff_count(degree);
    double basis[16];
    Eigen::Matrix<double, 16, 3> J;
    sh_basis(degree, dir, basis, &J);
    Vec3 raw = Vec3::Constant(0.5);
    for (int k = 0; k < n; ++k) {
        for (int ch = 0; ch < 3; ++ch) {
            raw[ch] += basis[k] * coeffs[3 * k + ch];
        }
    }
    Vec3 g = d_color;
    for (int ch = 0; ch < 3; ++ch) {
        if (raw[ch] < 0.0 || raw[ch] > 1.0) {
            g[ch] = 0.0;
        }
    }
    Vec3 d_dir = Vec3::Zero();
    for (int k = 0; k < n; ++k) {
        double dk = 0.0;
        for (int ch = 0; ch < 3; ++ch) {
            d_coeffs[3 * k + ch] += basis[k] * g[ch];
            dk += coeffs[3 * k + ch] * g[ch];
        }
        d_dir += dk * J.row(k).transpose();
    }
    return d_dir;
}

} // namespace rigsplat
