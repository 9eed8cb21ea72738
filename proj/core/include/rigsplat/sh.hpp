#pragma once

#include "rigsplat/common.hpp"

#include <span>

namespace rigsplat {

/// Real spherical-harmonics color: clamp(Σ_k c_k Y_k(dir) + 0.5, 0, 1) per
/// channel. `coeffs` is laid out [coeff][channel]; dir must be unit length.
Vec3 sh_to_color(std::span<const double> coeffs, int degree, const Vec3 &dir);

/// Accumulates ∂L/∂coeffs into `d_coeffs` and returns ∂L/∂dir. Channels that
/// were clamped pass no gradient.
Vec3 sh_to_color_backward(std::span<const double> coeffs, int degree, const Vec3 &dir,
                          const Vec3 &d_color, std::span<double> d_coeffs);

/// Basis values Y_k(dir) for k < (degree+1)², optionally with ∂Y_k/∂dir.
void sh_basis(int degree, const Vec3 &dir, std::span<double> values,
              Eigen::Matrix<double, 16, 3> *jacobian = nullptr);

} // namespace rigsplat
