#pragma once

#include "rigsplat/common.hpp"
#include "rigsplat/frame.hpp"

#include <span>
#include <vector>

namespace rigsplat {

/// Number of SH coefficients per color channel for a given degree.
constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// One primitive in triangle-local space, in raw (pre-activation) form.
struct LocalGaussian {
    Vec3 position = Vec3::Zero();
    Vec4 rotation{1.0, 0.0, 0.0, 0.0};   ///< raw quaternion (w, x, y, z)
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    std::vector<double> sh;               ///< [coeff][channel], 3 * sh_coeff_count(degree)
    int parent_tri = 0;
};

/// Local parameters after activation: unit quaternion, exp scale, sigmoid opacity.
struct ActivatedGaussian {
    Vec3 position = Vec3::Zero();
    Vec4 rotation{1.0, 0.0, 0.0, 0.0};
    Vec3 scale = Vec3::Ones();
    double opacity = 0.5;
};

/// World-space primitive ready for projection.
struct GlobalGaussian {
    Vec3 mean = Vec3::Zero();
    Vec4 rotation{1.0, 0.0, 0.0, 0.0};
    Vec3 scale = Vec3::Ones();
    double opacity = 0.5;
    Vec3 color = Vec3::Constant(0.5);
};

/// Gradient w.r.t. the fields of an ActivatedGaussian.
struct ActivatedGradient {
    Vec3 position = Vec3::Zero();
    Vec4 rotation = Vec4::Zero();
    Vec3 scale = Vec3::Zero();
    double opacity = 0.0;
};

/// Gradient w.r.t. the fields of a GlobalGaussian.
struct GlobalGradient {
    Vec3 mean = Vec3::Zero();
    Vec4 rotation = Vec4::Zero();
    Vec3 scale = Vec3::Zero();
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
};

/// Structure-of-arrays Gaussian collection. The flat arrays are the
/// optimizer's parameter groups.
class GaussianSet {
public:
    explicit GaussianSet(int sh_degree = 0);

    int sh_degree() const { return sh_degree_; }
    int sh_stride() const { return 3 * sh_coeff_count(sh_degree_); }
    std::size_t size() const { return parent_tri.size(); }
    bool empty() const { return parent_tri.empty(); }

    LocalGaussian get(std::size_t i) const;
    void set(std::size_t i, const LocalGaussian &g);
    void push_back(const LocalGaussian &g);

    /// New set holding entries `indices` (repeats allowed) in that order.
    GaussianSet select(std::span<const int> indices) const;

    /// Throws ConsistencyError if any parent_tri is outside [0, triangle_count).
    void validate(std::size_t triangle_count) const;

    Eigen::Map<Vec3> position_of(std::size_t i) { return Eigen::Map<Vec3>(&position[3 * i]); }
    Eigen::Map<const Vec3> position_of(std::size_t i) const { return Eigen::Map<const Vec3>(&position[3 * i]); }
    Eigen::Map<const Vec4> rotation_of(std::size_t i) const { return Eigen::Map<const Vec4>(&rotation[4 * i]); }
    Eigen::Map<const Vec3> log_scale_of(std::size_t i) const { return Eigen::Map<const Vec3>(&log_scale[3 * i]); }
    std::span<const double> sh_of(std::size_t i) const {
        return std::span<const double>(sh).subspan(i * sh_stride(), sh_stride());
    }

    std::vector<double> position;        ///< 3N
    std::vector<double> rotation;        ///< 4N raw quaternions
    std::vector<double> log_scale;       ///< 3N
    std::vector<double> opacity_logit;   ///< N
    std::vector<double> sh;              ///< N * sh_stride()
    std::vector<int> parent_tri;         ///< N

private:
    int sh_degree_;
};

/// Throws NumericError for a zero quaternion.
ActivatedGaussian activate_params(const LocalGaussian &g);
ActivatedGaussian activate_params(const GaussianSet &set, std::size_t i);

/// Gradient w.r.t. raw parameters given the gradient w.r.t. activated ones.
struct RawGradient {
    Vec3 position = Vec3::Zero();
    Vec4 rotation = Vec4::Zero();
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
};
RawGradient activate_params_backward(const LocalGaussian &g, const ActivatedGradient &grad);
RawGradient activate_params_backward(const GaussianSet &set, std::size_t i, const ActivatedGradient &grad);

/// Σ = R S Sᵀ Rᵀ for a unit quaternion r and per-axis scales s.
Mat3 build_covariance(const Vec4 &r, const Vec3 &s);

struct CovarianceGradient {
    Vec4 rotation = Vec4::Zero();
    Vec3 scale = Vec3::Zero();
};
/// `d_sigma` holds ∂L/∂Σ_ij for every entry (not symmetrized).
CovarianceGradient build_covariance_backward(const Vec4 &r, const Vec3 &s, const Mat3 &d_sigma);

/// Rotation, position and scale in world space: r' = q(R) ⊗ r0,
/// μ' = S·R·μ0 + M, s' = S·s0. Opacity passes through; color is left at its
/// default and filled in per view.
GlobalGaussian bind_to_global(const ActivatedGaussian &g, const TriangleFrame &frame);

/// Backward of bind_to_global for a fixed frame (color gradient is ignored).
ActivatedGradient bind_to_global_backward(const TriangleFrame &frame, const GlobalGradient &grad);

} // namespace rigsplat
