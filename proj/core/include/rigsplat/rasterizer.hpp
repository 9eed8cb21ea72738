#pragma once

#include "rigsplat/camera.hpp"
#include "rigsplat/common.hpp"
#include "rigsplat/gaussian.hpp"
#include "rigsplat/image.hpp"

#include <optional>
#include <span>
#include <vector>

namespace rigsplat {

/// Added to the diagonal of every projected covariance (pixels²).
inline constexpr double kLowPassFloor = 0.3;

/// Screen-space footprint of one Gaussian.
struct Splat2D {
    Vec2 mean = Vec2::Zero();
    Mat2 cov = Mat2::Identity();     ///< includes the low-pass floor
    Mat2 conic = Mat2::Identity();   ///< cov⁻¹
    double depth = 0.0;
    Vec3 color = Vec3::Zero();
    double opacity = 0.0;
    int source_id = 0;
};

/// EWA projection: cov2d = J W Σ Wᵀ Jᵀ + floor·I. Returns nullopt when the
/// mean lies outside [near, far] in camera depth.
std::optional<Splat2D> project_gaussian(const GlobalGaussian &g, const Camera &cam, int source_id = 0);

struct ProjectionGradient {
    Vec3 mean = Vec3::Zero();
    Mat3 cov3d = Mat3::Zero();   ///< ∂L/∂Σ_ij, per entry
};
ProjectionGradient project_gaussian_backward(const GlobalGaussian &g, const Camera &cam, const Vec2 &d_mean2d,
                                             const Mat2 &d_cov2d);

struct RenderOptions {
    int tile_size = 16;
    /// Skip splat/pixel pairs beyond `cutoff_radius` Mahalanobis distance.
    /// When disabled every splat is assigned to every tile.
    bool gaussian_cutoff = true;
    double cutoff_radius = 3.0;
    /// Stop compositing a pixel once its transmittance drops below this.
    double min_transmittance = 1e-4;
    int threads = 1;
};

/// Forward-pass bookkeeping consumed by render_backward.
struct RenderAux {
    int width = 0;
    int height = 0;
    int tiles_x = 0;
    int tiles_y = 0;
    Vec3 background = Vec3::Zero();
    RenderOptions options;
    std::vector<Splat2D> splats;                ///< input order
    std::vector<std::vector<int>> tile_lists;   ///< per tile, depth-sorted splat indices
    std::vector<double> final_transmittance;    ///< per pixel
    std::vector<int> contributor_end;           ///< per pixel: one past the last processed list entry
};

struct RenderResult {
    Image image;
    RenderAux aux;
};

/// Front-to-back alpha compositing over 16×16 tiles, depth-sorted by
/// (depth, source_id).
RenderResult render_forward(std::span<const Splat2D> splats, const Camera &cam, const Vec3 &background,
                            const RenderOptions &options = {});

struct SplatGradient {
    Vec2 mean = Vec2::Zero();
    Mat2 cov = Mat2::Zero();   ///< ∂L/∂cov_ij, per entry
    Vec3 color = Vec3::Zero();
    double opacity = 0.0;
};

/// Gradients per input splat (same order as the forward call). Throws
/// ConsistencyError when `d_image` does not match the aux.
std::vector<SplatGradient> render_backward(const RenderAux &aux, const Image &d_image);

/// Chains a splat gradient back to the world-space Gaussian it came from.
GlobalGradient splat_gradient_to_global(const GlobalGaussian &g, const Camera &cam, const SplatGradient &grad);

/// Reference renderer: every splat at every pixel, no tiles, no cutoff.
/// Honors options.min_transmittance only.
Image brute_force_render(std::span<const Splat2D> splats, const Camera &cam, const Vec3 &background,
                         const RenderOptions &options = {});

} // namespace rigsplat
