#pragma once

#include "rigsplat/common.hpp"
#include "rigsplat/gaussian.hpp"
#include "rigsplat/image.hpp"

#include <vector>

namespace rigsplat {

/// Mean absolute difference over all pixels and channels.
double l1_loss(const Image &a, const Image &b, Image *grad_a = nullptr);

/// Mean SSIM over pixels and channels: 11×11 Gaussian window (σ = 1.5),
/// zero padding, C1 = 0.01², C2 = 0.03². Gradient is w.r.t. `a`.
double ssim(const Image &a, const Image &b, Image *grad_a = nullptr);

/// (1 - SSIM) / 2.
double d_ssim(const Image &a, const Image &b, Image *grad_a = nullptr);

struct LossWeights {
    double lambda_dssim = 0.2;
    double lambda_perceptual = 0.02;
    double lambda_position = 0.01;
    double lambda_scaling = 1.0;
    double eps_position = 1.0;
    double eps_scaling = 0.6;
};

struct RgbLoss {
    double l1 = 0.0;
    double dssim = 0.0;
    double value = 0.0;
};

/// (1 - λ1)·L1 + λ1·D-SSIM. Accumulates into grad_render when given.
RgbLoss rgb_loss(const Image &render, const Image &gt, double lambda_dssim, Image *grad_render = nullptr);

struct RegularizerLoss {
    double position = 0.0;
    double scaling = 0.0;
};

/// ‖max(|μ0| - ε_pos, 0)‖₂ and ‖max(s0 - ε_scale, 0)‖₂ over every component
/// of every Gaussian (local μ0, activated s0). Gradients w.r.t. position and
/// log-scale are accumulated when the output vectors are given (3N each).
RegularizerLoss local_regularizers(const GaussianSet &gaussians, double eps_position, double eps_scaling,
                                   std::vector<double> *d_position = nullptr,
                                   std::vector<double> *d_log_scale = nullptr);

/// Pluggable image-space perceptual term.
class PerceptualLoss {
public:
    virtual ~PerceptualLoss() = default;
    /// Returns the loss and accumulates ∂L/∂render into grad_render when given.
    virtual double evaluate(const Image &render, const Image &gt, Image *grad_render) const = 0;
};

struct LossTerms {
    double l1 = 0.0;
    double dssim = 0.0;
    double rgb = 0.0;
    double perceptual = 0.0;
    double position = 0.0;
    double scaling = 0.0;
    double total = 0.0;
};

struct LossResult {
    LossTerms terms;
    Image d_render;
    std::vector<double> d_position;    ///< 3N
    std::vector<double> d_log_scale;   ///< 3N
};

/// L_RGB + λ2·L_perceptual + λ3·L_position + λ4·L_scaling. A null plugin
/// contributes zero.
LossResult total_loss(const Image &render, const Image &gt, const GaussianSet &gaussians, const LossWeights &weights,
                      const PerceptualLoss *perceptual = nullptr);

} // namespace rigsplat
