#pragma once

#include "rigsplat/image.hpp"

namespace rigsplat {

/// Reported for identical images.
inline constexpr double kPsnrCap = 100.0;

/// 10·log10(1/MSE) over all channels, capped at kPsnrCap.
double psnr(const Image &a, const Image &b);

struct ImageMetrics {
    double psnr = 0.0;
    double ssim = 0.0;
};
ImageMetrics psnr_ssim(const Image &render, const Image &gt);

} // namespace rigsplat
