#include "rigsplat/metrics.hpp"

#include "rigsplat/losses.hpp"

#include <cmath>

namespace rigsplat {

double psnr(const Image &a, const Image &b) {
    require_same_shape(a, b, "psnr");
    if (a.data.empty()) {
        return kPsnrCap;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.data.size());
    if (mse == 0.0) {
        return kPsnrCap;
    }
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

ImageMetrics psnr_ssim(const Image &render, const Image &gt) {
    return {psnr(render, gt), ssim(render, gt)};
}

} // namespace rigsplat
