#include "rigsplat/losses.hpp"

#include <array>
#include <cmath>

namespace rigsplat {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_window() {
    std::array<double, kWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double x = i - kWindow / 2;
        w[i] = std::exp(-x * x / (2.0 * kSigma * kSigma));
        sum += w[i];
    }
    for (double &v : w) {
        v /= sum;
    }
    return w;
}

/// Separable "same" filtering of one channel plane with zero padding. The
/// kernel is symmetric, so this is also its own adjoint.
std::vector<double> blur(const std::vector<double> &plane, int width, int height) {
    static const auto w = gaussian_window();
    constexpr int r = kWindow / 2;
    std::vector<double> tmp(plane.size(), 0.0), out(plane.size(), 0.0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                const int xx = x + k;
                if (xx >= 0 && xx < width) {
                    acc += w[k + r] * plane[static_cast<std::size_t>(y) * width + xx];
                }
            }
            tmp[static_cast<std::size_t>(y) * width + x] = acc;
        }
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                const int yy = y + k;
                if (yy >= 0 && yy < height) {
                    acc += w[k + r] * tmp[static_cast<std::size_t>(yy) * width + x];
                }
            }
            out[static_cast<std::size_t>(y) * width + x] = acc;
        }
    }
    return out;
}

std::vector<double> channel(const Image &img, int c) {
    std::vector<double> plane(img.pixel_count());
    for (std::size_t i = 0; i < plane.size(); ++i) {
        plane[i] = img.data[3 * i + c];
    }
    return plane;
}

} // namespace

double l1_loss(const Image &a, const Image &b, Image *grad_a) {
    require_same_shape(a, b, "l1_loss");
    const double n = static_cast<double>(a.data.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sum += std::abs(d);
        if (grad_a != nullptr) {
            grad_a->data[i] += (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
        }
    }
    return sum / n;
}

double ssim(const Image &a, const Image &b, Image *grad_a) {
    require_same_shape(a, b, "ssim");
    const int W = a.width, H = a.height;
    const std::size_t np = a.pixel_count();
    const double inv_count = 1.0 / static_cast<double>(3 * np);
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const auto pa = channel(a, c);
        const auto pb = channel(b, c);
        std::vector<double> aa(np), bb(np), ab(np);
        for (std::size_t i = 0; i < np; ++i) {
            aa[i] = pa[i] * pa[i];
            bb[i] = pb[i] * pb[i];
            ab[i] = pa[i] * pb[i];
        }
        const auto mu_a = blur(pa, W, H);
        const auto mu_b = blur(pb, W, H);
        const auto e_aa = blur(aa, W, H);
        const auto e_bb = blur(bb, W, H);
        const auto e_ab = blur(ab, W, H);

        std::vector<double> g_mu, g_aa, g_ab;
        if (grad_a != nullptr) {
            g_mu.resize(np);
            g_aa.resize(np);
            g_ab.resize(np);
        }
        for (std::size_t i = 0; i < np; ++i) {
            const double ma = mu_a[i], mb = mu_b[i];
            const double A1 = 2.0 * ma * mb + kC1;
            const double A2 = 2.0 * (e_ab[i] - ma * mb) + kC2;
            const double B1 = ma * ma + mb * mb + kC1;
            const double B2 = (e_aa[i] - ma * ma) + (e_bb[i] - mb * mb) + kC2;
            const double s = (A1 * A2) / (B1 * B2);
            total += s;
            if (grad_a != nullptr) {
                const double denom = B1 * B2;
                g_mu[i] = inv_count * ((2.0 * mb * A2 - 2.0 * mb * A1) / denom - s * (2.0 * ma / B1 - 2.0 * ma / B2));
                g_aa[i] = inv_count * (-s / B2);
                g_ab[i] = inv_count * (2.0 * A1 / denom);
            }
        }
        if (grad_a != nullptr) {
            const auto t_mu = blur(g_mu, W, H);
            const auto t_aa = blur(g_aa, W, H);
            const auto t_ab = blur(g_ab, W, H);
            for (std::size_t i = 0; i < np; ++i) {
                grad_a->data[3 * i + c] += t_mu[i] + 2.0 * pa[i] * t_aa[i] + pb[i] * t_ab[i];
            }
        }
    }
    return total * inv_count;
}

double d_ssim(const Image &a, const Image &b, Image *grad_a) {
    if (grad_a == nullptr) {
        return 0.5 * (1.0 - ssim(a, b));
    }
    Image g(a.width, a.height);
    const double value = 0.5 * (1.0 - ssim(a, b, &g));
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        grad_a->data[i] -= 0.5 * g.data[i];
    }
    return value;
}

RgbLoss rgb_loss(const Image &render, const Image &gt, double lambda_dssim, Image *grad_render) {
    require_same_shape(render, gt, "rgb_loss");
    RgbLoss out;
    if (grad_render == nullptr) {
        out.l1 = l1_loss(render, gt);
        out.dssim = d_ssim(render, gt);
    } else {
        Image g1(render.width, render.height), g2(render.width, render.height);
        out.l1 = l1_loss(render, gt, &g1);
        out.dssim = d_ssim(render, gt, &g2);
        for (std::size_t i = 0; i < g1.data.size(); ++i) {
            grad_render->data[i] += (1.0 - lambda_dssim) * g1.data[i] + lambda_dssim * g2.data[i];
        }
    }
    out.value = (1.0 - lambda_dssim) * out.l1 + lambda_dssim * out.dssim;
    return out;
}

RegularizerLoss local_regularizers(const GaussianSet &gaussians, double eps_position, double eps_scaling,
                                   std::vector<double> *d_position, std::vector<double> *d_log_scale) {
    const std::size_t n = 3 * gaussians.size();
    std::vector<double> excess_pos(n), excess_scale(n);
    double sq_pos = 0.0, sq_scale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        excess_pos[k] = std::max(std::abs(gaussians.position[k]) - eps_position, 0.0);
        excess_scale[k] = std::max(std::exp(gaussians.log_scale[k]) - eps_scaling, 0.0);
        sq_pos += excess_pos[k] * excess_pos[k];
        sq_scale += excess_scale[k] * excess_scale[k];
    }
    RegularizerLoss out;
    out.position = std::sqrt(sq_pos);
    out.scaling = std::sqrt(sq_scale);
    if (d_position != nullptr && out.position > 0.0) {
        d_position->resize(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            if (excess_pos[k] > 0.0) {
                const double sign = gaussians.position[k] > 0.0 ? 1.0 : -1.0;
                (*d_position)[k] += excess_pos[k] / out.position * sign;
            }
        }
    }
    if (d_log_scale != nullptr && out.scaling > 0.0) {
        d_log_scale->resize(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            if (excess_scale[k] > 0.0) {
                (*d_log_scale)[k] += excess_scale[k] / out.scaling * std::exp(gaussians.log_scale[k]);
            }
        }
    }
    return out;
}

LossResult total_loss(const Image &render, const Image &gt, const GaussianSet &gaussians, const LossWeights &weights,
                      const PerceptualLoss *perceptual) {
    require_same_shape(render, gt, "total_loss");
    LossResult out;
    out.d_render = Image(render.width, render.height);
    out.d_position.assign(3 * gaussians.size(), 0.0);
    out.d_log_scale.assign(3 * gaussians.size(), 0.0);

    const RgbLoss rgb = rgb_loss(render, gt, weights.lambda_dssim, &out.d_render);
    out.terms.l1 = rgb.l1;
    out.terms.dssim = rgb.dssim;
    out.terms.rgb = rgb.value;

    if (perceptual != nullptr && weights.lambda_perceptual != 0.0) {
        Image g(render.width, render.height);
        out.terms.perceptual = perceptual->evaluate(render, gt, &g);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            out.d_render.data[i] += weights.lambda_perceptual * g.data[i];
        }
    }

    std::vector<double> d_pos, d_scale;
    const RegularizerLoss reg =
        local_regularizers(gaussians, weights.eps_position, weights.eps_scaling, &d_pos, &d_scale);
    out.terms.position = reg.position;
    out.terms.scaling = reg.scaling;
    for (std::size_t k = 0; k < d_pos.size(); ++k) {
        out.d_position[k] += weights.lambda_position * d_pos[k];
    }
    for (std::size_t k = 0; k < d_scale.size(); ++k) {
        out.d_log_scale[k] += weights.lambda_scaling * d_scale[k];
    }

    out.terms.total = out.terms.rgb + weights.lambda_perceptual * out.terms.perceptual +
                      weights.lambda_position * out.terms.position + weights.lambda_scaling * out.terms.scaling;
    return out;
}

} // namespace rigsplat
