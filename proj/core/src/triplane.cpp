#include "rigsplat/triplane.hpp"

#include <cmath>
#include <numbers>

namespace rigsplat {

Vec3 Aabb::normalize(const Vec3 &x) const {
    Vec3 u;
    for (int k = 0; k < 3; ++k) {
        const double extent = max[k] - min[k];
        u[k] = std::clamp((x[k] - min[k]) / extent, 0.0, 1.0);
    }
    return u;
}

Aabb Aabb::padded(double fraction) const {
    const Vec3 pad = (max - min) * fraction;
    return {min - pad, max + pad};
}

TriPlane::TriPlane(const Aabb &domain, std::vector<int> resolutions, int channels)
    : domain_(domain), resolutions_(std::move(resolutions)), channels_(channels) {
    if (channels_ <= 0 || resolutions_.empty()) {
        throw SizeError("tri-plane needs at least one level and one channel");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l < resolutions_.size(); ++l) {
        if (resolutions_[l] < 2 || (l > 0 && resolutions_[l] <= resolutions_[l - 1])) {
            throw ConsistencyError("tri-plane resolutions must be >= 2 and strictly increasing");
        }
        level_offsets_.push_back(offset);
        offset += 3 * static_cast<std::size_t>(resolutions_[l]) * resolutions_[l] * channels_;
    }
    for (int k = 0; k < 3; ++k) {
        if (!(domain_.max[k] > domain_.min[k])) {
            throw ConsistencyError("tri-plane domain must have positive extent");
        }
    }
    params.assign(offset, 0.0);
}

void TriPlane::init_uniform(std::mt19937_64 &rng, double amplitude) {
    std::uniform_real_distribution<double> dist(-amplitude, amplitude);
    for (double &p : params) {
        p = dist(rng);
    }
}

std::size_t TriPlane::node_offset(int level, int plane, int u, int v) const {
    const auto res = static_cast<std::size_t>(resolutions_[level]);
    return level_offsets_[level] + ((static_cast<std::size_t>(plane) * res + v) * res + u) * channels_;
}

TriPlane::Sample TriPlane::sample(int level, int plane, const Vec3 &unit) const {
    static constexpr int kAxes[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    const int res = resolutions_[level];
    int cell[2];
    double t[2];
    for (int a = 0; a < 2; ++a) {
        const double g = unit[kAxes[plane][a]] * (res - 1);
        cell[a] = std::min(static_cast<int>(std::floor(g)), res - 2);
        t[a] = g - cell[a];
    }
    Sample s;
    s.offset[0] = node_offset(level, plane, cell[0], cell[1]);
    s.offset[1] = node_offset(level, plane, cell[0] + 1, cell[1]);
    s.offset[2] = node_offset(level, plane, cell[0], cell[1] + 1);
    s.offset[3] = node_offset(level, plane, cell[0] + 1, cell[1] + 1);
    s.weight[0] = (1.0 - t[0]) * (1.0 - t[1]);
    s.weight[1] = t[0] * (1.0 - t[1]);
    s.weight[2] = (1.0 - t[0]) * t[1];
    s.weight[3] = t[0] * t[1];
    return s;
}

void TriPlane::encode(const Vec3 &x, std::span<double> features) const {
    require_size(features.size(), static_cast<std::size_t>(feature_dim()), "tri-plane features");
    const Vec3 unit = domain_.normalize(x);
    std::size_t out = 0;
    for (int l = 0; l < level_count(); ++l) {
        for (int plane = 0; plane < 3; ++plane) {
            const Sample s = sample(l, plane, unit);
            for (int c = 0; c < channels_; ++c) {
                double v = 0.0;
                for (int k = 0; k < 4; ++k) {
                    v += s.weight[k] * params[s.offset[k] + c];
                }
                features[out++] = v;
            }
        }
    }
}

void TriPlane::encode_backward(const Vec3 &x, std::span<const double> d_features, std::span<double> d_params) const {
    require_size(d_params.size(), params.size(), "tri-plane gradient");
    const Vec3 unit = domain_.normalize(x);
    std::size_t in = 0;
    for (int l = 0; l < level_count(); ++l) {
        for (int plane = 0; plane < 3; ++plane) {
            const Sample s = sample(l, plane, unit);
            for (int c = 0; c < channels_; ++c) {
                const double g = d_features[in++];
                for (int k = 0; k < 4; ++k) {
                    d_params[s.offset[k] + c] += s.weight[k] * g;
                }
            }
        }
    }
}

void fourier_encode(const Vec3 &unit, int bands, std::span<double> features) {
    require_size(features.size(), static_cast<std::size_t>(6 * bands), "fourier features");
    std::size_t out = 0;
    for (int a = 0; a < 3; ++a) {
        double freq = std::numbers::pi;
        for (int k = 0; k < bands; ++k) {
            features[out++] = std::sin(freq * unit[a]);
            features[out++] = std::cos(freq * unit[a]);
            freq *= 2.0;
        }
    }
}

} // namespace rigsplat
