#pragma once

#include "rigsplat/common.hpp"

#include <random>
#include <span>
#include <vector>

namespace rigsplat {

struct Aabb {
    Vec3 min = Vec3::Constant(-1.0);
    Vec3 max = Vec3::Constant(1.0);

    /// Position mapped to [0,1]³, clamped at the faces.
    Vec3 normalize(const Vec3 &x) const;
    Aabb padded(double fraction) const;
};

enum class EncodingMode { triplane, fourier };

/// Multi-resolution tri-plane: per level, three axis-aligned planes (XY, XZ,
/// YZ) of res×res nodes with `channels` features each. Features of a point
/// are the bilinear samples of every plane, concatenated level-major, then
/// plane, then channel.
class TriPlane {
public:
    TriPlane() = default;
    TriPlane(const Aabb &domain, std::vector<int> resolutions, int channels);

    const Aabb &domain() const { return domain_; }
    const std::vector<int> &resolutions() const { return resolutions_; }
    int channels() const { return channels_; }
    int level_count() const { return static_cast<int>(resolutions_.size()); }
    int feature_dim() const { return 3 * level_count() * channels_; }

    void init_uniform(std::mt19937_64 &rng, double amplitude);

    void encode(const Vec3 &x, std::span<double> features) const;
    /// Accumulates ∂L/∂params for one query point.
    void encode_backward(const Vec3 &x, std::span<const double> d_features, std::span<double> d_params) const;

    /// Flat node storage: [level][plane][row v][column u][channel].
    std::vector<double> params;

    /// Offset of node (u, v) of a plane in `params`.
    std::size_t node_offset(int level, int plane, int u, int v) const;

private:
    struct Sample {
        std::size_t offset[4];
        double weight[4];
    };
    Sample sample(int level, int plane, const Vec3 &unit) const;

    Aabb domain_;
    std::vector<int> resolutions_;
    int channels_ = 0;
    std::vector<std::size_t> level_offsets_;
};

/// sin/cos of 2^k·π·u for each normalized coordinate u and k < bands:
/// [axis][band][sin, cos], length 6·bands.
void fourier_encode(const Vec3 &unit, int bands, std::span<double> features);

} // namespace rigsplat
