#include "rigsplat/density.hpp"

#include "rigsplat/math.hpp"

#include <cmath>

namespace rigsplat {

namespace {

Vec3 sample_unit_ball(std::mt19937_64 &rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
        const Vec3 z(normal(rng), normal(rng), normal(rng));
        if (z.squaredNorm() <= 1.0) {
            return z;
        }
    }
}

} // namespace

DensifyResult densify_and_prune(const GaussianSet &gaussians, DensifyStats &stats, const DensifyConfig &config,
                                std::span<const TriangleFrame> frames, double scene_extent, std::mt19937_64 &rng) {
    const std::size_t n = gaussians.size();
    if (stats.size() != n || stats.grad_norm_sum.size() != n) {
        throw ConsistencyError("densify stats cover " + std::to_string(stats.size()) + " gaussians, set has " +
                               std::to_string(n));
    }
    gaussians.validate(frames.size());

    enum class Action { keep, clone, split };
    std::vector<Action> action(n, Action::keep);
    const double size_limit = config.percent_dense * scene_extent;
    for (std::size_t i = 0; i < n; ++i) {
        if (stats.average(i) < config.grad_threshold) {
            continue;
        }
        const double world_scale =
            frames[gaussians.parent_tri[i]].scale * gaussians.log_scale_of(i).array().exp().maxCoeff();
        action[i] = world_scale > size_limit ? Action::split : Action::clone;
    }

    std::vector<int> source;
    std::vector<unsigned char> is_new;
    std::vector<LocalGaussian> children;
    for (std::size_t i = 0; i < n; ++i) {
        if (action[i] != Action::split) {
            source.push_back(static_cast<int>(i));
            is_new.push_back(0);
        }
    }
    DensifyResult result;
    for (std::size_t i = 0; i < n; ++i) {
        if (action[i] == Action::clone) {
            source.push_back(static_cast<int>(i));
            is_new.push_back(1);
            ++result.cloned;
        }
    }
    GaussianSet grown = gaussians.select(source);
    for (std::size_t i = 0; i < n; ++i) {
        if (action[i] != Action::split) {
            continue;
        }
        ++result.split;
        const LocalGaussian parent = gaussians.get(i);
        const Mat3 R = quat_to_matrix(quat_normalize(parent.rotation));
        const Vec3 s = parent.log_scale.array().exp();
        for (int c = 0; c < config.split_children; ++c) {
            LocalGaussian child = parent;
            child.position = parent.position + R * s.cwiseProduct(sample_unit_ball(rng));
            child.log_scale = parent.log_scale.array() - std::log(config.split_factor);
            grown.push_back(child);
            source.push_back(static_cast<int>(i));
            is_new.push_back(1);
        }
    }

    std::vector<int> keep;
    keep.reserve(grown.size());
    for (std::size_t j = 0; j < grown.size(); ++j) {
        if (sigmoid(grown.opacity_logit[j]) >= config.prune_opacity) {
            keep.push_back(static_cast<int>(j));
        }
    }
    result.pruned = grown.size() - keep.size();
    result.gaussians = grown.select(keep);
    for (int j : keep) {
        result.source.push_back(source[j]);
        result.is_new.push_back(is_new[j]);
    }
    stats.reset(result.gaussians.size());
    return result;
}

void reset_opacity(GaussianSet &gaussians, double ceiling) {
    for (double &l : gaussians.opacity_logit) {
        if (sigmoid(l) > ceiling) {
            l = logit(ceiling);
        }
    }
}

} // namespace rigsplat
