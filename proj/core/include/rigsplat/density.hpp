#pragma once

#include "rigsplat/common.hpp"
#include "rigsplat/frame.hpp"
#include "rigsplat/gaussian.hpp"

#include <random>
#include <span>
#include <vector>

namespace rigsplat {

/// Running view-space positional gradient statistics, one slot per Gaussian.
struct DensifyStats {
    std::vector<double> grad_norm_sum;
    std::vector<int> count;

    explicit DensifyStats(std::size_t n = 0) : grad_norm_sum(n, 0.0), count(n, 0) {}

    std::size_t size() const { return count.size(); }
    void reset(std::size_t n) {
        grad_norm_sum.assign(n, 0.0);
        count.assign(n, 0);
    }
    void accumulate(std::size_t i, double grad_norm) {
        grad_norm_sum[i] += grad_norm;
        count[i] += 1;
    }
    double average(std::size_t i) const { return count[i] > 0 ? grad_norm_sum[i] / count[i] : 0.0; }
};

struct DensifyConfig {
    double grad_threshold = 2e-4;
    /// Split when the bound world-space scale exceeds percent_dense * scene_extent.
    double percent_dense = 0.01;
    double split_factor = 1.6;
    int split_children = 2;
    double prune_opacity = 0.005;
    double opacity_reset_ceiling = 0.01;
};

struct DensifyResult {
    GaussianSet gaussians;
    /// For each output Gaussian, the index of the input Gaussian it came from.
    std::vector<int> source;
    /// 1 for clones and split children, 0 for survivors.
    std::vector<unsigned char> is_new;
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
};

/// Clone small high-gradient Gaussians, split large ones, prune transparent
/// ones. All offspring keep their parent's triangle. `frames` gives the
/// triangle scale used to measure Gaussian size in world units. Resets
/// `stats` to the new set size. Throws ConsistencyError on misaligned stats.
DensifyResult densify_and_prune(const GaussianSet &gaussians, DensifyStats &stats, const DensifyConfig &config,
                                std::span<const TriangleFrame> frames, double scene_extent, std::mt19937_64 &rng);

/// Sets every activated opacity to min(opacity, ceiling).
void reset_opacity(GaussianSet &gaussians, double ceiling);

} // namespace rigsplat
