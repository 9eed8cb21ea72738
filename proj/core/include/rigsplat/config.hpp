#pragma once

#include "rigsplat/density.hpp"
#include "rigsplat/losses.hpp"
#include "rigsplat/morph_adjuster.hpp"
#include "rigsplat/rasterizer.hpp"

#include <cstdint>
#include <string>

namespace rigsplat {

struct AblationFlags {
    bool no_adjuster = false;   ///< LBS-only deformation
    bool no_triplane = false;   ///< Fourier position encoding instead of the tri-plane
    bool no_lbs = false;        ///< Gaussians stay on the neutral mesh; the adjuster does all deformation
    bool no_init = false;       ///< adjuster trained from iteration 0
};

struct TrainConfig {
    std::uint64_t seed = 0;
    int threads = 1;
    long total_iters = 120000;
    int sh_degree = 0;

    LossWeights loss;

    double lr_position = 5e-3;
    double lr_position_final_fraction = 0.01;
    long lr_position_decay_end = 60000;
    double lr_scaling = 5e-3;
    double lr_rotation = 1e-3;
    double lr_opacity = 0.05;
    double lr_sh = 2.5e-3;
    double lr_sh_rest_divisor = 20.0;
    double lr_mlp = 1e-4;
    double lr_triplane = 5e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-15;

    long adjuster_start_iter = 5000;
    long densify_start_iter = 500;
    long densify_end_iter = 60000;
    long densify_stride = 100;
    long opacity_reset_stride = 3000;

    DensifyConfig densify;
    /// World-space extent used by the split rule; 0 derives it from the cameras.
    double scene_extent = 0.0;

    AdjusterConfig adjuster;
    RenderOptions render;

    /// Initial Gaussians: one per triangle at the centroid.
    double init_local_scale = 0.5;
    double init_opacity = 0.1;

    /// Pose the mesh with ψ = 0 while the adjuster is off.
    bool init_zero_psi = false;

    AblationFlags ablation;

    /// Throws ConsistencyError when strides, windows or weights are invalid.
    void validate() const;
};

/// Pretty-printed JSON with every field.
std::string config_to_json(const TrainConfig &config);
/// Missing keys keep their defaults; unknown keys throw LoadError.
TrainConfig config_from_json(const std::string &text);
TrainConfig load_config(const std::string &path);

} // namespace rigsplat
