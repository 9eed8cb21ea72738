#pragma once

#include "rigsplat/camera.hpp"
#include "rigsplat/dataset.hpp"
#include "rigsplat/gaussian.hpp"
#include "rigsplat/rig.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace rigsplat {

struct ToyRigDims {
    int vertex_budget = 254;   ///< about 2 faces per vertex
    int blendshapes = 4;
    int joints = 2;
    double amplitude = 0.15;   ///< max blendshape displacement
};

/// Closed ellipsoidal latitude/longitude mesh with smooth random blendshapes
/// and a vertical joint chain. Deterministic for a seed.
ParamRig make_toy_rig(std::uint64_t seed, const ToyRigDims &dims = {});

/// `count` Gaussians on random faces with random local parameters.
GaussianSet make_toy_gaussians(const ParamRig &rig, int count, std::uint64_t seed, int sh_degree = 0);

/// Cameras on a Fibonacci sphere of radius `distance`, all looking at the origin.
std::vector<Camera> orbit_cameras(int count, double distance, double focal, int width, int height);

/// Random ψ in [-psi_range, psi_range], θ components in [-theta_range, theta_range]
/// and a head rotation of at most head_range radians.
std::vector<RigParams> random_param_sequence(const ParamRig &rig, int count, std::uint64_t seed,
                                             double psi_range = 1.0, double theta_range = 0.3,
                                             double head_range = 0.1);

/// World-space offset that is quadratic in ψ, so no blendshape or skinning
/// setting can reproduce it.
struct FineDeformation {
    double amplitude = 0.0;
    std::uint64_t seed = 0;
    Vec3 offset(const Vec3 &neutral_position, std::span<const double> psi) const;
};

/// Ground-truth image for one frame, rendered with the brute-force renderer.
Image render_ground_truth(const ParamRig &rig, const GaussianSet &gt, const RigParams &params, const Camera &camera,
                          const Vec3 &background, const FineDeformation &fine = {});

/// One frame per (setting, camera) pair, setting-major. Masks are all foreground.
Dataset make_toy_dataset(const ParamRig &rig, const GaussianSet &gt, std::span<const Camera> cameras,
                         std::span<const RigParams> settings, const Vec3 &background,
                         const FineDeformation &fine = {});

struct ToySceneOptions {
    std::uint64_t seed = 0;
    ToyRigDims rig;
    int gaussians = 64;
    int cameras = 20;
    int train_settings = 10;
    int heldout_settings = 10;
    int size = 64;
    double distance = 4.0;
    double focal = 90.0;
    Vec3 background = Vec3::Zero();
    FineDeformation fine;
};

struct ToyScene {
    ParamRig rig;
    GaussianSet gt;
    std::vector<Camera> cameras;
    Dataset train;
    Dataset heldout;
};
ToyScene make_toy_scene(const ToySceneOptions &options);

} // namespace rigsplat
