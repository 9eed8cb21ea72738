#pragma once

#include "rigsplat/camera.hpp"
#include "rigsplat/config.hpp"
#include "rigsplat/frame.hpp"
#include "rigsplat/gaussian.hpp"
#include "rigsplat/image.hpp"
#include "rigsplat/losses.hpp"
#include "rigsplat/morph_adjuster.hpp"
#include "rigsplat/rasterizer.hpp"
#include "rigsplat/rig.hpp"

#include <random>
#include <span>
#include <string>
#include <vector>

namespace rigsplat {

/// Everything the forward pass records for the backward pass of one frame.
struct FrameTape {
    Camera camera;                        ///< head pose already folded into the extrinsics
    std::vector<TriangleFrame> frames;
    std::vector<GlobalGaussian> coarse;   ///< after binding, before the adjuster
    std::vector<GlobalGaussian> refined;  ///< what was projected
    std::vector<DeformDelta> deltas;

    bool deformed = false;                ///< adjuster contributed to this frame
    std::vector<Vec3> neutral_positions;
    RowMatrix basis;
    Mlp::Cache basis_cache;
    Eigen::VectorXd latent;
    Mlp::Cache latent_cache;

    std::vector<int> splat_source;        ///< splat index -> Gaussian index
    RenderResult render;
};

class Model;

/// Gradients for every trainable array of a Model, plus per-Gaussian
/// screen-space statistics for densification.
struct ModelGradients {
    ModelGradients() = default;
    explicit ModelGradients(const Model &model);

    std::vector<double> position;
    std::vector<double> rotation;
    std::vector<double> log_scale;
    std::vector<double> opacity_logit;
    std::vector<double> sh;
    std::vector<double> triplane;
    std::vector<double> basis_net;
    std::vector<double> latent_net;

    /// ‖∂L/∂mean2d‖ in normalized device units (pixel gradient times half the image size).
    std::vector<double> screen_grad_norm;
    std::vector<unsigned char> visible;
};

/// Named view of one trainable array and its gradient.
struct ParamGroup {
    std::string name;
    std::span<double> params;
    std::span<double> grads;
    std::size_t row_width = 1;   ///< values per Gaussian; 0 for non-Gaussian groups
};

/// Gaussians bound to a rig, the morph adjuster, and the render setup.
class Model {
public:
    Model() = default;

    /// One Gaussian at the centroid of every face of the rest mesh, with
    /// local scale `init_local_scale` and opacity `init_opacity`.
    static Model create(const ParamRig &rig, const TrainConfig &config, const Vec3 &background, std::mt19937_64 &rng);

    /// Recomputes the rest-mesh frames and resets the degenerate-face fallback.
    void refresh_neutral();

    /// Binds, deforms and projects every Gaussian for one frame; fills
    /// everything in `tape` except the render result.
    std::vector<Splat2D> project(const RigParams &params, const Camera &camera, FrameTape &tape);

    /// Renders one frame. `params.head_pose` is applied through the camera.
    /// Degenerate faces reuse the last valid frame seen by this model.
    Image render(const RigParams &params, const Camera &camera, FrameTape *tape = nullptr);

    /// Accumulates gradients of a scalar loss with upstream ∂L/∂image.
    void backward(const FrameTape &tape, const Image &d_image, ModelGradients &grads) const;

    /// Neutral world positions of the Gaussians, the tri-plane query points.
    /// They are constants of a forward/backward pass; the trainer refreshes
    /// them once per step and render() fills them when the count is stale.
    void update_query_positions();

    bool adjuster_in_use() const { return adjuster_enabled && adjuster_active; }

    std::vector<ParamGroup> param_groups(ModelGradients &grads);

    ParamRig rig;
    Vec3 background = Vec3::Zero();
    GaussianSet gaussians;
    MorphAdjuster adjuster;
    bool adjuster_enabled = true;   ///< false drops the adjuster from the pipeline entirely
    bool adjuster_active = false;   ///< set by the trainer once the refinement phase starts
    bool use_lbs = true;            ///< false keeps every frame on the rest mesh
    RenderOptions render_options;
    std::vector<TriangleFrame> neutral_frames;
    std::vector<Vec3> query_positions;

private:
    std::vector<TriangleFrame> last_valid_frames_;
};

struct FrameLoss {
    LossTerms terms;
    Image render;
};

/// Render, total loss and (optionally) full gradients for one supervised frame.
FrameLoss frame_loss(Model &model, const RigParams &params, const Camera &camera, const Image &target,
                     const LossWeights &weights, const PerceptualLoss *perceptual, ModelGradients *grads);

/// Axis-aligned bounds of the rest mesh, padded by `fraction` of its extent.
Aabb rest_bounds(const ParamRig &rig, double fraction);

} // namespace rigsplat
