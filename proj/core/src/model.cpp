#include "rigsplat/model.hpp"

#include "rigsplat/math.hpp"
#include "rigsplat/sh.hpp"

#include <cmath>
#include <limits>

namespace rigsplat {

namespace {

struct ViewDir {
    Vec3 unit = Vec3::UnitZ();
    double length = 0.0;
};

ViewDir view_direction(const Vec3 &mean, const Vec3 &eye) {
    const Vec3 v = mean - eye;
    ViewDir d;
    d.length = v.norm();
    if (d.length > 0.0) {
        d.unit = v / d.length;
    }
    return d;
}

} // namespace

ModelGradients::ModelGradients(const Model &model) {
    const GaussianSet &g = model.gaussians;
    position.assign(g.position.size(), 0.0);
    rotation.assign(g.rotation.size(), 0.0);
    log_scale.assign(g.log_scale.size(), 0.0);
    opacity_logit.assign(g.opacity_logit.size(), 0.0);
    sh.assign(g.sh.size(), 0.0);
    triplane.assign(model.adjuster.triplane.params.size(), 0.0);
    basis_net.assign(model.adjuster.basis_net.params.size(), 0.0);
    latent_net.assign(model.adjuster.latent_net.params.size(), 0.0);
    screen_grad_norm.assign(g.size(), 0.0);
    visible.assign(g.size(), 0);
}

Aabb rest_bounds(const ParamRig &rig, double fraction) {
    Aabb box;
    box.min = Vec3::Constant(std::numeric_limits<double>::infinity());
    box.max = -box.min;
    for (const Vec3 &v : rig.template_vertices) {
        box.min = box.min.cwiseMin(v);
        box.max = box.max.cwiseMax(v);
    }
    if (rig.template_vertices.empty()) {
        return Aabb{};
    }
    return box.padded(fraction);
}

Model Model::create(const ParamRig &rig, const TrainConfig &config, const Vec3 &background, std::mt19937_64 &rng) {
    rig.validate();
    Model m;
    m.rig = rig;
    m.background = background;
    m.render_options = config.render;
    m.render_options.threads = config.threads;
    m.use_lbs = !config.ablation.no_lbs;
    m.adjuster_enabled = !config.ablation.no_adjuster;
    m.refresh_neutral();

    m.gaussians = GaussianSet(config.sh_degree);
    for (std::size_t f = 0; f < rig.face_count(); ++f) {
        LocalGaussian g;
        g.log_scale = Vec3::Constant(std::log(config.init_local_scale));
        g.opacity_logit = logit(config.init_opacity);
        g.sh.assign(static_cast<std::size_t>(m.gaussians.sh_stride()), 0.0);
        g.parent_tri = static_cast<int>(f);
        m.gaussians.push_back(g);
    }

    AdjusterConfig ac = config.adjuster;
    if (config.ablation.no_triplane) {
        ac.encoding = EncodingMode::fourier;
    }
    const int driving = static_cast<int>(rig.expression_dim() + 3 * rig.joint_count());
    m.adjuster = MorphAdjuster(ac, rest_bounds(rig, 0.1), driving);
    m.adjuster.init(rng);
    return m;
}

void Model::refresh_neutral() {
    const MeshInstance rest = evaluate_rig(rig, RigParams::neutral(rig));
    neutral_frames = compute_frames(rest);
    last_valid_frames_ = neutral_frames;
}

std::vector<Splat2D> Model::project(const RigParams &params, const Camera &camera, FrameTape &t) {
    t = FrameTape{};
    t.camera = camera.with_object_pose(params.head_pose);

    if (use_lbs) {
        RigParams unposed = params;
        unposed.head_pose = RigidTransform{};
        t.frames = compute_frames(evaluate_rig(rig, unposed), last_valid_frames_);
        last_valid_frames_ = t.frames;
    } else {
        require_size(params.psi.size(), rig.expression_dim(), "psi");
        require_size(params.theta.size(), 3 * rig.joint_count(), "theta");
        t.frames = neutral_frames;
    }
    gaussians.validate(t.frames.size());

    const std::size_t n = gaussians.size();
    const int threads = render_options.threads;
    t.coarse.resize(n);
    t.deltas.assign(n, DeformDelta::Zero());
    t.deformed = adjuster_in_use();

    std::vector<ActivatedGaussian> activated(n);
    parallel_for(n, threads, [&](std::size_t i) {
        activated[i] = activate_params(gaussians, i);
        t.coarse[i] = bind_to_global(activated[i], t.frames[gaussians.parent_tri[i]]);
    });

    if (t.deformed && n > 0) {
        if (query_positions.size() != n) {
            update_query_positions();
        }
        t.neutral_positions = query_positions;
        const RowMatrix features = adjuster.encode_positions(t.neutral_positions);
        t.basis = adjuster.predict_basis(features, &t.basis_cache);
        t.latent = adjuster.encode_driving(params.psi, params.theta, &t.latent_cache);
        parallel_for(n, threads, [&](std::size_t i) { t.deltas[i] = adjuster.basis_of(t.basis, i) * t.latent; });
    }

    const double min_scale = adjuster.config().min_scale;
    const Vec3 eye = t.camera.center();
    const int degree = gaussians.sh_degree();
    t.refined.resize(n);
    std::vector<std::optional<Splat2D>> projected(n);
    parallel_for(n, threads, [&](std::size_t i) {
        GlobalGaussian g = apply_delta(t.coarse[i], t.deltas[i], min_scale);
        g.color = sh_to_color(gaussians.sh_of(i), degree, view_direction(g.mean, eye).unit);
        t.refined[i] = g;
        projected[i] = project_gaussian(g, t.camera, static_cast<int>(i));
    });

    std::vector<Splat2D> splats;
    splats.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (projected[i]) {
            splats.push_back(*projected[i]);
            t.splat_source.push_back(static_cast<int>(i));
        }
    }
    return splats;
}

void Model::update_query_positions() {
    query_positions.resize(gaussians.size());
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        query_positions[i] =
            bind_to_global(activate_params(gaussians, i), neutral_frames[gaussians.parent_tri[i]]).mean;
    }
}

Image Model::render(const RigParams &params, const Camera &camera, FrameTape *tape) {
    FrameTape local;
    FrameTape &t = tape != nullptr ? *tape : local;
    const std::vector<Splat2D> splats = project(params, camera, t);
    t.render = render_forward(splats, t.camera, background, render_options);
    return t.render.image;
}

void Model::backward(const FrameTape &t, const Image &d_image, ModelGradients &grads) const {
    const std::size_t n = gaussians.size();
    require_size(t.refined.size(), n, "frame tape");
    require_size(grads.position.size(), 3 * n, "position gradient");
    require_size(grads.sh.size(), gaussians.sh.size(), "sh gradient");

    const std::vector<SplatGradient> sg = render_backward(t.render.aux, d_image);
    const double min_scale = adjuster.config().min_scale;
    const Vec3 eye = t.camera.center();
    const int degree = gaussians.sh_degree();
    const std::size_t stride = static_cast<std::size_t>(gaussians.sh_stride());
    const double half_w = 0.5 * t.camera.width, half_h = 0.5 * t.camera.height;

    std::vector<DeformDelta> d_delta(n, DeformDelta::Zero());
    for (std::size_t k = 0; k < sg.size(); ++k) {
        const std::size_t i = static_cast<std::size_t>(t.splat_source[k]);
        const GlobalGaussian &g = t.refined[i];

        grads.visible[i] = 1;
        grads.screen_grad_norm[i] += std::hypot(sg[k].mean.x() * half_w, sg[k].mean.y() * half_h);

        GlobalGradient gg = splat_gradient_to_global(g, t.camera, sg[k]);
        const ViewDir dir = view_direction(g.mean, eye);
        const Vec3 d_dir = sh_to_color_backward(gaussians.sh_of(i), degree, dir.unit, gg.color,
                                                std::span<double>(grads.sh).subspan(i * stride, stride));
        if (dir.length > 0.0) {
            gg.mean += (Mat3::Identity() - dir.unit * dir.unit.transpose()) * d_dir / dir.length;
        }

        const DeformationGradient dg = apply_delta_backward(t.coarse[i], t.deltas[i], gg, min_scale);
        d_delta[i] = dg.delta;
        const ActivatedGradient ag = bind_to_global_backward(t.frames[gaussians.parent_tri[i]], dg.coarse);
        const RawGradient raw = activate_params_backward(gaussians, i, ag);
        for (int c = 0; c < 3; ++c) {
            grads.position[3 * i + c] += raw.position[c];
            grads.log_scale[3 * i + c] += raw.log_scale[c];
        }
        for (int c = 0; c < 4; ++c) {
            grads.rotation[4 * i + c] += raw.rotation[c];
        }
        grads.opacity_logit[i] += raw.opacity_logit;
    }

    if (!t.deformed || n == 0) {
        return;
    }
    // Chain the deltas into the basis network, the tri-plane and the latent
    // network. Neutral query positions are constants.
    const int d = adjuster.config().latent_dim;
    RowMatrix d_basis(static_cast<Eigen::Index>(n), 10 * d);
    Eigen::VectorXd d_latent = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (int r = 0; r < 10; ++r) {
            for (int c = 0; c < d; ++c) {
                d_basis(row, r * d + c) = d_delta[i][r] * t.latent[c];
            }
        }
        d_latent += adjuster.basis_of(t.basis, i).transpose() * d_delta[i];
    }
    const RowMatrix d_features = adjuster.basis_net.backward(t.basis_cache, d_basis, grads.basis_net);
    adjuster.encode_positions_backward(t.neutral_positions, d_features, grads.triplane);
    adjuster.latent_net.backward(t.latent_cache, d_latent.transpose(), grads.latent_net);
}

std::vector<ParamGroup> Model::param_groups(ModelGradients &grads) {
    const std::size_t stride = static_cast<std::size_t>(gaussians.sh_stride());
    std::vector<ParamGroup> groups{
        {"position", gaussians.position, grads.position, 3},
        {"rotation", gaussians.rotation, grads.rotation, 4},
        {"log_scale", gaussians.log_scale, grads.log_scale, 3},
        {"opacity_logit", gaussians.opacity_logit, grads.opacity_logit, 1},
        {"sh", gaussians.sh, grads.sh, stride},
    };
    if (!adjuster.triplane.params.empty()) {
        groups.push_back({"triplane", adjuster.triplane.params, grads.triplane, 0});
    }
    groups.push_back({"basis_net", adjuster.basis_net.params, grads.basis_net, 0});
    groups.push_back({"latent_net", adjuster.latent_net.params, grads.latent_net, 0});
    for (const ParamGroup &g : groups) {
        require_size(g.grads.size(), g.params.size(), g.name.c_str());
    }
    return groups;
}

FrameLoss frame_loss(Model &model, const RigParams &params, const Camera &camera, const Image &target,
                     const LossWeights &weights, const PerceptualLoss *perceptual, ModelGradients *grads) {
    FrameTape tape;
    FrameLoss out;
    out.render = model.render(params, camera, grads != nullptr ? &tape : nullptr);
    LossResult loss = total_loss(out.render, target, model.gaussians, weights, perceptual);
    out.terms = loss.terms;
    if (grads != nullptr) {
        model.backward(tape, loss.d_render, *grads);
        for (std::size_t k = 0; k < loss.d_position.size(); ++k) {
            grads->position[k] += loss.d_position[k];
            grads->log_scale[k] += loss.d_log_scale[k];
        }
    }
    return out;
}

} // namespace rigsplat
