#include "rigsplat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace rigsplat {

bool densify_event(const TrainConfig &c, long t) {
    return t >= c.densify_start_iter && t <= c.densify_end_iter && (t - c.densify_start_iter) % c.densify_stride == 0;
}

bool opacity_reset_event(const TrainConfig &c, long t) {
    return t > 0 && t <= c.densify_end_iter && t % c.opacity_reset_stride == 0;
}

long adjuster_start(const TrainConfig &c) { return c.ablation.no_init ? 0 : c.adjuster_start_iter; }

bool adjuster_trains(const TrainConfig &c, long completed) {
    return !c.ablation.no_adjuster && completed >= adjuster_start(c);
}

void write_loss_csv(const std::string &path, const std::vector<LossRecord> &history) {
    std::ofstream out(path);
    if (!out) {
        throw LoadError("cannot write " + path);
    }
    out << "iter,l1,dssim,position,scaling,total,lr\n";
    char buf[512];
    for (const LossRecord &r : history) {
        std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.terms.l1,
                      r.terms.dssim, r.terms.position, r.terms.scaling, r.terms.total, r.lr_position);
        out << buf;
    }
}

Trainer::Trainer(const TrainConfig &config, const Dataset &data, const PerceptualLoss *perceptual)
    : config_(config), data_(&data), perceptual_(perceptual), rng_(config.seed) {
    config_.validate();
    data.validate();
    if (data.frames.empty()) {
        throw ConsistencyError("training needs at least one frame");
    }
    model_ = Model::create(data.rig, config_, data.background, rng_);
    optim_.beta1 = config_.adam_beta1;
    optim_.beta2 = config_.adam_beta2;
    optim_.eps = config_.adam_eps;
    stats_.reset(model_.gaussians.size());
    init_common();
}

Trainer::Trainer(Checkpoint ck, const Dataset &data, const PerceptualLoss *perceptual)
    : config_(std::move(ck.config)), data_(&data), perceptual_(perceptual), model_(std::move(ck.model)),
      optim_(std::move(ck.optim)), stats_(std::move(ck.stats)), iteration_(ck.iteration) {
    data.validate();
    if (data.rig.face_count() != model_.rig.face_count() || data.rig.vertex_count() != model_.rig.vertex_count()) {
        throw ConsistencyError("dataset rig does not match the checkpoint rig");
    }
    std::istringstream rs(ck.rng_state);
    rs >> rng_;
    if (!rs) {
        throw LoadError("checkpoint: unreadable RNG state");
    }
    init_common();
}

void Trainer::init_common() {
    if (config_.scene_extent > 0.0) {
        scene_extent_ = config_.scene_extent;
        return;
    }
    // Radius of the camera centers around their mean, in rig space.
    std::vector<Vec3> centers;
    for (const DatasetFrame &f : data_->frames) {
        centers.push_back(f.record.camera.with_object_pose(f.record.params.head_pose).center());
    }
    Vec3 mean = Vec3::Zero();
    for (const Vec3 &c : centers) {
        mean += c;
    }
    mean /= static_cast<double>(centers.size());
    double radius = 0.0;
    for (const Vec3 &c : centers) {
        radius = std::max(radius, (c - mean).norm());
    }
    scene_extent_ = 1.1 * (radius > 0.0 ? radius : centers.front().norm());
}

std::size_t Trainer::frame_for(long completed) const {
    const std::size_t n = data_->frames.size();
    const auto epoch = static_cast<std::uint64_t>(completed) / n;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(config_.seed ^ (0x9E3779B97F4A7C15ULL * (epoch + 1)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    return order[static_cast<std::size_t>(completed) % n];
}

const LossRecord &Trainer::step() {
    const bool train_adjuster = adjuster_trains(config_, iteration_);
    model_.adjuster_active = train_adjuster;
    model_.update_query_positions();

    const DatasetFrame &frame = data_->frames[frame_for(iteration_)];
    RigParams params = frame.record.params;
    if (config_.init_zero_psi && !train_adjuster) {
        std::fill(params.psi.begin(), params.psi.end(), 0.0);
    }

    ModelGradients grads(model_);
    const FrameLoss fl = frame_loss(model_, params, frame.record.camera, frame.image, config_.loss,
                                    train_adjuster ? perceptual_ : nullptr, &grads);
    if (!std::isfinite(fl.terms.total)) {
        std::string where;
        if (!nan_dump_path_.empty()) {
            save_checkpoint(nan_dump_path_, checkpoint());
            where = "; state dumped to " + nan_dump_path_;
        }
        throw NumericError("non-finite loss at iteration " + std::to_string(iteration_ + 1) + where);
    }

    LossRecord rec;
    rec.iteration = iteration_ + 1;
    rec.terms = fl.terms;
    rec.lr_position =
        position_lr(iteration_, config_.lr_position, config_.lr_position_final_fraction, config_.lr_position_decay_end);

    if (iteration_ + 1 <= config_.densify_end_iter) {
        for (std::size_t i = 0; i < grads.visible.size(); ++i) {
            if (grads.visible[i] != 0) {
                stats_.accumulate(i, grads.screen_grad_norm[i]);
            }
        }
    }

    optimizer_step(grads, train_adjuster);
    if (train_adjuster && events_.adjuster_first < 0) {
        events_.adjuster_first = iteration_ + 1;
    }
    ++iteration_;

    if (densify_event(config_, iteration_)) {
        densify();
        events_.densify.push_back(iteration_);
    }
    if (opacity_reset_event(config_, iteration_)) {
        reset_opacity(model_.gaussians, config_.densify.opacity_reset_ceiling);
        reset_group(optim_, "opacity_logit");
        events_.opacity_reset.push_back(iteration_);
    }
    // Keep the model coherent at rest so a saved checkpoint renders identically.
    model_.update_query_positions();
    rec.gaussians = model_.gaussians.size();
    history_.push_back(rec);
    return history_.back();
}

void Trainer::run(long until, const std::function<void(const LossRecord &)> &on_step) {
    while (iteration_ < until) {
        const LossRecord &r = step();
        if (on_step) {
            on_step(r);
        }
    }
}

void Trainer::optimizer_step(ModelGradients &grads, bool train_adjuster) {
    const double lr_pos =
        position_lr(iteration_, config_.lr_position, config_.lr_position_final_fraction, config_.lr_position_decay_end);
    for (ParamGroup &g : model_.param_groups(grads)) {
        if (g.name == "position") {
            adam_step(optim_, g.name, g.params, g.grads, lr_pos);
        } else if (g.name == "log_scale") {
            adam_step(optim_, g.name, g.params, g.grads, config_.lr_scaling);
        } else if (g.name == "rotation") {
            adam_step(optim_, g.name, g.params, g.grads, config_.lr_rotation);
        } else if (g.name == "opacity_logit") {
            adam_step(optim_, g.name, g.params, g.grads, config_.lr_opacity);
        } else if (g.name == "sh") {
            const std::size_t stride = g.row_width, n = model_.gaussians.size();
            if (stride == 3) {
                adam_step(optim_, "sh_dc", g.params, g.grads, config_.lr_sh);
                continue;
            }
            // The DC band and the higher bands use different rates.
            std::vector<double> dc(3 * n), dc_g(3 * n), rest((stride - 3) * n), rest_g((stride - 3) * n);
            for (std::size_t i = 0; i < n; ++i) {
                std::copy_n(&g.params[i * stride], 3, &dc[3 * i]);
                std::copy_n(&g.grads[i * stride], 3, &dc_g[3 * i]);
                std::copy_n(&g.params[i * stride + 3], stride - 3, &rest[(stride - 3) * i]);
                std::copy_n(&g.grads[i * stride + 3], stride - 3, &rest_g[(stride - 3) * i]);
            }
            adam_step(optim_, "sh_dc", dc, dc_g, config_.lr_sh);
            adam_step(optim_, "sh_rest", rest, rest_g, config_.lr_sh / config_.lr_sh_rest_divisor);
            for (std::size_t i = 0; i < n; ++i) {
                std::copy_n(&dc[3 * i], 3, &g.params[i * stride]);
                std::copy_n(&rest[(stride - 3) * i], stride - 3, &g.params[i * stride + 3]);
            }
        } else if (train_adjuster) {
            const double lr = g.name == "triplane" ? config_.lr_triplane : config_.lr_mlp;
            adam_step(optim_, g.name, g.params, g.grads, lr);
        }
    }
}

void Trainer::remap_gaussian_groups(const std::vector<int> &source, const std::vector<unsigned char> &is_new) {
    const std::size_t stride = static_cast<std::size_t>(model_.gaussians.sh_stride());
    remap_group(optim_, "position", source, is_new, 3);
    remap_group(optim_, "rotation", source, is_new, 4);
    remap_group(optim_, "log_scale", source, is_new, 3);
    remap_group(optim_, "opacity_logit", source, is_new, 1);
    remap_group(optim_, "sh_dc", source, is_new, 3);
    if (stride > 3) {
        remap_group(optim_, "sh_rest", source, is_new, stride - 3);
    }
}

void Trainer::densify() {
    DensifyResult r =
        densify_and_prune(model_.gaussians, stats_, config_.densify, model_.neutral_frames, scene_extent_, rng_);
    remap_gaussian_groups(r.source, r.is_new);
    model_.gaussians = std::move(r.gaussians);
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint ck;
    ck.config = config_;
    ck.model = model_;
    ck.optim = optim_;
    ck.stats = stats_;
    ck.iteration = iteration_;
    std::ostringstream rs;
    rs << rng_;
    ck.rng_state = rs.str();
    return ck;
}

} // namespace rigsplat
