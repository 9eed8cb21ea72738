#pragma once

#include "rigsplat/checkpoint.hpp"
#include "rigsplat/config.hpp"
#include "rigsplat/dataset.hpp"
#include "rigsplat/losses.hpp"
#include "rigsplat/model.hpp"
#include "rigsplat/optim.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace rigsplat {

// Iteration numbers below count completed optimizer steps: step k (1-based)
// finishes iteration k, and events for iteration k fire right after it.

/// Densify and prune after iteration t.
bool densify_event(const TrainConfig &config, long t);
/// Opacity reset after iteration t (only inside the densification window).
bool opacity_reset_event(const TrainConfig &config, long t);
/// First iteration count at which the adjuster trains (0 under no_init).
long adjuster_start(const TrainConfig &config);
/// True when the step that follows `completed` iterations updates the adjuster.
bool adjuster_trains(const TrainConfig &config, long completed);

struct LossRecord {
    long iteration = 0;   ///< 1-based step number
    LossTerms terms;
    double lr_position = 0.0;
    std::size_t gaussians = 0;
};

/// Append-only CSV: iter,l1,dssim,position,scaling,total,lr (17 significant digits).
void write_loss_csv(const std::string &path, const std::vector<LossRecord> &history);

class Trainer {
public:
    Trainer(const TrainConfig &config, const Dataset &data, const PerceptualLoss *perceptual = nullptr);
    /// Resumes from a checkpoint; the dataset must match its rig.
    Trainer(Checkpoint checkpoint, const Dataset &data, const PerceptualLoss *perceptual = nullptr);

    /// On a non-finite loss the pre-step state is saved here before throwing NumericError.
    void set_nan_dump_path(std::string path) { nan_dump_path_ = std::move(path); }

    const LossRecord &step();
    /// Steps until `iteration() == until`.
    void run(long until, const std::function<void(const LossRecord &)> &on_step = {});

    long iteration() const { return iteration_; }
    const TrainConfig &config() const { return config_; }
    Model &model() { return model_; }
    const Model &model() const { return model_; }
    const OptimState &optim() const { return optim_; }
    const DensifyStats &stats() const { return stats_; }
    const std::vector<LossRecord> &history() const { return history_; }
    double scene_extent() const { return scene_extent_; }

    /// Frame used by the step that follows `completed` iterations.
    std::size_t frame_for(long completed) const;

    Checkpoint checkpoint() const;

    struct Events {
        std::vector<long> densify;
        std::vector<long> opacity_reset;
        long adjuster_first = -1;   ///< first step number that updated the adjuster
    };
    const Events &events() const { return events_; }

private:
    void init_common();
    void optimizer_step(ModelGradients &grads, bool train_adjuster);
    void densify();
    void remap_gaussian_groups(const std::vector<int> &source, const std::vector<unsigned char> &is_new);

    TrainConfig config_;
    const Dataset *data_;
    const PerceptualLoss *perceptual_;
    Model model_;
    OptimState optim_;
    DensifyStats stats_;
    std::mt19937_64 rng_;
    long iteration_ = 0;
    double scene_extent_ = 1.0;
    std::vector<LossRecord> history_;
    Events events_;
    std::string nan_dump_path_;
};

} // namespace rigsplat
