#include "rigsplat/checkpoint.hpp"
#include "rigsplat/config.hpp"
#include "rigsplat/gradcheck.hpp"
#include "rigsplat/synthetic.hpp"
#include "rigsplat/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>

using namespace rigsplat;

namespace {

ToyScene small_scene(std::uint64_t seed) {
    ToySceneOptions o;
    o.seed = seed;
    o.rig = {60, 3, 2, 0.15};
    o.gaussians = 24;
    o.cameras = 4;
    o.train_settings = 2;
    o.heldout_settings = 1;
    o.size = 24;
    o.focal = 34.0;
    return make_toy_scene(o);
}

TrainConfig small_config() {
    TrainConfig c;
    c.seed = 3;
    c.total_iters = 200;
    c.adjuster.latent_dim = 4;
    c.adjuster.resolutions = {4, 8};
    c.adjuster.channels = 2;
    c.adjuster.basis_hidden = 8;
    c.adjuster.latent_hidden = 8;
    c.adjuster_start_iter = 20;
    c.densify_start_iter = 10;
    c.densify_stride = 10;
    c.densify_end_iter = 60;
    c.opacity_reset_stride = 30;
    return c;
}

std::size_t hash_values(std::span<const double> v) {
    std::size_t h = v.size();
    for (double x : v) {
        h ^= std::hash<double>{}(x) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

std::size_t adjuster_hash(const Model &m) {
    return hash_values(m.adjuster.triplane.params) ^ (hash_values(m.adjuster.basis_net.params) * 31) ^
           (hash_values(m.adjuster.latent_net.params) * 131);
}

std::size_t gaussian_hash(const Model &m) {
    const GaussianSet &g = m.gaussians;
    return hash_values(g.position) ^ (hash_values(g.rotation) * 3) ^ (hash_values(g.log_scale) * 7) ^
           (hash_values(g.opacity_logit) * 11) ^ (hash_values(g.sh) * 13);
}

} // namespace

TEST(Schedule, DensifyEventsUnderDefaults) {
    const TrainConfig c;
    std::vector<long> events;
    for (long t = 0; t <= c.total_iters; ++t) {
        if (densify_event(c, t)) {
            events.push_back(t);
        }
    }
    ASSERT_EQ(events.size(), 596u);
    for (std::size_t i = 0; i < events.size(); ++i) {
        EXPECT_EQ(events[i], 500 + 100 * static_cast<long>(i));
    }
}

TEST(Schedule, OpacityResetEventsUnderDefaults) {
    const TrainConfig c;
    std::vector<long> events;
    for (long t = 0; t <= c.total_iters; ++t) {
        if (opacity_reset_event(c, t)) {
            events.push_back(t);
        }
    }
    ASSERT_EQ(events.size(), 20u);
    EXPECT_EQ(events.front(), 3000);
    EXPECT_EQ(events.back(), 60000);
}

TEST(Schedule, AdjusterPhase) {
    TrainConfig c;
    EXPECT_FALSE(adjuster_trains(c, 0));
    EXPECT_FALSE(adjuster_trains(c, 4999));
    EXPECT_TRUE(adjuster_trains(c, 5000));
    c.ablation.no_init = true;
    EXPECT_TRUE(adjuster_trains(c, 0));
    c.ablation.no_adjuster = true;
    EXPECT_FALSE(adjuster_trains(c, 100000));
}

TEST(Config, Defaults) {
    const TrainConfig c;
    EXPECT_EQ(c.loss.lambda_dssim, 0.2);
    EXPECT_EQ(c.loss.lambda_perceptual, 0.02);
    EXPECT_EQ(c.loss.lambda_position, 0.01);
    EXPECT_EQ(c.loss.lambda_scaling, 1.0);
    EXPECT_EQ(c.loss.eps_position, 1.0);
    EXPECT_EQ(c.loss.eps_scaling, 0.6);
    EXPECT_EQ(c.lr_position, 5e-3);
    EXPECT_EQ(c.lr_scaling, 5e-3);
    EXPECT_EQ(c.lr_position_final_fraction, 0.01);
    EXPECT_EQ(c.lr_position_decay_end, 60000);
    EXPECT_EQ(c.lr_mlp, 1e-4);
    EXPECT_EQ(c.lr_triplane, 5e-3);
    EXPECT_EQ(c.adam_beta1, 0.9);
    EXPECT_EQ(c.adam_beta2, 0.999);
    EXPECT_EQ(c.adjuster_start_iter, 5000);
    EXPECT_EQ(c.densify_stride, 100);
    EXPECT_EQ(c.opacity_reset_stride, 3000);
    EXPECT_EQ(c.total_iters, 120000);
    EXPECT_EQ(c.adjuster.latent_dim, 32);
    EXPECT_EQ(c.adjuster.resolutions, (std::vector<int>{64, 128, 256}));
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, JsonRoundTripAndUnknownKey) {
    TrainConfig c = small_config();
    c.ablation.no_triplane = true;
    c.adjuster.encoding = EncodingMode::fourier;
    c.loss.lambda_dssim = 0.3;
    c.render.gaussian_cutoff = false;
    const std::string text = config_to_json(c);
    const TrainConfig back = config_from_json(text);
    EXPECT_EQ(config_to_json(back), text);
    EXPECT_EQ(back.adjuster.resolutions, c.adjuster.resolutions);
    EXPECT_TRUE(back.ablation.no_triplane);
    EXPECT_THROW(config_from_json(R"({"no_such_key": 1})"), LoadError);
    EXPECT_EQ(config_from_json("{}").lr_position, 5e-3);
}

TEST(Config, ValidationRejectsBadWindows) {
    TrainConfig c;
    c.densify_stride = 0;
    EXPECT_ANY_THROW(c.validate());
    c = TrainConfig{};
    c.densify_start_iter = 70000;
    EXPECT_ANY_THROW(c.validate());
    c = TrainConfig{};
    c.loss.lambda_scaling = -1.0;
    EXPECT_ANY_THROW(c.validate());
}

TEST(Trainer, AdjusterFrozenUntilStartIteration) {
    const ToyScene scene = small_scene(1);
    const TrainConfig c = small_config();
    Trainer t(c, scene.train);
    const std::size_t initial = adjuster_hash(t.model());
    t.run(c.adjuster_start_iter);
    EXPECT_EQ(adjuster_hash(t.model()), initial);
    t.run(c.adjuster_start_iter + 1);
    EXPECT_NE(adjuster_hash(t.model()), initial);
    EXPECT_EQ(t.events().adjuster_first, c.adjuster_start_iter + 1);
}

TEST(Trainer, EventsFireOnSchedule) {
    const ToyScene scene = small_scene(2);
    const TrainConfig c = small_config();
    Trainer t(c, scene.train);
    t.run(100);
    EXPECT_EQ(t.events().densify, (std::vector<long>{10, 20, 30, 40, 50, 60}));
    EXPECT_EQ(t.events().opacity_reset, (std::vector<long>{30, 60}));
}

TEST(Trainer, NoAdjusterTouchesOnlyGaussians) {
    const ToyScene scene = small_scene(3);
    TrainConfig c = small_config();
    c.ablation.no_adjuster = true;
    c.densify_start_iter = 1000;
    c.densify_end_iter = 1000;
    c.opacity_reset_stride = 1000;
    Trainer t(c, scene.train);
    const std::size_t adj = adjuster_hash(t.model());
    const std::size_t gauss = gaussian_hash(t.model());
    const std::vector<int> parents = t.model().gaussians.parent_tri;
    t.run(50);
    EXPECT_EQ(adjuster_hash(t.model()), adj);
    EXPECT_NE(gaussian_hash(t.model()), gauss);
    EXPECT_EQ(t.model().gaussians.parent_tri, parents);
    EXPECT_EQ(t.events().adjuster_first, -1);
    EXPECT_EQ(t.optim().groups.count("basis_net"), 0u);
    EXPECT_EQ(t.optim().groups.count("triplane"), 0u);
}

TEST(Trainer, LossNonNegativeAndDecreasingInBlocks) {
    const ToyScene scene = small_scene(4);
    TrainConfig c = small_config();
    c.adjuster_start_iter = 100000;
    c.densify_start_iter = 100;
    c.densify_stride = 100;
    c.densify_end_iter = 1000;
    c.opacity_reset_stride = 3000;
    c.densify.grad_threshold = 2e-3;
    Trainer t(c, scene.train);
    std::vector<double> block_means;
    double sum = 0.0;
    t.run(1500, [&](const LossRecord &r) {
        EXPECT_GE(r.terms.total, 0.0);
        sum += r.terms.total;
        if (r.iteration % 500 == 0) {
            block_means.push_back(sum / 500.0);
            sum = 0.0;
        }
    });
    ASSERT_EQ(block_means.size(), 3u);
    EXPECT_LT(block_means[1], block_means[0]);
    EXPECT_LT(block_means[2], block_means[1]);
}

TEST(Trainer, NonFiniteLossAbortsWithDump) {
    ToyScene scene = small_scene(5);
    for (DatasetFrame &f : scene.train.frames) {
        f.image.data[7] = std::numeric_limits<double>::quiet_NaN();
    }
    const auto dump = std::filesystem::temp_directory_path() / "rigsplat_nan_dump.ckpt";
    std::filesystem::remove(dump);
    Trainer t(small_config(), scene.train);
    t.set_nan_dump_path(dump.string());
    EXPECT_THROW(t.step(), NumericError);
    ASSERT_TRUE(std::filesystem::exists(dump));
    EXPECT_EQ(load_checkpoint(dump.string()).iteration, 0);
    std::filesystem::remove(dump);
}

TEST(Trainer, IdenticalRunsGiveIdenticalCheckpoints) {
    const ToyScene scene = small_scene(6);
    const TrainConfig c = small_config();
    Trainer a(c, scene.train), b(c, scene.train);
    a.run(80);
    b.run(80);
    EXPECT_EQ(serialize_checkpoint(a.checkpoint()), serialize_checkpoint(b.checkpoint()));
}

TEST(Trainer, ResumeFromCheckpointMatchesUninterruptedRun) {
    const ToyScene scene = small_scene(7);
    const TrainConfig c = small_config();
    Trainer straight(c, scene.train);
    straight.run(70);
    Trainer first(c, scene.train);
    first.run(35);
    Trainer resumed(deserialize_checkpoint(serialize_checkpoint(first.checkpoint())), scene.train);
    resumed.run(70);
    EXPECT_EQ(serialize_checkpoint(resumed.checkpoint()), serialize_checkpoint(straight.checkpoint()));
}

TEST(GradCheck, FullPipelineMatchesFiniteDifferences) {
    for (const GradCheckResult &r : run_gradcheck("full", 0)) {
        EXPECT_TRUE(r.passed()) << r.name << " rel err " << r.max_rel_error;
        EXPECT_LE(r.max_rel_error, 1e-4) << r.name;
    }
}
