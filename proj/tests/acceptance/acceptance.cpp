// Acceptance suite: one test per criterion, summarized as PASS/FAIL lines.

#include "rigsplat/config.hpp"
#include "rigsplat/frame.hpp"
#include "rigsplat/gaussian.hpp"
#include "rigsplat/gradcheck.hpp"
#include "rigsplat/math.hpp"
#include "rigsplat/metrics.hpp"
#include "rigsplat/optim.hpp"
#include "rigsplat/rasterizer.hpp"
#include "rigsplat/synthetic.hpp"
#include "rigsplat/trainer.hpp"

#include <json.hpp>

#include <gtest/gtest.h>

#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace rigsplat;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

// Ablation scene: a non-rig deformation quadratic in the expression
// coefficients, which no blendshape combination can represent.
constexpr double kFineAmplitude = 0.08;
constexpr long kAblationAdjusterStart = 1500;
constexpr long kAblationIters = 5000;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Measured values reported next to each verdict.
std::map<std::string, std::string> &notes() {
    static std::map<std::string, std::string> n;
    return n;
}

void note(const std::string &test, const std::string &text) { notes()[test] = text; }

std::string fmt(const char *f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

struct CliRun {
    int status = -1;
    std::string text;
};

CliRun run_cli(const std::string &args) {
    CliRun r;
    FILE *pipe = popen((std::string(RIGSPLAT_CLI) + " " + args + " 2>&1").c_str(), "r");
    if (pipe == nullptr) {
        return r;
    }
    char buf[4096];
    while (std::fgets(buf, sizeof buf, pipe) != nullptr) {
        r.text += buf;
    }
    const int status = pclose(pipe);
    r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ImageMetrics mean_metrics(Model &model, const Dataset &data) {
    ImageMetrics sum;
    for (const DatasetFrame &f : data.frames) {
        const ImageMetrics m = psnr_ssim(model.render(f.record.params, f.record.camera), f.image);
        sum.psnr += m.psnr;
        sum.ssim += m.ssim;
    }
    const double n = static_cast<double>(data.frames.size());
    return {sum.psnr / n, sum.ssim / n};
}

double mean_total_loss(Model &model, const Dataset &data, const LossWeights &weights) {
    double sum = 0.0;
    for (const DatasetFrame &f : data.frames) {
        sum += frame_loss(model, f.record.params, f.record.camera, f.image, weights, nullptr, nullptr).terms.total;
    }
    return sum / static_cast<double>(data.frames.size());
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

} // namespace

TEST(Acceptance, C1_GradientSuite) {
    const auto t0 = Clock::now();
    const std::vector<GradCheckResult> results = run_gradcheck("full", 0);
    const double elapsed = seconds_since(t0);
    std::set<std::string> classes;
    double worst = 0.0;
    for (const GradCheckResult &r : results) {
        EXPECT_TRUE(r.passed()) << r.name;
        EXPECT_LE(r.max_rel_error, 1e-4) << r.name;
        EXPECT_GT(r.checked, 0u) << r.name;
        classes.insert(r.name);
        worst = std::max(worst, r.max_rel_error);
    }
    for (const char *name : {"full/position", "full/rotation", "full/log_scale", "full/opacity_logit", "full/sh",
                             "full/triplane", "full/basis_net", "full/latent_net"}) {
        EXPECT_TRUE(classes.count(name)) << "missing parameter class " << name;
    }
    EXPECT_LT(elapsed, 60.0);
    note("C1_GradientSuite", fmt("worst rel err %.2e over %g classes, %.1f s", worst,
                                 static_cast<double>(classes.size()), elapsed));
}

TEST(Acceptance, C2_RasterizerOracle) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> count(1, 200);
    Camera cam;
    cam.fx = cam.fy = 70.0;
    cam.cx = cam.cy = 31.5;
    cam.width = cam.height = 64;
    double worst_exact = 0.0, worst_ratio = 0.0;
    for (int scene = 0; scene < 100; ++scene) {
        std::vector<Splat2D> splats;
        const int n = count(rng);
        double opacity_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            GlobalGaussian g;
            g.mean = Vec3(2.0 * u(rng) - 1.0, 2.0 * u(rng) - 1.0, 2.0 + 3.0 * u(rng));
            g.rotation = quat_normalize(Vec4(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5));
            g.scale = Vec3(0.01 + 0.15 * u(rng), 0.01 + 0.15 * u(rng), 0.01 + 0.15 * u(rng));
            g.opacity = 0.02 + 0.97 * u(rng);
            g.color = Vec3(u(rng), u(rng), u(rng));
            if (auto s = project_gaussian(g, cam, i)) {
                splats.push_back(*s);
                opacity_sum += s->opacity;
            }
        }
        const Vec3 bg(u(rng), u(rng), u(rng));
        RenderOptions off;
        off.gaussian_cutoff = false;
        const Image tiled = render_forward(splats, cam, bg, off).image;
        const Image brute = brute_force_render(splats, cam, bg, off);
        RenderOptions on;
        on.min_transmittance = 0.0;
        const Image cut = render_forward(splats, cam, bg, on).image;
        const Image exact = brute_force_render(splats, cam, bg, on);
        double d_exact = 0.0, d_cut = 0.0;
        for (std::size_t k = 0; k < tiled.data.size(); ++k) {
            d_exact = std::max(d_exact, std::abs(tiled.data[k] - brute.data[k]));
            d_cut = std::max(d_cut, std::abs(cut.data[k] - exact.data[k]));
        }
        const double bound = std::exp(-4.5) * opacity_sum;
        EXPECT_LE(d_exact, 1e-6) << "scene " << scene;
        EXPECT_LE(d_cut, bound) << "scene " << scene;
        worst_exact = std::max(worst_exact, d_exact);
        if (bound > 0.0) {
            worst_ratio = std::max(worst_ratio, d_cut / bound);
        }
    }
    note("C2_RasterizerOracle",
         fmt("max |tiled-brute| %.2e; max cutoff deviation %.3f of bound", worst_exact, worst_ratio));
}

TEST(Acceptance, C3_BindingEquivariance) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const Vec3 v0(u(rng), u(rng), u(rng)), v1(u(rng), u(rng), u(rng)), v2(u(rng), u(rng), u(rng));
        const Mat3 Q = quat_to_matrix(quat_normalize(Vec4(n(rng), n(rng), n(rng), n(rng))));
        const Vec3 t = 5.0 * Vec3(u(rng), u(rng), u(rng));
        const TriangleFrame f = triangle_frame(v0, v1, v2);
        const TriangleFrame g = triangle_frame(Q * v0 + t, Q * v1 + t, Q * v2 + t);
        ActivatedGaussian a;
        a.position = Vec3(u(rng), u(rng), u(rng));
        a.rotation = quat_normalize(Vec4(n(rng), n(rng), n(rng), n(rng)));
        a.scale = Vec3(0.05, 0.05, 0.05) + 0.5 * Vec3(u(rng), u(rng), u(rng)).cwiseAbs();
        const GlobalGaussian b1 = bind_to_global(a, f), b2 = bind_to_global(a, g);
        const double err = std::max({(g.rotation - Q * f.rotation).cwiseAbs().maxCoeff(),
                                     (g.centroid - (Q * f.centroid + t)).cwiseAbs().maxCoeff(),
                                     std::abs(g.scale - f.scale),
                                     (b2.mean - (Q * b1.mean + t)).cwiseAbs().maxCoeff(),
                                     (b2.scale - b1.scale).cwiseAbs().maxCoeff(),
                                     (quat_to_matrix(b2.rotation) - Q * quat_to_matrix(b1.rotation)).cwiseAbs().maxCoeff()});
        EXPECT_LE(err, 1e-9) << "trial " << trial;
        worst = std::max(worst, err);
    }
    note("C3_BindingEquivariance", fmt("max deviation %.2e over 1000 triangles", worst));
}

TEST(Acceptance, C4_SyntheticRecovery) {
    ToySceneOptions o;
    o.seed = 1;
    const ToyScene scene = make_toy_scene(o);
    ASSERT_EQ(scene.rig.expression_dim(), 4u);
    ASSERT_EQ(scene.rig.joint_count(), 2u);
    ASSERT_EQ(scene.train.frames.size(), 200u);
    ASSERT_EQ(scene.heldout.frames.size(), 200u);
    TrainConfig c;
    c.seed = 1;
    c.total_iters = 5000;
    // Desk-scale densification threshold for 64x64 images.
    c.densify.grad_threshold = 3e-3;
    const auto t0 = Clock::now();
    Trainer trainer(c, scene.train);
    trainer.run(c.total_iters);
    const double elapsed = seconds_since(t0);
    const ImageMetrics train = mean_metrics(trainer.model(), scene.train);
    const ImageMetrics held = mean_metrics(trainer.model(), scene.heldout);
    EXPECT_GE(train.psnr, 35.0);
    EXPECT_GE(held.psnr, 30.0);
    EXPECT_LT(elapsed, 1200.0);
    note("C4_SyntheticRecovery",
         fmt("faces %g; train PSNR %.2f dB, held-out PSNR %.2f dB, %.0f s", static_cast<double>(scene.rig.face_count()),
             train.psnr, held.psnr, elapsed));
}

TEST(Acceptance, C5_AblationDirection) {
    ToySceneOptions o;
    o.seed = 2;
    o.fine.amplitude = kFineAmplitude;
    const ToyScene scene = make_toy_scene(o);
    auto train_variant = [&](const std::function<void(TrainConfig &)> &edit) {
        TrainConfig c;
        c.seed = 2;
        c.densify.grad_threshold = 3e-3;
        c.adjuster_start_iter = kAblationAdjusterStart;
        c.total_iters = kAblationIters;
        edit(c);
        Trainer t(c, scene.train);
        t.run(c.total_iters);
        return mean_total_loss(t.model(), scene.train, c.loss);
    };
    const double full = train_variant([](TrainConfig &) {});
    const double fourier = train_variant([](TrainConfig &c) { c.ablation.no_triplane = true; });
    const double lbs_only = train_variant([](TrainConfig &c) { c.ablation.no_adjuster = true; });
    EXPECT_LT(full, fourier);
    EXPECT_LT(full, lbs_only);
    EXPECT_GT(lbs_only - full, 3.0 * (fourier - full));
    note("C5_AblationDirection",
         fmt("final loss full %.5f, fourier %.5f, no_adjuster %.5f", full, fourier, lbs_only));
}

TEST(Acceptance, C6_ScheduleWiring) {
    const TrainConfig c;
    EXPECT_EQ(position_lr(0, c.lr_position, c.lr_position_final_fraction, c.lr_position_decay_end), 5e-3);
    EXPECT_DOUBLE_EQ(position_lr(60000, c.lr_position, c.lr_position_final_fraction, c.lr_position_decay_end), 5e-5);
    std::vector<long> densify, reset;
    for (long t = 0; t <= c.total_iters; ++t) {
        if (densify_event(c, t)) {
            densify.push_back(t);
        }
        if (opacity_reset_event(c, t)) {
            reset.push_back(t);
        }
    }
    std::vector<long> expected_densify, expected_reset;
    for (long t = 500; t <= 60000; t += 100) {
        expected_densify.push_back(t);
    }
    for (long t = 3000; t <= 60000; t += 3000) {
        expected_reset.push_back(t);
    }
    EXPECT_EQ(densify, expected_densify);
    EXPECT_EQ(reset, expected_reset);

    // Run the default schedule on a small scene across the adjuster boundary.
    ToySceneOptions o;
    o.seed = 6;
    o.rig = {60, 3, 2, 0.15};
    o.gaussians = 16;
    o.cameras = 3;
    o.train_settings = 2;
    o.size = 20;
    o.focal = 28.0;
    const ToyScene scene = make_toy_scene(o);
    TrainConfig small;
    small.adjuster.resolutions = {8, 16};
    small.adjuster.latent_dim = 8;
    Trainer t(small, scene.train);
    const std::size_t initial = adjuster_hash(t.model());
    t.run(5000);
    EXPECT_EQ(adjuster_hash(t.model()), initial);
    EXPECT_EQ(t.events().adjuster_first, -1);
    t.run(5001);
    EXPECT_NE(adjuster_hash(t.model()), initial);
    EXPECT_EQ(t.events().adjuster_first, 5001);
    const std::vector<long> run_densify(t.events().densify.begin(), t.events().densify.end());
    EXPECT_EQ(run_densify.front(), 500);
    EXPECT_EQ(run_densify.size(), 46u);
    EXPECT_EQ(t.events().opacity_reset, (std::vector<long>{3000}));
    note("C6_ScheduleWiring", fmt("%g densify events, %g resets in window; adjuster first updated at step %g",
                                  static_cast<double>(densify.size()), static_cast<double>(reset.size()),
                                  static_cast<double>(t.events().adjuster_first)));
}

TEST(Acceptance, C7_LossConstantsInPrintConfig) {
    const CliRun r = run_cli("--print-config");
    ASSERT_EQ(r.status, 0) << r.text;
    const auto j = nlohmann::json::parse(r.text);
    EXPECT_EQ(j.at("lambda1_dssim").get<double>(), 0.2);
    EXPECT_EQ(j.at("lambda2_perceptual").get<double>(), 0.02);
    EXPECT_EQ(j.at("lambda3_position").get<double>(), 0.01);
    EXPECT_EQ(j.at("lambda4_scaling").get<double>(), 1.0);
    EXPECT_EQ(j.at("eps_position").get<double>(), 1.0);
    EXPECT_EQ(j.at("eps_scaling").get<double>(), 0.6);
    note("C7_LossConstantsInPrintConfig", "lambda1..4 = 0.2, 0.02, 0.01, 1; eps = 1, 0.6");
}

TEST(Acceptance, C8_Determinism) {
    const fs::path root = fs::temp_directory_path() / ("rigsplat_acceptance_" + std::to_string(getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "config.json") << R"({"seed": 11, "threads": 2, "adjuster_start_iter": 100,
  "densify_start_iter": 50, "densify_stride": 50, "densify_end_iter": 200, "opacity_reset_stride": 150,
  "latent_dim": 8, "triplane_resolutions": [8, 16]})";
    const CliRun synth = run_cli("synth --seed 8 --out " + (root / "data").string() +
                              " --gaussians 32 --cameras 4 --settings 2 --size 32");
    ASSERT_EQ(synth.status, 0) << synth.text;
    for (const char *name : {"a", "b"}) {
        const CliRun r = run_cli("train --config " + (root / "config.json").string() + " --data " +
                              (root / "data").string() + " --out " + (root / name).string() + " --iters 250");
        ASSERT_EQ(r.status, 0) << r.text;
    }
    const std::string ca = slurp(root / "a" / "checkpoint.bin"), cb = slurp(root / "b" / "checkpoint.bin");
    const std::string la = slurp(root / "a" / "loss.csv"), lb = slurp(root / "b" / "loss.csv");
    EXPECT_FALSE(ca.empty());
    EXPECT_EQ(ca, cb);
    EXPECT_EQ(la, lb);
    note("C8_Determinism", fmt("checkpoint %g bytes, loss log %g bytes identical", static_cast<double>(ca.size()),
                               static_cast<double>(la.size())));
    fs::remove_all(root);
}

namespace {

class Summary : public ::testing::EmptyTestEventListener {
    void OnTestEnd(const ::testing::TestInfo &info) override {
        const bool ok = info.result()->Passed();
        const std::string name = info.name();
        const auto it = notes().find(name);
        std::printf("%s criterion %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
                    it == notes().end() ? "" : ": ", it == notes().end() ? "" : it->second.c_str());
        std::fflush(stdout);
    }
};

} // namespace

int main(int argc, char **argv) {
    ::testing::InitGoogleTest(&argc, argv);
    ::testing::UnitTest::GetInstance()->listeners().Append(new Summary);
    return RUN_ALL_TESTS();
}
