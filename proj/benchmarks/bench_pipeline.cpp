#include "rigsplat/config.hpp"
#include "rigsplat/losses.hpp"
#include "rigsplat/model.hpp"
#include "rigsplat/rasterizer.hpp"
#include "rigsplat/synthetic.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace rigsplat;

namespace {

std::vector<Splat2D> random_splats(int count, int size) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Splat2D> out;
    for (int i = 0; i < count; ++i) {
        Splat2D s;
        s.mean = Vec2(u(rng) * size, u(rng) * size);
        const double sigma = 0.5 + 3.0 * u(rng);
        s.cov = Mat2::Identity() * (sigma * sigma + kLowPassFloor);
        s.conic = s.cov.inverse();
        s.depth = 1.0 + u(rng);
        s.color = Vec3(u(rng), u(rng), u(rng));
        s.opacity = 0.1 + 0.8 * u(rng);
        s.source_id = i;
        out.push_back(s);
    }
    return out;
}

Camera square_camera(int size) {
    Camera cam;
    cam.fx = cam.fy = 1.4 * size;
    cam.cx = cam.cy = 0.5 * (size - 1);
    cam.width = cam.height = size;
    return cam;
}

void BM_RenderForward(benchmark::State &state) {
    const int size = 64;
    const auto splats = random_splats(static_cast<int>(state.range(0)), size);
    const Camera cam = square_camera(size);
    for (auto _ : state) {
        benchmark::DoNotOptimize(render_forward(splats, cam, Vec3::Zero()));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RenderForward)->Arg(64)->Arg(512)->Arg(4096);

void BM_RenderBackward(benchmark::State &state) {
    const int size = 64;
    const auto splats = random_splats(static_cast<int>(state.range(0)), size);
    const Camera cam = square_camera(size);
    const RenderResult r = render_forward(splats, cam, Vec3::Zero());
    const Image up(size, size, 0.01);
    for (auto _ : state) {
        benchmark::DoNotOptimize(render_backward(r.aux, up));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RenderBackward)->Arg(64)->Arg(512)->Arg(4096);

void BM_BruteForce(benchmark::State &state) {
    const auto splats = random_splats(static_cast<int>(state.range(0)), 64);
    const Camera cam = square_camera(64);
    for (auto _ : state) {
        benchmark::DoNotOptimize(brute_force_render(splats, cam, Vec3::Zero()));
    }
}
BENCHMARK(BM_BruteForce)->Arg(64)->Arg(512);

void BM_Ssim(benchmark::State &state) {
    const int size = static_cast<int>(state.range(0));
    Image a(size, size, 0.3), b(size, size, 0.6);
    Image grad(size, size);
    for (auto _ : state) {
        benchmark::DoNotOptimize(ssim(a, b, &grad));
    }
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(256);

// One full training-style step: rig, binding, adjuster, render and backward.
void BM_ModelStep(benchmark::State &state) {
    const ParamRig rig = make_toy_rig(1);
    TrainConfig config;
    std::mt19937_64 rng(2);
    Model model = Model::create(rig, config, Vec3::Zero(), rng);
    model.adjuster_active = state.range(0) != 0;
    model.update_query_positions();
    const Camera cam = orbit_cameras(1, 4.0, 90.0, 64, 64)[0];
    const RigParams params = random_param_sequence(rig, 1, 3)[0];
    const Image target(64, 64, 0.5);
    for (auto _ : state) {
        ModelGradients grads(model);
        benchmark::DoNotOptimize(frame_loss(model, params, cam, target, config.loss, nullptr, &grads));
    }
}
BENCHMARK(BM_ModelStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

} // namespace
BENCHMARK_MAIN();
