#include "rigsplat/rasterizer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace rigsplat;

namespace {

Camera square_camera(int size, double focal = 50.0) {
    Camera cam;
    cam.fx = cam.fy = focal;
    cam.cx = cam.cy = 0.5 * (size - 1);
    cam.width = cam.height = size;
    return cam;
}

Splat2D make_splat(const Vec2 &mean, double sigma, double depth, const Vec3 &color, double opacity, int id) {
    Splat2D s;
    s.mean = mean;
    s.cov = Mat2::Identity() * sigma * sigma;
    s.conic = s.cov.inverse();
    s.depth = depth;
    s.color = color;
    s.opacity = opacity;
    s.source_id = id;
    return s;
}

std::vector<Splat2D> random_splats(std::mt19937_64 &rng, int count, int size) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Splat2D> out;
    for (int i = 0; i < count; ++i) {
        Splat2D s;
        s.mean = Vec2(u(rng) * (size + 8) - 4, u(rng) * (size + 8) - 4);
        const double a = 0.5 + 6.0 * u(rng), b = 0.5 + 6.0 * u(rng), th = 3.14159 * u(rng);
        Mat2 R;
        R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
        s.cov = R * Vec2(a * a, b * b).asDiagonal() * R.transpose() + Mat2::Identity() * kLowPassFloor;
        s.conic = s.cov.inverse();
        s.depth = 1.0 + 5.0 * u(rng);
        s.color = Vec3(u(rng), u(rng), u(rng));
        s.opacity = 0.05 + 0.9 * u(rng);
        s.source_id = i;
        out.push_back(s);
    }
    return out;
}

double max_diff(const Image &a, const Image &b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    }
    return m;
}

double scalar_loss(const Image &img, const Image &weights) {
    double s = 0.0;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        s += img.data[i] * weights.data[i];
    }
    return s;
}

RenderOptions no_cutoff() {
    RenderOptions o;
    o.gaussian_cutoff = false;
    return o;
}

} // namespace

TEST(Project, IsotropicOnAxis) {
    const Camera cam = square_camera(64, 80.0);
    GlobalGaussian g;
    g.mean = Vec3(0, 0, 4.0);
    g.scale = Vec3::Constant(0.1);
    const auto s = project_gaussian(g, cam);
    ASSERT_TRUE(s.has_value());
    const double expected = std::pow(80.0 * 0.1 / 4.0, 2) + kLowPassFloor;
    EXPECT_NEAR(s->cov(0, 0), expected, 1e-12);
    EXPECT_NEAR(s->cov(1, 1), expected, 1e-12);
    EXPECT_NEAR(s->cov(0, 1), 0.0, 1e-12);
    EXPECT_NEAR(s->mean.x(), cam.cx, 1e-12);
    EXPECT_EQ(s->depth, 4.0);
}

TEST(Project, DoublingDepthHalvesFootprint) {
    const Camera cam = square_camera(64, 80.0);
    GlobalGaussian g;
    g.scale = Vec3::Constant(0.2);
    g.mean = Vec3(0, 0, 2.0);
    const double near_var = project_gaussian(g, cam)->cov(0, 0) - kLowPassFloor;
    g.mean = Vec3(0, 0, 4.0);
    const double far_var = project_gaussian(g, cam)->cov(0, 0) - kLowPassFloor;
    EXPECT_NEAR(std::sqrt(far_var), 0.5 * std::sqrt(near_var), 1e-12);
}

TEST(Project, BehindNearPlaneIsCulled) {
    const Camera cam = square_camera(64);
    GlobalGaussian g;
    g.mean = Vec3(0, 0, 0.5 * cam.near_plane);
    EXPECT_FALSE(project_gaussian(g, cam).has_value());
    g.mean = Vec3(0, 0, -1.0);
    EXPECT_FALSE(project_gaussian(g, cam).has_value());
}

TEST(RenderForward, EmptySceneIsBackground) {
    const Camera cam = square_camera(20);
    const Vec3 bg(0.2, 0.4, 0.6);
    const RenderResult r = render_forward({}, cam, bg);
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 20; ++x) {
            EXPECT_EQ(r.image.pixel(x, y), bg);
        }
    }
}

TEST(RenderForward, OpaqueSplatAtPixelCenter) {
    const Camera cam = square_camera(16);
    const Vec3 color(0.9, 0.1, 0.3);
    const std::vector<Splat2D> splats = {make_splat(Vec2(5, 7), 1.0, 2.0, color, 1.0, 0)};
    const RenderResult r = render_forward(splats, cam, Vec3(1, 1, 1));
    EXPECT_EQ(r.image.pixel(5, 7), color);
}

TEST(RenderForward, TwoHalfTransparentLayers) {
    const Camera cam = square_camera(16);
    const Vec3 a(1, 0, 0), b(0, 1, 0), w(0, 0, 1);
    // Input order is back-to-front on purpose; the renderer sorts by depth.
    const std::vector<Splat2D> splats = {make_splat(Vec2(8, 8), 2.0, 3.0, b, 0.5, 0),
                                         make_splat(Vec2(8, 8), 2.0, 1.0, a, 0.5, 1)};
    const RenderResult r = render_forward(splats, cam, w);
    EXPECT_LE((r.image.pixel(8, 8) - (0.5 * a + 0.25 * b + 0.25 * w)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(RenderBackward, ZeroUpstreamGivesZeroGradients) {
    std::mt19937_64 rng(1);
    const auto splats = random_splats(rng, 10, 32);
    const Camera cam = square_camera(32);
    const RenderResult r = render_forward(splats, cam, Vec3(0.1, 0.2, 0.3));
    const auto grads = render_backward(r.aux, Image(32, 32));
    ASSERT_EQ(grads.size(), splats.size());
    for (const SplatGradient &g : grads) {
        EXPECT_EQ(g.mean, Vec2::Zero());
        EXPECT_EQ(g.cov, Mat2::Zero());
        EXPECT_EQ(g.color, Vec3::Zero());
        EXPECT_EQ(g.opacity, 0.0);
    }
}

TEST(RenderBackward, OccludedSplatGetsNoColorGradient) {
    const Camera cam = square_camera(1);
    const std::vector<Splat2D> splats = {make_splat(Vec2(0, 0), 1.0, 1.0, Vec3(1, 0, 0), 1.0, 0),
                                         make_splat(Vec2(0, 0), 1.0, 2.0, Vec3(0, 1, 0), 0.8, 1)};
    const RenderResult r = render_forward(splats, cam, Vec3::Zero(), no_cutoff());
    const auto grads = render_backward(r.aux, Image(1, 1, 1.0));
    EXPECT_EQ(grads[1].color, Vec3::Zero());
    EXPECT_NE(grads[0].color, Vec3::Zero());
}

TEST(RenderBackward, MatchesFiniteDifferences) {
    std::mt19937_64 rng(2);
    const int size = 16;
    auto splats = random_splats(rng, 5, size);
    const Camera cam = square_camera(size);
    const Vec3 bg(0.3, 0.3, 0.3);
    Image weights(size, size);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double &w : weights.data) {
        w = u(rng);
    }
    const RenderOptions opt = no_cutoff();
    const RenderResult r = render_forward(splats, cam, bg, opt);
    const auto grads = render_backward(r.aux, weights);

    auto loss = [&](const std::vector<Splat2D> &s) {
        std::vector<Splat2D> c = s;
        for (Splat2D &x : c) {
            x.conic = x.cov.inverse();
        }
        return scalar_loss(render_forward(c, cam, bg, opt).image, weights);
    };
    auto check = [&](double analytic, auto &&perturb) {
        const double h = 1e-6;
        auto p = splats, m = splats;
        perturb(p, h);
        perturb(m, -h);
        const double numeric = (loss(p) - loss(m)) / (2 * h);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        EXPECT_LE(std::abs(analytic - numeric) / denom, 1e-5) << analytic << " vs " << numeric;
    };
    for (std::size_t i = 0; i < splats.size(); ++i) {
        for (int k = 0; k < 2; ++k) {
            check(grads[i].mean[k], [&](auto &s, double h) { s[i].mean[k] += h; });
        }
        for (int k = 0; k < 3; ++k) {
            check(grads[i].color[k], [&](auto &s, double h) { s[i].color[k] += h; });
        }
        check(grads[i].opacity, [&](auto &s, double h) { s[i].opacity += h; });
        // Symmetric perturbation of the off-diagonal entry counts both slots.
        check(grads[i].cov(0, 0), [&](auto &s, double h) { s[i].cov(0, 0) += h; });
        check(grads[i].cov(1, 1), [&](auto &s, double h) { s[i].cov(1, 1) += h; });
        check(grads[i].cov(0, 1) + grads[i].cov(1, 0), [&](auto &s, double h) {
            s[i].cov(0, 1) += h;
            s[i].cov(1, 0) += h;
        });
    }
}

TEST(RenderBackward, StaleAuxIsAConsistencyError) {
    const Camera cam = square_camera(16);
    const RenderResult r = render_forward({}, cam, Vec3::Zero());
    EXPECT_THROW(render_backward(r.aux, Image(8, 16)), ConsistencyError);
    RenderAux broken = r.aux;
    broken.final_transmittance.pop_back();
    EXPECT_THROW(render_backward(broken, Image(16, 16)), ConsistencyError);
}

TEST(BruteForce, AgreesWithTiledWithoutCutoff) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const int size = 40;
        const auto splats = random_splats(rng, 60, size);
        const Camera cam = square_camera(size);
        const RenderOptions opt = no_cutoff();
        const Image tiled = render_forward(splats, cam, Vec3(0.5, 0.2, 0.1), opt).image;
        const Image brute = brute_force_render(splats, cam, Vec3(0.5, 0.2, 0.1), opt);
        EXPECT_LE(max_diff(tiled, brute), 1e-6);
    }
}

TEST(BruteForce, CutoffErrorIsBounded) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const int size = 40;
        const auto splats = random_splats(rng, 60, size);
        const Camera cam = square_camera(size);
        double opacity_sum = 0.0;
        for (const Splat2D &s : splats) {
            opacity_sum += s.opacity;
        }
        RenderOptions opt;
        opt.min_transmittance = 0.0;
        const Image tiled = render_forward(splats, cam, Vec3::Zero(), opt).image;
        const Image brute = brute_force_render(splats, cam, Vec3::Zero(), opt);
        EXPECT_LE(max_diff(tiled, brute), std::exp(-4.5) * opacity_sum);
    }
}

TEST(BruteForce, ColorLinearity) {
    std::mt19937_64 rng(5);
    const int size = 24;
    auto splats = random_splats(rng, 30, size);
    const Camera cam = square_camera(size);
    const Vec3 bg(0.3, 0.6, 0.9);
    const RenderOptions opt = no_cutoff();
    const RenderResult base = render_forward(splats, cam, bg, opt);
    const double k = 2.5;
    for (Splat2D &s : splats) {
        s.color *= k;
    }
    const RenderResult scaled = render_forward(splats, cam, bg, opt);
    for (std::size_t p = 0; p < base.image.pixel_count(); ++p) {
        for (int c = 0; c < 3; ++c) {
            const double a = base.image.data[3 * p + c] - base.aux.final_transmittance[p] * bg[c];
            const double b = scaled.image.data[3 * p + c] - scaled.aux.final_transmittance[p] * bg[c];
            EXPECT_NEAR(b, k * a, 1e-12);
        }
    }
}

TEST(BruteForce, PermutationIsBitIdentical) {
    std::mt19937_64 rng(6);
    const int size = 32;
    auto splats = random_splats(rng, 40, size);
    // Force depth ties so the source-id tiebreak is exercised.
    splats[3].depth = splats[7].depth;
    splats[11].depth = splats[7].depth;
    const Camera cam = square_camera(size);
    const Image a = render_forward(splats, cam, Vec3(0.1, 0.1, 0.1)).image;
    const Image ab = brute_force_render(splats, cam, Vec3(0.1, 0.1, 0.1));
    std::shuffle(splats.begin(), splats.end(), rng);
    EXPECT_EQ(render_forward(splats, cam, Vec3(0.1, 0.1, 0.1)).image.data, a.data);
    EXPECT_EQ(brute_force_render(splats, cam, Vec3(0.1, 0.1, 0.1)).data, ab.data);
}

TEST(RenderInvariants, WeightsAndTransmittanceSumToOne) {
    // With white colors and black background each channel equals the sum of
    // blending weights.
    std::mt19937_64 rng(7);
    const int size = 32;
    auto splats = random_splats(rng, 50, size);
    for (Splat2D &s : splats) {
        s.color = Vec3::Ones();
    }
    const RenderResult r = render_forward(splats, square_camera(size), Vec3::Zero());
    for (std::size_t p = 0; p < r.image.pixel_count(); ++p) {
        const double T = r.aux.final_transmittance[p];
        EXPECT_GE(T, 0.0);
        EXPECT_LE(T, 1.0);
        EXPECT_NEAR(r.image.data[3 * p] + T, 1.0, 1e-6);
    }
}

TEST(RenderInvariants, OpacityMonotonicity) {
    std::mt19937_64 rng(8);
    const int size = 24;
    auto splats = random_splats(rng, 30, size);
    const Camera cam = square_camera(size);
    const RenderOptions opt = no_cutoff();
    const RenderResult base = render_forward(splats, cam, Vec3::Zero(), opt);
    for (std::size_t i = 0; i < splats.size(); i += 5) {
        auto more = splats;
        more[i].opacity = std::min(0.99, more[i].opacity + 0.3);
        const RenderResult r = render_forward(more, cam, Vec3::Zero(), opt);
        for (std::size_t p = 0; p < r.aux.final_transmittance.size(); ++p) {
            EXPECT_LE(r.aux.final_transmittance[p], base.aux.final_transmittance[p] + 1e-15);
        }
    }
}

TEST(RenderInvariants, ThreadCountDoesNotChangeBits) {
    std::mt19937_64 rng(9);
    const int size = 48;
    const auto splats = random_splats(rng, 80, size);
    const Camera cam = square_camera(size);
    Image weights(size, size, 0.5);
    RenderOptions one, four;
    four.threads = 4;
    const RenderResult a = render_forward(splats, cam, Vec3::Zero(), one);
    const RenderResult b = render_forward(splats, cam, Vec3::Zero(), four);
    EXPECT_EQ(a.image.data, b.image.data);
    const auto ga = render_backward(a.aux, weights);
    const auto gb = render_backward(b.aux, weights);
    for (std::size_t i = 0; i < ga.size(); ++i) {
        EXPECT_EQ(ga[i].mean, gb[i].mean);
        EXPECT_EQ(ga[i].cov, gb[i].cov);
        EXPECT_EQ(ga[i].color, gb[i].color);
        EXPECT_EQ(ga[i].opacity, gb[i].opacity);
    }
}

TEST(ProjectBackward, ChainToGlobalMatchesFiniteDifferences) {
    const Camera cam = square_camera(32, 40.0);
    GlobalGaussian g;
    g.mean = Vec3(0.2, -0.1, 3.0);
    g.rotation = Vec4(0.9, 0.2, -0.1, 0.3).normalized();
    g.scale = Vec3(0.1, 0.2, 0.15);
    const Vec2 d_mean(0.3, -0.7);
    Mat2 d_cov;
    d_cov << 0.2, 0.05, 0.05, -0.4;
    const ProjectionGradient pg = project_gaussian_backward(g, cam, d_mean, d_cov);
    auto f = [&](const Vec3 &mean) {
        GlobalGaussian x = g;
        x.mean = mean;
        const Splat2D s = *project_gaussian(x, cam);
        return d_mean.dot(s.mean) + (d_cov.cwiseProduct(s.cov)).sum();
    };
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
        Vec3 p = g.mean, m = g.mean;
        p[k] += h;
        m[k] -= h;
        EXPECT_NEAR(pg.mean[k], (f(p) - f(m)) / (2 * h), 1e-6);
    }
}
