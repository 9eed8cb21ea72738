#include "rigsplat/frame.hpp"
#include "rigsplat/gaussian.hpp"
#include "rigsplat/math.hpp"
#include "rigsplat/sh.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <random>

using namespace rigsplat;

namespace {

Vec4 random_unit_quat(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return quat_normalize(Vec4(n(rng), n(rng), n(rng), n(rng)));
}

Vec3 random_vec(std::mt19937_64 &rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    return Vec3(u(rng), u(rng), u(rng));
}

double max_abs(const Mat3 &m) { return m.cwiseAbs().maxCoeff(); }

} // namespace

TEST(Activate, Examples) {
    LocalGaussian g;
    g.log_scale = Vec3::Zero();
    g.opacity_logit = 0.0;
    g.rotation = Vec4(2, 0, 0, 0);
    const ActivatedGaussian a = activate_params(g);
    EXPECT_EQ(a.scale, Vec3::Ones());
    EXPECT_EQ(a.opacity, 0.5);
    EXPECT_EQ(a.rotation, Vec4(1, 0, 0, 0));
}

TEST(Activate, InvariantsOnRandomInputs) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 3.0);
    for (int i = 0; i < 500; ++i) {
        LocalGaussian g;
        g.rotation = Vec4(n(rng), n(rng), n(rng), n(rng));
        g.log_scale = Vec3(n(rng), n(rng), n(rng));
        g.opacity_logit = n(rng);
        const ActivatedGaussian a = activate_params(g);
        EXPECT_NEAR(a.rotation.norm(), 1.0, 1e-12);
        EXPECT_GT(a.scale.minCoeff(), 0.0);
        EXPECT_GT(a.opacity, 0.0);
        EXPECT_LT(a.opacity, 1.0);
    }
}

TEST(Activate, ZeroQuaternionIsANumericError) {
    LocalGaussian g;
    g.rotation = Vec4::Zero();
    EXPECT_THROW(activate_params(g), NumericError);
}

TEST(Covariance, AxisAligned) {
    const Mat3 sigma = build_covariance(Vec4(1, 0, 0, 0), Vec3(1, 2, 3));
    EXPECT_EQ(sigma, Vec3(1, 4, 9).asDiagonal().toDenseMatrix());
}

TEST(Covariance, EigenvaluesAreSquaredScalesAndMatrixIsSymmetric) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const Vec4 r = random_unit_quat(rng);
        const Vec3 s = random_vec(rng, 0.05, 3.0);
        const Mat3 sigma = build_covariance(r, s);
        EXPECT_EQ(sigma, sigma.transpose());
        Eigen::SelfAdjointEigenSolver<Mat3> solver(sigma);
        Vec3 expected = s.cwiseProduct(s);
        std::sort(expected.data(), expected.data() + 3);
        const Vec3 got = solver.eigenvalues();
        for (int k = 0; k < 3; ++k) {
            EXPECT_NEAR(got[k], expected[k], 1e-10 * (1.0 + expected[k]));
        }
    }
}

TEST(Bind, IdentityFrameKeepsLocalValues) {
    ActivatedGaussian a;
    a.position = Vec3(0.3, -0.2, 0.7);
    a.rotation = quat_normalize(Vec4(0.9, 0.1, -0.3, 0.2));
    a.scale = Vec3(0.1, 0.2, 0.3);
    a.opacity = 0.42;
    const GlobalGaussian g = bind_to_global(a, TriangleFrame{});
    EXPECT_LE((g.mean - a.position).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((g.rotation - a.rotation).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(g.scale, a.scale);
    EXPECT_EQ(g.opacity, a.opacity);
}

TEST(Bind, HandEvaluatedExamples) {
    ActivatedGaussian a;
    a.position = Vec3(1, 0, 0);
    a.scale = Vec3(0.1, 0.1, 0.1);
    TriangleFrame frame;
    frame.scale = 2.0;
    frame.centroid = Vec3(5, 0, 0);
    const GlobalGaussian g = bind_to_global(a, frame);
    EXPECT_EQ(g.mean, Vec3(7, 0, 0));
    EXPECT_EQ(g.scale, Vec3(0.2, 0.2, 0.2));
}

TEST(Bind, RigidEquivariance) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        const Vec3 v0 = random_vec(rng, -1, 1), v1 = random_vec(rng, -1, 1), v2 = random_vec(rng, -1, 1);
        const Mat3 Q = quat_to_matrix(random_unit_quat(rng));
        const Vec3 t = random_vec(rng, -3, 3);
        ActivatedGaussian a;
        a.position = random_vec(rng, -0.5, 0.5);
        a.rotation = random_unit_quat(rng);
        a.scale = random_vec(rng, 0.05, 0.5);
        const GlobalGaussian g1 = bind_to_global(a, triangle_frame(v0, v1, v2));
        const GlobalGaussian g2 = bind_to_global(a, triangle_frame(Q * v0 + t, Q * v1 + t, Q * v2 + t));
        EXPECT_LE((g2.mean - (Q * g1.mean + t)).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE((g2.scale - g1.scale).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE(max_abs(quat_to_matrix(g2.rotation) - Q * quat_to_matrix(g1.rotation)), 1e-9);
        EXPECT_NEAR(g2.rotation.norm(), 1.0, 1e-12);
    }
}

TEST(Bind, CovarianceOfBoundEqualsTransformedCovariance) {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 200; ++i) {
        const TriangleFrame frame =
            triangle_frame(random_vec(rng, -1, 1), random_vec(rng, -1, 1), random_vec(rng, -1, 1));
        ActivatedGaussian a;
        a.rotation = random_unit_quat(rng);
        a.scale = random_vec(rng, 0.05, 0.5);
        const GlobalGaussian g = bind_to_global(a, frame);
        const Mat3 A = frame.scale * frame.rotation;
        const Mat3 expected = A * build_covariance(a.rotation, a.scale) * A.transpose();
        EXPECT_LE(max_abs(build_covariance(g.rotation, g.scale) - expected), 1e-9);
    }
}

TEST(SphericalHarmonics, DegreeZeroZeroCoefficientIsGray) {
    const std::vector<double> coeffs(3, 0.0);
    EXPECT_EQ(sh_to_color(coeffs, 0, Vec3(0, 0, 1)), Vec3::Constant(0.5));
}

TEST(SphericalHarmonics, DegreeZeroIgnoresDirection) {
    const std::vector<double> coeffs = {0.4, -0.3, 1.1};
    const Vec3 a = sh_to_color(coeffs, 0, Vec3(0, 0, 1));
    const Vec3 b = sh_to_color(coeffs, 0, Vec3(0.6, -0.8, 0).normalized());
    EXPECT_EQ(a, b);
    EXPECT_NEAR(a.x(), 0.4 * 0.28209479177387814 + 0.5, 1e-15);
}

TEST(SphericalHarmonics, DegreeOneIsOdd) {
    // Only band-1 terms, centered so no channel clamps: flipping the view
    // direction mirrors the color about the 0.5 offset.
    std::vector<double> coeffs(3 * 4, 0.0);
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (int k = 3; k < 12; ++k) {
        coeffs[k] = u(rng);
    }
    const Vec3 dir = Vec3(0.3, -0.5, 0.8).normalized();
    const Vec3 plus = sh_to_color(coeffs, 1, dir) - Vec3::Constant(0.5);
    const Vec3 minus = sh_to_color(coeffs, 1, -dir) - Vec3::Constant(0.5);
    EXPECT_LE((plus + minus).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_GT(plus.cwiseAbs().maxCoeff(), 1e-3);
}

TEST(SphericalHarmonics, BackwardMatchesFiniteDifferences) {
    std::vector<double> coeffs(3 * 16);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (double &c : coeffs) {
        c = u(rng);
    }
    const Vec3 dir = Vec3(0.2, 0.4, -0.9).normalized();
    const Vec3 up(0.3, -0.7, 0.2);
    std::vector<double> d_coeffs(coeffs.size(), 0.0);
    sh_to_color_backward(coeffs, 3, dir, up, d_coeffs);
    const double h = 1e-6;
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
        auto p = coeffs, m = coeffs;
        p[k] += h;
        m[k] -= h;
        const double numeric = up.dot(sh_to_color(p, 3, dir) - sh_to_color(m, 3, dir)) / (2 * h);
        EXPECT_NEAR(d_coeffs[k], numeric, 1e-8);
    }
}
