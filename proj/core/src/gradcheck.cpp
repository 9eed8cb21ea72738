#include "rigsplat/gradcheck.hpp"

#include "rigsplat/losses.hpp"
#include "rigsplat/math.hpp"
#include "rigsplat/model.hpp"
#include "rigsplat/rasterizer.hpp"
#include "rigsplat/synthetic.hpp"

#include <cmath>
#include <random>

namespace rigsplat {

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

GradCheckResult finite_difference_check(const std::string &name, std::span<double> x,
                                        std::span<const double> analytic, const std::function<double()> &f,
                                        const GradCheckOptions &options) {
    require_size(analytic.size(), x.size(), name.c_str());
    GradCheckResult r;
    r.name = name;
    r.tolerance = options.tolerance;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        auto at = [&](double offset) {
            x[i] = saved + offset;
            return f();
        };
        const double h = options.step;
        const double numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
        x[i] = saved;
        const double err = relative_error(analytic[i], numeric, options.absolute_floor);
        if (err > r.max_rel_error || r.checked == 0) {
            r.max_rel_error = err;
            r.worst_index = i;
            r.worst_analytic = analytic[i];
            r.worst_numeric = numeric;
        }
        ++r.checked;
    }
    return r;
}

namespace {

double uniform(std::mt19937_64 &rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::vector<double> random_vector(std::mt19937_64 &rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double &x : v) {
        x = uniform(rng, lo, hi);
    }
    return v;
}

Vec4 random_quat(std::mt19937_64 &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return Vec4(n(rng), n(rng), n(rng), n(rng)).normalized();
}

TriangleFrame random_frame(std::mt19937_64 &rng) {
    const Vec3 v0(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const Vec3 v1 = v0 + Vec3(uniform(rng, 0.5, 1.0), uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3));
    const Vec3 v2 = v0 + Vec3(uniform(rng, -0.3, 0.3), uniform(rng, 0.5, 1.0), uniform(rng, -0.3, 0.3));
    return triangle_frame(v0, v1, v2);
}

std::vector<GradCheckResult> gaussian_suite(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const GradCheckOptions opt{1e-4, 1e-5, 1e-7};
    std::vector<GradCheckResult> out;

    // Covariance: L = Σ_ij G_ij Σ_ij for a random G.
    Mat3 G;
    for (int k = 0; k < 9; ++k) {
        G(k / 3, k % 3) = uniform(rng, -1, 1);
    }
    std::vector<double> x(7);
    const Vec4 q = random_quat(rng);
    for (int k = 0; k < 4; ++k) {
        x[k] = q[k];
    }
    for (int k = 0; k < 3; ++k) {
        x[4 + k] = uniform(rng, 0.2, 1.5);
    }
    auto cov_loss = [&] {
        const Mat3 S = build_covariance(Vec4(x[0], x[1], x[2], x[3]), Vec3(x[4], x[5], x[6]));
        return (G.array() * S.array()).sum();
    };
    const CovarianceGradient cg = build_covariance_backward(q, Vec3(x[4], x[5], x[6]), G);
    std::vector<double> analytic{cg.rotation[0], cg.rotation[1], cg.rotation[2], cg.rotation[3],
                                 cg.scale[0],    cg.scale[1],    cg.scale[2]};
    out.push_back(finite_difference_check("gaussian/build_covariance", x, analytic, cov_loss, opt));

    // Binding: L = linear functional of (mean, rotation, scale).
    const TriangleFrame frame = random_frame(rng);
    GlobalGradient up;
    up.mean = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    up.rotation = Vec4(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    up.scale = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    std::vector<double> b(10);
    const Vec4 r0 = random_quat(rng);
    for (int k = 0; k < 3; ++k) {
        b[k] = uniform(rng, -0.5, 0.5);
        b[7 + k] = uniform(rng, 0.1, 1.0);
    }
    for (int k = 0; k < 4; ++k) {
        b[3 + k] = r0[k];
    }
    auto bind_loss = [&] {
        ActivatedGaussian a;
        a.position = Vec3(b[0], b[1], b[2]);
        a.rotation = Vec4(b[3], b[4], b[5], b[6]);
        a.scale = Vec3(b[7], b[8], b[9]);
        const GlobalGaussian g = bind_to_global(a, frame);
        return up.mean.dot(g.mean) + up.rotation.dot(g.rotation) + up.scale.dot(g.scale);
    };
    const ActivatedGradient ag = bind_to_global_backward(frame, up);
    std::vector<double> ba{ag.position[0], ag.position[1], ag.position[2], ag.rotation[0], ag.rotation[1],
                           ag.rotation[2], ag.rotation[3], ag.scale[0],    ag.scale[1],    ag.scale[2]};
    out.push_back(finite_difference_check("gaussian/bind_to_global", b, ba, bind_loss, opt));

    // Projection of a world Gaussian to a splat.
    Camera cam = look_at_camera(Vec3(0.3, 0.2, 4.0), Vec3::Zero(), Vec3::UnitY(), 20.0, 16, 16);
    std::vector<double> p(10);
    const Vec4 pr = random_quat(rng);
    for (int k = 0; k < 3; ++k) {
        p[k] = uniform(rng, -0.4, 0.4);
        p[7 + k] = uniform(rng, 0.1, 0.5);
    }
    for (int k = 0; k < 4; ++k) {
        p[3 + k] = pr[k];
    }
    const Vec2 dmean(uniform(rng, -1, 1), uniform(rng, -1, 1));
    Mat2 dcov;
    dcov << uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1);
    auto to_global = [&] {
        GlobalGaussian g;
        g.mean = Vec3(p[0], p[1], p[2]);
        g.rotation = Vec4(p[3], p[4], p[5], p[6]);
        g.scale = Vec3(p[7], p[8], p[9]);
        return g;
    };
    auto proj_loss = [&] {
        const auto s = project_gaussian(to_global(), cam);
        return dmean.dot(s->mean) + (dcov.array() * s->cov.array()).sum();
    };
    SplatGradient sg;
    sg.mean = dmean;
    sg.cov = dcov;
    const GlobalGradient gg = splat_gradient_to_global(to_global(), cam, sg);
    std::vector<double> pa{gg.mean[0],     gg.mean[1],     gg.mean[2],  gg.rotation[0], gg.rotation[1],
                           gg.rotation[2], gg.rotation[3], gg.scale[0], gg.scale[1],    gg.scale[2]};
    out.push_back(finite_difference_check("gaussian/project", p, pa, proj_loss, opt));
    return out;
}

std::vector<GradCheckResult> rasterizer_suite(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const int n = 5, size = 16;
    Camera cam = look_at_camera(Vec3(0, 0, 4), Vec3::Zero(), Vec3::UnitY(), 20.0, size, size);
    std::vector<Splat2D> splats(n);
    for (int i = 0; i < n; ++i) {
        Splat2D &s = splats[i];
        s.mean = Vec2(uniform(rng, 3, 12), uniform(rng, 3, 12));
        const double a = uniform(rng, 2, 8), c = uniform(rng, 2, 8), b = uniform(rng, -1, 1);
        s.cov << a, b, b, c;
        s.conic = s.cov.inverse();
        s.depth = uniform(rng, 1, 5);
        s.color = Vec3(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1));
        s.opacity = uniform(rng, 0.3, 0.9);
        s.source_id = i;
    }
    RenderOptions ro;
    ro.gaussian_cutoff = false;
    const Vec3 bg(0.1, 0.2, 0.3);
    const std::vector<double> w = random_vector(rng, static_cast<std::size_t>(size) * size * 3);
    auto loss_of = [&](const std::vector<Splat2D> &sp) {
        const Image img = render_forward(sp, cam, bg, ro).image;
        double l = 0.0;
        for (std::size_t k = 0; k < img.data.size(); ++k) {
            l += w[k] * img.data[k];
        }
        return l;
    };
    Image d_image(size, size);
    d_image.data = w;
    const std::vector<SplatGradient> g = render_backward(render_forward(splats, cam, bg, ro).aux, d_image);

    // Flatten: mean(2), cov(4), color(3), opacity(1).
    std::vector<double> x, analytic;
    for (int i = 0; i < n; ++i) {
        const Splat2D &s = splats[i];
        x.insert(x.end(), {s.mean.x(), s.mean.y(), s.cov(0, 0), s.cov(0, 1), s.cov(1, 0), s.cov(1, 1), s.color.x(),
                           s.color.y(), s.color.z(), s.opacity});
        analytic.insert(analytic.end(), {g[i].mean.x(), g[i].mean.y(), g[i].cov(0, 0), g[i].cov(0, 1), g[i].cov(1, 0),
                                         g[i].cov(1, 1), g[i].color.x(), g[i].color.y(), g[i].color.z(),
                                         g[i].opacity});
    }
    auto f = [&] {
        std::vector<Splat2D> sp = splats;
        for (int i = 0; i < n; ++i) {
            const double *v = &x[10 * i];
            sp[i].mean = Vec2(v[0], v[1]);
            sp[i].cov << v[2], v[3], v[4], v[5];
            sp[i].conic = sp[i].cov.inverse();
            sp[i].color = Vec3(v[6], v[7], v[8]);
            sp[i].opacity = v[9];
        }
        return loss_of(sp);
    };
    return {finite_difference_check("rasterizer/splat_fields", x, analytic, f, {1e-4, 1e-5, 1e-7})};
}

AdjusterConfig tiny_adjuster(EncodingMode mode) {
    AdjusterConfig c;
    c.latent_dim = 4;
    c.resolutions = {4, 8, 16};
    c.channels = 2;
    c.basis_hidden = 16;
    c.latent_hidden = 16;
    c.encoding = mode;
    c.fourier_bands = 3;
    c.triplane_init = 0.5;
    return c;
}

std::vector<GradCheckResult> adjuster_suite(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const GradCheckOptions opt{1e-4, 1e-5, 1e-7};
    std::vector<GradCheckResult> out;
    MorphAdjuster adj(tiny_adjuster(EncodingMode::triplane), Aabb{}, 5);
    adj.init(rng);
    adj.basis_net.init(rng, /*zero_output_layer=*/false);

    const int n = 6;
    std::vector<Vec3> pos(n);
    std::vector<GlobalGaussian> coarse(n);
    for (int i = 0; i < n; ++i) {
        pos[i] = Vec3(uniform(rng, -0.9, 0.9), uniform(rng, -0.9, 0.9), uniform(rng, -0.9, 0.9));
        coarse[i].mean = pos[i];
        coarse[i].rotation = random_quat(rng);
        coarse[i].scale = Vec3(uniform(rng, 0.2, 0.5), uniform(rng, 0.2, 0.5), uniform(rng, 0.2, 0.5));
    }
    std::vector<double> drive = random_vector(rng, 5);
    std::vector<GlobalGradient> up(n);
    for (auto &u : up) {
        u.mean = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
        u.rotation = Vec4(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
        u.scale = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    }
    auto loss = [&] {
        const RowMatrix basis = adj.predict_basis(adj.encode_positions(pos));
        const Eigen::VectorXd f = adj.encode_driving(std::span(drive).first(3), std::span(drive).subspan(3));
        double l = 0.0;
        for (int i = 0; i < n; ++i) {
            const GlobalGaussian g = apply_deformation(coarse[i], adj.basis_of(basis, i), f);
            l += up[i].mean.dot(g.mean) + up[i].rotation.dot(g.rotation) + up[i].scale.dot(g.scale);
        }
        return l;
    };

    Mlp::Cache bc, lc;
    const RowMatrix basis = adj.predict_basis(adj.encode_positions(pos), &bc);
    const Eigen::VectorXd f = adj.encode_driving(std::span(drive).first(3), std::span(drive).subspan(3), &lc);
    const int d = adj.config().latent_dim;
    RowMatrix d_basis(n, 10 * d);
    Eigen::VectorXd d_f = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < n; ++i) {
        const DeformBasis W = adj.basis_of(basis, i);
        const DeformationGradient dg = apply_deformation_backward(coarse[i], W, f, up[i]);
        for (int r = 0; r < 10; ++r) {
            for (int c = 0; c < d; ++c) {
                d_basis(i, r * d + c) = dg.delta[r] * f[c];
            }
        }
        d_f += W.transpose() * dg.delta;
    }
    std::vector<double> g_basis(adj.basis_net.params.size(), 0.0), g_latent(adj.latent_net.params.size(), 0.0),
        g_tri(adj.triplane.params.size(), 0.0);
    const RowMatrix d_feat = adj.basis_net.backward(bc, d_basis, g_basis);
    adj.encode_positions_backward(pos, d_feat, g_tri);
    const RowMatrix d_drive = adj.latent_net.backward(lc, d_f.transpose(), g_latent);
    std::vector<double> g_drive(d_drive.data(), d_drive.data() + d_drive.size());

    out.push_back(finite_difference_check("adjuster/triplane", adj.triplane.params, g_tri, loss, opt));
    out.push_back(finite_difference_check("adjuster/basis_net", adj.basis_net.params, g_basis, loss, opt));
    out.push_back(finite_difference_check("adjuster/latent_net", adj.latent_net.params, g_latent, loss, opt));
    out.push_back(finite_difference_check("adjuster/driving_input", drive, g_drive, loss, opt));
    return out;
}

std::vector<GradCheckResult> losses_suite(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const GradCheckOptions opt{1e-4, 1e-5, 1e-9};
    std::vector<GradCheckResult> out;
    Image a(12, 10), b(12, 10);
    a.data = random_vector(rng, a.data.size(), 0.0, 1.0);
    b.data = random_vector(rng, b.data.size(), 0.0, 1.0);
    Image grad(12, 10);
    ssim(a, b, &grad);
    out.push_back(finite_difference_check("losses/ssim", a.data, grad.data, [&] { return ssim(a, b); }, opt));
    Image rgb_grad(12, 10);
    rgb_loss(a, b, 0.2, &rgb_grad);
    out.push_back(finite_difference_check("losses/rgb", a.data, rgb_grad.data,
                                          [&] { return rgb_loss(a, b, 0.2).value; }, opt));

    GaussianSet set(0);
    for (int i = 0; i < 4; ++i) {
        LocalGaussian g;
        g.position = Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2));
        g.log_scale = Vec3(uniform(rng, -1.5, 0.3), uniform(rng, -1.5, 0.3), uniform(rng, -1.5, 0.3));
        g.sh.assign(3, 0.0);
        set.push_back(g);
    }
    std::vector<double> dp, ds;
    local_regularizers(set, 1.0, 0.6, &dp, &ds);
    out.push_back(finite_difference_check("losses/position_regularizer", set.position, dp,
                                          [&] { return local_regularizers(set, 1.0, 0.6).position; }, opt));
    out.push_back(finite_difference_check("losses/scaling_regularizer", set.log_scale, ds,
                                          [&] { return local_regularizers(set, 1.0, 0.6).scaling; }, opt));
    return out;
}

} // namespace


std::vector<GradCheckResult> full_loss_gradcheck(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ToyRigDims dims;
    dims.vertex_budget = 14;
    dims.blendshapes = 2;
    dims.joints = 2;
    const ParamRig rig = make_toy_rig(seed, dims);

    TrainConfig config;
    config.sh_degree = 1;
    config.adjuster = tiny_adjuster(EncodingMode::triplane);
    config.render.gaussian_cutoff = false;
    Model model = Model::create(rig, config, Vec3(0.1, 0.1, 0.2), rng);
    model.adjuster.basis_net.init(rng, /*zero_output_layer=*/false);
    model.adjuster_active = true;

    // Eight Gaussians with some local values past the regularizer thresholds.
    GaussianSet set(config.sh_degree);
    for (int i = 0; i < 8; ++i) {
        LocalGaussian g;
        g.parent_tri = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, rig.face_count() - 1)(rng));
        g.position = Vec3(uniform(rng, -1.4, 1.4), uniform(rng, -0.5, 0.5), uniform(rng, -1.4, 1.4));
        g.rotation = random_quat(rng) * uniform(rng, 0.7, 1.3);
        g.log_scale = Vec3(uniform(rng, -1.0, -0.2), uniform(rng, -1.0, -0.2), uniform(rng, -1.0, -0.2));
        g.opacity_logit = uniform(rng, -0.5, 1.5);
        g.sh = random_vector(rng, static_cast<std::size_t>(set.sh_stride()), -0.3, 0.3);
        set.push_back(g);
    }
    set.log_scale[1] = std::log(0.75);
    model.gaussians = set;

    const Camera cam = look_at_camera(Vec3(0.4, 0.3, 4.0), Vec3::Zero(), Vec3::UnitY(), 9.0, 8, 8);
    RigParams params = RigParams::neutral(rig);
    for (double &v : params.psi) {
        v = uniform(rng, -1, 1);
    }
    for (double &v : params.theta) {
        v = uniform(rng, -0.3, 0.3);
    }
    params.head_pose.rotation = axis_angle_to_matrix(Vec3(0.05, -0.1, 0.02));
    Image target(8, 8);
    target.data = random_vector(rng, target.data.size(), 0.0, 1.0);

    model.update_query_positions();
    ModelGradients grads(model);
    frame_loss(model, params, cam, target, config.loss, nullptr, &grads);
    auto f = [&] { return frame_loss(model, params, cam, target, config.loss, nullptr, nullptr).terms.total; };

    const GradCheckOptions opt{1e-4, 1e-4, 1e-7};
    std::vector<GradCheckResult> out;
    for (ParamGroup &g : model.param_groups(grads)) {
        out.push_back(finite_difference_check("full/" + g.name, g.params, g.grads, f, opt));
    }
    return out;
}

std::vector<std::string> gradcheck_modules() { return {"gaussian", "rasterizer", "adjuster", "losses", "full"}; }

std::vector<GradCheckResult> run_gradcheck(const std::string &module, std::uint64_t seed) {
    if (module == "all") {
        std::vector<GradCheckResult> all;
        for (const std::string &m : gradcheck_modules()) {
            auto r = run_gradcheck(m, seed);
            all.insert(all.end(), r.begin(), r.end());
        }
        return all;
    }
    if (module == "gaussian") {
        return gaussian_suite(seed);
    }
    if (module == "rasterizer") {
        return rasterizer_suite(seed);
    }
    if (module == "adjuster") {
        return adjuster_suite(seed);
    }
    if (module == "losses") {
        return losses_suite(seed);
    }
    if (module == "full") {
        return full_loss_gradcheck(seed);
    }
    throw ConsistencyError("unknown gradcheck module '" + module + "'");
}

} // namespace rigsplat
