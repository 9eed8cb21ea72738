#include "rigsplat/synthetic.hpp"

#include "rigsplat/model.hpp"
#include "rigsplat/sh.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace rigsplat {

namespace {

double uniform(std::mt19937_64 &rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 random_axis_angle(std::mt19937_64 &rng, double max_angle) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 axis(n(rng), n(rng), n(rng));
    if (axis.norm() == 0.0) {
        axis = Vec3::UnitX();
    }
    return axis.normalized() * uniform(rng, -max_angle, max_angle);
}

// A rig that only renders: no adjuster, skinning on.
Model ground_truth_model(const ParamRig &rig, const GaussianSet &gt, const Vec3 &background) {
    Model m;
    m.rig = rig;
    m.background = background;
    m.gaussians = gt;
    m.adjuster_enabled = false;
    m.refresh_neutral();
    return m;
}

Image render_with(Model &m, const RigParams &params, const Camera &camera, const FineDeformation &fine) {
    FrameTape tape;
    std::vector<Splat2D> splats = m.project(params, camera, tape);
    if (fine.amplitude != 0.0) {
        splats.clear();
        const Vec3 eye = tape.camera.center();
        for (std::size_t i = 0; i < m.gaussians.size(); ++i) {
            const ActivatedGaussian a = activate_params(m.gaussians, i);
            const Vec3 neutral = bind_to_global(a, m.neutral_frames[m.gaussians.parent_tri[i]]).mean;
            GlobalGaussian g = tape.refined[i];
            g.mean += fine.offset(neutral, params.psi);
            g.color = sh_to_color(m.gaussians.sh_of(i), m.gaussians.sh_degree(), (g.mean - eye).normalized());
            if (auto s = project_gaussian(g, tape.camera, static_cast<int>(i))) {
                splats.push_back(*s);
            }
        }
    }
    return brute_force_render(splats, tape.camera, m.background, m.render_options);
}

} // namespace

ParamRig make_toy_rig(std::uint64_t seed, const ToyRigDims &dims) {
    if (dims.vertex_budget < 8 || dims.blendshapes < 0 || dims.joints < 1) {
        throw SizeError("toy rig needs >= 8 vertices and >= 1 joint");
    }
    std::mt19937_64 rng(seed);
    ParamRig rig;

    const int bands = std::max(2, static_cast<int>(std::lround(std::sqrt((dims.vertex_budget - 2) / 1.75))));
    const int segments = std::max(3, (dims.vertex_budget - 2) / bands);
    const Vec3 radii(0.8, 1.0, 0.9);
    const double pi = std::numbers::pi;

    rig.template_vertices.push_back(Vec3(0.0, radii.y(), 0.0));
    for (int b = 1; b < bands; ++b) {
        const double phi = pi * b / bands;
        for (int s = 0; s < segments; ++s) {
            const double lam = 2.0 * pi * s / segments;
            rig.template_vertices.push_back(Vec3(radii.x() * std::sin(phi) * std::sin(lam), radii.y() * std::cos(phi),
                                                 radii.z() * std::sin(phi) * std::cos(lam)));
        }
    }
    rig.template_vertices.push_back(Vec3(0.0, -radii.y(), 0.0));
    const int south = static_cast<int>(rig.template_vertices.size()) - 1;
    auto ring = [&](int b, int s) { return 1 + (b - 1) * segments + (s % segments); };

    // Outward-facing winding.
    for (int s = 0; s < segments; ++s) {
        rig.faces.push_back({0, ring(1, s), ring(1, s + 1)});
    }
    for (int b = 1; b + 1 < bands; ++b) {
        for (int s = 0; s < segments; ++s) {
            rig.faces.push_back({ring(b, s), ring(b + 1, s), ring(b + 1, s + 1)});
            rig.faces.push_back({ring(b, s), ring(b + 1, s + 1), ring(b, s + 1)});
        }
    }
    for (int s = 0; s < segments; ++s) {
        rig.faces.push_back({south, ring(bands - 1, s + 1), ring(bands - 1, s)});
    }

    // Blendshapes: a few Gaussian bumps along the surface normal plus a
    // tangential swirl, rescaled so the largest displacement is `amplitude`.
    const std::size_t nv = rig.template_vertices.size();
    for (int k = 0; k < dims.blendshapes; ++k) {
        std::vector<Vec3> delta(nv, Vec3::Zero());
        for (int bump = 0; bump < 3; ++bump) {
            const Vec3 center = radii.cwiseProduct(random_axis_angle(rng, 1.0).normalized());
            const double weight = uniform(rng, -1.0, 1.0);
            const double width = uniform(rng, 0.3, 0.7);
            const Vec3 swirl = random_axis_angle(rng, 1.0);
            for (std::size_t v = 0; v < nv; ++v) {
                const Vec3 &p = rig.template_vertices[v];
                const double falloff = std::exp(-(p - center).squaredNorm() / (2.0 * width * width));
                const Vec3 normal = p.cwiseQuotient(radii.cwiseProduct(radii)).normalized();
                delta[v] += falloff * (weight * normal + 0.3 * swirl.cross(normal));
            }
        }
        double peak = 0.0;
        for (const Vec3 &d : delta) {
            peak = std::max(peak, d.norm());
        }
        const double scale = peak > 0.0 ? dims.amplitude / peak : 0.0;
        for (Vec3 &d : delta) {
            d *= scale;
        }
        rig.blendshapes.push_back(std::move(delta));
    }

    // Joint chain up the vertical axis: neck, then jaw-like pivots above it.
    for (int j = 0; j < dims.joints; ++j) {
        const double y = -radii.y() + (j + 1) * (radii.y() / (dims.joints + 1));
        rig.joints.push_back({j - 1, Vec3(0.0, y, j == 0 ? 0.0 : 0.2)});
    }
    // Each vertex leans on the joints below it; weights fall off smoothly with height.
    rig.skin_weights.resize(nv);
    for (std::size_t v = 0; v < nv; ++v) {
        const double y = rig.template_vertices[v].y();
        std::vector<double> w(dims.joints);
        double total = 0.0;
        for (int j = 0; j < dims.joints; ++j) {
            const double d = y - rig.joints[j].rest_position.y();
            w[j] = std::exp(-d * d / 0.18);
            total += w[j];
        }
        for (int j = 0; j < dims.joints; ++j) {
            rig.skin_weights[v].push_back({j, w[j] / total});
        }
    }
    rig.validate();
    return rig;
}

GaussianSet make_toy_gaussians(const ParamRig &rig, int count, std::uint64_t seed, int sh_degree) {
    std::mt19937_64 rng(seed);
    GaussianSet set(sh_degree);
    std::uniform_int_distribution<int> face(0, static_cast<int>(rig.face_count()) - 1);
    for (int i = 0; i < count; ++i) {
        LocalGaussian g;
        g.parent_tri = face(rng);
        g.position = Vec3(uniform(rng, -0.3, 0.3), uniform(rng, -0.2, 0.2), uniform(rng, -0.3, 0.3));
        const Vec3 axis = random_axis_angle(rng, std::numbers::pi);
        g.rotation = matrix_to_quat(axis_angle_to_matrix(axis));
        // Inside the default regularizer thresholds, so the ground truth is a
        // zero-penalty member of the model family.
        g.log_scale = Vec3(std::log(uniform(rng, 0.25, 0.6)), std::log(uniform(rng, 0.1, 0.4)),
                           std::log(uniform(rng, 0.25, 0.6)));
        g.opacity_logit = logit(uniform(rng, 0.6, 0.95));
        g.sh.assign(static_cast<std::size_t>(set.sh_stride()), 0.0);
        for (int c = 0; c < 3; ++c) {
            g.sh[c] = uniform(rng, -1.2, 1.2);
        }
        for (std::size_t k = 3; k < g.sh.size(); ++k) {
            g.sh[k] = uniform(rng, -0.1, 0.1);
        }
        set.push_back(g);
    }
    return set;
}

std::vector<Camera> orbit_cameras(int count, double distance, double focal, int width, int height) {
    std::vector<Camera> cams;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        const double y = count == 1 ? 0.0 : 0.8 - 1.6 * i / (count - 1);
        const double r = std::sqrt(1.0 - y * y);
        const double a = golden * i;
        const Vec3 eye = distance * Vec3(r * std::sin(a), y, r * std::cos(a));
        cams.push_back(look_at_camera(eye, Vec3::Zero(), Vec3::UnitY(), focal, width, height));
    }
    return cams;
}

std::vector<RigParams> random_param_sequence(const ParamRig &rig, int count, std::uint64_t seed, double psi_range,
                                             double theta_range, double head_range) {
    std::mt19937_64 rng(seed);
    std::vector<RigParams> seq;
    for (int i = 0; i < count; ++i) {
        RigParams p = RigParams::neutral(rig);
        for (double &v : p.psi) {
            v = uniform(rng, -psi_range, psi_range);
        }
        for (double &v : p.theta) {
            v = uniform(rng, -theta_range, theta_range);
        }
        p.head_pose.rotation = axis_angle_to_matrix(random_axis_angle(rng, head_range));
        seq.push_back(std::move(p));
    }
    return seq;
}

Vec3 FineDeformation::offset(const Vec3 &x, std::span<const double> psi) const {
    if (amplitude == 0.0 || psi.empty()) {
        return Vec3::Zero();
    }
    std::mt19937_64 rng(seed);
    Vec3 field;
    for (int c = 0; c < 3; ++c) {
        const Vec3 freq = random_axis_angle(rng, 1.0).normalized() * 3.0;
        field[c] = std::sin(freq.dot(x) + uniform(rng, 0.0, 2.0 * std::numbers::pi));
    }
    const double p0 = psi[0], p1 = psi.size() > 1 ? psi[1] : 0.0;
    return amplitude * (p0 * p0 + p0 * p1 - 0.5) * field;
}

Image render_ground_truth(const ParamRig &rig, const GaussianSet &gt, const RigParams &params, const Camera &camera,
                          const Vec3 &background, const FineDeformation &fine) {
    Model m = ground_truth_model(rig, gt, background);
    return render_with(m, params, camera, fine);
}

Dataset make_toy_dataset(const ParamRig &rig, const GaussianSet &gt, std::span<const Camera> cameras,
                         std::span<const RigParams> settings, const Vec3 &background, const FineDeformation &fine) {
    Dataset data;
    data.rig = rig;
    data.background = background;
    Model m = ground_truth_model(rig, gt, background);
    for (const RigParams &p : settings) {
        for (const Camera &c : cameras) {
            DatasetFrame f;
            f.image = render_with(m, p, c, fine);
            f.mask.assign(f.image.pixel_count(), 1);
            f.record = {p, c};
            data.frames.push_back(std::move(f));
        }
    }
    return data;
}

ToyScene make_toy_scene(const ToySceneOptions &o) {
    ToyScene s;
    s.rig = make_toy_rig(o.seed, o.rig);
    s.gt = make_toy_gaussians(s.rig, o.gaussians, o.seed + 1);
    s.cameras = orbit_cameras(o.cameras, o.distance, o.focal, o.size, o.size);
    const auto train = random_param_sequence(s.rig, o.train_settings, o.seed + 2);
    const auto held = random_param_sequence(s.rig, o.heldout_settings, o.seed + 3);
    s.train = make_toy_dataset(s.rig, s.gt, s.cameras, train, o.background, o.fine);
    s.heldout = make_toy_dataset(s.rig, s.gt, s.cameras, held, o.background, o.fine);
    return s;
}

} // namespace rigsplat
