#include "rigsplat/rasterizer.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rigsplat {

namespace {

Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera &cam, const Vec3 &t) {
    const double inv_z = 1.0 / t.z();
    const double inv_z2 = inv_z * inv_z;
    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx * inv_z, 0.0, -cam.fx * t.x() * inv_z2, 0.0, cam.fy * inv_z, -cam.fy * t.y() * inv_z2;
    return J;
}

bool depth_order(const Splat2D &a, const Splat2D &b) {
    if (a.depth != b.depth) {
        return a.depth < b.depth;
    }
    return a.source_id < b.source_id;
}

} // namespace

std::optional<Splat2D> project_gaussian(const GlobalGaussian &g, const Camera &cam, int source_id) {
    const Vec3 t = cam.world_to_camera.apply(g.mean);
    if (t.z() < cam.near_plane || t.z() > cam.far_plane) {
        return std::nullopt;
    }
    const Eigen::Matrix<double, 2, 3> T = projection_jacobian(cam, t) * cam.world_to_camera.rotation;
    const Mat3 sigma = build_covariance(g.rotation, g.scale);

    Splat2D s;
    s.mean = Vec2(cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy);
    s.cov = T * sigma * T.transpose();
    s.cov(0, 1) = s.cov(1, 0) = 0.5 * (s.cov(0, 1) + s.cov(1, 0));
    s.cov(0, 0) += kLowPassFloor;
    s.cov(1, 1) += kLowPassFloor;
    s.conic = s.cov.inverse();
    s.depth = t.z();
    s.color = g.color;
    s.opacity = g.opacity;
    s.source_id = source_id;
    return s;
}

ProjectionGradient project_gaussian_backward(const GlobalGaussian &g, const Camera &cam, const Vec2 &d_mean2d,
                                             const Mat2 &d_cov2d) {
    const Mat3 &W = cam.world_to_camera.rotation;
    const Vec3 t = cam.world_to_camera.apply(g.mean);
    const Eigen::Matrix<double, 2, 3> J = projection_jacobian(cam, t);
    const Eigen::Matrix<double, 2, 3> T = J * W;
    const Mat3 sigma = build_covariance(g.rotation, g.scale);

    ProjectionGradient out;
    out.cov3d = T.transpose() * d_cov2d * T;

    const Eigen::Matrix<double, 2, 3> dT = (d_cov2d + d_cov2d.transpose()) * T * sigma;
    const Eigen::Matrix<double, 2, 3> dJ = dT * W.transpose();

    const double x = t.x(), y = t.y(), z = t.z();
    const double z2 = z * z, z3 = z2 * z;
    Vec3 dt = J.transpose() * d_mean2d;
    dt.x() += dJ(0, 2) * (-cam.fx / z2);
    dt.y() += dJ(1, 2) * (-cam.fy / z2);
    dt.z() += dJ(0, 0) * (-cam.fx / z2) + dJ(0, 2) * (2.0 * cam.fx * x / z3) + dJ(1, 1) * (-cam.fy / z2) +
              dJ(1, 2) * (2.0 * cam.fy * y / z3);
    out.mean = W.transpose() * dt;
    return out;
}

GlobalGradient splat_gradient_to_global(const GlobalGaussian &g, const Camera &cam, const SplatGradient &grad) {
    const ProjectionGradient pg = project_gaussian_backward(g, cam, grad.mean, grad.cov);
    const CovarianceGradient cg = build_covariance_backward(g.rotation, g.scale, pg.cov3d);
    GlobalGradient out;
    out.mean = pg.mean;
    out.rotation = cg.rotation;
    out.scale = cg.scale;
    out.opacity = grad.opacity;
    out.color = grad.color;
    return out;
}

RenderResult render_forward(std::span<const Splat2D> splats, const Camera &cam, const Vec3 &background,
                            const RenderOptions &options) {
    RenderResult result;
    RenderAux &aux = result.aux;
    const int W = cam.width, H = cam.height, ts = options.tile_size;
    aux.width = W;
    aux.height = H;
    aux.tiles_x = (W + ts - 1) / ts;
    aux.tiles_y = (H + ts - 1) / ts;
    aux.background = background;
    aux.options = options;
    aux.splats.assign(splats.begin(), splats.end());
    aux.tile_lists.assign(static_cast<std::size_t>(aux.tiles_x) * aux.tiles_y, {});
    aux.final_transmittance.assign(static_cast<std::size_t>(W) * H, 1.0);
    aux.contributor_end.assign(static_cast<std::size_t>(W) * H, 0);

    std::vector<int> order(splats.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return depth_order(splats[a], splats[b]); });

    for (int idx : order) {
        const Splat2D &s = splats[idx];
        int tx0 = 0, tx1 = aux.tiles_x - 1, ty0 = 0, ty1 = aux.tiles_y - 1;
        if (options.gaussian_cutoff) {
            const double lambda_max = Eigen::SelfAdjointEigenSolver<Mat2>(s.cov, Eigen::EigenvaluesOnly).eigenvalues()[1];
            const double r = options.cutoff_radius * std::sqrt(std::max(lambda_max, 0.0));
            const double x0 = std::floor(s.mean.x() - r), x1 = std::ceil(s.mean.x() + r);
            const double y0 = std::floor(s.mean.y() - r), y1 = std::ceil(s.mean.y() + r);
            if (!(x1 >= 0.0 && y1 >= 0.0 && x0 <= W - 1 && y0 <= H - 1)) {
                continue;
            }
            tx0 = static_cast<int>(std::max(x0, 0.0)) / ts;
            tx1 = static_cast<int>(std::min(x1, W - 1.0)) / ts;
            ty0 = static_cast<int>(std::max(y0, 0.0)) / ts;
            ty1 = static_cast<int>(std::min(y1, H - 1.0)) / ts;
        }
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                aux.tile_lists[static_cast<std::size_t>(ty) * aux.tiles_x + tx].push_back(idx);
            }
        }
    }

    result.image = Image(W, H);
    const double cutoff2 = options.cutoff_radius * options.cutoff_radius;
    parallel_for(aux.tile_lists.size(), options.threads, [&](std::size_t tile) {
        const auto &list = aux.tile_lists[tile];
        const int tx = static_cast<int>(tile) % aux.tiles_x;
        const int ty = static_cast<int>(tile) / aux.tiles_x;
        for (int py = ty * ts; py < std::min((ty + 1) * ts, H); ++py) {
            for (int px = tx * ts; px < std::min((tx + 1) * ts, W); ++px) {
                double T = 1.0;
                Vec3 c = Vec3::Zero();
                int end = 0;
                for (std::size_t k = 0; k < list.size(); ++k) {
                    const Splat2D &s = aux.splats[list[k]];
                    const Vec2 d(px - s.mean.x(), py - s.mean.y());
                    const double maha = d.dot(s.conic * d);
                    if (options.gaussian_cutoff && maha > cutoff2) {
                        continue;
                    }
                    const double alpha = s.opacity * std::exp(-0.5 * maha);
                    c += s.color * (alpha * T);
                    T *= 1.0 - alpha;
                    end = static_cast<int>(k) + 1;
                    if (T < options.min_transmittance) {
                        break;
                    }
                }
                const std::size_t p = static_cast<std::size_t>(py) * W + px;
                aux.final_transmittance[p] = T;
                aux.contributor_end[p] = end;
                result.image.set_pixel(px, py, c + T * background);
            }
        }
    });
    return result;
}

std::vector<SplatGradient> render_backward(const RenderAux &aux, const Image &d_image) {
    if (d_image.width != aux.width || d_image.height != aux.height ||
        aux.final_transmittance.size() != static_cast<std::size_t>(aux.width) * aux.height ||
        aux.tile_lists.size() != static_cast<std::size_t>(aux.tiles_x) * aux.tiles_y) {
        throw ConsistencyError("render_backward: aux does not match the upstream gradient");
    }
    const int W = aux.width, H = aux.height, ts = aux.options.tile_size;
    const double cutoff2 = aux.options.cutoff_radius * aux.options.cutoff_radius;

    // Per tile, one accumulator per tile-list entry; conic gradients are
    // converted to covariance gradients after the ordered reduction.
    struct Accum {
        Vec2 mean = Vec2::Zero();
        Mat2 conic = Mat2::Zero();
        Vec3 color = Vec3::Zero();
        double opacity = 0.0;
    };
    std::vector<std::vector<Accum>> tile_accum(aux.tile_lists.size());

    parallel_for(aux.tile_lists.size(), aux.options.threads, [&](std::size_t tile) {
        const auto &list = aux.tile_lists[tile];
        auto &acc = tile_accum[tile];
        acc.assign(list.size(), Accum{});
        const int tx = static_cast<int>(tile) % aux.tiles_x;
        const int ty = static_cast<int>(tile) / aux.tiles_x;

        struct Contribution {
            int k;
            double alpha;
            double T;      // transmittance in front of this splat
            double gauss;  // exp(-maha/2)
            Vec2 d;
        };
        std::vector<Contribution> contrib;
        for (int py = ty * ts; py < std::min((ty + 1) * ts, H); ++py) {
            for (int px = tx * ts; px < std::min((tx + 1) * ts, W); ++px) {
                const std::size_t p = static_cast<std::size_t>(py) * W + px;
                const Vec3 g(d_image.at(px, py, 0), d_image.at(px, py, 1), d_image.at(px, py, 2));
                const int end = aux.contributor_end[p];
                contrib.clear();
                double T = 1.0;
                for (int k = 0; k < end; ++k) {
                    const Splat2D &s = aux.splats[list[k]];
                    const Vec2 d(px - s.mean.x(), py - s.mean.y());
                    const double maha = d.dot(s.conic * d);
                    if (aux.options.gaussian_cutoff && maha > cutoff2) {
                        continue;
                    }
                    const double gauss = std::exp(-0.5 * maha);
                    const double alpha = s.opacity * gauss;
                    contrib.push_back({k, alpha, T, gauss, d});
                    T *= 1.0 - alpha;
                }
                // Walk back to front; `behind` is the color seen through each
                // splat, relative to the transmittance just behind it.
                Vec3 behind = aux.background;
                for (auto it = contrib.rbegin(); it != contrib.rend(); ++it) {
                    const Splat2D &s = aux.splats[list[it->k]];
                    Accum &a = acc[it->k];
                    a.color += g * (it->alpha * it->T);
                    const double d_alpha = it->T * g.dot(s.color - behind);
                    a.opacity += d_alpha * it->gauss;
                    // alpha = o·exp(power), power = -½ dᵀ K d
                    const double d_power = d_alpha * it->alpha;
                    a.mean += d_power * (s.conic * it->d);
                    a.conic += (-0.5 * d_power) * (it->d * it->d.transpose());
                    behind = s.color * it->alpha + (1.0 - it->alpha) * behind;
                }
            }
        }
    });

    std::vector<Accum> total(aux.splats.size());
    for (std::size_t tile = 0; tile < aux.tile_lists.size(); ++tile) {
        const auto &list = aux.tile_lists[tile];
        for (std::size_t k = 0; k < list.size(); ++k) {
            Accum &dst = total[list[k]];
            const Accum &src = tile_accum[tile][k];
            dst.mean += src.mean;
            dst.conic += src.conic;
            dst.color += src.color;
            dst.opacity += src.opacity;
        }
    }

    std::vector<SplatGradient> out(aux.splats.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const Mat2 &K = aux.splats[i].conic;
        out[i].mean = total[i].mean;
        out[i].cov = -K.transpose() * total[i].conic * K.transpose();
        out[i].color = total[i].color;
        out[i].opacity = total[i].opacity;
    }
    return out;
}

Image brute_force_render(std::span<const Splat2D> splats, const Camera &cam, const Vec3 &background,
                         const RenderOptions &options) {
    std::vector<const Splat2D *> sorted;
    sorted.reserve(splats.size());
    for (const Splat2D &s : splats) {
        sorted.push_back(&s);
    }
    std::sort(sorted.begin(), sorted.end(), [](const Splat2D *a, const Splat2D *b) {
        return a->depth < b->depth || (a->depth == b->depth && a->source_id < b->source_id);
    });
    std::vector<Mat2> inverse(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        inverse[i] = sorted[i]->cov.inverse();
    }

    Image img(cam.width, cam.height);
    for (int py = 0; py < cam.height; ++py) {
        for (int px = 0; px < cam.width; ++px) {
            double T = 1.0;
            Vec3 c = Vec3::Zero();
            for (std::size_t i = 0; i < sorted.size(); ++i) {
                const Vec2 d = Vec2(px, py) - sorted[i]->mean;
                const double alpha = sorted[i]->opacity * std::exp(-0.5 * d.transpose() * inverse[i] * d);
                c += alpha * T * sorted[i]->color;
                T *= 1.0 - alpha;
                if (T < options.min_transmittance) {
                    break;
                }
            }
            img.set_pixel(px, py, c + T * background);
        }
    }
    return img;
}

} // namespace rigsplat
