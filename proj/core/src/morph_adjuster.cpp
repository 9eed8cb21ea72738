#include "rigsplat/morph_adjuster.hpp"

#include "rigsplat/math.hpp"

namespace rigsplat {

namespace {

std::vector<int> mlp_sizes(int input, int hidden, int layers, int output) {
    std::vector<int> sizes{input};
    for (int l = 0; l < layers; ++l) {
        sizes.push_back(hidden);
    }
    sizes.push_back(output);
    return sizes;
}

} // namespace

MorphAdjuster::MorphAdjuster(const AdjusterConfig &config, const Aabb &domain, int driving_dim)
    : config_(config), domain_(domain) {
    if (config.latent_dim <= 0 || driving_dim <= 0) {
        throw SizeError("morph adjuster needs positive latent and driving dimensions");
    }
    if (config.encoding == EncodingMode::triplane) {
        triplane = TriPlane(domain, config.resolutions, config.channels);
    }
    basis_net = Mlp(mlp_sizes(feature_dim(), config.basis_hidden, config.basis_layers, 10 * config.latent_dim));
    latent_net = Mlp(mlp_sizes(driving_dim, config.latent_hidden, config.latent_layers, config.latent_dim));
}

void MorphAdjuster::init(std::mt19937_64 &rng) {
    if (config_.encoding == EncodingMode::triplane) {
        triplane.init_uniform(rng, config_.triplane_init);
    }
    basis_net.init(rng, /*zero_output_layer=*/true);
    latent_net.init(rng, /*zero_output_layer=*/false);
}

int MorphAdjuster::feature_dim() const {
    return config_.encoding == EncodingMode::triplane ? triplane.feature_dim() : 6 * config_.fourier_bands;
}

RowMatrix MorphAdjuster::encode_positions(std::span<const Vec3> positions) const {
    RowMatrix features(static_cast<Eigen::Index>(positions.size()), feature_dim());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        std::span<double> row(features.row(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(feature_dim()));
        if (config_.encoding == EncodingMode::triplane) {
            triplane.encode(positions[i], row);
        } else {
            fourier_encode(domain_.normalize(positions[i]), config_.fourier_bands, row);
        }
    }
    return features;
}

void MorphAdjuster::encode_positions_backward(std::span<const Vec3> positions, const RowMatrix &d_features,
                                              std::span<double> d_triplane) const {
    if (config_.encoding != EncodingMode::triplane) {
        return;
    }
    for (std::size_t i = 0; i < positions.size(); ++i) {
        std::span<const double> row(d_features.row(static_cast<Eigen::Index>(i)).data(),
                                    static_cast<std::size_t>(feature_dim()));
        triplane.encode_backward(positions[i], row, d_triplane);
    }
}

RowMatrix MorphAdjuster::predict_basis(const RowMatrix &features, Mlp::Cache *cache) const {
    return basis_net.forward(features, cache);
}

Eigen::VectorXd MorphAdjuster::encode_driving(std::span<const double> psi, std::span<const double> theta,
                                              Mlp::Cache *cache) const {
    require_size(psi.size() + theta.size(), static_cast<std::size_t>(driving_dim()), "driving parameters");
    RowMatrix input(1, driving_dim());
    std::size_t k = 0;
    for (double v : psi) {
        input(0, static_cast<Eigen::Index>(k++)) = v;
    }
    for (double v : theta) {
        input(0, static_cast<Eigen::Index>(k++)) = v;
    }
    return latent_net.forward(input, cache).row(0).transpose();
}

DeformBasis MorphAdjuster::basis_of(const RowMatrix &flat, std::size_t i) const {
    const int d = config_.latent_dim;
    DeformBasis W(10, d);
    for (int r = 0; r < 10; ++r) {
        for (int c = 0; c < d; ++c) {
            W(r, c) = flat(static_cast<Eigen::Index>(i), r * d + c);
        }
    }
    return W;
}

GlobalGaussian apply_delta(const GlobalGaussian &g, const DeformDelta &delta, double min_scale) {
    GlobalGaussian out = g;
    out.mean = g.mean + delta.segment<3>(0);
    out.rotation = quat_normalize(g.rotation + delta.segment<4>(3));
    out.scale = (g.scale + delta.segment<3>(7)).cwiseMax(min_scale);
    return out;
}

DeformationGradient apply_delta_backward(const GlobalGaussian &g, const DeformDelta &delta,
                                         const GlobalGradient &grad, double min_scale) {
    DeformationGradient out;
    out.coarse = grad;
    out.delta.segment<3>(0) = grad.mean;

    const Vec4 d_rot = quat_normalize_jacobian(g.rotation + delta.segment<4>(3)).transpose() * grad.rotation;
    out.coarse.rotation = d_rot;
    out.delta.segment<4>(3) = d_rot;

    const Vec3 s = g.scale + delta.segment<3>(7);
    for (int k = 0; k < 3; ++k) {
        const double pass = s[k] < min_scale ? 0.0 : grad.scale[k];
        out.coarse.scale[k] = pass;
        out.delta[7 + k] = pass;
    }
    return out;
}

GlobalGaussian apply_deformation(const GlobalGaussian &g, const DeformBasis &W, const Eigen::VectorXd &f,
                                 double min_scale) {
    require_size(static_cast<std::size_t>(W.cols()), static_cast<std::size_t>(f.size()), "deformation latent");
    return apply_delta(g, W * f, min_scale);
}

DeformationGradient apply_deformation_backward(const GlobalGaussian &g, const DeformBasis &W,
                                               const Eigen::VectorXd &f, const GlobalGradient &grad,
                                               double min_scale) {
    return apply_delta_backward(g, W * f, grad, min_scale);
}

} // namespace rigsplat
