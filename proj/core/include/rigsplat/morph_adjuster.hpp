#pragma once

#include "rigsplat/common.hpp"
#include "rigsplat/gaussian.hpp"
#include "rigsplat/mlp.hpp"
#include "rigsplat/triplane.hpp"

#include <random>
#include <span>
#include <vector>

namespace rigsplat {

/// Rows: 3 position, 4 rotation, 3 scale. Columns: latent dimension.
using DeformBasis = Eigen::Matrix<double, 10, Eigen::Dynamic>;

struct AdjusterConfig {
    int latent_dim = 32;
    std::vector<int> resolutions{64, 128, 256};
    int channels = 4;
    int basis_hidden = 64;
    int basis_layers = 2;
    int latent_hidden = 64;
    int latent_layers = 2;
    EncodingMode encoding = EncodingMode::triplane;
    int fourier_bands = 8;
    double min_scale = 1e-6;
    double triplane_init = 1e-4;
};

/// Per-Gaussian deformation bases from a position encoding, a driving
/// latent from (ψ, θ), and their product as position/rotation/scale offsets.
class MorphAdjuster {
public:
    MorphAdjuster() = default;
    MorphAdjuster(const AdjusterConfig &config, const Aabb &domain, int driving_dim);

    void init(std::mt19937_64 &rng);

    const AdjusterConfig &config() const { return config_; }
    const Aabb &domain() const { return domain_; }
    int driving_dim() const { return latent_net.input_dim(); }
    int feature_dim() const;

    /// One row per position. Out-of-domain positions clamp to the boundary.
    RowMatrix encode_positions(std::span<const Vec3> positions) const;
    void encode_positions_backward(std::span<const Vec3> positions, const RowMatrix &d_features,
                                   std::span<double> d_triplane) const;

    /// Flattened bases, one row of 10·d values (row-major 10×d) per Gaussian.
    RowMatrix predict_basis(const RowMatrix &features, Mlp::Cache *cache = nullptr) const;

    Eigen::VectorXd encode_driving(std::span<const double> psi, std::span<const double> theta,
                                   Mlp::Cache *cache = nullptr) const;

    /// Row i of predict_basis output as a 10×d matrix.
    DeformBasis basis_of(const RowMatrix &flat, std::size_t i) const;

    TriPlane triplane;   ///< empty in Fourier mode
    Mlp basis_net;
    Mlp latent_net;

private:
    AdjusterConfig config_;
    Aabb domain_;
};

using DeformDelta = Eigen::Matrix<double, 10, 1>;

/// μ = μ'+Δμ, r = normalize(r'+Δr), s = max(s'+Δs, min_scale) for a given
/// 10-vector delta. A zero delta still renormalizes r and clamps s.
GlobalGaussian apply_delta(const GlobalGaussian &g, const DeformDelta &delta, double min_scale = 1e-6);

/// (Δμ, Δr, Δs) = W·f; μ = μ'+Δμ, r = normalize(r'+Δr), s = max(s'+Δs, min_scale).
GlobalGaussian apply_deformation(const GlobalGaussian &g, const DeformBasis &W, const Eigen::VectorXd &f,
                                 double min_scale = 1e-6);

struct DeformationGradient {
    GlobalGradient coarse;                               ///< w.r.t. the input Gaussian
    DeformDelta delta = DeformDelta::Zero();   ///< w.r.t. W·f
};
DeformationGradient apply_delta_backward(const GlobalGaussian &g, const DeformDelta &delta,
                                         const GlobalGradient &grad, double min_scale = 1e-6);
DeformationGradient apply_deformation_backward(const GlobalGaussian &g, const DeformBasis &W,
                                               const Eigen::VectorXd &f, const GlobalGradient &grad,
                                               double min_scale = 1e-6);

} // namespace rigsplat
