#include "rigsplat/gaussian.hpp"

#include "rigsplat/math.hpp"

#include <cmath>

namespace rigsplat {

GaussianSet::GaussianSet(int sh_degree) : sh_degree_(sh_degree) {
    if (sh_degree < 0 || sh_degree > 3) {
        throw ConsistencyError("SH degree must be in [0, 3]");
    }
}

LocalGaussian GaussianSet::get(std::size_t i) const {
    LocalGaussian g;
    g.position = position_of(i);
    g.rotation = rotation_of(i);
    g.log_scale = log_scale_of(i);
    g.opacity_logit = opacity_logit[i];
    const auto coeffs = sh_of(i);
    g.sh.assign(coeffs.begin(), coeffs.end());
    g.parent_tri = parent_tri[i];
    return g;
}

void GaussianSet::set(std::size_t i, const LocalGaussian &g) {
    require_size(g.sh.size(), static_cast<std::size_t>(sh_stride()), "gaussian SH coefficients");
    for (int k = 0; k < 3; ++k) {
        position[3 * i + k] = g.position[k];
        log_scale[3 * i + k] = g.log_scale[k];
    }
    for (int k = 0; k < 4; ++k) {
        rotation[4 * i + k] = g.rotation[k];
    }
    opacity_logit[i] = g.opacity_logit;
    std::copy(g.sh.begin(), g.sh.end(), sh.begin() + static_cast<std::ptrdiff_t>(i * sh_stride()));
    parent_tri[i] = g.parent_tri;
}

void GaussianSet::push_back(const LocalGaussian &g) {
    const std::size_t i = size();
    position.resize(position.size() + 3);
    rotation.resize(rotation.size() + 4);
    log_scale.resize(log_scale.size() + 3);
    opacity_logit.push_back(0.0);
    sh.resize(sh.size() + sh_stride());
    parent_tri.push_back(0);
    set(i, g);
}

GaussianSet GaussianSet::select(std::span<const int> indices) const {
    GaussianSet out(sh_degree_);
    const std::size_t n = indices.size();
    const auto stride = static_cast<std::size_t>(sh_stride());
    out.position.resize(3 * n);
    out.rotation.resize(4 * n);
    out.log_scale.resize(3 * n);
    out.opacity_logit.resize(n);
    out.sh.resize(stride * n);
    out.parent_tri.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto i = static_cast<std::size_t>(indices[j]);
        std::copy_n(&position[3 * i], 3, &out.position[3 * j]);
        std::copy_n(&rotation[4 * i], 4, &out.rotation[4 * j]);
        std::copy_n(&log_scale[3 * i], 3, &out.log_scale[3 * j]);
        out.opacity_logit[j] = opacity_logit[i];
        std::copy_n(&sh[stride * i], stride, &out.sh[stride * j]);
        out.parent_tri[j] = parent_tri[i];
    }
    return out;
}

void GaussianSet::validate(std::size_t triangle_count) const {
    for (std::size_t i = 0; i < size(); ++i) {
        if (parent_tri[i] < 0 || static_cast<std::size_t>(parent_tri[i]) >= triangle_count) {
            throw ConsistencyError("gaussian " + std::to_string(i) + " is bound to invalid triangle " +
                                   std::to_string(parent_tri[i]));
        }
    }
}

namespace {

ActivatedGaussian activate(const Vec3 &position, const Vec4 &rotation, const Vec3 &log_scale,
                           double opacity_logit) {
    ActivatedGaussian a;
    a.position = position;
    a.rotation = quat_normalize(rotation);
    a.scale = log_scale.array().exp();
    a.opacity = sigmoid(opacity_logit);
    return a;
}

RawGradient activate_backward(const Vec4 &raw_rotation, const Vec3 &log_scale, double opacity_logit,
                              const ActivatedGradient &grad) {
    RawGradient out;
    out.position = grad.position;
    out.rotation = quat_normalize_jacobian(raw_rotation).transpose() * grad.rotation;
    out.log_scale = grad.scale.cwiseProduct(Vec3(log_scale.array().exp()));
    const double o = sigmoid(opacity_logit);
    out.opacity_logit = grad.opacity * o * (1.0 - o);
    return out;
}

} // namespace

ActivatedGaussian activate_params(const LocalGaussian &g) {
    return activate(g.position, g.rotation, g.log_scale, g.opacity_logit);
}

ActivatedGaussian activate_params(const GaussianSet &set, std::size_t i) {
    return activate(set.position_of(i), set.rotation_of(i), set.log_scale_of(i), set.opacity_logit[i]);
}

RawGradient activate_params_backward(const LocalGaussian &g, const ActivatedGradient &grad) {
    return activate_backward(g.rotation, g.log_scale, g.opacity_logit, grad);
}

RawGradient activate_params_backward(const GaussianSet &set, std::size_t i, const ActivatedGradient &grad) {
    return activate_backward(set.rotation_of(i), set.log_scale_of(i), set.opacity_logit[i], grad);
}

Mat3 build_covariance(const Vec4 &r, const Vec3 &s) {
    const Mat3 M = quat_to_matrix(r) * s.asDiagonal();
    // Fill one triangle and mirror it so Σ is symmetric bit for bit.
    Mat3 sigma;
    for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
            sigma(i, j) = M(i, 0) * M(j, 0) + M(i, 1) * M(j, 1) + M(i, 2) * M(j, 2);
            sigma(j, i) = sigma(i, j);
        }
    }
    return sigma;
}

CovarianceGradient build_covariance_backward(const Vec4 &r, const Vec3 &s, const Mat3 &d_sigma) {
    const Mat3 R = quat_to_matrix(r);
    const Mat3 M = R * s.asDiagonal();
    // Σ = M Mᵀ  =>  ∂L/∂M = (G + Gᵀ) M
    const Mat3 dM = (d_sigma + d_sigma.transpose()) * M;
    CovarianceGradient out;
    for (int j = 0; j < 3; ++j) {
        out.scale[j] = dM.col(j).dot(R.col(j));
    }
    const Mat3 dR = dM * s.asDiagonal();
    out.rotation = quat_to_matrix_backward(r, dR);
    return out;
}

GlobalGaussian bind_to_global(const ActivatedGaussian &g, const TriangleFrame &frame) {
    GlobalGaussian out;
    out.rotation = quat_multiply(matrix_to_quat(frame.rotation), g.rotation);
    out.mean = frame.scale * (frame.rotation * g.position) + frame.centroid;
    out.scale = frame.scale * g.scale;
    out.opacity = g.opacity;
    return out;
}

ActivatedGradient bind_to_global_backward(const TriangleFrame &frame, const GlobalGradient &grad) {
    ActivatedGradient out;
    out.position = frame.scale * (frame.rotation.transpose() * grad.mean);
    out.rotation = quat_left_matrix(matrix_to_quat(frame.rotation)).transpose() * grad.rotation;
    out.scale = frame.scale * grad.scale;
    out.opacity = grad.opacity;
    return out;
}

} // namespace rigsplat
