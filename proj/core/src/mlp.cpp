#include "rigsplat/mlp.hpp"

#include <cmath>

namespace rigsplat {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double softplus_grad(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

} // namespace

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) {
        throw SizeError("an MLP needs at least input and output sizes");
    }
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) {
            throw SizeError("MLP layer sizes must be positive");
        }
        offsets_.push_back(offset);
        offset += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    params.assign(offset, 0.0);
}

Eigen::Map<const RowMatrix> Mlp::weights(std::size_t layer) const {
    return {params.data() + offsets_[layer], sizes_[layer + 1], sizes_[layer]};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t layer) const {
    return {params.data() + offsets_[layer] + static_cast<std::size_t>(sizes_[layer + 1]) * sizes_[layer],
            sizes_[layer + 1]};
}

void Mlp::init(std::mt19937_64 &rng, bool zero_output_layer) {
    const std::size_t layers = sizes_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t count = static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
        double *p = params.data() + offsets_[l];
        if (zero_output_layer && l + 1 == layers) {
            std::fill(p, p + count, 0.0);
            continue;
        }
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (std::size_t k = 0; k < count; ++k) {
            p[k] = dist(rng);
        }
    }
}

RowMatrix Mlp::forward(const RowMatrix &input, Cache *cache) const {
    if (input.cols() != input_dim()) {
        throw SizeError("MLP input has " + std::to_string(input.cols()) + " features, expected " +
                        std::to_string(input_dim()));
    }
    const std::size_t layers = sizes_.size() - 1;
    if (cache != nullptr) {
        cache->pre.clear();
        cache->activations.clear();
        cache->activations.push_back(input);
    }
    RowMatrix x = input;
    for (std::size_t l = 0; l < layers; ++l) {
        RowMatrix z = x * weights(l).transpose();
        z.rowwise() += bias(l).transpose();
        if (l + 1 == layers) {
            if (cache != nullptr) {
                cache->pre.push_back(z);
            }
            return z;
        }
        RowMatrix a = z.unaryExpr([](double v) { return softplus(v); });
        if (cache != nullptr) {
            cache->pre.push_back(std::move(z));
            cache->activations.push_back(a);
        }
        x = std::move(a);
    }
    return x;
}

RowMatrix Mlp::backward(const Cache &cache, const RowMatrix &d_output, std::span<double> d_params) const {
    require_size(d_params.size(), params.size(), "MLP gradient");
    const std::size_t layers = sizes_.size() - 1;
    RowMatrix dz = d_output;
    for (std::size_t l = layers; l-- > 0;) {
        const RowMatrix &x = cache.activations[l];
        Eigen::Map<RowMatrix> dW(d_params.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
        Eigen::Map<Eigen::VectorXd> db(
            d_params.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]);
        dW.noalias() += dz.transpose() * x;
        db += dz.colwise().sum().transpose();
        RowMatrix dx = dz * weights(l);
        if (l == 0) {
            return dx;
        }
        dz = dx.cwiseProduct(cache.pre[l - 1].unaryExpr([](double v) { return softplus_grad(v); }));
    }
    return dz;
}

} // namespace rigsplat
