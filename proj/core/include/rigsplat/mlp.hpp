#pragma once

#include "rigsplat/common.hpp"

#include <random>
#include <span>
#include <vector>

namespace rigsplat {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Fully connected network with softplus hidden activations and a linear
/// output layer. Rows of the input matrix are independent samples.
class Mlp {
public:
    Mlp() = default;
    /// layer_sizes = {input, hidden..., output}.
    explicit Mlp(std::vector<int> layer_sizes);

    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    const std::vector<int> &layer_sizes() const { return sizes_; }
    std::size_t param_count() const { return params.size(); }

    /// U(-1/√fan_in, 1/√fan_in) for weights and biases; optionally zero the
    /// output layer.
    void init(std::mt19937_64 &rng, bool zero_output_layer);

    struct Cache {
        std::vector<RowMatrix> pre;          ///< pre-activation per layer
        std::vector<RowMatrix> activations;  ///< activations[0] = input
    };

    RowMatrix forward(const RowMatrix &input, Cache *cache = nullptr) const;
    /// Accumulates ∂L/∂params into d_params and returns ∂L/∂input.
    RowMatrix backward(const Cache &cache, const RowMatrix &d_output, std::span<double> d_params) const;

    /// Weights [out][in] then biases [out], layer by layer.
    std::vector<double> params;

private:
    std::vector<int> sizes_;
    std::vector<std::size_t> offsets_;

    Eigen::Map<const RowMatrix> weights(std::size_t layer) const;
    Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;
};

} // namespace rigsplat
