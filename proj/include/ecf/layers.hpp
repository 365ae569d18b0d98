#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ecf/tensor.hpp"

namespace ecf {

/// y = x W (+ b) over the last axis; W is [in, out].
struct Linear {
    Tensor weight;
    std::optional<Tensor> bias;

    std::size_t in_dim() const { return weight.dim(0); }
    std::size_t out_dim() const { return weight.dim(1); }

    /// Uniform(-1/sqrt(in), 1/sqrt(in)) for weight and bias.
    static Linear init(std::size_t in, std::size_t out, bool with_bias, std::mt19937_64& rng);

    Tensor operator()(const Tensor& x) const;
};

struct LayerNormParams {
    Tensor gamma;
    Tensor beta;

    static LayerNormParams init(std::size_t d);
    Tensor operator()(const Tensor& x) const;
};

/// Named view of trainable tensors; names are stable and used by checkpoints.
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

void collect(NamedParams& out, const std::string& prefix, const Linear& layer);
void collect(NamedParams& out, const std::string& prefix, const LayerNormParams& norm);

}  // namespace ecf
