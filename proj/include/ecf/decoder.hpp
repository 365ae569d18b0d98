#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "ecf/data.hpp"
#include "ecf/layers.hpp"
#include "ecf/tensor.hpp"

namespace ecf {

struct DecoderParams {
    Linear aggregate;                  // sum(layer dims) -> aggregate_dim
    std::vector<Linear> hidden;        // 2*aggregate_dim -> fc_dims...
    std::vector<LayerNormParams> norms;
    Linear head;                       // last fc dim -> S, purely linear
    double dropout = 0.2;
    double leaky_slope = 0.01;

    static DecoderParams init(const std::vector<std::size_t>& layer_dims, std::size_t aggregate_dim,
                              const std::vector<std::size_t>& fc_dims, std::size_t sensors, double dropout,
                              double leaky_slope, std::mt19937_64& rng);
};

/// Concatenates the per-layer encoder outputs [S, l_w, d_l] along features
/// (in layer order) and maps them to [S, l_w, aggregate_dim].
Tensor aggregate_multiscale(const std::vector<Tensor>& layer_outputs, const Linear& aggregate);

/// [S, l_w, F] -> [l_w, 2F]: max over sensors, then mean over sensors.
Tensor global_pool(const Tensor& features);

/// Row-wise FC stack: (fc -> LeakyReLU -> LayerNorm -> dropout)* -> head.
/// [l_w, 2F] -> [l_w, S].
Tensor reconstruct(const Tensor& global_features, const DecoderParams& params, bool training, std::mt19937_64& rng);

/// |x_hat - x| elementwise.
Matrix reconstruction_error(const Matrix& reconstruction, const Matrix& target);

}  // namespace ecf
