#include "ecf/decoder.hpp"

#include <cmath>
#include <numeric>

#include "ecf/error.hpp"
#include "ecf/ops.hpp"

namespace ecf {

DecoderParams DecoderParams::init(const std::vector<std::size_t>& layer_dims, std::size_t aggregate_dim,
                                  const std::vector<std::size_t>& fc_dims, std::size_t sensors, double dropout,
                                  double leaky_slope, std::mt19937_64& rng) {
    DecoderParams p;
    const std::size_t concat_dim = std::accumulate(layer_dims.begin(), layer_dims.end(), std::size_t{0});
    p.aggregate = Linear::init(concat_dim, aggregate_dim, true, rng);
    std::size_t d = 2 * aggregate_dim;
    for (auto width : fc_dims) {
        p.hidden.push_back(Linear::init(d, width, true, rng));
        p.norms.push_back(LayerNormParams::init(width));
        d = width;
    }
    p.head = Linear::init(d, sensors, true, rng);
    p.dropout = dropout;
    p.leaky_slope = leaky_slope;
    return p;
}

Tensor aggregate_multiscale(const std::vector<Tensor>& layer_outputs, const Linear& aggregate) {
    if (layer_outputs.empty()) throw dimension_error("aggregate_multiscale: no encoder outputs");
    std::size_t total = 0;
    for (const auto& t : layer_outputs) {
        if (t.rank() != 3) throw dimension_error("aggregate_multiscale: output of shape " + to_string(t.shape()));
        total += t.dim(2);
    }
    if (total != aggregate.in_dim())
        throw dimension_error("aggregate_multiscale: concatenated width " + std::to_string(total) + ", expected " +
                              std::to_string(aggregate.in_dim()));
    return aggregate(concat(layer_outputs, 2));
}

Tensor global_pool(const Tensor& features) {
    if (features.rank() != 3) throw dimension_error("global_pool expects [S, l_w, F], got " + to_string(features.shape()));
    return concat({reduce(Reduction::max, features, 0), reduce(Reduction::mean, features, 0)}, 1);
}

Tensor reconstruct(const Tensor& global_features, const DecoderParams& params, bool training, std::mt19937_64& rng) {
    Tensor h = global_features;
    for (std::size_t i = 0; i < params.hidden.size(); ++i) {
        h = leaky_relu(params.hidden[i](h), params.leaky_slope);
        h = params.norms[i](h);
        h = dropout(h, params.dropout, training, rng);
    }
    return params.head(h);
}

Matrix reconstruction_error(const Matrix& reconstruction, const Matrix& target) {
    if (reconstruction.rows != target.rows || reconstruction.cols != target.cols)
        throw dimension_error("reconstruction_error: [" + std::to_string(reconstruction.rows) + "x" +
                              std::to_string(reconstruction.cols) + "] vs [" + std::to_string(target.rows) + "x" +
                              std::to_string(target.cols) + "]");
    Matrix er(target.rows, target.cols);
    for (std::size_t i = 0; i < er.values.size(); ++i)
        er.values[i] = std::abs(reconstruction.values[i] - target.values[i]);
    return er;
}

}  // namespace ecf
