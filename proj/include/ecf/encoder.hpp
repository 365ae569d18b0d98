#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "ecf/layers.hpp"
#include "ecf/tensor.hpp"

namespace ecf {

/// k nearest neighbours of every point, row-major [n x k]. Row i starts with
/// i itself; the rest follow by ascending squared Euclidean distance, ties
/// by ascending index.
struct KnnGraph {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<std::size_t> neighbors;

    std::span<const std::size_t> row(std::size_t i) const { return {neighbors.data() + i * k, k}; }
};

/// `points` is row-major [n x dim]. Exact O(n^2 dim) search.
KnnGraph knn_graph(std::span<const double> points, std::size_t n, std::size_t dim, std::size_t k);
KnnGraph knn_graph(const Tensor& points, std::size_t k);

struct EdgeConvParams {
    Linear theta;  // neighbour term, no bias
    Linear phi;    // centre term, with bias

    static EdgeConvParams init(std::size_t in, std::size_t out, std::mt19937_64& rng);
};

/// h'_i = max_{j in N(i)} ReLU(Theta (h_j - h_i) + Phi h_i) for H [n x d_in].
/// Theta is linear, so the neighbour term is evaluated as
/// Theta h_j - Theta h_i from one product per point.
Tensor edgeconv_forward(const Tensor& points, const KnnGraph& graph, const EdgeConvParams& params);

struct AttentionParams {
    Linear query;  // no bias
    Linear key;    // no bias
    Linear value;  // no bias
    Linear output;
    LayerNormParams norm1;
    Linear ffn1;
    Linear ffn2;
    LayerNormParams norm2;
    std::size_t heads = 8;

    std::size_t dim() const { return query.in_dim(); }

    static AttentionParams init(std::size_t d, std::size_t heads, std::mt19937_64& rng);
};

/// Self-attention along the time axis of x [S, l_w, h], sensors batched with
/// shared weights:
///   Tr  = LayerNorm(x + MultiHead(x Wq, x Wk, x Wv))
///   out = LayerNorm(Tr + FFN(Tr)),  FFN = Linear -> ReLU -> Linear.
/// When `weights_out` is set it receives the attention weights
/// [S * heads, l_w, l_w].
Tensor attention_block(const Tensor& x, const AttentionParams& params, Tensor* weights_out = nullptr);

struct EncoderLayerParams {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    EdgeConvParams edge;
    Linear projection;  // replaces EdgeConv in the no-EdgeConv ablation
    AttentionParams attention;
};

struct EncoderOptions {
    std::size_t knn_k = 8;
    bool use_edgeconv = true;
    bool use_transformer = true;
};

std::vector<EncoderLayerParams> init_encoder(std::size_t in_dim, const std::vector<std::size_t>& layer_dims,
                                             std::size_t heads, const EncoderOptions& options, std::mt19937_64& rng);

/// embedded [l_w, S, d0] -> one [S, l_w, d_l] output per layer. Each layer
/// flattens its input to l_w*S points, rebuilds the kNN graph on the current
/// features, applies EdgeConv, reshapes to [S, l_w, d] and attends over time.
std::vector<Tensor> encode(const Tensor& embedded, const std::vector<EncoderLayerParams>& layers,
                           const EncoderOptions& options);

}  // namespace ecf
