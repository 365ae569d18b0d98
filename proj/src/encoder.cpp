#include "ecf/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "ecf/error.hpp"
#include "ecf/ops.hpp"

namespace ecf {

KnnGraph knn_graph(std::span<const double> points, std::size_t n, std::size_t dim, std::size_t k) {
    if (points.size() != n * dim)
        throw dimension_error("knn_graph: " + std::to_string(points.size()) + " values for " + std::to_string(n) +
                              " points of dimension " + std::to_string(dim));
    if (k == 0 || k > n)
        throw dimension_error("knn_graph: k = " + std::to_string(k) + " must be in [1, " + std::to_string(n) + "]");

    // Coordinates stored per dimension so the inner loop runs over
    // candidates; each pair still sums its squared differences in dimension
    // order.
    std::vector<double> columns(n * dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < dim; ++c) columns[c * n + i] = points[i * dim + c];

    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* row = dist.data() + i * n;
        std::size_t c = 0;
        for (; c + 4 <= dim; c += 4) {
            const double* c0 = columns.data() + c * n;
            const double *c1 = c0 + n, *c2 = c1 + n, *c3 = c2 + n;
            const double x0 = c0[i], x1 = c1[i], x2 = c2[i], x3 = c3[i];
            for (std::size_t j = i + 1; j < n; ++j) {
                const double d0 = x0 - c0[j], d1 = x1 - c1[j], d2 = x2 - c2[j], d3 = x3 - c3[j];
                row[j] = (((row[j] + d0 * d0) + d1 * d1) + d2 * d2) + d3 * d3;
            }
        }
        for (; c < dim; ++c) {
            const double* col = columns.data() + c * n;
            const double xi = col[i];
            for (std::size_t j = i + 1; j < n; ++j) {
                const double diff = xi - col[j];
                row[j] += diff * diff;
            }
        }
        for (std::size_t j = i + 1; j < n; ++j) dist[j * n + i] = row[j];
    }

    KnnGraph graph;
    graph.n = n;
    graph.k = k;
    graph.neighbors.resize(n * k);
    const std::size_t keep = k - 1;
    std::vector<std::pair<double, std::size_t>> nearest(keep);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = dist.data() + i * n;
        // Candidates arrive by ascending index, so on equal distance the
        // incumbent stays ahead.
        std::size_t filled = 0;
        for (std::size_t j = 0; j < n && keep > 0; ++j) {
            if (j == i) continue;
            const double d = row[j];
            if (filled == keep && !(d < nearest[keep - 1].first)) continue;
            std::size_t pos = filled < keep ? filled++ : keep - 1;
            while (pos > 0 && d < nearest[pos - 1].first) {
                nearest[pos] = nearest[pos - 1];
                --pos;
            }
            nearest[pos] = {d, j};
        }
        graph.neighbors[i * k] = i;
        for (std::size_t q = 0; q < keep; ++q) graph.neighbors[i * k + 1 + q] = nearest[q].second;
    }
    return graph;
}

KnnGraph knn_graph(const Tensor& points, std::size_t k) {
    if (points.rank() != 2) throw dimension_error("knn_graph expects [n x d] points, got " + to_string(points.shape()));
    return knn_graph(points.data(), points.dim(0), points.dim(1), k);
}

EdgeConvParams EdgeConvParams::init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    auto theta = Linear::init(in, out, false, rng);
    auto phi = Linear::init(in, out, true, rng);
    return {std::move(theta), std::move(phi)};
}

namespace {

// out[i,c] = max_{j in N(i)} ReLU(a[j,c] - a[i,c] + b[i,c]); gradient goes to
// the first maximizing neighbour and vanishes where the maximum is <= 0.
Tensor edge_max(const Tensor& a, const Tensor& b, const KnnGraph& graph) {
    const std::size_t n = a.dim(0), d = a.dim(1);
    auto av = a.data();
    auto bv = b.data();
    std::vector<double> out(n * d, 0.0);
    auto winner = std::make_shared<std::vector<std::size_t>>(n * d, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto nbrs = graph.row(i);
        for (std::size_t c = 0; c < d; ++c) {
            const double centre = bv[i * d + c] - av[i * d + c];
            double best = 0.0;
            std::size_t arg = n;
            for (auto j : nbrs) {
                const double v = av[j * d + c] + centre;
                if (v > best) {
                    best = v;
                    arg = j;
                }
            }
            out[i * d + c] = best;
            (*winner)[i * d + c] = arg;
        }
    }
    return record({n, d}, std::move(out), {&a, &b}, [a, b, winner, n, d](const std::vector<double>& g) {
        auto* ga = a.requires_grad() ? &grad_buffer(a) : nullptr;
        auto* gb = b.requires_grad() ? &grad_buffer(b) : nullptr;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < d; ++c) {
                const std::size_t j = (*winner)[i * d + c];
                if (j == n) continue;
                const double gi = g[i * d + c];
                if (ga) {
                    (*ga)[j * d + c] += gi;
                    (*ga)[i * d + c] -= gi;
                }
                if (gb) (*gb)[i * d + c] += gi;
            }
        }
    });
}

}  // namespace

Tensor edgeconv_forward(const Tensor& points, const KnnGraph& graph, const EdgeConvParams& params) {
    if (points.rank() != 2 || points.dim(0) != graph.n)
        throw dimension_error("edgeconv: graph over " + std::to_string(graph.n) + " points applied to " +
                              to_string(points.shape()));
    return edge_max(params.theta(points), params.phi(points), graph);
}

AttentionParams AttentionParams::init(std::size_t d, std::size_t heads, std::mt19937_64& rng) {
    if (heads == 0 || d % heads != 0)
        throw config_error("attention width " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
                           " heads");
    AttentionParams p;
    p.query = Linear::init(d, d, false, rng);
    p.key = Linear::init(d, d, false, rng);
    p.value = Linear::init(d, d, false, rng);
    p.output = Linear::init(d, d, true, rng);
    p.norm1 = LayerNormParams::init(d);
    p.ffn1 = Linear::init(d, d, true, rng);
    p.ffn2 = Linear::init(d, d, true, rng);
    p.norm2 = LayerNormParams::init(d);
    p.heads = heads;
    return p;
}

Tensor attention_block(const Tensor& x, const AttentionParams& params, Tensor* weights_out) {
    if (x.rank() != 3) throw dimension_error("attention_block expects [S, l_w, h], got " + to_string(x.shape()));
    const std::size_t sensors = x.dim(0), len = x.dim(1), h = x.dim(2), heads = params.heads;
    if (heads == 0 || h % heads != 0)
        throw dimension_error("attention_block: width " + std::to_string(h) + " not divisible by " +
                              std::to_string(heads) + " heads");
    if (h != params.dim())
        throw dimension_error("attention_block: input width " + std::to_string(h) + ", parameters " +
                              std::to_string(params.dim()));
    const std::size_t dk = h / heads;

    auto split_heads = [&](const Tensor& t) {
        auto r = reshape(t, {sensors, len, heads, dk});
        return reshape(permute(r, {0, 2, 1, 3}), {sensors * heads, len, dk});
    };
    const auto q = split_heads(params.query(x));
    const auto k = split_heads(params.key(x));
    const auto v = split_heads(params.value(x));
    auto scores = scale(matmul(q, transpose_last(k)), 1.0 / std::sqrt(static_cast<double>(dk)));
    auto weights = softmax(scores, 2);
    if (weights_out) *weights_out = weights;
    auto context = reshape(matmul(weights, v), {sensors, heads, len, dk});
    context = reshape(permute(context, {0, 2, 1, 3}), {sensors, len, h});

    auto tr = params.norm1(add(x, params.output(context)));
    auto ff = params.ffn2(relu(params.ffn1(tr)));
    return params.norm2(add(tr, ff));
}

std::vector<EncoderLayerParams> init_encoder(std::size_t in_dim, const std::vector<std::size_t>& layer_dims,
                                             std::size_t heads, const EncoderOptions& options, std::mt19937_64& rng) {
    std::vector<EncoderLayerParams> layers;
    std::size_t d_in = in_dim;
    for (auto d_out : layer_dims) {
        EncoderLayerParams layer;
        layer.in_dim = d_in;
        layer.out_dim = d_out;
        if (options.use_edgeconv)
            layer.edge = EdgeConvParams::init(d_in, d_out, rng);
        else
            layer.projection = Linear::init(d_in, d_out, true, rng);
        if (options.use_transformer) layer.attention = AttentionParams::init(d_out, heads, rng);
        layers.push_back(std::move(layer));
        d_in = d_out;
    }
    return layers;
}

std::vector<Tensor> encode(const Tensor& embedded, const std::vector<EncoderLayerParams>& layers,
                           const EncoderOptions& options) {
    if (embedded.rank() != 3) throw dimension_error("encode expects [l_w, S, d], got " + to_string(embedded.shape()));
    const std::size_t len = embedded.dim(0), sensors = embedded.dim(1);
    std::vector<Tensor> outputs;
    // Points are ordered timestamp-major: index = t * S + s.
    Tensor points = reshape(embedded, {len * sensors, embedded.dim(2)});
    for (const auto& layer : layers) {
        if (points.dim(1) != layer.in_dim)
            throw dimension_error("encoder layer expects width " + std::to_string(layer.in_dim) + ", got " +
                                  std::to_string(points.dim(1)));
        Tensor mixed = options.use_edgeconv
                           ? edgeconv_forward(points, knn_graph(points, options.knn_k), layer.edge)
                           : layer.projection(points);
        Tensor per_sensor = permute(reshape(mixed, {len, sensors, layer.out_dim}), {1, 0, 2});
        if (options.use_transformer) per_sensor = attention_block(per_sensor, layer.attention);
        outputs.push_back(per_sensor);
        points = reshape(permute(per_sensor, {1, 0, 2}), {len * sensors, layer.out_dim});
    }
    return outputs;
}

}  // namespace ecf
