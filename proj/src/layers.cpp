#include "ecf/layers.hpp"

#include <cmath>

#include "ecf/ops.hpp"

namespace ecf {

Linear Linear::init(std::size_t in, std::size_t out, bool with_bias, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> unif(-bound, bound);
    std::vector<double> w(in * out);
    for (auto& v : w) v = unif(rng);
    Linear layer{Tensor::parameter({in, out}, std::move(w)), std::nullopt};
    if (with_bias) {
        std::vector<double> b(out);
        for (auto& v : b) v = unif(rng);
        layer.bias = Tensor::parameter({out}, std::move(b));
    }
    return layer;
}

Tensor Linear::operator()(const Tensor& x) const {
    auto y = matmul(x, weight);
    return bias ? add(y, *bias) : y;
}

LayerNormParams LayerNormParams::init(std::size_t d) {
    return {Tensor::parameter({d}, std::vector<double>(d, 1.0)), Tensor::parameter({d}, std::vector<double>(d, 0.0))};
}

Tensor LayerNormParams::operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }

void collect(NamedParams& out, const std::string& prefix, const Linear& layer) {
    out.emplace_back(prefix + ".weight", layer.weight);
    if (layer.bias) out.emplace_back(prefix + ".bias", *layer.bias);
}

void collect(NamedParams& out, const std::string& prefix, const LayerNormParams& norm) {
    out.emplace_back(prefix + ".gamma", norm.gamma);
    out.emplace_back(prefix + ".beta", norm.beta);
}

}  // namespace ecf
