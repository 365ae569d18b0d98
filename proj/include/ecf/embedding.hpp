#pragma once

#include <cstddef>
#include <random>
#include <span>

#include "ecf/data.hpp"
#include "ecf/tensor.hpp"

namespace ecf {

/// Per-sensor Time2Vec parameters: column 0 is the linear (trend) term,
/// columns 1..m the periodic ones.
struct Time2VecParams {
    Tensor omega;  // [S, m+1]
    Tensor phi;    // [S, m+1]
    std::size_t periodic = 64;

    std::size_t sensors() const { return omega.dim(0); }
    std::size_t embedding_dim() const { return periodic + 1; }

    /// omega, phi ~ Uniform(0, 1).
    static Time2VecParams init(std::size_t sensors, std::size_t periodic, std::mt19937_64& rng);
};

/// Time2Vec of one sensor's value series: [l_w] -> [l_w x (m+1)], with
/// out[t][0] = w0 x_t + p0 and out[t][j] = sin(wj x_t + pj).
Matrix time2vec_forward(std::span<const double> series, std::span<const double> omega, std::span<const double> phi);

/// [l_w x S] window -> [l_w, S, m+1], differentiable in omega and phi.
Tensor embed_window(const Matrix& window, const Time2VecParams& params);

/// Fixed sin/cos positional table [l_w x d] (d even):
/// PE(pos, 2i) = sin(pos / 10000^(2i/d)), PE(pos, 2i+1) = cos(...).
Matrix sinusoidal_pe(std::size_t length, std::size_t d);

/// Replacement embedding for the no-Time2Vec ablation: every point's scalar
/// value is linearly projected to d and the positional row of its timestamp
/// is added.
struct PositionalProjection {
    Tensor weight;  // [1, d]
    Tensor bias;    // [d]

    std::size_t dim() const { return bias.dim(0); }

    static PositionalProjection init(std::size_t d, std::mt19937_64& rng);
};

/// Even width used by the ablation path for a Time2Vec of `periodic` terms.
inline std::size_t positional_dim(std::size_t periodic) { return (periodic + 1) % 2 ? periodic + 2 : periodic + 1; }

/// [l_w x S] window -> [l_w, S, d].
Tensor embed_window_positional(const Matrix& window, const PositionalProjection& params);

}  // namespace ecf
