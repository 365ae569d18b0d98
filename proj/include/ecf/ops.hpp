#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "ecf/tensor.hpp"

namespace ecf {

enum class Activation { relu, leaky_relu, sine, identity };
enum class Reduction { max, mean, sum };

/// [.., m, k] x [k, n] -> [.., m, n] (right operand broadcast over the
/// leading dims), or [b, m, k] x [b, k, n] -> [b, m, n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Swaps the two trailing axes.
Tensor transpose_last(const Tensor& x);

/// Elementwise sum. `b` may also be a trailing-suffix shape of `a`, in which
/// case it is broadcast over the leading axes (bias add).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& x, double factor) { return scale(x, factor); }

Tensor activation(Activation kind, const Tensor& x, double slope = 0.01);
inline Tensor relu(const Tensor& x) { return activation(Activation::relu, x); }
inline Tensor leaky_relu(const Tensor& x, double slope) { return activation(Activation::leaky_relu, x, slope); }
inline Tensor sine(const Tensor& x) { return activation(Activation::sine, x); }

Tensor softmax(const Tensor& x, std::size_t axis);

/// Normalizes over the last axis, then gamma * x_hat + beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Removes `axis`. Max ties route the gradient to the lowest index.
Tensor reduce(Reduction kind, const Tensor& x, std::size_t axis);

/// Inverted dropout; identity when `training` is false or p == 0.
Tensor dropout(const Tensor& x, double p, bool training, std::mt19937_64& rng);

/// (1/rows) * sum of squared residuals, rows = leading dim of a [rows x cols]
/// pair: mean over time of the per-timestamp squared L2 norm.
Tensor mse_loss(const Tensor& reconstruction, const Tensor& target);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor sum_all(const Tensor& x);

}  // namespace ecf
