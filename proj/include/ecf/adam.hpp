#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ecf/tensor.hpp"

namespace ecf {

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;

    /// Zeroed moments shaped like `params`.
    static AdamState for_params(const std::vector<Tensor>& params, double lr);
};

/// One bias-corrected Adam update, in place. `grads[i]` may be empty, which
/// counts as a zero gradient.
void adam_step(std::vector<Tensor>& params, const std::vector<std::span<const double>>& grads, AdamState& state);

/// Uses each parameter's accumulated gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace ecf
