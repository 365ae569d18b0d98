#include "ecf/adam.hpp"

#include <cmath>

#include "ecf/error.hpp"

namespace ecf {

AdamState AdamState::for_params(const std::vector<Tensor>& params, double lr) {
    AdamState state;
    state.lr = lr;
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.size(), 0.0);
        state.second_moment.emplace_back(p.size(), 0.0);
    }
    return state;
}

void adam_step(std::vector<Tensor>& params, const std::vector<std::span<const double>>& grads, AdamState& state) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size())
        throw dimension_error("adam_step: " + std::to_string(params.size()) + " params, " +
                              std::to_string(grads.size()) + " grads, " + std::to_string(state.first_moment.size()) +
                              " moment buffers");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (state.first_moment[i].size() != params[i].size() || state.second_moment[i].size() != params[i].size() ||
            (!grads[i].empty() && grads[i].size() != params[i].size()))
            throw dimension_error("adam_step: buffer size mismatch for parameter " + std::to_string(i) + " of shape " +
                                  to_string(params[i].shape()));
    }
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i].mutable_data();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        const auto g = grads[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double gj = g.empty() ? 0.0 : g[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
            w[j] -= state.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.eps);
        }
    }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
    std::vector<std::span<const double>> grads;
    grads.reserve(params.size());
    for (const auto& p : params) grads.push_back(p.grad());
    adam_step(params, grads, state);
}

}  // namespace ecf
