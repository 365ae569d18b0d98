#include "ecf/embedding.hpp"

#include <cmath>

#include "ecf/error.hpp"
#include "ecf/ops.hpp"

namespace ecf {

Time2VecParams Time2VecParams::init(std::size_t sensors, std::size_t periodic, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t n = sensors * (periodic + 1);
    std::vector<double> omega(n), phi(n);
    for (auto& w : omega) w = unif(rng);
    for (auto& p : phi) p = unif(rng);
    Time2VecParams params;
    params.omega = Tensor::parameter({sensors, periodic + 1}, std::move(omega));
    params.phi = Tensor::parameter({sensors, periodic + 1}, std::move(phi));
    params.periodic = periodic;
    return params;
}

Matrix time2vec_forward(std::span<const double> series, std::span<const double> omega, std::span<const double> phi) {
    if (omega.size() != phi.size() || omega.empty())
        throw dimension_error("time2vec: omega/phi sizes " + std::to_string(omega.size()) + "/" +
                              std::to_string(phi.size()));
    Matrix out(series.size(), omega.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
        out(t, 0) = omega[0] * series[t] + phi[0];
        for (std::size_t j = 1; j < omega.size(); ++j) out(t, j) = std::sin(omega[j] * series[t] + phi[j]);
    }
    return out;
}

Tensor embed_window(const Matrix& window, const Time2VecParams& params) {
    const std::size_t sensors = params.sensors();
    const std::size_t d = params.embedding_dim();
    if (window.cols != sensors)
        throw dimension_error("embed_window: window has " + std::to_string(window.cols) + " sensors, parameters " +
                              std::to_string(sensors));
    const std::size_t len = window.rows;
    auto omega = params.omega.data();
    auto phi = params.phi.data();
    std::vector<double> out(len * sensors * d);
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t s = 0; s < sensors; ++s) {
            const double x = window(t, s);
            double* dst = out.data() + (t * sensors + s) * d;
            dst[0] = omega[s * d] * x + phi[s * d];
            for (std::size_t j = 1; j < d; ++j) dst[j] = std::sin(omega[s * d + j] * x + phi[s * d + j]);
        }
    }
    const Tensor& w = params.omega;
    const Tensor& p = params.phi;
    return record({len, sensors, d}, std::move(out), {&w, &p},
                  [w, p, window, len, sensors, d](const std::vector<double>& g) {
                      auto omega = w.data();
                      auto phi = p.data();
                      auto& gw = grad_buffer(w);
                      auto& gp = grad_buffer(p);
                      for (std::size_t t = 0; t < len; ++t) {
                          for (std::size_t s = 0; s < sensors; ++s) {
                              const double x = window(t, s);
                              const double* gi = g.data() + (t * sensors + s) * d;
                              gw[s * d] += gi[0] * x;
                              gp[s * d] += gi[0];
                              for (std::size_t j = 1; j < d; ++j) {
                                  const double c = gi[j] * std::cos(omega[s * d + j] * x + phi[s * d + j]);
                                  gw[s * d + j] += c * x;
                                  gp[s * d + j] += c;
                              }
                          }
                      }
                  });
}

Matrix sinusoidal_pe(std::size_t length, std::size_t d) {
    if (d == 0 || d % 2 != 0) throw config_error("positional encoding width must be even, got " + std::to_string(d));
    Matrix pe(length, d);
    for (std::size_t pos = 0; pos < length; ++pos) {
        for (std::size_t i = 0; i < d / 2; ++i) {
            const double angle =
                static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
            pe(pos, 2 * i) = std::sin(angle);
            pe(pos, 2 * i + 1) = std::cos(angle);
        }
    }
    return pe;
}

PositionalProjection PositionalProjection::init(std::size_t d, std::mt19937_64& rng) {
    // fan_in is 1 for a scalar input.
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<double> w(d), b(d);
    for (auto& v : w) v = unif(rng);
    for (auto& v : b) v = unif(rng);
    return {Tensor::parameter({1, d}, std::move(w)), Tensor::parameter({d}, std::move(b))};
}

Tensor embed_window_positional(const Matrix& window, const PositionalProjection& params) {
    const std::size_t len = window.rows, sensors = window.cols, d = params.dim();
    Tensor values({len, sensors, 1}, window.values);
    auto projected = add(matmul(values, params.weight), params.bias);
    const Matrix pe = sinusoidal_pe(len, d);
    std::vector<double> table(len * sensors * d);
    for (std::size_t t = 0; t < len; ++t)
        for (std::size_t s = 0; s < sensors; ++s)
            for (std::size_t j = 0; j < d; ++j) table[(t * sensors + s) * d + j] = pe(t, j);
    return add(projected, Tensor({len, sensors, d}, std::move(table)));
}

}  // namespace ecf
