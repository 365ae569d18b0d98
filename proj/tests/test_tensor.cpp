#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ecf/adam.hpp"
#include "ecf/error.hpp"
#include "ecf/ops.hpp"
#include "oracles.hpp"

using namespace ecf;

namespace {

Tensor random_param(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = u(rng);
    return Tensor::parameter(std::move(shape), std::move(v));
}

Tensor random_const(Shape shape, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = u(rng);
    return Tensor(std::move(shape), std::move(v));
}

// Projects an op output onto fixed random weights so every output element
// contributes to the scalar under test.
Tensor project(const Tensor& y, const Tensor& w) { return sum_all(mul(y, w)); }

void expect_grad(const std::function<Tensor(const std::vector<Tensor>&)>& op, std::vector<Tensor> inputs,
                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tensor probe;
    {
        NoGradGuard g;
        probe = random_const(op(inputs).shape(), rng);
    }
    auto r = oracle::check_gradients([&] { return project(op(inputs), probe); }, inputs);
    EXPECT_LE(r.worst, 1e-4) << "seed " << seed;
}

}  // namespace

TEST(Tensor, ParameterAccumulatesAcrossBackward) {
    auto w = Tensor::parameter({2}, {1.0, 2.0});
    backward(sum_all(scale(w, 3.0)));
    backward(sum_all(scale(w, 3.0)));
    EXPECT_DOUBLE_EQ(w.grad()[0], 6.0);
    w.zero_grad();
    EXPECT_FALSE(w.has_grad());
}

TEST(Tensor, NoGradSkipsTape) {
    auto w = Tensor::parameter({3}, {1, 2, 3});
    {
        NoGradGuard g;
        auto y = mul(w, w);
        EXPECT_EQ(tape_size(), 0u);
        EXPECT_FALSE(y.requires_grad());
    }
    auto y = mul(w, w);
    EXPECT_GT(tape_size(), 0u);
    clear_tape();
}

TEST(Tensor, BackwardRejectsNonScalar) {
    auto w = Tensor::parameter({2}, {1, 2});
    auto y = scale(w, 2.0);
    EXPECT_THROW(backward(y), Error);
    clear_tape();
}

TEST(Tensor, MatmulShapeErrorNamesBothShapes) {
    Tensor a({2, 3}), b({4, 5});
    try {
        matmul(a, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::dimension);
        EXPECT_NE(std::string(e.what()).find("[2,3]"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("[4,5]"), std::string::npos);
    }
}

TEST(Tensor, MatmulValues) {
    Tensor a({2, 2}, {1, 2, 3, 4}), b({2, 2}, {5, 6, 7, 8});
    auto c = matmul(a, b);
    EXPECT_EQ(c.shape(), (Shape{2, 2}));
    EXPECT_DOUBLE_EQ(c.at({0, 0}), 19);
    EXPECT_DOUBLE_EQ(c.at({1, 1}), 50);
}

TEST(Tensor, SoftmaxRowsSumToOneAndSurviveLargeLogits) {
    Tensor x({2, 3}, {1000, 1001, 1002, -5, 0, 5});
    auto y = softmax(x, 1);
    for (std::size_t r = 0; r < 2; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 3; ++c) {
            EXPECT_TRUE(std::isfinite(y.at({r, c})));
            s += y.at({r, c});
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Tensor, LayerNormZeroMeanUnitVariance) {
    std::mt19937_64 rng(3);
    auto x = random_const({4, 16}, rng);
    auto y = layer_norm(x, Tensor({16}, 1.0), Tensor({16}, 0.0));
    for (std::size_t r = 0; r < 4; ++r) {
        double m = 0, v = 0;
        for (std::size_t c = 0; c < 16; ++c) m += y.at({r, c});
        m /= 16;
        for (std::size_t c = 0; c < 16; ++c) v += (y.at({r, c}) - m) * (y.at({r, c}) - m);
        EXPECT_NEAR(m, 0.0, 1e-12);
        EXPECT_NEAR(v / 16, 1.0, 1e-3);
    }
}

TEST(Tensor, ReduceMaxTieGoesToLowestIndex) {
    auto x = Tensor::parameter({3, 1}, {2.0, 2.0, 1.0});
    backward(sum_all(reduce(Reduction::max, x, 0)));
    EXPECT_EQ(x.grad()[0], 1.0);
    EXPECT_EQ(x.grad()[1], 0.0);
}

TEST(Tensor, ReluDerivativeAtZeroIsZero) {
    auto x = Tensor::parameter({1}, {0.0});
    backward(sum_all(relu(x)));
    EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Tensor, DropoutRejectsBadRateAndIsIdentityInEval) {
    std::mt19937_64 rng(1);
    Tensor x({4}, {1, 2, 3, 4});
    EXPECT_THROW(dropout(x, 1.0, true, rng), Error);
    EXPECT_THROW(dropout(x, -0.1, true, rng), Error);
    auto y = dropout(x, 0.5, false, rng);
    EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), std::vector<double>({1, 2, 3, 4}));
}

TEST(Tensor, DropoutKeepsExpectation) {
    std::mt19937_64 rng(11);
    Tensor x({20000}, 1.0);
    auto y = dropout(x, 0.2, true, rng);
    double s = 0;
    for (double v : y.data()) s += v;
    EXPECT_NEAR(s / 20000.0, 1.0, 0.02);
}

TEST(Tensor, PermuteAndReshapeRoundTrip) {
    std::mt19937_64 rng(5);
    auto x = random_const({2, 3, 4}, rng);
    auto y = permute(permute(x, {2, 0, 1}), {1, 2, 0});
    EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()),
              std::vector<double>(x.data().begin(), x.data().end()));
    EXPECT_THROW(reshape(x, {5, 5}), Error);
}

TEST(Tensor, MseLossIsMeanOverRowsOfSquaredNorm) {
    Tensor a({2, 2}, {1, 1, 0, 0}), b({2, 2}, {0, 0, 0, 2});
    EXPECT_DOUBLE_EQ(mse_loss(a, b).item(), (2.0 + 4.0) / 2.0);
}

// Finite-difference checks of every op over many seeds.
class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, AllOps) {
    const auto seed = static_cast<std::uint64_t>(GetParam());
    std::mt19937_64 rng(seed);
    auto P = [&](Shape s) { return random_param(std::move(s), rng); };

    expect_grad([](auto& in) { return matmul(in[0], in[1]); }, {P({2, 3, 4}), P({4, 5})}, seed);
    expect_grad([](auto& in) { return matmul(in[0], in[1]); }, {P({3, 2, 4}), P({3, 4, 2})}, seed);
    expect_grad([](auto& in) { return transpose_last(in[0]); }, {P({2, 3, 4})}, seed);
    expect_grad([](auto& in) { return add(in[0], in[1]); }, {P({3, 4}), P({3, 4})}, seed);
    expect_grad([](auto& in) { return add(in[0], in[1]); }, {P({2, 3, 4}), P({4})}, seed);
    expect_grad([](auto& in) { return sub(in[0], in[1]); }, {P({3, 4}), P({3, 4})}, seed);
    expect_grad([](auto& in) { return mul(in[0], in[1]); }, {P({3, 4}), P({3, 4})}, seed);
    expect_grad([](auto& in) { return scale(in[0], -1.7); }, {P({5})}, seed);
    for (auto a : {Activation::relu, Activation::leaky_relu, Activation::sine, Activation::identity})
        expect_grad([a](auto& in) { return activation(a, in[0], 0.01); }, {P({4, 5})}, seed);
    for (std::size_t axis = 0; axis < 3; ++axis)
        expect_grad([axis](auto& in) { return softmax(in[0], axis); }, {P({2, 3, 4})}, seed);
    expect_grad([](auto& in) { return layer_norm(in[0], in[1], in[2]); }, {P({3, 6}), P({6}), P({6})}, seed);
    for (auto kind : {Reduction::max, Reduction::mean, Reduction::sum})
        for (std::size_t axis = 0; axis < 3; ++axis)
            expect_grad([kind, axis](auto& in) { return reduce(kind, in[0], axis); }, {P({3, 2, 4})}, seed);
    expect_grad(
        [seed](auto& in) {
            std::mt19937_64 mask(seed);  // same mask on every evaluation
            return dropout(in[0], 0.3, true, mask);
        },
        {P({4, 5})}, seed);
    expect_grad([](auto& in) { return mse_loss(in[0], in[1]); }, {P({4, 3}), P({4, 3})}, seed);
    expect_grad([](auto& in) { return reshape(in[0], {6, 4}); }, {P({2, 3, 4})}, seed);
    expect_grad([](auto& in) { return permute(in[0], {2, 0, 1}); }, {P({2, 3, 4})}, seed);
    expect_grad([](auto& in) { return concat({in[0], in[1]}, 1); }, {P({2, 3, 4}), P({2, 1, 4})}, seed);
    expect_grad([](auto& in) { return concat({in[0], in[1]}, 1); }, {P({2, 3}), P({2, 5})}, seed);
    expect_grad([](auto& in) { return sum_all(in[0]); }, {P({3, 3})}, seed);
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradient, ::testing::Range(0, 100));

TEST(Adam, FirstStepMovesByLearningRate) {
    auto w = Tensor::parameter({3}, {1.0, -2.0, 0.5});
    std::vector<Tensor> params{w};
    auto state = AdamState::for_params(params, 0.1);
    std::vector<double> g{0.3, -5.0, 0.0};
    adam_step(params, {std::span<const double>(g)}, state);
    // Bias-corrected first step is lr * sign(g) (up to eps).
    EXPECT_NEAR(w.data()[0], 0.9, 1e-6);
    EXPECT_NEAR(w.data()[1], -1.9, 1e-6);
    EXPECT_DOUBLE_EQ(w.data()[2], 0.5);
    EXPECT_EQ(state.step_count, 1u);
}

TEST(Adam, MatchesHandRolledUpdateOverSteps) {
    auto w = Tensor::parameter({1}, {2.0});
    std::vector<Tensor> params{w};
    auto state = AdamState::for_params(params, 0.01);
    double x = 2.0, m = 0, v = 0;
    for (int t = 1; t <= 20; ++t) {
        w.zero_grad();
        backward(sum_all(mul(w, w)));
        adam_step(params, state);
        const double g = 2 * x;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
        x -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
        EXPECT_NEAR(w.data()[0], x, 1e-12);
    }
}

TEST(Adam, ShapeMismatchThrows) {
    auto w = Tensor::parameter({2}, {0, 0});
    std::vector<Tensor> params{w};
    auto state = AdamState::for_params(params, 0.1);
    std::vector<double> g{1.0};
    EXPECT_THROW(adam_step(params, {std::span<const double>(g)}, state), Error);
}
