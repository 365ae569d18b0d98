#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ecf {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class Tensor;

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    bool leaf = true;
    // Pushes `grad` into the parents' gradient buffers. Empty for leaves.
    std::function<void(const std::vector<double>&)> backward;
};

}  // namespace detail

/// Dense row-major float-64 array. Copies share storage; ops never mutate
/// their inputs. Results of ops on tensors that require gradients are
/// recorded on the thread's tape until `backward` consumes it.
class Tensor {
public:
    Tensor();
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    /// Leaf tensor that accumulates gradients across backward passes.
    static Tensor parameter(Shape shape, std::vector<double> values);
    static Tensor scalar(double value);

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const;

    std::span<const double> data() const;
    /// In-place access for leaves only (optimizer updates, initialization).
    std::span<double> mutable_data();

    bool requires_grad() const;
    bool has_grad() const;
    /// Empty span when no gradient has been accumulated.
    std::span<const double> grad() const;
    void zero_grad();

    double item() const;
    double at(std::initializer_list<std::size_t> index) const;

    /// Same values, no graph history, no gradient.
    Tensor detach() const;

    const std::shared_ptr<detail::Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node);
    std::shared_ptr<detail::Node> node_;

    friend Tensor record(Shape, std::vector<double>, std::initializer_list<const Tensor*>,
                         std::function<void(const std::vector<double>&)>);
    friend Tensor record(Shape, std::vector<double>, const std::vector<Tensor>&,
                         std::function<void(const std::vector<double>&)>);
};

/// Builds an op result. When gradient mode is on and any input requires a
/// gradient, the result is appended to the tape with `backward`, which
/// receives the result's gradient and accumulates into the inputs through
/// `grad_buffer`.
Tensor record(Shape shape, std::vector<double> values, std::initializer_list<const Tensor*> inputs,
              std::function<void(const std::vector<double>&)> backward);
Tensor record(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
              std::function<void(const std::vector<double>&)> backward);

/// Zero-initialized gradient accumulator of `t`, allocated on first use.
std::vector<double>& grad_buffer(const Tensor& t);

bool grad_enabled();

/// Disables recording for its lifetime (inference, oracles).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Reverse pass over the tape in reverse recording order, then clears the
/// tape. Leaf gradients accumulate; call `zero_grad` between steps.
void backward(const Tensor& loss);

/// Number of recorded nodes waiting for `backward`.
std::size_t tape_size();
/// Drops recorded nodes without propagating (e.g. after an aborted step).
void clear_tape();

}  // namespace ecf
