#include "ecf/tensor.hpp"

#include <iostream>
#include <sstream>

#include "ecf/error.hpp"

namespace ecf {

namespace {

thread_local std::vector<std::shared_ptr<detail::Node>> g_tape;
thread_local bool g_grad_enabled = true;
bool g_warnings_enabled = true;

}  // namespace

void warn(const std::string& message) {
    if (g_warnings_enabled) std::cerr << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_warnings_enabled = enabled; }

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
    out << ']';
    return out.str();
}

Tensor::Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, double fill) {
    auto node = std::make_shared<detail::Node>();
    node->value.assign(numel(shape), fill);
    node->shape = std::move(shape);
    node_ = std::move(node);
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
    for (auto d : shape)
        if (d == 0) throw dimension_error("tensor dimensions must be positive, got " + ecf::to_string(shape));
    if (numel(shape) != values.size())
        throw dimension_error("shape " + ecf::to_string(shape) + " needs " + std::to_string(numel(shape)) +
                              " values, got " + std::to_string(values.size()));
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node_ = std::move(node);
}

Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    Tensor t(std::move(shape), std::move(values));
    t.node_->requires_grad = true;
    return t;
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= rank())
        throw dimension_error("axis " + std::to_string(axis) + " out of range for shape " + ecf::to_string(shape()));
    return node_->shape[axis];
}

std::size_t Tensor::size() const { return node_->value.size(); }

std::span<const double> Tensor::data() const { return node_->value; }

std::span<double> Tensor::mutable_data() {
    if (!node_->leaf) throw dimension_error("mutable_data on a recorded (non-leaf) tensor");
    return node_->value;
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

bool Tensor::has_grad() const { return !node_->grad.empty(); }

std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() { node_->grad.clear(); }

double Tensor::item() const {
    if (size() != 1) throw dimension_error("item() on tensor of shape " + ecf::to_string(shape()));
    return node_->value[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    if (index.size() != rank())
        throw dimension_error("index rank " + std::to_string(index.size()) + " for shape " + ecf::to_string(shape()));
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= node_->shape[axis]) throw dimension_error("index out of range for shape " + ecf::to_string(shape()));
        flat = flat * node_->shape[axis] + i;
        ++axis;
    }
    return node_->value[flat];
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->value); }

namespace {

Tensor record_impl(Shape shape, std::vector<double> values, bool needs_grad,
                   std::function<void(const std::vector<double>&)> backward_fn) {
    Tensor out(std::move(shape), std::move(values));
    if (needs_grad && g_grad_enabled) {
        auto& node = *out.node();
        node.requires_grad = true;
        node.leaf = false;
        node.backward = std::move(backward_fn);
        g_tape.push_back(out.node());
    }
    return out;
}

}  // namespace

Tensor record(Shape shape, std::vector<double> values, std::initializer_list<const Tensor*> inputs,
              std::function<void(const std::vector<double>&)> backward_fn) {
    bool needs = false;
    for (const auto* t : inputs) needs = needs || t->requires_grad();
    return record_impl(std::move(shape), std::move(values), needs, std::move(backward_fn));
}

Tensor record(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
              std::function<void(const std::vector<double>&)> backward_fn) {
    bool needs = false;
    for (const auto& t : inputs) needs = needs || t.requires_grad();
    return record_impl(std::move(shape), std::move(values), needs, std::move(backward_fn));
}

std::vector<double>& grad_buffer(const Tensor& t) {
    auto& node = *t.node();
    if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
    return node.grad;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw dimension_error("backward needs a scalar loss, got shape " + to_string(loss.shape()));
    if (!loss.requires_grad()) {
        clear_tape();
        return;
    }
    grad_buffer(loss)[0] += 1.0;
    // Recording order is a topological order of the graph.
    for (auto it = g_tape.rbegin(); it != g_tape.rend(); ++it) {
        auto& node = **it;
        if (node.backward && !node.grad.empty()) node.backward(node.grad);
    }
    clear_tape();
}

std::size_t tape_size() { return g_tape.size(); }

void clear_tape() {
    for (auto& node : g_tape) node->backward = nullptr;
    g_tape.clear();
}

}  // namespace ecf
