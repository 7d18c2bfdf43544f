// Copyright 2026 The cbm-grader Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cbm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "cbm/errors.hpp"
#include "node.hpp"

namespace cbm {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string to_string(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> values(cbm::numel(shape), value);
    return from(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (cbm::numel(shape) != values.size()) {
        throw ShapeError("tensor shape " + cbm::to_string(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
    detail::require_defined(*this, "shape");
    return node_->shape;
}

std::size_t Tensor::numel() const { return data().size(); }

std::size_t Tensor::rows() const {
    const Shape& s = shape();
    if (s.size() == 2) return s[0];
    if (s.size() <= 1) return 1;
    throw ShapeError("rows() needs rank <= 2, got " + cbm::to_string(s));
}

std::size_t Tensor::cols() const {
    const Shape& s = shape();
    if (s.size() == 2) return s[1];
    if (s.size() == 1) return s[0];
    if (s.empty()) return 1;
    throw ShapeError("cols() needs rank <= 2, got " + cbm::to_string(s));
}

std::span<const double> Tensor::data() const {
    detail::require_defined(*this, "data");
    return node_->value;
}

std::span<double> Tensor::mutable_data() {
    detail::require_defined(*this, "mutable_data");
    return node_->value;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + cbm::to_string(shape()));
    return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
    detail::require_defined(*this, "set_requires_grad");
    node_->requires_grad = on;
    return *this;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }

std::span<const double> Tensor::grad() const {
    if (!has_grad()) throw ContractError("tensor has no gradient");
    return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
    detail::require_defined(*this, "mutable_grad");
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    detail::require_defined(*this, "detach");
    return from(node_->shape, node_->value, false);
}

Tensor Tensor::clone() const {
    detail::require_defined(*this, "clone");
    return from(node_->shape, node_->value, node_->requires_grad);
}

void Tensor::backward() const {
    detail::require_defined(*this, "backward");
    if (numel() != 1) {
        throw ContractError("backward() needs a scalar output, got shape " + cbm::to_string(shape()));
    }
    if (!node_->requires_grad) throw ContractError("backward() on an output that tracks no parameters");

    // Iterative post-order DFS gives a topological order (inputs first).
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            detail::Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.push_back({child, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior buffers start from zero on every pass; leaves keep accumulating.
    for (detail::Node* n : order) {
        if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
    }
    node_->ensure_grad();
    node_->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (!n->is_leaf()) n->backward_fn(*n);
    }

    for (detail::Node* n : order) {
        if (n->is_leaf()) continue;
        n->backward_fn = nullptr;
        n->inputs.clear();
        if (n != node_.get()) {
            n->grad.clear();
            n->grad.shrink_to_fit();
        }
        n->requires_grad = false;
    }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

namespace detail {

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

void require_rank2(const Tensor& t, const char* op) {
    require_defined(t, op);
    if (t.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + to_string(t.shape()));
    }
}

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, BackwardFn backward) {
    for (double v : value) {
        if (!std::isfinite(v)) throw ContractError(std::string(op) + ": produced a non-finite value");
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    if (g_grad_enabled) {
        bool track = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
        if (track) {
            node->requires_grad = true;
            node->inputs.reserve(inputs.size());
            for (const Tensor& t : inputs) node->inputs.push_back(TensorAccess::node(t));
            node->backward_fn = std::move(backward);
        }
    }
    return TensorAccess::wrap(std::move(node));
}

}  // namespace detail
}  // namespace cbm
