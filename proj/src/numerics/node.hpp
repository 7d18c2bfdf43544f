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

#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "cbm/tensor.hpp"

namespace cbm {
namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first needed
    bool requires_grad = false;

    std::vector<std::shared_ptr<Node>> inputs;
    // Reads `grad` of this node and accumulates into inputs' grad buffers.
    std::function<void(Node&)> backward_fn;

    bool is_leaf() const { return !backward_fn; }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

struct TensorAccess {
    static const std::shared_ptr<detail::Node>& node(const Tensor& t) { return t.node_; }
    static Tensor wrap(std::shared_ptr<detail::Node> n) { return Tensor(std::move(n)); }
};

namespace detail {

using BackwardFn = std::function<void(Node&)>;

/// Builds the output node; records history only when some input needs it.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, BackwardFn backward);

inline Node& node_of(const Tensor& t) { return *TensorAccess::node(t); }

/// Grad buffer of input `i` if it participates in differentiation, else nullptr.
inline std::vector<double>* input_grad(Node& self, std::size_t i) {
    Node& in = *self.inputs[i];
    if (!in.requires_grad) return nullptr;
    in.ensure_grad();
    return &in.grad;
}

void require_defined(const Tensor& t, const char* op);
void require_rank2(const Tensor& t, const char* op);

}  // namespace detail
}  // namespace cbm
