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

// Dense float64 tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a shared handle onto a graph node: copying a Tensor aliases the
// same storage, `clone()` makes an independent copy. Every op records its
// inputs and a backward closure when gradient mode is on and at least one
// input requires a gradient. `backward()` walks the recorded graph once in
// reverse topological order and then releases it, so intermediate nodes do
// not outlive a training step.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cbm {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {
struct Node;
}

class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t numel() const;
    /// Rows/cols view: rank-1 tensors are a single row.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const;
    std::span<double> mutable_data();
    double item() const;
    double at(std::size_t i) const { return data()[i]; }
    double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

    bool requires_grad() const;
    Tensor& set_requires_grad(bool on);

    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    /// Populates `grad` on every requires_grad ancestor of this scalar.
    /// Leaf gradients accumulate across calls; the graph is freed afterwards.
    void backward() const;

    /// Same values, no graph history, no gradient tracking.
    Tensor detach() const;
    /// Deep copy of values (and requires_grad flag) with no history.
    Tensor clone() const;

    const detail::Node* node() const { return node_.get(); }

  private:
    friend struct TensorAccess;
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

    std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool previous_;
};

bool grad_mode_enabled();

// ---------------------------------------------------------------------------
// Differentiable ops. Rank-2 operands are (rows x cols) row-major.
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// x (N x M) + bias (M) broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& bias);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);

/// One LSTM step. gates (B x 4H) holds pre-activations in i, f, g, o order;
/// c_prev is (B x H). Returns (B x 2H) with h in the first H columns and c
/// in the last H.
Tensor lstm_cell(const Tensor& gates, const Tensor& c_prev);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Same values under a new shape with equal element count.
Tensor reshape(const Tensor& x, Shape shape);

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);

/// Row lookup: out[i] = table[ids[i]]. Gradient scatter-adds into the table.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);

/// Per-row select: out[r] = keep_new[r] ? fresh[r] : previous[r].
Tensor select_rows(const Tensor& fresh, const Tensor& previous,
                   const std::vector<bool>& keep_new);

/// Masked average over a sequence of (B x D) steps. mask[b][t] selects which
/// steps contribute to row b. Every row needs at least one selected step.
Tensor masked_mean(std::span<const Tensor> steps,
                   const std::vector<std::vector<bool>>& mask);

/// Row-wise softmax of a rank-1 or rank-2 tensor, max-shifted.
Tensor softmax(const Tensor& logits);
Tensor log_softmax(const Tensor& logits);

}  // namespace cbm
