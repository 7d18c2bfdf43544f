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

// Layers used by the grading models. Weight matrices are stored (in x out)
// so a batch of row vectors multiplies on the left: y = x W + b.

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cbm/tensor.hpp"

namespace cbm::nn {

using Rng = std::mt19937_64;

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), requires_grad on.
Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng);

class Embedding {
  public:
    Embedding() = default;
    explicit Embedding(Tensor w) : weight(std::move(w)) {}
    /// Row 0 is the padding row and starts at zero.
    Embedding(std::size_t vocab_size, std::size_t dim, Rng& rng);

    Tensor forward(std::span<const std::size_t> ids) const;
    Embedding clone() const { return Embedding(weight.clone()); }

    std::size_t vocab_size() const { return weight.rows(); }
    std::size_t dim() const { return weight.cols(); }
    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;

    Tensor weight;  // vocab_size x dim
};

class Linear {
  public:
    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng);
    Linear(Tensor w, Tensor b) : weight(std::move(w)), bias(std::move(b)) {}
    Linear clone() const { return Linear(weight.clone(), bias.clone()); }

    /// x: (N x in) -> (N x out)
    Tensor forward(const Tensor& x) const;

    std::size_t in_features() const { return weight.rows(); }
    std::size_t out_features() const { return weight.cols(); }
    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;

    Tensor weight;  // in x out
    Tensor bias;    // out
};

/// Affine layers with ReLU between them and nothing after the last.
class Mlp {
  public:
    Mlp() = default;
    /// dims = {in, hidden..., out}; needs at least two entries.
    Mlp(const std::vector<std::size_t>& dims, Rng& rng);
    Mlp clone() const;

    Tensor forward(const Tensor& x) const;

    std::size_t in_features() const { return layers.front().in_features(); }
    std::size_t out_features() const { return layers.back().out_features(); }
    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;

    std::vector<Linear> layers;
};

/// One LSTM direction. Gate blocks along the 4H axis are ordered
/// input, forget, cell, output.
struct LstmDirection {
    Tensor w_input;   // input_dim x 4H
    Tensor w_hidden;  // H x 4H
    Tensor bias;      // 4H, forget block initialised to 1

    std::size_t hidden_dim() const { return w_hidden.rows(); }
    LstmDirection clone() const { return {w_input.clone(), w_hidden.clone(), bias.clone()}; }
};

class BiLstm {
  public:
    BiLstm() = default;
    BiLstm(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
    BiLstm clone() const;

    /// Single sequence: (T x input_dim) -> (T x 2H), forward half first.
    Tensor forward(const Tensor& inputs) const;

    /// Batched padded sequences. `inputs` is time-major ((T*B) x input_dim,
    /// row t*B + b is step t of sequence b); mask[b][t] marks real tokens.
    /// Returns T tensors of shape (B x 2H). Masked steps carry the state
    /// through unchanged.
    std::vector<Tensor> forward_steps(const Tensor& inputs, std::size_t batch,
                                      const std::vector<std::vector<bool>>& mask) const;

    std::size_t input_dim() const { return forward_dir.w_input.rows(); }
    std::size_t hidden_dim() const { return forward_dir.hidden_dim(); }
    std::size_t output_dim() const { return 2 * hidden_dim(); }
    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;

    LstmDirection forward_dir;
    LstmDirection backward_dir;
};

/// Mean over the rows of `states` (T x D) whose mask entry is true.
Tensor mean_pool(const Tensor& states, const std::vector<bool>& mask);

}  // namespace cbm::nn
