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

#include <cmath>

#include "cbm/errors.hpp"
#include "cbm/nn.hpp"

namespace cbm::nn {

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> values(numel(shape));
    for (double& v : values) v = dist(rng);
    return Tensor::from(std::move(shape), std::move(values), true);
}

Embedding::Embedding(std::size_t vocab_size, std::size_t dim, Rng& rng) {
    if (vocab_size == 0 || dim == 0) throw ContractError("Embedding: sizes must be positive");
    // A lookup has a single active input, so fan_in is 1.
    weight = init_uniform({vocab_size, dim}, 1, rng);
    auto values = weight.mutable_data();
    std::fill_n(values.begin(), dim, 0.0);
}

Tensor Embedding::forward(std::span<const std::size_t> ids) const { return gather_rows(weight, ids); }

void Embedding::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
    out.push_back({prefix + ".weight", weight});
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(init_uniform({in, out}, in, rng)), bias(Tensor::zeros({out}, true)) {}

Tensor Linear::forward(const Tensor& x) const {
    if (x.rank() != 2 || x.cols() != in_features()) {
        throw ShapeError("Linear: input " + to_string(x.shape()) + " does not match " +
                         std::to_string(in_features()) + " input features");
    }
    return add_row(matmul(x, weight), bias);
}

void Linear::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

Mlp::Mlp(const std::vector<std::size_t>& dims, Rng& rng) {
    if (dims.size() < 2) throw ContractError("Mlp: needs at least input and output widths");
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) layers.emplace_back(dims[i], dims[i + 1], rng);
}

Mlp Mlp::clone() const {
    Mlp copy;
    for (const Linear& layer : layers) copy.layers.push_back(layer.clone());
    return copy;
}

Tensor Mlp::forward(const Tensor& x) const {
    Tensor h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].forward(h);
        if (i + 1 < layers.size()) h = relu(h);
    }
    return h;
}

void Mlp::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + "." + std::to_string(i), out);
}

Tensor mean_pool(const Tensor& states, const std::vector<bool>& mask) {
    if (states.rank() != 2) throw ShapeError("mean_pool: expected (T x D), got " + to_string(states.shape()));
    if (mask.size() != states.rows()) throw ShapeError("mean_pool: mask length differs from T");
    std::vector<Tensor> steps;
    steps.reserve(states.rows());
    for (std::size_t t = 0; t < states.rows(); ++t) steps.push_back(slice_rows(states, t, 1));
    return reshape(masked_mean(steps, {mask}), {states.cols()});
}

}  // namespace cbm::nn
