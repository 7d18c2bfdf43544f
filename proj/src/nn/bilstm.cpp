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

#include "cbm/errors.hpp"
#include "cbm/nn.hpp"

namespace cbm::nn {

namespace {

LstmDirection make_direction(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    LstmDirection dir;
    dir.w_input = init_uniform({input_dim, 4 * hidden_dim}, input_dim, rng);
    dir.w_hidden = init_uniform({hidden_dim, 4 * hidden_dim}, hidden_dim, rng);
    std::vector<double> bias(4 * hidden_dim, 0.0);
    std::fill_n(bias.begin() + hidden_dim, hidden_dim, 1.0);
    dir.bias = Tensor::from({4 * hidden_dim}, std::move(bias), true);
    return dir;
}

/// Runs one direction over precomputed input projections ((T*B) x 4H).
std::vector<Tensor> run_direction(const LstmDirection& dir, const Tensor& projected, std::size_t steps,
                                  std::size_t batch, const std::vector<std::vector<bool>>& mask,
                                  bool reverse) {
    const std::size_t hidden = dir.hidden_dim();
    // state rows are [h | c].
    Tensor state = Tensor::zeros({batch, 2 * hidden});
    Tensor h = Tensor::zeros({batch, hidden});
    Tensor c = Tensor::zeros({batch, hidden});
    std::vector<Tensor> outputs(steps);
    std::vector<bool> keep(batch);
    for (std::size_t i = 0; i < steps; ++i) {
        const std::size_t t = reverse ? steps - 1 - i : i;
        Tensor gates = add(slice_rows(projected, t * batch, batch), matmul(h, dir.w_hidden));
        Tensor next = lstm_cell(gates, c);

        bool all_real = true;
        for (std::size_t b = 0; b < batch; ++b) {
            keep[b] = mask[b][t];
            all_real = all_real && keep[b];
        }
        state = all_real ? next : select_rows(next, state, keep);
        h = slice_cols(state, 0, hidden);
        c = slice_cols(state, hidden, hidden);
        outputs[t] = h;
    }
    return outputs;
}

}  // namespace

BiLstm::BiLstm(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
    if (input_dim == 0 || hidden_dim == 0) throw ContractError("BiLstm: sizes must be positive");
    forward_dir = make_direction(input_dim, hidden_dim, rng);
    backward_dir = make_direction(input_dim, hidden_dim, rng);
}

BiLstm BiLstm::clone() const {
    BiLstm copy;
    copy.forward_dir = forward_dir.clone();
    copy.backward_dir = backward_dir.clone();
    return copy;
}

std::vector<Tensor> BiLstm::forward_steps(const Tensor& inputs, std::size_t batch,
                                          const std::vector<std::vector<bool>>& mask) const {
    if (inputs.rank() != 2 || inputs.cols() != input_dim()) {
        throw ShapeError("BiLstm: input " + to_string(inputs.shape()) + " does not match input width " +
                         std::to_string(input_dim()));
    }
    if (batch == 0 || inputs.rows() == 0) throw DegenerateInputError("BiLstm: empty sequence");
    if (inputs.rows() % batch != 0) throw ShapeError("BiLstm: rows are not a multiple of the batch size");
    const std::size_t steps = inputs.rows() / batch;
    if (mask.size() != batch) throw ShapeError("BiLstm: mask rows differ from batch size");
    for (const auto& row : mask) {
        if (row.size() != steps) throw ShapeError("BiLstm: mask length differs from sequence length");
    }

    Tensor fwd_proj = add_row(matmul(inputs, forward_dir.w_input), forward_dir.bias);
    Tensor bwd_proj = add_row(matmul(inputs, backward_dir.w_input), backward_dir.bias);
    auto fwd = run_direction(forward_dir, fwd_proj, steps, batch, mask, false);
    auto bwd = run_direction(backward_dir, bwd_proj, steps, batch, mask, true);

    std::vector<Tensor> outputs(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const Tensor halves[] = {fwd[t], bwd[t]};
        outputs[t] = concat_cols(halves);
    }
    return outputs;
}

Tensor BiLstm::forward(const Tensor& inputs) const {
    if (inputs.rank() != 2) throw ShapeError("BiLstm: expected (T x input_dim), got " + to_string(inputs.shape()));
    if (inputs.rows() == 0) throw DegenerateInputError("BiLstm: empty sequence");
    std::vector<std::vector<bool>> mask{std::vector<bool>(inputs.rows(), true)};
    auto steps = forward_steps(inputs, 1, mask);
    return concat_rows(steps);
}

void BiLstm::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
    const std::pair<const char*, const LstmDirection*> dirs[] = {{"forward", &forward_dir},
                                                                 {"backward", &backward_dir}};
    for (const auto& [name, dir] : dirs) {
        const std::string base = prefix + "." + name;
        out.push_back({base + ".w_input", dir->w_input});
        out.push_back({base + ".w_hidden", dir->w_hidden});
        out.push_back({base + ".bias", dir->bias});
    }
}

}  // namespace cbm::nn
