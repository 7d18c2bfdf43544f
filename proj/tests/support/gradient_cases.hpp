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

// The gradient suite: every differentiable op and both architectures, each
// checked against central finite differences. Shared by the unit tests and
// the acceptance runner.

#include <functional>
#include <string>
#include <vector>

#include "cbm/model.hpp"
#include "cbm/optim.hpp"
#include "cbm/train.hpp"
#include "oracles.hpp"

namespace cbm::testing {

struct GradCase {
    std::string name;
    std::function<GradCheckReport(std::uint64_t seed)> run;
};

namespace detail {

/// sum(op(inputs) * R) for a fixed random R, so every output coordinate
/// carries a distinct weight into the scalar.
inline GradCheckReport check_op(const std::function<Tensor(const std::vector<Tensor>&)>& op,
                                std::vector<Tensor> inputs, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    Tensor probe;
    {
        NoGradGuard no_grad;
        probe = op(inputs);
    }
    const Tensor weights = random_tensor(probe.shape(), rng, -1.0, 1.0, 0.0, false);
    auto loss = [&] { return sum(mul(op(inputs), weights)); };
    return check_gradients(loss, inputs, 1000, seed);
}

inline Vocab tiny_vocab() {
    return Vocab::from_tokens({"<pad>", "<unk>", "alpha", "beta", "gamma", "delta", "epsilon", "zeta"});
}

inline ModelConfig tiny_config() {
    ModelConfig c;
    c.embedding_dim = 4;
    c.hidden_dim = 3;
    c.grade_hidden = {5, 4};
    return c;
}

/// Three sequences of different lengths so masking is exercised.
inline std::vector<TokenSequence> tiny_batch(std::mt19937_64& rng, std::size_t vocab_size) {
    std::vector<TokenSequence> batch;
    for (std::size_t len : {5U, 2U, 4U}) {
        TokenSequence s;
        for (std::size_t i = 0; i < len; ++i) {
            s.ids.push_back(1 + rng() % (vocab_size - 1));
            s.mask.push_back(true);
        }
        batch.push_back(std::move(s));
    }
    return batch;
}

inline std::vector<ConceptVector> random_concepts(std::mt19937_64& rng, std::size_t n) {
    std::vector<ConceptVector> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::array<int, kNumConcepts> v{};
        for (auto& x : v) x = static_cast<int>(rng() % kConceptClasses);
        out.push_back(ConceptVector::from(v));
    }
    return out;
}

}  // namespace detail

/// Coordinates sampled per parameter tensor in the model cases.
inline constexpr std::size_t kModelSamplesPerParam = 40;

inline std::vector<GradCase> gradient_cases() {
    using detail::check_op;
    using V = std::vector<Tensor>;
    std::vector<GradCase> cases;
    auto add_case = [&](std::string name, std::function<GradCheckReport(std::uint64_t)> fn) {
        cases.push_back({std::move(name), std::move(fn)});
    };
    auto rt = [](Shape s, std::mt19937_64& rng, double min_abs = 0.0) {
        return random_tensor(std::move(s), rng, -1.0, 1.0, min_abs);
    };

    add_case("matmul", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return matmul(x[0], x[1]); }, {rt({3, 4}, rng), rt({4, 5}, rng)}, seed);
    });
    add_case("add", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return add(x[0], x[1]); }, {rt({3, 4}, rng), rt({3, 4}, rng)}, seed);
    });
    add_case("sub", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return sub(x[0], x[1]); }, {rt({3, 4}, rng), rt({3, 4}, rng)}, seed);
    });
    add_case("mul", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return mul(x[0], x[1]); }, {rt({3, 4}, rng), rt({3, 4}, rng)}, seed);
    });
    add_case("mul_shared_operand", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return mul(x[0], x[0]); }, {rt({2, 5}, rng)}, seed);
    });
    add_case("scale", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return scale(x[0], -2.5); }, {rt({3, 4}, rng)}, seed);
    });
    add_case("add_row", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return add_row(x[0], x[1]); }, {rt({4, 3}, rng), rt({3}, rng)}, seed);
    });
    add_case("sigmoid", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return sigmoid(x[0]); }, {random_tensor({3, 4}, rng, -4, 4)}, seed);
    });
    add_case("tanh", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return tanh(x[0]); }, {random_tensor({3, 4}, rng, -3, 3)}, seed);
    });
    add_case("relu", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return relu(x[0]); }, {rt({3, 4}, rng, 0.05)}, seed);
    });
    add_case("lstm_cell", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return lstm_cell(x[0], x[1]); },
                        {random_tensor({3, 8}, rng, -3, 3), random_tensor({3, 2}, rng, -1, 1)}, seed);
    });
    add_case("sum", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return sum(x[0]); }, {rt({3, 4}, rng)}, seed);
    });
    add_case("mean", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return mean(x[0]); }, {rt({3, 4}, rng)}, seed);
    });
    add_case("reshape", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return matmul(reshape(x[0], {2, 6}), x[1]); },
                        {rt({3, 4}, rng), rt({6, 2}, rng)}, seed);
    });
    add_case("slice_cols", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return slice_cols(x[0], 1, 3); }, {rt({3, 5}, rng)}, seed);
    });
    add_case("slice_rows", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return slice_rows(x[0], 2, 2); }, {rt({5, 3}, rng)}, seed);
    });
    add_case("concat_cols", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return concat_cols(x); }, {rt({3, 2}, rng), rt({3, 4}, rng)}, seed);
    });
    add_case("concat_rows", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return concat_rows(x); }, {rt({2, 3}, rng), rt({1, 3}, rng)}, seed);
    });
    add_case("gather_rows", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const std::vector<std::size_t> ids{3, 0, 3, 1, 4, 3};
        return check_op([ids](const V& x) { return gather_rows(x[0], ids); }, {rt({5, 3}, rng)}, seed);
    });
    add_case("select_rows", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const std::vector<bool> keep{true, false, true, false};
        return check_op([keep](const V& x) { return select_rows(x[0], x[1], keep); },
                        {rt({4, 3}, rng), rt({4, 3}, rng)}, seed);
    });
    add_case("masked_mean", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const std::vector<std::vector<bool>> mask{{true, true, false}, {true, false, false}};
        return check_op([mask](const V& x) { return masked_mean(x, mask); },
                        {rt({2, 4}, rng), rt({2, 4}, rng), rt({2, 4}, rng)}, seed);
    });
    add_case("softmax", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return softmax(x[0]); }, {random_tensor({3, 5}, rng, -3, 3)}, seed);
    });
    add_case("softmax_rank1", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return softmax(x[0]); }, {random_tensor({6}, rng, -3, 3)}, seed);
    });
    add_case("log_softmax", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return check_op([](const V& x) { return log_softmax(x[0]); }, {random_tensor({3, 5}, rng, -3, 3)}, seed);
    });
    add_case("cross_entropy", [](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const std::vector<std::size_t> targets{0, 4, 2, 2};
        auto logits = random_tensor({4, 5}, rng, -3, 3);
        return check_gradients([&] { return cross_entropy(logits, targets); }, {logits}, 1000, seed);
    });
    add_case("linear", [](std::uint64_t seed) {
        nn::Rng rng(seed);
        nn::Linear layer(4, 3, rng);
        std::mt19937_64 data_rng(seed + 1);
        auto x = random_tensor({5, 4}, data_rng);
        return check_op([layer](const V& in) { return layer.forward(in[0]); }, {x, layer.weight, layer.bias}, seed);
    });
    add_case("mlp", [](std::uint64_t seed) {
        nn::Rng rng(seed);
        nn::Mlp mlp({4, 6, 5, 3}, rng);
        std::mt19937_64 data_rng(seed + 1);
        V inputs{random_tensor({5, 4}, data_rng)};
        for (const auto& l : mlp.layers) {
            inputs.push_back(l.weight);
            inputs.push_back(l.bias);
        }
        return check_op([mlp](const V& in) { return mlp.forward(in[0]); }, inputs, seed);
    });
    add_case("embedding", [](std::uint64_t seed) {
        nn::Rng rng(seed);
        nn::Embedding emb(6, 3, rng);
        const std::vector<std::size_t> ids{2, 5, 2, 1};
        return check_op([emb, ids](const V&) { return emb.forward(ids); }, {emb.weight}, seed);
    });
    add_case("bilstm_sequence", [](std::uint64_t seed) {
        nn::Rng rng(seed);
        nn::BiLstm lstm(3, 4, rng);
        std::mt19937_64 data_rng(seed + 1);
        auto x = random_tensor({5, 3}, data_rng);
        V inputs{x};
        for (const auto* d : {&lstm.forward_dir, &lstm.backward_dir}) {
            inputs.push_back(d->w_input);
            inputs.push_back(d->w_hidden);
            inputs.push_back(d->bias);
        }
        return check_op([lstm](const V& in) { return lstm.forward(in[0]); }, inputs, seed);
    });
    add_case("bilstm_masked_batch", [](std::uint64_t seed) {
        nn::Rng rng(seed);
        nn::BiLstm lstm(3, 2, rng);
        std::mt19937_64 data_rng(seed + 1);
        const std::size_t T = 4;
        const std::size_t B = 3;
        auto x = random_tensor({T * B, 3}, data_rng);
        const std::vector<std::vector<bool>> mask{
            {true, true, true, true}, {true, true, false, false}, {true, false, false, false}};
        V inputs{x};
        for (const auto* d : {&lstm.forward_dir, &lstm.backward_dir}) {
            inputs.push_back(d->w_input);
            inputs.push_back(d->w_hidden);
            inputs.push_back(d->bias);
        }
        return check_op(
            [lstm, mask, B](const V& in) { return masked_mean(lstm.forward_steps(in[0], B, mask), mask); }, inputs,
            seed);
    });
    add_case("mean_pool", [rt](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        const std::vector<bool> mask{true, false, true, true};
        return check_op([mask](const V& x) { return nn::mean_pool(x[0], mask); }, {rt({4, 3}, rng)}, seed);
    });
    add_case("cbm_joint_loss", [](std::uint64_t seed) {
        EssayCbmModel model(detail::tiny_vocab(), detail::tiny_config(), seed);
        std::mt19937_64 rng(seed + 7);
        const auto batch = detail::tiny_batch(rng, model.vocab().size());
        const auto concepts = detail::random_concepts(rng, batch.size());
        const std::vector<std::size_t> grades{0, 5, 3};
        auto loss = [&] {
            const auto out = forward_joint(model, batch);
            return joint_loss(out.concept_logits, concepts, out.grade_logits, grades, 0.5).total;
        };
        return check_gradients(loss, model.parameters(), kModelSamplesPerParam, seed);
    });
    add_case("baseline_loss", [](std::uint64_t seed) {
        BaselineModel model(detail::tiny_vocab(), detail::tiny_config(), seed);
        std::mt19937_64 rng(seed + 7);
        const auto batch = detail::tiny_batch(rng, model.vocab().size());
        const std::vector<std::size_t> grades{1, 4, 2};
        auto loss = [&] { return cross_entropy(baseline_forward(model, batch), grades); };
        return check_gradients(loss, model.parameters(), kModelSamplesPerParam, seed);
    });
    return cases;
}

}  // namespace cbm::testing
