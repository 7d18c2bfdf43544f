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

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "cbm/errors.hpp"
#include "cbm/model.hpp"
#include "cbm/nn.hpp"
#include "support/gradient_cases.hpp"
#include "support/oracles.hpp"

using namespace cbm;
using cbm::testing::random_tensor;

namespace {

cbm::testing::ScalarLstmWeights scalar_weights(const nn::LstmDirection& d) {
    cbm::testing::ScalarLstmWeights w;
    w.w_input.assign(d.w_input.data().begin(), d.w_input.data().end());
    w.w_hidden.assign(d.w_hidden.data().begin(), d.w_hidden.data().end());
    w.bias.assign(d.bias.data().begin(), d.bias.data().end());
    w.in = d.w_input.rows();
    w.hidden = d.hidden_dim();
    return w;
}

std::vector<std::vector<double>> rows_of(const Tensor& t) {
    std::vector<std::vector<double>> out(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < t.cols(); ++c) out[r][c] = t.at(r, c);
    return out;
}

/// Non-trivial biases so the oracle comparison exercises them.
void randomize_biases(nn::BiLstm& lstm, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto* d : {&lstm.forward_dir, &lstm.backward_dir})
        for (auto& b : d->bias.mutable_data()) b += u(rng);
}

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

CheckpointError::Kind checkpoint_failure(const std::string& bytes) {
    try {
        parse_checkpoint(bytes);
    } catch (const CheckpointError& e) {
        return e.kind();
    }
    FAIL("expected CheckpointError");
    return CheckpointError::Kind::kIo;
}

Vocab small_vocab() { return cbm::testing::detail::tiny_vocab(); }
ModelConfig small_config() { return cbm::testing::detail::tiny_config(); }

}  // namespace

TEST_SUITE("layers") {
    TEST_CASE("initialization bounds, zero biases, forget bias 1, padding row 0") {
        nn::Rng rng(4);
        nn::Linear lin(16, 5, rng);
        for (double w : lin.weight.data()) CHECK(std::abs(w) <= 0.25);
        for (double b : lin.bias.data()) CHECK(b == 0.0);
        nn::BiLstm lstm(9, 4, rng);
        for (const auto* d : {&lstm.forward_dir, &lstm.backward_dir}) {
            for (double w : d->w_input.data()) CHECK(std::abs(w) <= 1.0 / 3.0);
            for (double w : d->w_hidden.data()) CHECK(std::abs(w) <= 0.5);
            for (std::size_t j = 0; j < 16; ++j) CHECK(d->bias.at(j) == (j >= 4 && j < 8 ? 1.0 : 0.0));
        }
        nn::Embedding emb(10, 3, rng);
        for (std::size_t c = 0; c < 3; ++c) CHECK(emb.weight.at(0, c) == 0.0);
        CHECK(lin.weight.requires_grad());
    }

    TEST_CASE("same seed, same parameters") {
        nn::Rng a(9), b(9);
        CHECK(std::ranges::equal(nn::Mlp({4, 3, 2}, a).layers[0].weight.data(),
                                 nn::Mlp({4, 3, 2}, b).layers[0].weight.data()));
    }

    TEST_CASE("mlp applies relu between layers only") {
        nn::Mlp mlp(std::vector<std::size_t>{2, 2, 1}, *std::make_unique<nn::Rng>(0));
        mlp.layers[0] = nn::Linear(Tensor::from({2, 2}, {1, 0, 0, 1}), Tensor::from({2}, {0, 0}));
        mlp.layers[1] = nn::Linear(Tensor::from({2, 1}, {1, 1}), Tensor::from({1}, {-5}));
        const auto y = mlp.forward(Tensor::from({1, 2}, {-3, 2}));
        CHECK(y.item() == -3.0);  // relu(-3) + relu(2) - 5, no relu on the output
    }

    TEST_CASE("bilstm matches the scalar recurrence") {
        nn::Rng rng(21);
        nn::BiLstm lstm(3, 4, rng);
        std::mt19937_64 data(5);
        randomize_biases(lstm, data);
        const auto x = random_tensor({6, 3}, data, -1, 1, 0, false);
        const auto out = lstm.forward(x);
        REQUIRE(out.shape() == Shape{6, 8});
        const auto fwd = cbm::testing::scalar_lstm(scalar_weights(lstm.forward_dir), rows_of(x), false);
        const auto bwd = cbm::testing::scalar_lstm(scalar_weights(lstm.backward_dir), rows_of(x), true);
        for (std::size_t t = 0; t < 6; ++t) {
            for (std::size_t j = 0; j < 4; ++j) {
                CHECK(out.at(t, j) == doctest::Approx(fwd[t][j]).epsilon(1e-12));
                CHECK(out.at(t, 4 + j) == doctest::Approx(bwd[t][j]).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("reversing the input with swapped directions swaps the halves") {
        nn::Rng rng(22);
        nn::BiLstm lstm(3, 2, rng);
        std::mt19937_64 data(6);
        const auto x = random_tensor({5, 3}, data, -1, 1, 0, false);
        std::vector<double> rev;
        for (std::size_t t = 5; t-- > 0;)
            for (std::size_t c = 0; c < 3; ++c) rev.push_back(x.at(t, c));
        nn::BiLstm swapped = lstm.clone();
        std::swap(swapped.forward_dir, swapped.backward_dir);
        const auto a = lstm.forward(x);
        const auto b = swapped.forward(Tensor::from({5, 3}, rev));
        for (std::size_t t = 0; t < 5; ++t)
            for (std::size_t j = 0; j < 2; ++j) {
                CHECK(b.at(t, j) == doctest::Approx(a.at(4 - t, 2 + j)).epsilon(1e-13));
                CHECK(b.at(t, 2 + j) == doctest::Approx(a.at(4 - t, j)).epsilon(1e-13));
            }
    }

    TEST_CASE("padded batch equals each sequence run alone") {
        nn::Rng rng(23);
        nn::BiLstm lstm(2, 3, rng);
        std::mt19937_64 data(7);
        const std::vector<std::size_t> lengths{4, 1, 3};
        const std::size_t T = 4, B = 3;
        std::vector<Tensor> seqs;
        for (auto len : lengths) seqs.push_back(random_tensor({len, 2}, data, -1, 1, 0, false));
        std::vector<double> packed(T * B * 2, 0.0);
        std::vector<std::vector<bool>> mask(B, std::vector<bool>(T, false));
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t = 0; t < lengths[b]; ++t) {
                mask[b][t] = true;
                for (std::size_t c = 0; c < 2; ++c) packed[(t * B + b) * 2 + c] = seqs[b].at(t, c);
            }
        const auto steps = lstm.forward_steps(Tensor::from({T * B, 2}, packed), B, mask);
        for (std::size_t b = 0; b < B; ++b) {
            const auto alone = lstm.forward(seqs[b]);
            for (std::size_t t = 0; t < lengths[b]; ++t)
                for (std::size_t j = 0; j < 6; ++j) CHECK(steps[t].at(b, j) == doctest::Approx(alone.at(t, j)).epsilon(1e-13));
        }
    }

    TEST_CASE("mean_pool ignores masked rows and their order") {
        const auto states = Tensor::from({4, 2}, {1, 2, 100, 100, 3, 4, 5, 6});
        const auto p = nn::mean_pool(states, {true, false, true, true});
        CHECK(p.shape() == Shape{2});
        CHECK(p.at(0) == 3.0);
        CHECK(p.at(1) == 4.0);
        const auto q = nn::mean_pool(Tensor::from({3, 2}, {5, 6, 1, 2, 3, 4}), {true, true, true});
        CHECK(q.at(0) == doctest::Approx(p.at(0)).epsilon(1e-15));
        CHECK(q.at(1) == doctest::Approx(p.at(1)).epsilon(1e-15));
    }

    TEST_CASE("embedding gradient accumulates per id") {
        nn::Rng rng(1);
        nn::Embedding emb(5, 2, rng);
        const std::vector<std::size_t> ids{3, 1, 3, 3};
        sum(emb.forward(ids)).backward();
        CHECK(emb.weight.grad()[3 * 2] == 3.0);
        CHECK(emb.weight.grad()[1 * 2 + 1] == 1.0);
        CHECK(emb.weight.grad()[2 * 2] == 0.0);
    }
}

TEST_SUITE("model") {
    TEST_CASE("default dimensions") {
        const ModelConfig c;
        CHECK(c.embedding_dim == 128);
        CHECK(c.hidden_dim == 128);
        CHECK(c.grade_hidden == std::vector<std::size_t>{64, 64});
        CHECK(c.max_length == 512);
        EssayCbmModel m(small_vocab(), c, 0);
        CHECK(m.encoder.output_dim() == 256);
        for (const auto& head : m.concept_heads) {
            CHECK(head.in_features() == 256);
            CHECK(head.out_features() == 5);
        }
        REQUIRE(m.grade_head.layers.size() == 3);
        CHECK(m.grade_head.in_features() == 40);
        CHECK(m.grade_head.layers[0].out_features() == 64);
        CHECK(m.grade_head.layers[1].out_features() == 64);
        CHECK(m.grade_head.out_features() == 6);
        BaselineModel b(small_vocab(), c, 0);
        CHECK(b.grade_head.in_features() == 256);
        CHECK(b.grade_head.out_features() == 6);
    }

    TEST_CASE("argmax breaks ties toward the lowest index") {
        const std::vector<double> v{0.1, 0.4, 0.4, 0.1};
        CHECK(argmax(v) == 1);
        const std::vector<double> w{2, 2, 2};
        CHECK(argmax(w) == 0);
    }

    TEST_CASE("one-hot bottleneck layout") {
        const std::array<int, 8> s{0, 1, 2, 3, 4, 0, 1, 2};
        const std::vector<ConceptVector> cs{ConceptVector::from(s)};
        const auto b = one_hot_bottleneck(cs);
        REQUIRE(b.shape() == Shape{1, 40});
        for (std::size_t k = 0; k < 8; ++k)
            for (std::size_t v = 0; v < 5; ++v) CHECK(b.at(0, k * 5 + v) == (static_cast<int>(v) == s[k] ? 1.0 : 0.0));
    }

    TEST_CASE("grade_from_concepts is h on the one-hot vector") {
        EssayCbmModel m(small_vocab(), small_config(), 3);
        std::mt19937_64 rng(1);
        for (int i = 0; i < 20; ++i) {
            const auto c = cbm::testing::detail::random_concepts(rng, 1)[0];
            const auto p = grade_from_concepts(m, c);
            const std::vector<ConceptVector> one{c};
            const auto logits = m.grade_logits(one_hot_bottleneck(one));
            const auto probs = softmax(logits);
            double total = 0;
            for (std::size_t g = 0; g < 6; ++g) {
                CHECK(p.probs[g] == probs.at(0, g));
                total += p.probs[g];
            }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(p.grade == static_cast<int>(argmax(p.probs)));
        }
    }

    TEST_CASE("batched paths agree with single-essay paths") {
        EssayCbmModel m(small_vocab(), small_config(), 5);
        std::mt19937_64 rng(2);
        const auto batch = cbm::testing::detail::tiny_batch(rng, m.vocab().size());
        const auto many = predict_concepts(m, batch);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto one = predict_concepts(m, batch[i]);
            CHECK(one.concepts == many[i].concepts);
            for (std::size_t k = 0; k < 8; ++k)
                for (std::size_t v = 0; v < 5; ++v)
                    CHECK(one.probs[k][v] == doctest::Approx(many[i].probs[k][v]).epsilon(1e-12));
        }
    }

    TEST_CASE("joint forward feeds h the per-head softmax") {
        EssayCbmModel m(small_vocab(), small_config(), 6);
        std::mt19937_64 rng(3);
        const auto batch = cbm::testing::detail::tiny_batch(rng, m.vocab().size());
        const auto out = forward_joint(m, batch);
        std::vector<double> soft;
        for (std::size_t b = 0; b < batch.size(); ++b)
            for (const auto& logits : out.concept_logits) {
                const auto p = softmax(slice_rows(logits, b, 1));
                soft.insert(soft.end(), p.data().begin(), p.data().end());
            }
        const auto expect = m.grade_logits(Tensor::from({batch.size(), 40}, soft));
        for (std::size_t i = 0; i < expect.numel(); ++i)
            CHECK(out.grade_logits.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-13));
    }

    TEST_CASE("grade loss reaches the embedding table") {
        ModelConfig config = small_config();
        config.grade_hidden = ModelConfig{}.grade_hidden;
        EssayCbmModel m(small_vocab(), config, 8);
        std::mt19937_64 rng(4);
        const auto batch = cbm::testing::detail::tiny_batch(rng, m.vocab().size());
        const std::vector<std::size_t> grades{1, 2, 3};
        cross_entropy(forward_joint(m, batch).grade_logits, grades).backward();
        bool nonzero = false;
        for (double g : m.encoder.embedding.weight.grad()) nonzero |= g != 0.0;
        CHECK(nonzero);
    }

    TEST_CASE("empty essays are rejected") {
        EssayCbmModel m(small_vocab(), small_config(), 1);
        CHECK_THROWS_AS(predict_concepts(m, TokenSequence{}), DegenerateInputError);
    }

    TEST_CASE("clone is independent") {
        EssayCbmModel m(small_vocab(), small_config(), 1);
        auto c = m.clone();
        c.grade_head.layers[0].bias.mutable_data()[0] = 42;
        CHECK(m.grade_head.layers[0].bias.at(0) == 0.0);
        CHECK(c.vocab() == m.vocab());
    }
}

TEST_SUITE("checkpoint") {
    TEST_CASE("round trip preserves every parameter and prediction") {
        cbm::testing::TempDir dir("ckpt");
        EssayCbmModel m(small_vocab(), small_config(), 12);
        m.provenance().training_config = R"({"lambda":0.5})";
        save_checkpoint(m, dir / "m.ckpt");
        const auto loaded = load_cbm_checkpoint(dir / "m.ckpt");
        CHECK(loaded.vocab() == m.vocab());
        CHECK(loaded.provenance().seed == 12);
        CHECK(loaded.provenance().training_config == m.provenance().training_config);
        const auto a = m.named_parameters();
        const auto b = loaded.named_parameters();
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].name == b[i].name);
            CHECK(a[i].tensor.shape() == b[i].tensor.shape());
            CHECK(std::ranges::equal(a[i].tensor.data(), b[i].tensor.data()));
        }
        CHECK(file_bytes(dir / "m.ckpt") == checkpoint_bytes(AnyModel(loaded.clone())));
    }

    TEST_CASE("kinds are distinguished") {
        cbm::testing::TempDir dir("ckpt");
        save_checkpoint(BaselineModel(small_vocab(), small_config(), 1), dir / "b.ckpt");
        CHECK(kind_of(load_checkpoint(dir / "b.ckpt")) == ModelKind::kBaseline);
        try {
            load_cbm_checkpoint(dir / "b.ckpt");
            FAIL("expected kind mismatch");
        } catch (const CheckpointError& e) {
            CHECK(e.kind() == CheckpointError::Kind::kKindMismatch);
        }
        CHECK_NOTHROW(load_baseline_checkpoint(dir / "b.ckpt"));
    }

    TEST_CASE("same seed, same bytes; different seed, different bytes") {
        const auto a = checkpoint_bytes(EssayCbmModel(small_vocab(), small_config(), 3));
        const auto b = checkpoint_bytes(EssayCbmModel(small_vocab(), small_config(), 3));
        const auto c = checkpoint_bytes(EssayCbmModel(small_vocab(), small_config(), 4));
        CHECK(a == b);
        CHECK(a != c);
        CHECK(a.substr(0, 8) == std::string("CBMCKPT\0", 8));
    }

    TEST_CASE("corruption, truncation, version and missing files") {
        const auto good = checkpoint_bytes(EssayCbmModel(small_vocab(), small_config(), 3));
        std::string flipped = good;
        flipped[good.size() / 2] ^= 0x10;
        CHECK(checkpoint_failure(flipped) == CheckpointError::Kind::kCorrupt);
        CHECK(checkpoint_failure(good.substr(0, good.size() - 9)) == CheckpointError::Kind::kCorrupt);
        CHECK(checkpoint_failure("") == CheckpointError::Kind::kCorrupt);
        CHECK(checkpoint_failure("not a checkpoint at all") == CheckpointError::Kind::kCorrupt);
        std::string future = good;
        future[8] = 2;
        CHECK(checkpoint_failure(future) == CheckpointError::Kind::kVersion);
        try {
            load_checkpoint("/nonexistent/dir/model.ckpt");
            FAIL("expected CheckpointError");
        } catch (const CheckpointError& e) {
            CHECK(e.kind() == CheckpointError::Kind::kIo);
        }
    }
}
