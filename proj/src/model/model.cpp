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

#include "cbm/model.hpp"

#include <algorithm>

#include "cbm/errors.hpp"

namespace cbm {

std::string_view to_string(ModelKind kind) { return kind == ModelKind::kCbm ? "cbm" : "baseline"; }

ModelKind kind_of(const AnyModel& model) {
    return std::holds_alternative<EssayCbmModel>(model) ? ModelKind::kCbm : ModelKind::kBaseline;
}

Encoder::Encoder(std::size_t vocab_size, const ModelConfig& config, nn::Rng& rng)
    : embedding(vocab_size, config.embedding_dim, rng), lstm(config.embedding_dim, config.hidden_dim, rng) {}

Tensor Encoder::encode(std::span<const TokenSequence> batch) const {
    if (batch.empty()) throw ContractError("encode: empty batch");
    std::size_t steps = 0;
    for (const TokenSequence& seq : batch) {
        if (seq.empty()) throw DegenerateInputError("encode: empty token sequence");
        if (seq.mask.size() != seq.ids.size()) throw ShapeError("encode: mask length differs from ids");
        steps = std::max(steps, seq.size());
    }
    const std::size_t b = batch.size();
    std::vector<std::size_t> ids(steps * b, Vocab::kPad);
    std::vector<std::vector<bool>> mask(b, std::vector<bool>(steps, false));
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t t = 0; t < batch[i].size(); ++t) {
            ids[t * b + i] = batch[i].ids[t];
            mask[i][t] = batch[i].mask[t];
        }
    }
    Tensor embedded = embedding.forward(ids);
    std::vector<Tensor> states = lstm.forward_steps(embedded, b, mask);
    return masked_mean(states, mask);
}

void Encoder::collect(std::vector<nn::NamedTensor>& out) const {
    embedding.collect("embedding", out);
    lstm.collect("encoder", out);
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw ShapeError("argmax: empty input");
    // max_element returns the first maximum, which is the lowest index on ties.
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

// ---------------------------------------------------------------------------

EssayCbmModel::EssayCbmModel(Vocab vocab, ModelConfig config, std::uint64_t seed)
    : vocab_(std::move(vocab)), config_(std::move(config)) {
    provenance_.seed = seed;
    nn::Rng rng(seed);
    encoder = Encoder(vocab_.size(), config_, rng);
    for (auto& head : concept_heads) head = nn::Linear(encoder.output_dim(), kConceptClasses, rng);
    std::vector<std::size_t> dims{kBottleneckWidth};
    dims.insert(dims.end(), config_.grade_hidden.begin(), config_.grade_hidden.end());
    dims.push_back(kGradeClasses);
    grade_head = nn::Mlp(dims, rng);
}

EssayCbmModel EssayCbmModel::clone() const {
    EssayCbmModel copy;
    copy.vocab_ = vocab_;
    copy.config_ = config_;
    copy.provenance_ = provenance_;
    copy.encoder.embedding = encoder.embedding.clone();
    copy.encoder.lstm = encoder.lstm.clone();
    for (std::size_t k = 0; k < kNumConcepts; ++k) copy.concept_heads[k] = concept_heads[k].clone();
    copy.grade_head = grade_head.clone();
    return copy;
}

std::vector<Tensor> EssayCbmModel::concept_logits(const Tensor& z) const {
    std::vector<Tensor> logits;
    logits.reserve(kNumConcepts);
    for (const auto& head : concept_heads) logits.push_back(head.forward(z));
    return logits;
}

Tensor EssayCbmModel::grade_logits(const Tensor& bottleneck) const {
    if (bottleneck.rank() != 2 || bottleneck.cols() != kBottleneckWidth) {
        throw ShapeError("grade head expects (B x 40) input, got " + to_string(bottleneck.shape()));
    }
    return grade_head.forward(bottleneck);
}

std::vector<nn::NamedTensor> EssayCbmModel::named_parameters() const {
    std::vector<nn::NamedTensor> out;
    encoder.collect(out);
    for (std::size_t k = 0; k < kNumConcepts; ++k) {
        concept_heads[k].collect("concept_head." + std::string(concept_names()[k]), out);
    }
    grade_head.collect("grade_head", out);
    return out;
}

std::vector<Tensor> EssayCbmModel::parameters() const {
    std::vector<Tensor> out;
    for (auto& p : named_parameters()) out.push_back(p.tensor);
    return out;
}

// ---------------------------------------------------------------------------

BaselineModel::BaselineModel(Vocab vocab, ModelConfig config, std::uint64_t seed)
    : vocab_(std::move(vocab)), config_(std::move(config)) {
    provenance_.seed = seed;
    nn::Rng rng(seed);
    encoder = Encoder(vocab_.size(), config_, rng);
    grade_head = nn::Linear(encoder.output_dim(), kGradeClasses, rng);
}

BaselineModel BaselineModel::clone() const {
    BaselineModel copy;
    copy.vocab_ = vocab_;
    copy.config_ = config_;
    copy.provenance_ = provenance_;
    copy.encoder.embedding = encoder.embedding.clone();
    copy.encoder.lstm = encoder.lstm.clone();
    copy.grade_head = grade_head.clone();
    return copy;
}

std::vector<nn::NamedTensor> BaselineModel::named_parameters() const {
    std::vector<nn::NamedTensor> out;
    encoder.collect(out);
    grade_head.collect("grade_head", out);
    return out;
}

std::vector<Tensor> BaselineModel::parameters() const {
    std::vector<Tensor> out;
    for (auto& p : named_parameters()) out.push_back(p.tensor);
    return out;
}

// ---------------------------------------------------------------------------

Tensor one_hot_bottleneck(std::span<const ConceptVector> concepts) {
    std::vector<double> values(concepts.size() * kBottleneckWidth, 0.0);
    for (std::size_t b = 0; b < concepts.size(); ++b) {
        for (std::size_t k = 0; k < kNumConcepts; ++k) {
            values[b * kBottleneckWidth + k * kConceptClasses + static_cast<std::size_t>(concepts[b][k])] = 1.0;
        }
    }
    return Tensor::from({concepts.size(), kBottleneckWidth}, std::move(values));
}

std::vector<Tensor> forward_concept_logits(const EssayCbmModel& model, std::span<const TokenSequence> batch) {
    return model.concept_logits(model.encoder.encode(batch));
}

std::vector<Tensor> forward_concept_logits(const EssayCbmModel& model, const TokenSequence& tokens) {
    auto batched = forward_concept_logits(model, std::span<const TokenSequence>(&tokens, 1));
    for (Tensor& t : batched) t = reshape(t, {kConceptClasses});
    return batched;
}

std::vector<ConceptPrediction> predict_concepts(const EssayCbmModel& model, std::span<const TokenSequence> batch) {
    NoGradGuard no_grad;
    const auto logits = forward_concept_logits(model, batch);
    std::vector<ConceptPrediction> out(batch.size());
    for (std::size_t k = 0; k < kNumConcepts; ++k) {
        const Tensor probs = softmax(logits[k]);
        for (std::size_t b = 0; b < batch.size(); ++b) {
            auto row = logits[k].data().subspan(b * kConceptClasses, kConceptClasses);
            out[b].concepts.set(k, static_cast<int>(argmax(row)));
            auto prow = probs.data().subspan(b * kConceptClasses, kConceptClasses);
            std::copy(prow.begin(), prow.end(), out[b].probs[k].begin());
        }
    }
    return out;
}

ConceptPrediction predict_concepts(const EssayCbmModel& model, const TokenSequence& tokens) {
    return predict_concepts(model, std::span<const TokenSequence>(&tokens, 1)).front();
}

GradePrediction grade_prediction_from_logits(std::span<const double> logits) {
    if (logits.size() != kGradeClasses) throw ShapeError("grade logits must have 6 entries");
    NoGradGuard no_grad;
    const Tensor probs = softmax(Tensor::from({kGradeClasses}, {logits.begin(), logits.end()}));
    GradePrediction out;
    out.grade = static_cast<int>(argmax(logits));
    std::copy(probs.data().begin(), probs.data().end(), out.probs.begin());
    return out;
}

std::vector<GradePrediction> grade_from_concepts(const EssayCbmModel& model, std::span<const ConceptVector> concepts) {
    NoGradGuard no_grad;
    const Tensor logits = model.grade_logits(one_hot_bottleneck(concepts));
    std::vector<GradePrediction> out;
    out.reserve(concepts.size());
    for (std::size_t b = 0; b < concepts.size(); ++b) {
        out.push_back(grade_prediction_from_logits(logits.data().subspan(b * kGradeClasses, kGradeClasses)));
    }
    return out;
}

GradePrediction grade_from_concepts(const EssayCbmModel& model, const ConceptVector& concepts) {
    return grade_from_concepts(model, std::span<const ConceptVector>(&concepts, 1)).front();
}

JointOutput forward_joint(const EssayCbmModel& model, std::span<const TokenSequence> batch) {
    JointOutput out;
    out.concept_logits = forward_concept_logits(model, batch);
    std::vector<Tensor> probs;
    probs.reserve(kNumConcepts);
    for (const Tensor& logits : out.concept_logits) probs.push_back(softmax(logits));
    out.grade_logits = model.grade_logits(concat_cols(probs));
    return out;
}

Tensor baseline_forward(const BaselineModel& model, std::span<const TokenSequence> batch) {
    return model.grade_head.forward(model.encoder.encode(batch));
}

GradePrediction baseline_predict(const BaselineModel& model, const TokenSequence& tokens) {
    NoGradGuard no_grad;
    const Tensor logits = baseline_forward(model, std::span<const TokenSequence>(&tokens, 1));
    return grade_prediction_from_logits(logits.data());
}

}  // namespace cbm
