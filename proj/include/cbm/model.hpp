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

// The two grading architectures.
//
//   EssayCbmModel:  text -> z -> 8 concept heads -> C -> h(C) -> grade
//   BaselineModel:  text -> z -> affine -> grade
//
// z is the masked mean of BiLSTM states over the embedded tokens. The grade
// head h of the CBM only ever sees a (B x 40) bottleneck matrix: hard one-hot
// blocks at inference, softmax probability blocks during joint training.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cbm/data.hpp"
#include "cbm/nn.hpp"
#include "cbm/schema.hpp"
#include "cbm/tensor.hpp"

namespace cbm {

struct ModelConfig {
    std::size_t embedding_dim = 128;
    std::size_t hidden_dim = 128;
    std::vector<std::size_t> grade_hidden = {64, 64};
    std::size_t max_length = kMaxSequenceLength;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class ModelKind { kCbm, kBaseline };
std::string_view to_string(ModelKind kind);

/// Where a model came from; echoed into checkpoints.
struct Provenance {
    std::uint64_t seed = 0;
    std::string training_config;  // JSON text, empty when untrained
};

/// Embedding, BiLSTM and masked mean pooling shared by both architectures.
class Encoder {
  public:
    Encoder() = default;
    Encoder(std::size_t vocab_size, const ModelConfig& config, nn::Rng& rng);

    /// (B x 2H) essay representations. Every sequence needs at least one token.
    Tensor encode(std::span<const TokenSequence> batch) const;

    std::size_t output_dim() const { return lstm.output_dim(); }
    void collect(std::vector<nn::NamedTensor>& out) const;

    nn::Embedding embedding;
    nn::BiLstm lstm;
};

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

struct ConceptPrediction {
    ConceptVector concepts;
    std::array<std::array<double, kConceptClasses>, kNumConcepts> probs{};
};

struct GradePrediction {
    int grade = 0;
    std::array<double, kGradeClasses> probs{};

    friend bool operator==(const GradePrediction&, const GradePrediction&) = default;
};

class EssayCbmModel {
  public:
    static constexpr ModelKind kKind = ModelKind::kCbm;

    EssayCbmModel() = default;
    EssayCbmModel(Vocab vocab, ModelConfig config, std::uint64_t seed);

    EssayCbmModel(EssayCbmModel&&) = default;
    EssayCbmModel& operator=(EssayCbmModel&&) = default;
    /// Parameters are shared handles, so copies must be explicit.
    EssayCbmModel clone() const;

    const Vocab& vocab() const { return vocab_; }
    const ModelConfig& config() const { return config_; }
    Provenance& provenance() { return provenance_; }
    const Provenance& provenance() const { return provenance_; }

    TokenSequence tokenize(std::string_view text) const { return cbm::tokenize(text, vocab_, config_.max_length); }

    /// 8 tensors of shape (B x 5), one per concept head.
    std::vector<Tensor> concept_logits(const Tensor& z) const;
    /// h applied to a (B x 40) bottleneck -> (B x 6) grade logits.
    Tensor grade_logits(const Tensor& bottleneck) const;

    std::vector<nn::NamedTensor> named_parameters() const;
    std::vector<Tensor> parameters() const;

    Encoder encoder;
    std::array<nn::Linear, kNumConcepts> concept_heads;
    nn::Mlp grade_head;

  private:
    Vocab vocab_;
    ModelConfig config_;
    Provenance provenance_;
};

class BaselineModel {
  public:
    static constexpr ModelKind kKind = ModelKind::kBaseline;

    BaselineModel() = default;
    BaselineModel(Vocab vocab, ModelConfig config, std::uint64_t seed);

    BaselineModel(BaselineModel&&) = default;
    BaselineModel& operator=(BaselineModel&&) = default;
    BaselineModel clone() const;

    const Vocab& vocab() const { return vocab_; }
    const ModelConfig& config() const { return config_; }
    Provenance& provenance() { return provenance_; }
    const Provenance& provenance() const { return provenance_; }

    TokenSequence tokenize(std::string_view text) const { return cbm::tokenize(text, vocab_, config_.max_length); }

    std::vector<nn::NamedTensor> named_parameters() const;
    std::vector<Tensor> parameters() const;

    Encoder encoder;
    nn::Linear grade_head;

  private:
    Vocab vocab_;
    ModelConfig config_;
    Provenance provenance_;
};

using AnyModel = std::variant<EssayCbmModel, BaselineModel>;
ModelKind kind_of(const AnyModel& model);

// ---------------------------------------------------------------------------
// Forward paths
// ---------------------------------------------------------------------------

/// Hard bottleneck: each c_k as a one-hot block of width 5 -> (B x 40).
Tensor one_hot_bottleneck(std::span<const ConceptVector> concepts);

std::vector<Tensor> forward_concept_logits(const EssayCbmModel& model, std::span<const TokenSequence> batch);
std::vector<Tensor> forward_concept_logits(const EssayCbmModel& model, const TokenSequence& tokens);

/// c_k = argmax of head k; probabilities are the per-head softmax.
ConceptPrediction predict_concepts(const EssayCbmModel& model, const TokenSequence& tokens);
std::vector<ConceptPrediction> predict_concepts(const EssayCbmModel& model, std::span<const TokenSequence> batch);

/// Runs h on the one-hot encoding of C. Reads nothing but C and h.
GradePrediction grade_from_concepts(const EssayCbmModel& model, const ConceptVector& concepts);
std::vector<GradePrediction> grade_from_concepts(const EssayCbmModel& model,
                                                 std::span<const ConceptVector> concepts);

struct JointOutput {
    std::vector<Tensor> concept_logits;  // 8 x (B x 5)
    Tensor grade_logits;                 // B x 6
};

/// Training path: h consumes the concatenated per-head softmax rows.
JointOutput forward_joint(const EssayCbmModel& model, std::span<const TokenSequence> batch);

/// (B x 6) grade logits straight from z.
Tensor baseline_forward(const BaselineModel& model, std::span<const TokenSequence> batch);
GradePrediction baseline_predict(const BaselineModel& model, const TokenSequence& tokens);

GradePrediction grade_prediction_from_logits(std::span<const double> logits);

// ---------------------------------------------------------------------------
// Checkpoints (byte layout in docs/checkpoint_format.md)
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const EssayCbmModel& model, const std::filesystem::path& path);
void save_checkpoint(const BaselineModel& model, const std::filesystem::path& path);
void save_checkpoint(const AnyModel& model, const std::filesystem::path& path);
std::string checkpoint_bytes(const AnyModel& model);

AnyModel load_checkpoint(const std::filesystem::path& path);
AnyModel parse_checkpoint(std::string_view bytes);
/// Throws CheckpointError(kKindMismatch) when the file holds the other kind.
EssayCbmModel load_cbm_checkpoint(const std::filesystem::path& path);
BaselineModel load_baseline_checkpoint(const std::filesystem::path& path);

}  // namespace cbm
