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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cbm/data.hpp"
#include "cbm/model.hpp"

namespace cbm {

enum class EarlyStopMetric { kGradeMacroF1, kGradeAccuracy, kGradeWeightedF1 };
std::string_view to_string(EarlyStopMetric metric);
EarlyStopMetric parse_early_stop_metric(std::string_view name);

struct TrainingConfig {
    double learning_rate = 1e-5;
    std::size_t batch_size = 8;
    std::size_t max_epochs = 20;
    std::size_t patience = 5;
    double lambda = 0.5;
    std::uint64_t seed = 0;
    EarlyStopMetric early_stop_metric = EarlyStopMetric::kGradeMacroF1;

    /// Throws ContractError on lambda < 0, patience == 0, batch_size == 0,
    /// max_epochs == 0 or a non-positive learning rate.
    void validate() const;
};

struct LossBreakdown {
    double grade_loss = 0.0;
    double concept_loss = 0.0;
    double total = 0.0;
};

struct JointLoss {
    Tensor total;  // differentiable scalar
    LossBreakdown breakdown;
};

/// total = grade_loss + lambda * concept_loss, where grade_loss is the 6-way
/// cross-entropy and concept_loss the mean over the 8 heads of their 5-way
/// cross-entropies.
JointLoss joint_loss(std::span<const Tensor> concept_logits, std::span<const ConceptVector> concept_targets,
                     const Tensor& grade_logits, std::span<const std::size_t> grade_targets, double lambda);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;  // [label][prediction]

struct ClassificationMetrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;     // over classes present in the labels
    double weighted_f1 = 0.0;  // support-weighted
    ConfusionMatrix confusion;
};

ClassificationMetrics classification_metrics(std::span<const int> labels, std::span<const int> predictions,
                                             std::size_t num_classes);

struct EvalReport {
    std::size_t sample_count = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    ConfusionMatrix grade_confusion;
    // Empty for the baseline, which has no concept path.
    std::vector<double> concept_accuracy;
    std::vector<ConfusionMatrix> concept_confusion;

    double mean_concept_accuracy() const;
};

/// Hard predictions (argmax concepts, then h on the one-hot bottleneck).
EvalReport evaluate(const EssayCbmModel& model, const Dataset& dataset);
EvalReport evaluate(const BaselineModel& model, const Dataset& dataset);
EvalReport evaluate(const AnyModel& model, const Dataset& dataset);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Tracks the best metric seen and counts epochs without strict improvement.
class EarlyStopping {
  public:
    explicit EarlyStopping(std::size_t patience);

    /// Feeds the metric of the next epoch; returns true when it is a new best.
    bool update(double metric);
    bool should_stop() const { return stale_epochs_ >= patience_; }

    std::size_t epochs_seen() const { return epochs_; }
    std::size_t best_epoch() const { return best_epoch_; }  // 1-based, 0 before any update
    double best_metric() const { return best_metric_; }

  private:
    std::size_t patience_;
    std::size_t epochs_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t stale_epochs_ = 0;
    double best_metric_ = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    LossBreakdown train_loss;
    EvalReport validation;
    double metric = 0.0;
    bool improved = false;
};

struct FitResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    bool stopped_early = false;
};

struct FitHooks {
    /// Replaces the validation metric, e.g. to script early-stopping runs.
    std::function<double(std::size_t epoch, const EvalReport& validation)> metric;
    std::function<void(const EpochRecord& record, const std::vector<Tensor>& params)> on_epoch_end;
};

/// Mini-batch Adam on the joint loss with per-epoch validation and early
/// stopping. On return the model holds the best-epoch parameters.
FitResult fit(EssayCbmModel& model, const Dataset& train, const Dataset& validation, const TrainingConfig& config,
              const FitHooks& hooks = {});
FitResult fit(BaselineModel& model, const Dataset& train, const Dataset& validation, const TrainingConfig& config,
              const FitHooks& hooks = {});

/// Builds the vocabulary from `train`, constructs a model of `kind` seeded
/// with config.seed, and fits it.
AnyModel train_model(ModelKind kind, const Dataset& train, const Dataset& validation, const ModelConfig& model_config,
                     const TrainingConfig& config, FitResult* result = nullptr, const FitHooks& hooks = {});

struct MetricSummary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation over folds
};

struct CrossValidationResult {
    std::vector<EvalReport> folds;
    MetricSummary accuracy;
    MetricSummary macro_f1;
    MetricSummary weighted_f1;
    MetricSummary mean_concept_accuracy;  // zeros for the baseline
};

/// Seeded k-fold CV. Each fold trains on the other k-1 folds (holding out a
/// tenth of them for early stopping) and evaluates on its own fold.
CrossValidationResult cross_validate(const Dataset& dataset, std::size_t k, ModelKind kind,
                                     const ModelConfig& model_config, const TrainingConfig& config);

std::string training_config_json(const TrainingConfig& config);
/// Inverse of training_config_json; absent keys keep their defaults.
TrainingConfig training_config_from_json(std::string_view text);
void write_history_jsonl(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace cbm
