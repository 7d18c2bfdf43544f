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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "cbm/errors.hpp"
#include "cbm/json_io.hpp"
#include "cbm/optim.hpp"
#include "cbm/train.hpp"

namespace cbm {

std::string_view to_string(EarlyStopMetric metric) {
    switch (metric) {
        case EarlyStopMetric::kGradeMacroF1: return "grade_macro_f1";
        case EarlyStopMetric::kGradeAccuracy: return "grade_accuracy";
        case EarlyStopMetric::kGradeWeightedF1: return "grade_weighted_f1";
    }
    return "grade_macro_f1";
}

EarlyStopMetric parse_early_stop_metric(std::string_view name) {
    for (auto m : {EarlyStopMetric::kGradeMacroF1, EarlyStopMetric::kGradeAccuracy, EarlyStopMetric::kGradeWeightedF1}) {
        if (to_string(m) == name) return m;
    }
    throw ContractError("unknown early-stop metric '" + std::string(name) + "'");
}

void TrainingConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ContractError("training: learning rate must be positive");
    if (batch_size == 0) throw ContractError("training: batch size must be at least 1");
    if (max_epochs == 0) throw ContractError("training: max epochs must be at least 1");
    if (patience == 0) throw ContractError("training: patience must be at least 1");
    if (!(lambda >= 0.0)) throw ContractError("training: lambda must be non-negative");
}

std::string training_config_json(const TrainingConfig& config) {
    nlohmann::json j = {{"learning_rate", config.learning_rate}, {"batch_size", config.batch_size},
                        {"max_epochs", config.max_epochs},       {"patience", config.patience},
                        {"lambda", config.lambda},               {"seed", config.seed},
                        {"early_stop_metric", std::string(to_string(config.early_stop_metric))}};
    return j.dump();
}

TrainingConfig training_config_from_json(std::string_view text) {
    TrainingConfig config;
    if (text.empty()) return config;
    const auto j = nlohmann::json::parse(text);
    config.learning_rate = j.value("learning_rate", config.learning_rate);
    config.batch_size = j.value("batch_size", config.batch_size);
    config.max_epochs = j.value("max_epochs", config.max_epochs);
    config.patience = j.value("patience", config.patience);
    config.lambda = j.value("lambda", config.lambda);
    config.seed = j.value("seed", config.seed);
    if (j.contains("early_stop_metric")) {
        config.early_stop_metric = parse_early_stop_metric(j["early_stop_metric"].get<std::string>());
    }
    return config;
}

JointLoss joint_loss(std::span<const Tensor> concept_logits, std::span<const ConceptVector> concept_targets,
                     const Tensor& grade_logits, std::span<const std::size_t> grade_targets, double lambda) {
    if (!(lambda >= 0.0)) throw ContractError("joint_loss: lambda must be non-negative");
    if (grade_logits.rank() != 2 || grade_logits.cols() != kGradeClasses) {
        throw ContractError("joint_loss: grade logits must be (B x 6)");
    }
    const std::size_t batch = grade_logits.rows();
    if (grade_targets.size() != batch) throw ContractError("joint_loss: grade targets differ from batch size");

    JointLoss out;
    Tensor grade = cross_entropy(grade_logits, grade_targets);
    if (concept_logits.empty()) {
        // Baseline: no concept path, concept term is identically zero.
        out.total = grade;
        out.breakdown = {grade.item(), 0.0, grade.item()};
        return out;
    }
    if (concept_logits.size() != kNumConcepts) throw ContractError("joint_loss: expected 8 concept heads");
    if (concept_targets.size() != batch) throw ContractError("joint_loss: concept targets differ from batch size");

    Tensor concept_sum;
    std::vector<std::size_t> targets(batch);
    for (std::size_t k = 0; k < kNumConcepts; ++k) {
        const Tensor& logits = concept_logits[k];
        if (logits.rank() != 2 || logits.rows() != batch || logits.cols() != kConceptClasses) {
            throw ContractError("joint_loss: concept logits must be (B x 5)");
        }
        for (std::size_t b = 0; b < batch; ++b) targets[b] = static_cast<std::size_t>(concept_targets[b][k]);
        Tensor head_loss = cross_entropy(logits, targets);
        concept_sum = concept_sum.defined() ? add(concept_sum, head_loss) : head_loss;
    }
    Tensor concept_mean = scale(concept_sum, 1.0 / static_cast<double>(kNumConcepts));
    out.total = add(grade, scale(concept_mean, lambda));
    out.breakdown = {grade.item(), concept_mean.item(), out.total.item()};
    return out;
}

namespace {

struct Encoded {
    std::vector<TokenSequence> tokens;
    std::vector<std::size_t> grades;
    std::vector<ConceptVector> concepts;
};

template <typename Model>
Encoded encode_dataset(const Model& model, const Dataset& dataset) {
    Encoded out;
    for (const auto& essay : dataset) {
        out.tokens.push_back(model.tokenize(essay.text));
        if (out.tokens.back().empty()) throw DegenerateInputError("training: essay '" + essay.id + "' has no tokens");
        out.grades.push_back(static_cast<std::size_t>(essay.grade));
        out.concepts.push_back(essay.concepts);
    }
    return out;
}

JointLoss batch_loss(const EssayCbmModel& model, std::span<const TokenSequence> tokens,
                     std::span<const ConceptVector> concepts, std::span<const std::size_t> grades, double lambda) {
    JointOutput out = forward_joint(model, tokens);
    return joint_loss(out.concept_logits, concepts, out.grade_logits, grades, lambda);
}

JointLoss batch_loss(const BaselineModel& model, std::span<const TokenSequence> tokens,
                     std::span<const ConceptVector> concepts, std::span<const std::size_t> grades, double lambda) {
    return joint_loss({}, concepts, baseline_forward(model, tokens), grades, lambda);
}

double select_metric(const EvalReport& report, EarlyStopMetric metric) {
    switch (metric) {
        case EarlyStopMetric::kGradeMacroF1: return report.macro_f1;
        case EarlyStopMetric::kGradeAccuracy: return report.accuracy;
        case EarlyStopMetric::kGradeWeightedF1: return report.weighted_f1;
    }
    return report.macro_f1;
}

template <typename Model>
FitResult fit_impl(Model& model, const Dataset& train, const Dataset& validation, const TrainingConfig& config,
                   const FitHooks& hooks) {
    config.validate();
    if (train.empty() || validation.empty()) throw ContractError("fit: training and validation splits must be non-empty");

    const Encoded data = encode_dataset(model, train);
    const std::vector<Tensor> params = model.parameters();
    Adam optimizer(params, Adam::Options{.learning_rate = config.learning_rate});
    optimizer.zero_grad();

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    EarlyStopping stopper(config.patience);
    std::vector<std::vector<double>> best(params.size());
    auto snapshot = [&] {
        for (std::size_t i = 0; i < params.size(); ++i) best[i].assign(params[i].data().begin(), params[i].data().end());
    };

    FitResult result;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double grade_sum = 0.0, concept_sum = 0.0;
        std::size_t batches = 0;
        std::vector<TokenSequence> tokens;
        std::vector<ConceptVector> concepts;
        std::vector<std::size_t> grades;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            tokens.clear();
            concepts.clear();
            grades.clear();
            for (std::size_t i = begin; i < end; ++i) {
                tokens.push_back(data.tokens[order[i]]);
                concepts.push_back(data.concepts[order[i]]);
                grades.push_back(data.grades[order[i]]);
            }
            JointLoss loss = batch_loss(model, tokens, concepts, grades, config.lambda);
            loss.total.backward();
            optimizer.step();
            optimizer.zero_grad();
            grade_sum += loss.breakdown.grade_loss;
            concept_sum += loss.breakdown.concept_loss;
            ++batches;
        }

        EpochRecord record;
        record.epoch = epoch;
        record.train_loss.grade_loss = grade_sum / static_cast<double>(batches);
        record.train_loss.concept_loss = concept_sum / static_cast<double>(batches);
        record.train_loss.total = record.train_loss.grade_loss + config.lambda * record.train_loss.concept_loss;
        record.validation = evaluate(model, validation);
        record.metric = hooks.metric ? hooks.metric(epoch, record.validation)
                                     : select_metric(record.validation, config.early_stop_metric);
        record.improved = stopper.update(record.metric);
        if (record.improved) snapshot();

        spdlog::info("epoch {:>2}  loss {:.5f} (grade {:.5f}, concept {:.5f})  val acc {:.4f} macro-F1 {:.4f}{}",
                     epoch, record.train_loss.total, record.train_loss.grade_loss, record.train_loss.concept_loss,
                     record.validation.accuracy, record.validation.macro_f1, record.improved ? "  *" : "");
        if (hooks.on_epoch_end) hooks.on_epoch_end(record, params);
        result.history.push_back(std::move(record));

        if (stopper.should_stop()) {
            result.stopped_early = epoch < config.max_epochs;
            break;
        }
    }

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i];
        std::copy(best[i].begin(), best[i].end(), p.mutable_data().begin());
    }
    result.best_epoch = stopper.best_epoch();
    model.provenance().training_config = training_config_json(config);
    return result;
}

}  // namespace

FitResult fit(EssayCbmModel& model, const Dataset& train, const Dataset& validation, const TrainingConfig& config,
              const FitHooks& hooks) {
    return fit_impl(model, train, validation, config, hooks);
}

FitResult fit(BaselineModel& model, const Dataset& train, const Dataset& validation, const TrainingConfig& config,
              const FitHooks& hooks) {
    return fit_impl(model, train, validation, config, hooks);
}

AnyModel train_model(ModelKind kind, const Dataset& train, const Dataset& validation, const ModelConfig& model_config,
                     const TrainingConfig& config, FitResult* result, const FitHooks& hooks) {
    Vocab vocab = Vocab::build(train);
    FitResult local;
    if (kind == ModelKind::kCbm) {
        EssayCbmModel model(std::move(vocab), model_config, config.seed);
        local = fit(model, train, validation, config, hooks);
        if (result) *result = std::move(local);
        return model;
    }
    BaselineModel model(std::move(vocab), model_config, config.seed);
    local = fit(model, train, validation, config, hooks);
    if (result) *result = std::move(local);
    return model;
}

namespace {

MetricSummary summarize(const std::vector<double>& values) {
    MetricSummary s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return s;
}

}  // namespace

CrossValidationResult cross_validate(const Dataset& dataset, std::size_t k, ModelKind kind,
                                     const ModelConfig& model_config, const TrainingConfig& config) {
    const auto folds = kfold_indices(dataset.size(), k, config.seed);
    CrossValidationResult out;
    std::vector<double> acc, macro, weighted, concept_acc;
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<bool> held_out(dataset.size(), false);
        for (std::size_t i : folds[f]) held_out[i] = true;
        Dataset rest, test;
        for (std::size_t i = 0; i < dataset.size(); ++i) (held_out[i] ? test : rest).push_back(dataset[i]);

        // A tenth of the training folds drives early stopping.
        std::vector<std::size_t> order(rest.size());
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 rng(config.seed + f + 1);
        std::shuffle(order.begin(), order.end(), rng);
        const std::size_t n_val = std::max<std::size_t>(1, rest.size() / 10);
        if (rest.size() <= n_val) throw ContractError("cross_validate: too few items to train each fold");
        Dataset train, validation;
        for (std::size_t i = 0; i < order.size(); ++i) (i < n_val ? validation : train).push_back(rest[order[i]]);

        spdlog::info("fold {}/{}: train {} validation {} test {}", f + 1, k, train.size(), validation.size(),
                     test.size());
        const AnyModel model = train_model(kind, train, validation, model_config, config);
        out.folds.push_back(evaluate(model, test));
        acc.push_back(out.folds.back().accuracy);
        macro.push_back(out.folds.back().macro_f1);
        weighted.push_back(out.folds.back().weighted_f1);
        concept_acc.push_back(out.folds.back().mean_concept_accuracy());
    }
    out.accuracy = summarize(acc);
    out.macro_f1 = summarize(macro);
    out.weighted_f1 = summarize(weighted);
    out.mean_concept_accuracy = summarize(concept_acc);
    return out;
}

void write_history_jsonl(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write history file " + path.string());
    for (const auto& record : history) out << to_json(record).dump() << '\n';
}

}  // namespace cbm
