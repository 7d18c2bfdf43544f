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
#include <limits>
#include <numeric>

#include "cbm/errors.hpp"
#include "cbm/train.hpp"

namespace cbm {

ClassificationMetrics classification_metrics(std::span<const int> labels, std::span<const int> predictions,
                                             std::size_t num_classes) {
    if (labels.size() != predictions.size()) throw ContractError("metrics: label/prediction counts differ");
    if (labels.empty()) throw ContractError("metrics: no samples");
    ClassificationMetrics m;
    m.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || predictions[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes ||
            static_cast<std::size_t>(predictions[i]) >= num_classes) {
            throw IndexError("metrics: class index outside [0, " + std::to_string(num_classes) + ")");
        }
        ++m.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
    }

    const double n = static_cast<double>(labels.size());
    std::size_t correct = 0;
    std::size_t present = 0;
    double f1_sum = 0.0, weighted_sum = 0.0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        const std::size_t tp = m.confusion[c][c];
        correct += tp;
        std::size_t support = 0, predicted = 0;
        for (std::size_t j = 0; j < num_classes; ++j) {
            support += m.confusion[c][j];
            predicted += m.confusion[j][c];
        }
        if (support == 0) continue;
        const std::size_t denom = support + predicted;  // 2TP + FP + FN
        const double f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
        ++present;
        f1_sum += f1;
        weighted_sum += f1 * static_cast<double>(support);
    }
    m.accuracy = static_cast<double>(correct) / n;
    m.macro_f1 = f1_sum / static_cast<double>(present);
    m.weighted_f1 = weighted_sum / n;
    return m;
}

double EvalReport::mean_concept_accuracy() const {
    if (concept_accuracy.empty()) return 0.0;
    return std::accumulate(concept_accuracy.begin(), concept_accuracy.end(), 0.0) /
           static_cast<double>(concept_accuracy.size());
}

namespace {

constexpr std::size_t kEvalChunk = 64;

void fill_grade_metrics(EvalReport& report, const std::vector<int>& labels, const std::vector<int>& predicted) {
    const auto m = classification_metrics(labels, predicted, kGradeClasses);
    report.sample_count = labels.size();
    report.accuracy = m.accuracy;
    report.macro_f1 = m.macro_f1;
    report.weighted_f1 = m.weighted_f1;
    report.grade_confusion = m.confusion;
}

}  // namespace

EvalReport evaluate(const EssayCbmModel& model, const Dataset& dataset) {
    if (dataset.empty()) throw ContractError("evaluate: empty dataset");
    std::vector<int> grade_labels, grade_predicted;
    std::array<std::vector<int>, kNumConcepts> concept_labels, concept_predicted;
    for (std::size_t begin = 0; begin < dataset.size(); begin += kEvalChunk) {
        const std::size_t end = std::min(dataset.size(), begin + kEvalChunk);
        std::vector<TokenSequence> batch;
        for (std::size_t i = begin; i < end; ++i) {
            batch.push_back(model.tokenize(dataset[i].text));
            if (batch.back().empty()) {
                throw DegenerateInputError("evaluate: essay '" + dataset[i].id + "' has no tokens");
            }
        }
        const auto concepts = predict_concepts(model, batch);
        std::vector<ConceptVector> hard;
        for (const auto& p : concepts) hard.push_back(p.concepts);
        const auto grades = grade_from_concepts(model, hard);
        for (std::size_t i = begin; i < end; ++i) {
            grade_labels.push_back(dataset[i].grade);
            grade_predicted.push_back(grades[i - begin].grade);
            for (std::size_t k = 0; k < kNumConcepts; ++k) {
                concept_labels[k].push_back(dataset[i].concepts[k]);
                concept_predicted[k].push_back(hard[i - begin][k]);
            }
        }
    }
    EvalReport report;
    fill_grade_metrics(report, grade_labels, grade_predicted);
    for (std::size_t k = 0; k < kNumConcepts; ++k) {
        const auto m = classification_metrics(concept_labels[k], concept_predicted[k], kConceptClasses);
        report.concept_accuracy.push_back(m.accuracy);
        report.concept_confusion.push_back(m.confusion);
    }
    return report;
}

EvalReport evaluate(const BaselineModel& model, const Dataset& dataset) {
    if (dataset.empty()) throw ContractError("evaluate: empty dataset");
    std::vector<int> labels, predicted;
    NoGradGuard no_grad;
    for (std::size_t begin = 0; begin < dataset.size(); begin += kEvalChunk) {
        const std::size_t end = std::min(dataset.size(), begin + kEvalChunk);
        std::vector<TokenSequence> batch;
        for (std::size_t i = begin; i < end; ++i) {
            batch.push_back(model.tokenize(dataset[i].text));
            if (batch.back().empty()) {
                throw DegenerateInputError("evaluate: essay '" + dataset[i].id + "' has no tokens");
            }
        }
        const Tensor logits = baseline_forward(model, batch);
        for (std::size_t i = begin; i < end; ++i) {
            labels.push_back(dataset[i].grade);
            const auto row = logits.data().subspan((i - begin) * kGradeClasses, kGradeClasses);
            predicted.push_back(static_cast<int>(argmax(row)));
        }
    }
    EvalReport report;
    fill_grade_metrics(report, labels, predicted);
    return report;
}

EvalReport evaluate(const AnyModel& model, const Dataset& dataset) {
    return std::visit([&](const auto& m) { return evaluate(m, dataset); }, model);
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
    if (patience == 0) throw ContractError("early stopping: patience must be at least 1");
}

bool EarlyStopping::update(double metric) {
    ++epochs_;
    if (best_epoch_ == 0 || metric > best_metric_) {
        best_metric_ = metric;
        best_epoch_ = epochs_;
        stale_epochs_ = 0;
        return true;
    }
    ++stale_epochs_;
    return false;
}

}  // namespace cbm
