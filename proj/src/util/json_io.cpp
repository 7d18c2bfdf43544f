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

#include "cbm/json_io.hpp"

namespace cbm {

namespace {

template <typename Array>
Json array_of(const Array& values) {
    Json out = Json::array();
    for (const auto& v : values) out.push_back(v);
    return out;
}

Json matrix(const ConfusionMatrix& m) {
    Json out = Json::array();
    for (const auto& row : m) out.push_back(array_of(row));
    return out;
}

Json concepts_array(const ConceptVector& c) { return array_of(c.scores()); }

}  // namespace

Json to_json(const EvalReport& report) {
    Json out;
    out["sample_count"] = report.sample_count;
    out["accuracy"] = report.accuracy;
    out["macro_f1"] = report.macro_f1;
    out["weighted_f1"] = report.weighted_f1;
    out["grade_confusion"] = matrix(report.grade_confusion);
    if (!report.concept_accuracy.empty()) {
        Json accuracy = Json::object();
        Json confusion = Json::object();
        for (std::size_t k = 0; k < report.concept_accuracy.size(); ++k) {
            const std::string name(concept_names()[k]);
            accuracy[name] = report.concept_accuracy[k];
            confusion[name] = matrix(report.concept_confusion[k]);
        }
        out["concept_accuracy"] = std::move(accuracy);
        out["mean_concept_accuracy"] = report.mean_concept_accuracy();
        out["concept_confusion"] = std::move(confusion);
    }
    return out;
}

Json to_json(const GradingResult& result) {
    Json out;
    out["essay_id"] = result.essay_id;
    out["model_id"] = result.model_id;
    out["grade"] = result.grade;
    out["grade_probs"] = array_of(result.grade_probs);
    Json concepts = Json::array();
    for (const ConceptScore& s : result.concepts) {
        Json c;
        c["index"] = s.index;
        c["name"] = std::string(s.name);
        c["score"] = s.score;
        c["confidence"] = s.confidence;
        c["probs"] = array_of(s.probs);
        concepts.push_back(std::move(c));
    }
    out["concepts"] = std::move(concepts);
    return out;
}

Json to_json(const InterventionResult& result) {
    Json out;
    out["grade"] = result.grade;
    out["grade_probs"] = array_of(result.grade_probs);
    out["effective_concepts"] = concepts_array(result.effective_concepts);
    return out;
}

Json to_json(const WhatIfTable& table) {
    Json out;
    out["concepts"] = concepts_array(table.concepts);
    out["grade"] = table.grade;
    Json names = Json::array();
    for (auto n : concept_names()) names.push_back(std::string(n));
    out["concept_names"] = std::move(names);
    Json rows = Json::array();
    for (const auto& row : table.grades) rows.push_back(array_of(row));
    out["table"] = std::move(rows);
    return out;
}

Json to_json(const EpochRecord& record) {
    Json out;
    out["epoch"] = record.epoch;
    out["grade_loss"] = record.train_loss.grade_loss;
    out["concept_loss"] = record.train_loss.concept_loss;
    out["total_loss"] = record.train_loss.total;
    out["val_accuracy"] = record.validation.accuracy;
    out["val_macro_f1"] = record.validation.macro_f1;
    out["val_weighted_f1"] = record.validation.weighted_f1;
    if (!record.validation.concept_accuracy.empty()) {
        out["val_mean_concept_accuracy"] = record.validation.mean_concept_accuracy();
    }
    out["metric"] = record.metric;
    out["improved"] = record.improved;
    return out;
}

Json to_json(const CrossValidationResult& result) {
    auto summary = [](const MetricSummary& s) {
        Json j;
        j["mean"] = s.mean;
        j["stddev"] = s.stddev;
        return j;
    };
    Json out;
    Json folds = Json::array();
    for (const auto& report : result.folds) folds.push_back(to_json(report));
    out["folds"] = std::move(folds);
    Json sum;
    sum["accuracy"] = summary(result.accuracy);
    sum["macro_f1"] = summary(result.macro_f1);
    sum["weighted_f1"] = summary(result.weighted_f1);
    sum["mean_concept_accuracy"] = summary(result.mean_concept_accuracy);
    out["summary"] = std::move(sum);
    return out;
}

}  // namespace cbm
