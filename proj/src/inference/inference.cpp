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

#include "cbm/inference.hpp"

#include <algorithm>
#include <cstdio>

#include "cbm/errors.hpp"

namespace cbm {

ConceptVector GradingResult::concept_vector() const {
    if (concepts.size() != kNumConcepts) throw ContractError("grading result has no concept bottleneck");
    std::array<int, kNumConcepts> scores;
    for (std::size_t k = 0; k < kNumConcepts; ++k) scores[k] = concepts[k].score;
    return ConceptVector::from(scores);
}

std::string essay_hash(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a-") + buf;
}

namespace {

TokenSequence tokens_or_throw(std::string_view text, const Vocab& vocab, std::size_t max_length) {
    TokenSequence tokens = tokenize(text, vocab, max_length);
    if (tokens.empty()) throw DegenerateInputError("essay text contains no tokens");
    return tokens;
}

}  // namespace

GradingResult grade_essay(std::string_view text, const EssayCbmModel& model, std::string model_id,
                          std::string essay_id) {
    const TokenSequence tokens = tokens_or_throw(text, model.vocab(), model.config().max_length);
    const ConceptPrediction concepts = predict_concepts(model, tokens);
    const GradePrediction grade = grade_from_concepts(model, concepts.concepts);

    GradingResult result;
    result.essay_id = essay_id.empty() ? essay_hash(text) : std::move(essay_id);
    result.model_id = std::move(model_id);
    for (std::size_t k = 0; k < kNumConcepts; ++k) {
        ConceptScore s;
        s.index = k + 1;
        s.name = concept_names()[k];
        s.score = concepts.concepts[k];
        s.probs = concepts.probs[k];
        s.confidence = *std::max_element(s.probs.begin(), s.probs.end());
        result.concepts.push_back(s);
    }
    result.grade = grade.grade;
    result.grade_probs = grade.probs;
    return result;
}

GradingResult grade_essay(std::string_view text, const BaselineModel& model, std::string model_id,
                          std::string essay_id) {
    const TokenSequence tokens = tokens_or_throw(text, model.vocab(), model.config().max_length);
    const GradePrediction grade = baseline_predict(model, tokens);
    GradingResult result;
    result.essay_id = essay_id.empty() ? essay_hash(text) : std::move(essay_id);
    result.model_id = std::move(model_id);
    result.grade = grade.grade;
    result.grade_probs = grade.probs;
    return result;
}

GradingResult grade_essay(std::string_view text, const AnyModel& model, std::string model_id,
                          std::string essay_id) {
    return std::visit([&](const auto& m) { return grade_essay(text, m, std::move(model_id), std::move(essay_id)); },
                      model);
}

ConceptVector apply_overrides(std::span<const int> base, const ConceptOverrides& overrides) {
    std::vector<std::string> offenders;
    if (base.size() != kNumConcepts) {
        throw ValidationError("concept vector needs exactly 8 scores, got " + std::to_string(base.size()),
                              {"concepts"});
    }
    for (std::size_t k = 0; k < kNumConcepts; ++k) {
        if (base[k] < 0 || base[k] >= static_cast<int>(kConceptClasses)) {
            offenders.push_back("concepts[" + std::to_string(k) + "]");
        }
    }
    for (const auto& [index, value] : overrides) {
        if (index < 1 || index > static_cast<int>(kNumConcepts)) {
            offenders.push_back("overrides." + std::to_string(index));
        } else if (value < 0 || value >= static_cast<int>(kConceptClasses)) {
            offenders.push_back("overrides." + std::to_string(index));
        }
    }
    if (!offenders.empty()) {
        std::string what = "invalid concept values:";
        for (const auto& o : offenders) what += " " + o;
        throw ValidationError(what + " (indices must be in [1,8], scores in [0,4])", std::move(offenders));
    }
    std::array<int, kNumConcepts> scores;
    std::copy(base.begin(), base.end(), scores.begin());
    for (const auto& [index, value] : overrides) scores[static_cast<std::size_t>(index - 1)] = value;
    return ConceptVector::from(scores);
}

InterventionResult intervene(const InterventionRequest& request, const EssayCbmModel& model) {
    InterventionResult out;
    out.effective_concepts = apply_overrides(request.base, request.overrides);
    const GradePrediction grade = grade_from_concepts(model, out.effective_concepts);
    out.grade = grade.grade;
    out.grade_probs = grade.probs;
    return out;
}

WhatIfTable explain(const ConceptVector& concepts, const EssayCbmModel& model) {
    WhatIfTable table;
    table.concepts = concepts;
    table.grade = grade_from_concepts(model, concepts).grade;
    for (std::size_t k = 0; k < kNumConcepts; ++k) {
        for (std::size_t v = 0; v < kConceptClasses; ++v) {
            if (static_cast<int>(v) == concepts[k]) {
                table.grades[k][v] = table.grade;
                continue;
            }
            ConceptVector changed = concepts;
            changed.set(k, static_cast<int>(v));
            table.grades[k][v] = grade_from_concepts(model, changed).grade;
        }
    }
    return table;
}

WhatIfTable explain(const GradingResult& result, const EssayCbmModel& model) {
    return explain(result.concept_vector(), model);
}

}  // namespace cbm
