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

// Grading pipeline and human-in-the-loop interventions. Everything here is a
// read-only function of an immutable model.

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cbm/model.hpp"

namespace cbm {

struct ConceptScore {
    std::size_t index = 0;  // 1-based rubric position
    std::string_view name;
    int score = 0;
    double confidence = 0.0;  // max of `probs`
    std::array<double, kConceptClasses> probs{};
};

struct GradingResult {
    std::string essay_id;
    std::string model_id;
    std::vector<ConceptScore> concepts;  // 8 entries; empty for the baseline
    int grade = 0;
    std::array<double, kGradeClasses> grade_probs{};

    /// The hard bottleneck vector; throws ContractError for baseline results.
    ConceptVector concept_vector() const;
};

/// Stable identifier for unnamed essays: FNV-1a 64 of the UTF-8 text.
std::string essay_hash(std::string_view text);

/// Tokenize, predict concepts (argmax per head), then h on the hard vector.
/// Throws DegenerateInputError when the text yields no tokens.
GradingResult grade_essay(std::string_view text, const EssayCbmModel& model, std::string model_id = {},
                          std::string essay_id = {});
GradingResult grade_essay(std::string_view text, const BaselineModel& model, std::string model_id = {},
                          std::string essay_id = {});
GradingResult grade_essay(std::string_view text, const AnyModel& model, std::string model_id = {},
                          std::string essay_id = {});

/// Overrides map 1-based concept positions to new scores in [0, 4].
using ConceptOverrides = std::map<int, int>;

struct InterventionRequest {
    std::array<int, kNumConcepts> base{};
    ConceptOverrides overrides;
    std::string model_id;
};

struct InterventionResult {
    int grade = 0;
    std::array<double, kGradeClasses> grade_probs{};
    ConceptVector effective_concepts;
};

/// Applies overrides to `base`. Throws ValidationError listing every bad
/// index or value (and every out-of-range base entry).
ConceptVector apply_overrides(std::span<const int> base, const ConceptOverrides& overrides);

/// grade_from_concepts on the effective vector; never looks at essay text.
InterventionResult intervene(const InterventionRequest& request, const EssayCbmModel& model);

/// Grade for every single-concept change: grades[k][v] is the grade with
/// c_k := v and all other concepts fixed.
struct WhatIfTable {
    ConceptVector concepts;
    int grade = 0;
    std::array<std::array<int, kConceptClasses>, kNumConcepts> grades{};
};

WhatIfTable explain(const ConceptVector& concepts, const EssayCbmModel& model);
WhatIfTable explain(const GradingResult& result, const EssayCbmModel& model);

}  // namespace cbm
