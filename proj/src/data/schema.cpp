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

#include "cbm/schema.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "cbm/errors.hpp"

namespace cbm {

namespace {
constexpr std::array<std::string_view, kNumConcepts> kConceptNames = {
    "thesis_clarity",          "use_of_evidence",  "organization_coherence",  "grammar_mechanics",
    "vocabulary_appropriateness", "sentence_variety", "critical_thinking_depth", "fluency",
};

bool valid_score(int s) { return s >= 0 && s < static_cast<int>(kConceptClasses); }
}  // namespace

std::span<const std::string_view, kNumConcepts> concept_names() { return kConceptNames; }

std::optional<std::size_t> concept_index(std::string_view name) {
    auto it = std::find(kConceptNames.begin(), kConceptNames.end(), name);
    if (it == kConceptNames.end()) return std::nullopt;
    return static_cast<std::size_t>(it - kConceptNames.begin());
}

ConceptVector ConceptVector::from(std::span<const int> scores) {
    if (scores.size() != kNumConcepts) {
        throw ValidationError("concept vector needs exactly 8 scores, got " + std::to_string(scores.size()),
                              {"concepts"});
    }
    std::vector<std::string> offenders;
    for (std::size_t k = 0; k < kNumConcepts; ++k) {
        if (!valid_score(scores[k])) offenders.emplace_back(kConceptNames[k]);
    }
    if (!offenders.empty()) throw ValidationError("concept out of range [0,4]", std::move(offenders));
    ConceptVector c;
    std::copy(scores.begin(), scores.end(), c.scores_.begin());
    return c;
}

ConceptVector ConceptVector::uniform(int score) {
    std::array<int, kNumConcepts> s;
    s.fill(score);
    return from(s);
}

void ConceptVector::set(std::size_t k, int score) {
    if (k >= kNumConcepts) throw ValidationError("concept index out of range", {std::to_string(k + 1)});
    if (!valid_score(score)) throw ValidationError("concept out of range [0,4]", {std::string(kConceptNames[k])});
    scores_[k] = score;
}

int ConceptVector::total() const { return std::accumulate(scores_.begin(), scores_.end(), 0); }

std::size_t ConceptVector::ordinal() const {
    std::size_t value = 0;
    for (std::size_t k = kNumConcepts; k-- > 0;) value = value * kConceptClasses + static_cast<std::size_t>(scores_[k]);
    return value;
}

ConceptVector ConceptVector::from_ordinal(std::size_t ordinal) {
    if (ordinal >= kSpaceSize) throw ValidationError("concept ordinal out of range", {"ordinal"});
    ConceptVector c;
    for (std::size_t k = 0; k < kNumConcepts; ++k) {
        c.scores_[k] = static_cast<int>(ordinal % kConceptClasses);
        ordinal /= kConceptClasses;
    }
    return c;
}

std::string to_string(const ConceptVector& c) {
    std::string s = "[";
    for (std::size_t k = 0; k < kNumConcepts; ++k) {
        if (k) s += ",";
        s += std::to_string(c[k]);
    }
    return s + "]";
}

}  // namespace cbm
