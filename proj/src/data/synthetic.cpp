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
#include <random>
#include <unordered_map>

#include "cbm/data.hpp"
#include "cbm/errors.hpp"

namespace cbm {

namespace {

constexpr std::size_t kSentences = 10;
constexpr std::size_t kWordsPerSentence = 7;
constexpr std::size_t kMarkersPerPoint = 2;
constexpr std::size_t kMarkerSlots = kNumConcepts * (kConceptClasses - 1) * kMarkersPerPoint;
constexpr std::size_t kWordSlots = kSentences * kWordsPerSentence;
static_assert(kWordSlots > kMarkerSlots, "every essay needs room for filler");

// Concept k at score s contributes s * kMarkersPerPoint copies of its marker
// and (4 - s) * kMarkersPerPoint copies of its contrast word.
constexpr std::array<std::string_view, kNumConcepts> kMarkers = {
    "thesis", "evidence", "furthermore", "grammar", "terminology", "variety", "analysis", "fluent",
};
constexpr std::array<std::string_view, kNumConcepts> kContrast = {
    "unclear", "anecdote", "disjointed", "typo", "slang", "repetitive", "superficial", "awkward",
};

const std::array<std::string_view, 40> kFiller = {
    "the",   "a",     "student", "school", "people", "many",  "time",   "work",  "day",   "life",
    "world", "year",  "way",     "often",  "because", "also", "which",  "some",  "other", "think",
    "make",  "help",  "learn",   "good",   "new",    "would", "could",  "about", "more",  "most",
    "very",  "when",  "there",   "their",  "these",  "those", "every",  "each",  "we",    "town",
};

const std::unordered_map<std::string_view, std::size_t>& marker_lookup() {
    static const auto table = [] {
        std::unordered_map<std::string_view, std::size_t> t;
        for (std::size_t k = 0; k < kNumConcepts; ++k) t.emplace(kMarkers[k], k);
        return t;
    }();
    return table;
}

}  // namespace

std::span<const std::string_view> marker_words(std::size_t concept_index) {
    if (concept_index >= kNumConcepts) throw IndexError("marker_words: concept index out of range");
    return {&kMarkers[concept_index], 1};
}

std::span<const std::string_view> contrast_words(std::size_t concept_index) {
    if (concept_index >= kNumConcepts) throw IndexError("contrast_words: concept index out of range");
    return {&kContrast[concept_index], 1};
}

std::array<double, kNumConcepts> synthetic_grade_weights() {
    std::array<double, kNumConcepts> w;
    w.fill(1.0 / static_cast<double>(kNumConcepts));
    return w;
}

int synthetic_grade(const ConceptVector& concepts, const std::array<double, kNumConcepts>& weights) {
    double weighted = 0.0, total_weight = 0.0;
    for (std::size_t k = 0; k < kNumConcepts; ++k) {
        weighted += weights[k] * concepts[k];
        total_weight += weights[k];
    }
    if (!(total_weight > 0.0)) throw ContractError("synthetic_grade: weights must sum to a positive value");
    const double scaled = weighted / total_weight * 5.0 / 4.0;
    return std::clamp(static_cast<int>(std::round(scaled)), 0, kMaxGrade);
}

std::string synthesize_text(const ConceptVector& concepts, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::string_view> slots;
    slots.reserve(kWordSlots);
    for (std::size_t k = 0; k < kNumConcepts; ++k) {
        const auto present = static_cast<std::size_t>(concepts[k]) * kMarkersPerPoint;
        const std::size_t total = (kConceptClasses - 1) * kMarkersPerPoint;
        for (std::size_t i = 0; i < total; ++i) slots.push_back(i < present ? kMarkers[k] : kContrast[k]);
    }
    std::uniform_int_distribution<std::size_t> filler(0, kFiller.size() - 1);
    while (slots.size() < kWordSlots) slots.push_back(kFiller[filler(rng)]);
    std::shuffle(slots.begin(), slots.end(), rng);

    std::string text;
    for (std::size_t s = 0; s < kSentences; ++s) {
        if (s) text += ' ';
        for (std::size_t w = 0; w < kWordsPerSentence; ++w) {
            std::string word(slots[s * kWordsPerSentence + w]);
            if (w == 0) word[0] = static_cast<char>(word[0] - 'a' + 'A');
            else text += ' ';
            text += word;
        }
        text += '.';
    }
    return text;
}

Dataset generate_synthetic(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ContractError("generate_synthetic: n must be at least 1");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> score(0, static_cast<int>(kConceptClasses) - 1);
    Dataset out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::array<int, kNumConcepts> latent;
        for (int& s : latent) s = score(rng);
        LabeledEssay essay;
        essay.id = "synth-" + std::to_string(i);
        essay.concepts = ConceptVector::from(latent);
        essay.grade = synthetic_grade(essay.concepts);
        essay.text = synthesize_text(essay.concepts, rng());
        out.push_back(std::move(essay));
    }
    return out;
}

ConceptVector mock_annotate(std::string_view text) {
    const auto& lookup = marker_lookup();
    std::array<int, kNumConcepts> counts{};
    for (const std::string& w : split_words(text)) {
        auto it = lookup.find(w);
        if (it != lookup.end()) ++counts[it->second];
    }
    for (int& c : counts) c = std::min(c / static_cast<int>(kMarkersPerPoint), 4);
    return ConceptVector::from(counts);
}

}  // namespace cbm
