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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cbm/schema.hpp"

namespace cbm {

inline constexpr std::size_t kMaxSequenceLength = 512;
inline constexpr int kMaxGrade = static_cast<int>(kGradeClasses) - 1;

struct LabeledEssay {
    std::string id;
    std::string text;
    int grade = 0;
    ConceptVector concepts;

    friend bool operator==(const LabeledEssay&, const LabeledEssay&) = default;
};

using Dataset = std::vector<LabeledEssay>;

/// One JSON object per line: {id, text, grade, concepts{8 keys}}.
/// Blank lines are skipped; any invalid line throws LoadError with its
/// 1-based line number and the offending field.
Dataset load_jsonl(const std::filesystem::path& path);
Dataset parse_jsonl(std::istream& in);
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);
void write_jsonl(const Dataset& dataset, std::ostream& out);

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

/// Lowercases and splits on Unicode whitespace; every punctuation code point
/// becomes its own token.
std::vector<std::string> split_words(std::string_view text);

class Vocab {
  public:
    static constexpr std::size_t kPad = 0;
    static constexpr std::size_t kUnknown = 1;

    Vocab();
    /// Tokens seen at least `min_frequency` times, ordered by descending
    /// frequency then lexicographically.
    static Vocab build(std::span<const std::string> texts, std::size_t min_frequency = 2);
    static Vocab build(const Dataset& dataset, std::size_t min_frequency = 2);
    /// Restores a vocabulary from its id-ordered token list (pad/unk included).
    static Vocab from_tokens(std::vector<std::string> tokens);

    std::size_t id(std::string_view token) const;
    const std::string& token(std::size_t id) const { return tokens_.at(id); }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Token ids plus a mask that is false exactly at padding positions.
struct TokenSequence {
    std::vector<std::size_t> ids;
    std::vector<bool> mask;

    std::size_t size() const { return ids.size(); }
    bool empty() const { return ids.empty(); }
    /// Appends padding up to `length`.
    TokenSequence padded(std::size_t length) const;
};

TokenSequence tokenize(std::string_view text, const Vocab& vocab,
                       std::size_t max_length = kMaxSequenceLength);

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct DatasetSplit {
    Dataset train;
    Dataset validation;
    Dataset test;
};

/// Seeded shuffle, then train/validation sizes rounded from the ratios and
/// the remainder to test.
DatasetSplit split_dataset(const Dataset& dataset, std::array<double, 3> ratios, std::uint64_t seed);

/// Seeded k-fold assignment: fold[i] lists dataset indices held out in fold i.
/// The first (n mod k) folds get one extra item.
std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic corpus and stand-in annotator
// ---------------------------------------------------------------------------

/// Marker words whose count signals a rubric dimension in synthetic essays.
std::span<const std::string_view> marker_words(std::size_t concept_index);

/// Words that fill the unearned share of a dimension's marker budget.
std::span<const std::string_view> contrast_words(std::size_t concept_index);

/// Per-concept weights used by the synthetic grade function (uniform).
std::array<double, kNumConcepts> synthetic_grade_weights();

/// clamp(round(weighted mean of concepts * 5/4), 0, 5), halves rounded up.
int synthetic_grade(const ConceptVector& concepts,
                    const std::array<double, kNumConcepts>& weights = synthetic_grade_weights());

/// Essays of fixed length (80 tokens: 70 words, 10 periods). Concept k at
/// score s holds 2s marker words and 2(4 - s) contrast words; the remaining
/// 6 words are filler.
Dataset generate_synthetic(std::size_t n, std::uint64_t seed);

/// Text for a given latent concept vector (used by generate_synthetic).
std::string synthesize_text(const ConceptVector& concepts, std::uint64_t seed);

/// Deterministic stand-in for an LLM concept annotator: marker words per
/// concept, counted in pairs, capped at 4.
ConceptVector mock_annotate(std::string_view text);

}  // namespace cbm
