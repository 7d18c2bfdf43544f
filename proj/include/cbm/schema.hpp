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
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace cbm {

inline constexpr std::size_t kNumConcepts = 8;
inline constexpr std::size_t kConceptClasses = 5;  // scores 0..4
inline constexpr std::size_t kGradeClasses = 6;    // grades 0..5
inline constexpr std::size_t kBottleneckWidth = kNumConcepts * kConceptClasses;

/// Rubric dimensions in their fixed order. Position k (0-based) is concept k+1.
std::span<const std::string_view, kNumConcepts> concept_names();
std::optional<std::size_t> concept_index(std::string_view name);

/// The bottleneck: one score in [0, 4] per rubric dimension.
class ConceptVector {
  public:
    ConceptVector() { scores_.fill(0); }

    /// Throws ValidationError naming every out-of-range entry.
    static ConceptVector from(std::span<const int> scores);
    static ConceptVector uniform(int score);

    int operator[](std::size_t k) const { return scores_[k]; }
    /// Throws ValidationError when `score` is outside [0, 4].
    void set(std::size_t k, int score);

    const std::array<int, kNumConcepts>& scores() const { return scores_; }
    int total() const;

    /// Position in the 5^8 enumeration: sum_k c_k * 5^k.
    std::size_t ordinal() const;
    static ConceptVector from_ordinal(std::size_t ordinal);
    static constexpr std::size_t kSpaceSize = 390625;  // 5^8

    friend bool operator==(const ConceptVector&, const ConceptVector&) = default;

  private:
    std::array<int, kNumConcepts> scores_;
};

std::string to_string(const ConceptVector& c);

}  // namespace cbm
