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
#include <map>

#include "cbm/data.hpp"
#include "cbm/errors.hpp"

namespace cbm {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

/// Decodes one code point starting at text[pos]; malformed bytes map to U+FFFD.
char32_t decode_utf8(std::string_view text, std::size_t& pos) {
    const auto lead = static_cast<unsigned char>(text[pos++]);
    if (lead < 0x80) return lead;
    std::size_t extra;
    char32_t cp;
    if ((lead & 0xE0) == 0xC0) {
        extra = 1;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        extra = 2;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        extra = 3;
        cp = lead & 0x07;
    } else {
        return kReplacement;
    }
    for (std::size_t i = 0; i < extra; ++i) {
        if (pos >= text.size()) return kReplacement;
        const auto cont = static_cast<unsigned char>(text[pos]);
        if ((cont & 0xC0) != 0x80) return kReplacement;
        cp = (cp << 6) | (cont & 0x3F);
        ++pos;
    }
    return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

bool is_space(char32_t cp) {
    return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
           (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
           cp == 0x205F || cp == 0x3000;
}

bool is_punct(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) || (cp >= 0x5B && cp <= 0x60) ||
               (cp >= 0x7B && cp <= 0x7E);
    }
    if (cp >= 0xA1 && cp <= 0xBF) {
        // Latin-1 letters and digits that live in this block.
        return cp != 0xAA && cp != 0xB2 && cp != 0xB3 && cp != 0xB5 && cp != 0xB9 && cp != 0xBA &&
               !(cp >= 0xBC && cp <= 0xBE);
    }
    return cp == 0xD7 || cp == 0xF7 || (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
           (cp >= 0x3001 && cp <= 0x3003) || (cp >= 0x3008 && cp <= 0x3011) || (cp >= 0xFF01 && cp <= 0xFF0F) ||
           (cp >= 0xFF1A && cp <= 0xFF20);
}

char32_t to_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp < 0xC0) return cp;
    if (cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    if (cp >= 0x100 && cp <= 0x17F) {
        // Latin Extended-A pairs upper/lower on even/odd code points, except
        // for the 0x139..0x148 and 0x179..0x17E runs which pair odd/even.
        const bool odd_upper = (cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E);
        if (cp == 0x130 || cp == 0x131 || cp == 0x138 || cp == 0x149 || cp == 0x17F) return cp;
        if (cp == 0x178) return 0xFF;
        if (odd_upper) return (cp % 2 == 1) ? cp + 1 : cp;
        return (cp % 2 == 0) ? cp + 1 : cp;
    }
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    return cp;
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) words.push_back(std::move(current));
        current.clear();
    };
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char32_t cp = to_lower(decode_utf8(text, pos));
        if (is_space(cp)) {
            flush();
        } else if (is_punct(cp)) {
            flush();
            std::string p;
            encode_utf8(cp, p);
            words.push_back(std::move(p));
        } else {
            encode_utf8(cp, current);
        }
    }
    flush();
    return words;
}

Vocab::Vocab() : tokens_{"<pad>", "<unk>"} {
    index_.emplace(tokens_[0], kPad);
    index_.emplace(tokens_[1], kUnknown);
}

Vocab Vocab::build(std::span<const std::string> texts, std::size_t min_frequency) {
    std::map<std::string, std::size_t> counts;
    for (const std::string& text : texts) {
        for (std::string& w : split_words(text)) ++counts[std::move(w)];
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [word, count] : counts) {
        if (count >= min_frequency) kept.emplace_back(word, count);
    }
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<std::string> tokens{"<pad>", "<unk>"};
    for (auto& [word, count] : kept) {
        if (word != tokens[0] && word != tokens[1]) tokens.push_back(word);
    }
    return from_tokens(std::move(tokens));
}

Vocab Vocab::build(const Dataset& dataset, std::size_t min_frequency) {
    std::vector<std::string> texts;
    texts.reserve(dataset.size());
    for (const auto& essay : dataset) texts.push_back(essay.text);
    return build(texts, min_frequency);
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
    if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>") {
        throw ContractError("vocabulary must start with <pad>, <unk>");
    }
    Vocab v;
    v.tokens_ = std::move(tokens);
    v.index_.clear();
    for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
        if (!v.index_.emplace(v.tokens_[i], i).second) {
            throw ContractError("vocabulary has duplicate token '" + v.tokens_[i] + "'");
        }
    }
    return v;
}

std::size_t Vocab::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnknown : it->second;
}

TokenSequence TokenSequence::padded(std::size_t length) const {
    TokenSequence out = *this;
    if (length > out.ids.size()) {
        out.ids.resize(length, Vocab::kPad);
        out.mask.resize(length, false);
    }
    return out;
}

TokenSequence tokenize(std::string_view text, const Vocab& vocab, std::size_t max_length) {
    TokenSequence seq;
    for (const std::string& w : split_words(text)) {
        if (seq.ids.size() == max_length) break;
        // Natural tokens never map to the padding id.
        std::size_t id = vocab.id(w);
        if (id == Vocab::kPad) id = Vocab::kUnknown;
        seq.ids.push_back(id);
        seq.mask.push_back(true);
    }
    return seq;
}

}  // namespace cbm
