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
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cbm/data.hpp"
#include "cbm/errors.hpp"
#include "cbm/json_io.hpp"

namespace cbm {

using nlohmann::json;

LabeledEssay essay_from_json(const json& record, std::size_t line) {
    if (!record.is_object()) throw LoadError(line, "", "record is not a JSON object");
    auto field = [&](const char* name) -> const json& {
        auto it = record.find(name);
        if (it == record.end()) throw LoadError(line, name, "missing field");
        return *it;
    };

    LabeledEssay essay;
    const json& id = field("id");
    if (!id.is_string()) throw LoadError(line, "id", "expected a string");
    essay.id = id.get<std::string>();

    const json& text = field("text");
    if (!text.is_string()) throw LoadError(line, "text", "expected a string");
    essay.text = text.get<std::string>();

    const json& grade = field("grade");
    if (!grade.is_number_integer()) throw LoadError(line, "grade", "expected an integer");
    const auto g = grade.get<std::int64_t>();
    if (g < 0 || g > kMaxGrade) throw LoadError(line, "grade", "grade out of range [0,5]");
    essay.grade = static_cast<int>(g);

    const json& concepts = field("concepts");
    if (!concepts.is_object()) throw LoadError(line, "concepts", "expected an object");
    for (const auto& [key, value] : concepts.items()) {
        if (!concept_index(key)) throw LoadError(line, "concepts." + key, "unknown concept key");
    }
    std::array<int, kNumConcepts> scores{};
    for (std::size_t k = 0; k < kNumConcepts; ++k) {
        const std::string name(concept_names()[k]);
        auto it = concepts.find(name);
        if (it == concepts.end()) throw LoadError(line, "concepts." + name, "missing concept key");
        if (!it->is_number_integer()) throw LoadError(line, "concepts." + name, "expected an integer");
        const auto s = it->get<std::int64_t>();
        if (s < 0 || s >= static_cast<std::int64_t>(kConceptClasses)) {
            throw LoadError(line, "concepts." + name, "concept out of range [0,4]");
        }
        scores[k] = static_cast<int>(s);
    }
    essay.concepts = ConceptVector::from(scores);
    return essay;
}

Json essay_to_json(const LabeledEssay& essay) {
    Json concepts = Json::object();
    for (std::size_t k = 0; k < kNumConcepts; ++k) concepts[std::string(concept_names()[k])] = essay.concepts[k];
    Json out;
    out["id"] = essay.id;
    out["text"] = essay.text;
    out["grade"] = essay.grade;
    out["concepts"] = std::move(concepts);
    return out;
}

Dataset parse_jsonl(std::istream& in) {
    Dataset dataset;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch); })) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw LoadError(line_no, "", std::string("malformed JSON: ") + e.what());
        }
        dataset.push_back(essay_from_json(record, line_no));
    }
    return dataset;
}

Dataset load_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError(0, "", "cannot open dataset file " + path.string());
    return parse_jsonl(in);
}

void write_jsonl(const Dataset& dataset, std::ostream& out) {
    for (const LabeledEssay& essay : dataset) out << essay_to_json(essay).dump() << '\n';
}

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write dataset file " + path.string());
    write_jsonl(dataset, out);
    if (!out) throw std::runtime_error("failed writing dataset file " + path.string());
}

DatasetSplit split_dataset(const Dataset& dataset, std::array<double, 3> ratios, std::uint64_t seed) {
    if (dataset.size() < 3) throw ContractError("split: dataset needs at least 3 items");
    for (double r : ratios) {
        if (!(r > 0.0)) throw ContractError("split: ratios must be positive");
    }
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
        throw ContractError("split: ratios must sum to 1");
    }
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const double n = static_cast<double>(dataset.size());
    const auto n_train = static_cast<std::size_t>(std::round(n * ratios[0]));
    const auto n_val = static_cast<std::size_t>(std::round(n * ratios[1]));

    DatasetSplit out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        Dataset& target = i < n_train ? out.train : i < n_train + n_val ? out.validation : out.test;
        target.push_back(dataset[order[i]]);
    }
    return out;
}

std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ContractError("cross-validation needs k >= 2");
    if (k > n) throw ContractError("cross-validation: k=" + std::to_string(k) + " exceeds dataset size " +
                                  std::to_string(n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        folds[f].assign(order.begin() + pos, order.begin() + pos + size);
        pos += size;
    }
    return folds;
}

}  // namespace cbm
