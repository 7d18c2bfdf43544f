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

// JSON wire forms. Field names here are the stable external contract shared
// by the CLI, the HTTP service and the history/report files.

#include <cstddef>

#include <json.hpp>

#include "cbm/data.hpp"
#include "cbm/inference.hpp"
#include "cbm/train.hpp"

namespace cbm {

using Json = nlohmann::ordered_json;

/// Validates one dataset record; errors carry `line` and the field name.
LabeledEssay essay_from_json(const nlohmann::json& record, std::size_t line);
Json essay_to_json(const LabeledEssay& essay);

Json to_json(const EvalReport& report);
Json to_json(const GradingResult& result);
Json to_json(const InterventionResult& result);
Json to_json(const WhatIfTable& table);
Json to_json(const EpochRecord& record);
Json to_json(const CrossValidationResult& result);

}  // namespace cbm
