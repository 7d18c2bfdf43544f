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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cbm {

/// Tensor shapes do not fit the operation.
class ShapeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// An index (token id, class target) is outside its valid range.
class IndexError : public std::out_of_range {
  public:
    using std::out_of_range::out_of_range;
};

/// A caller broke an operation precondition.
class ContractError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Input that is well-formed but carries no usable signal, e.g. an
/// all-masked sequence or an empty essay.
class DegenerateInputError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Dataset parse/validation failure. `line` is 1-based; 0 means "file level".
class LoadError : public std::runtime_error {
  public:
    LoadError(std::size_t line, std::string field, const std::string& reason)
        : std::runtime_error(format(line, field, reason)),
          line_(line),
          field_(std::move(field)),
          reason_(reason) {}

    std::size_t line() const { return line_; }
    const std::string& field() const { return field_; }
    const std::string& reason() const { return reason_; }

  private:
    static std::string format(std::size_t line, const std::string& field,
                              const std::string& reason) {
        std::string msg = line ? "line " + std::to_string(line) : std::string("file");
        if (!field.empty()) msg += ", field '" + field + "'";
        return msg + ": " + reason;
    }

    std::size_t line_;
    std::string field_;
    std::string reason_;
};

/// Checkpoint could not be read back.
class CheckpointError : public std::runtime_error {
  public:
    enum class Kind { kIo, kCorrupt, kVersion, kKindMismatch };

    CheckpointError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

/// User-supplied values (intervention overrides, concept vectors) are invalid.
/// `offenders` names each bad field so callers can report all of them at once.
class ValidationError : public std::invalid_argument {
  public:
    ValidationError(const std::string& what, std::vector<std::string> offenders)
        : std::invalid_argument(what), offenders_(std::move(offenders)) {}

    const std::vector<std::string>& offenders() const { return offenders_; }

  private:
    std::vector<std::string> offenders_;
};

}  // namespace cbm
