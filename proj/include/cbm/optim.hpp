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
#include <span>
#include <vector>

#include "cbm/tensor.hpp"

namespace cbm {

/// Mean cross-entropy of (batch x classes) logits against class indices.
/// Gradient w.r.t. logits is (softmax - one_hot) / batch.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);

/// Adam with bias correction. Holds one moment pair per registered parameter.
class Adam {
  public:
    struct Options {
        double learning_rate = 1e-5;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double epsilon = 1e-8;
    };

    Adam(std::vector<Tensor> params, Options options);

    /// Applies one update from the current gradients. Gradients are left as is.
    void step();
    void zero_grad();

    std::size_t step_count() const { return step_count_; }
    const Options& options() const { return options_; }
    const std::vector<Tensor>& params() const { return params_; }

  private:
    std::vector<Tensor> params_;
    Options options_;
    std::vector<std::vector<double>> first_moment_;
    std::vector<std::vector<double>> second_moment_;
    std::size_t step_count_ = 0;
};

}  // namespace cbm
