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

#include <cmath>

#include "cbm/errors.hpp"
#include "cbm/optim.hpp"

namespace cbm {

Adam::Adam(std::vector<Tensor> params, Options options)
    : params_(std::move(params)), options_(options) {
    if (!(options_.learning_rate > 0.0)) throw ContractError("Adam: learning rate must be positive");
    if (!(options_.beta1 > 0.0 && options_.beta1 < 1.0) || !(options_.beta2 > 0.0 && options_.beta2 < 1.0)) {
        throw ContractError("Adam: betas must lie in (0, 1)");
    }
    if (!(options_.epsilon > 0.0)) throw ContractError("Adam: epsilon must be positive");
    for (const Tensor& p : params_) {
        first_moment_.emplace_back(p.numel(), 0.0);
        second_moment_.emplace_back(p.numel(), 0.0);
    }
}

void Adam::step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (!params_[i].has_grad()) {
            throw ContractError("Adam: parameter " + std::to_string(i) + " has no gradient");
        }
    }
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double correction1 = 1.0 - std::pow(options_.beta1, t);
    const double correction2 = 1.0 - std::pow(options_.beta2, t);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto values = params_[i].mutable_data();
        auto grad = params_[i].grad();
        auto& m = first_moment_[i];
        auto& v = second_moment_[i];
        for (std::size_t j = 0; j < values.size(); ++j) {
            m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * grad[j];
            v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * grad[j] * grad[j];
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            values[j] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
        }
    }
}

void Adam::zero_grad() {
    for (Tensor& p : params_) {
        p.mutable_grad();
        p.zero_grad();
    }
}

}  // namespace cbm
