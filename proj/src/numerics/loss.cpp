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

#include "cbm/errors.hpp"
#include "cbm/optim.hpp"
#include "node.hpp"

namespace cbm {

using detail::input_grad;
using detail::Node;
using detail::node_of;

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
    detail::require_rank2(logits, "cross_entropy");
    const std::size_t n = logits.rows(), m = logits.cols();
    if (m == 0) throw ShapeError("cross_entropy: zero classes");
    if (targets.size() != n) {
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " rows");
    }
    if (n == 0) throw ShapeError("cross_entropy: empty batch");
    for (std::size_t t : targets) {
        if (t >= m) {
            throw IndexError("cross_entropy: target " + std::to_string(t) + " outside " +
                             std::to_string(m) + " classes");
        }
    }

    const auto& x = node_of(logits).value;
    std::vector<double> probs(n * m);
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = x.data() + r * m;
        const double peak = *std::max_element(row, row + m);
        double z = 0.0;
        for (std::size_t c = 0; c < m; ++c) z += (probs[r * m + c] = std::exp(row[c] - peak));
        for (std::size_t c = 0; c < m; ++c) probs[r * m + c] /= z;
        loss += peak + std::log(z) - row[targets[r]];
    }
    loss /= static_cast<double>(n);

    std::vector<std::size_t> index(targets.begin(), targets.end());
    return detail::make_result(
        "cross_entropy", {}, {loss}, {logits},
        [probs = std::move(probs), index = std::move(index), n, m](Node& self) {
            auto* g = input_grad(self, 0);
            if (!g) return;
            const double upstream = self.grad[0] / static_cast<double>(n);
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t c = 0; c < m; ++c) {
                    const double onehot = c == index[r] ? 1.0 : 0.0;
                    (*g)[r * m + c] += upstream * (probs[r * m + c] - onehot);
                }
            }
        });
}

}  // namespace cbm
