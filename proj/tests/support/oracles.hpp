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

// Reference implementations used as test oracles. Nothing here calls into the
// code under test except to read and perturb parameter values.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cbm/tensor.hpp"

namespace cbm::testing {

// ---------------------------------------------------------------------------
// Central finite differences
// ---------------------------------------------------------------------------

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// derivative is ~0 from dividing rounding noise by ~0.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheckReport {
    std::size_t coordinates = 0;
    double max_relative_error = 0.0;
    std::string worst;  // "param[i]: analytic vs numeric"
};

/// Compares backward() against (f(x+h) - f(x-h)) / 2h on `samples` random
/// coordinates per parameter (all coordinates when fewer). `loss` must rebuild
/// the scalar from the current parameter values on every call.
inline GradCheckReport check_gradients(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                                       std::size_t samples, std::uint64_t seed, double step = 1e-5) {
    for (auto& p : params) {
        p.mutable_grad();
        p.zero_grad();
    }
    loss().backward();
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

    std::mt19937_64 rng(seed);
    GradCheckReport report;
    NoGradGuard no_grad;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto values = params[pi].mutable_data();
        std::vector<std::size_t> coords(values.size());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(std::min(samples, coords.size()));
        for (const std::size_t i : coords) {
            const double saved = values[i];
            values[i] = saved + step;
            const double plus = loss().item();
            values[i] = saved - step;
            const double minus = loss().item();
            values[i] = saved;
            const double numeric = (plus - minus) / (2.0 * step);
            const double err = relative_error(analytic[pi][i], numeric);
            ++report.coordinates;
            if (err > report.max_relative_error) {
                report.max_relative_error = err;
                report.worst = "param " + std::to_string(pi) + "[" + std::to_string(i) +
                               "]: analytic " + std::to_string(analytic[pi][i]) + " vs numeric " +
                               std::to_string(numeric);
            }
        }
    }
    return report;
}

/// Random tensor with entries in [lo, hi], optionally pushed away from zero.
inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                            double min_abs = 0.0, bool requires_grad = true) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(numel(shape));
    for (auto& x : v) {
        do {
            x = dist(rng);
        } while (std::abs(x) < min_abs);
    }
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// ---------------------------------------------------------------------------
// Scalar LSTM
// ---------------------------------------------------------------------------

struct ScalarLstmWeights {
    std::vector<double> w_input;   // in x 4H row-major
    std::vector<double> w_hidden;  // H x 4H row-major
    std::vector<double> bias;      // 4H
    std::size_t in = 0;
    std::size_t hidden = 0;
};

/// One direction over rows of `x` (T x in) in the given visiting order; the
/// result has the state for step t at row t. Gate blocks: i, f, g, o.
inline std::vector<std::vector<double>> scalar_lstm(const ScalarLstmWeights& w,
                                                    const std::vector<std::vector<double>>& x, bool reverse) {
    const std::size_t T = x.size();
    const std::size_t H = w.hidden;
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    std::vector<double> h(H, 0.0);
    std::vector<double> c(H, 0.0);
    std::vector<std::vector<double>> out(T, std::vector<double>(H));
    for (std::size_t s = 0; s < T; ++s) {
        const std::size_t t = reverse ? T - 1 - s : s;
        std::vector<double> gates(4 * H);
        for (std::size_t j = 0; j < 4 * H; ++j) {
            double acc = w.bias[j];
            for (std::size_t k = 0; k < w.in; ++k) acc += x[t][k] * w.w_input[k * 4 * H + j];
            for (std::size_t k = 0; k < H; ++k) acc += h[k] * w.w_hidden[k * 4 * H + j];
            gates[j] = acc;
        }
        for (std::size_t j = 0; j < H; ++j) {
            const double i = sig(gates[j]);
            const double f = sig(gates[H + j]);
            const double g = std::tanh(gates[2 * H + j]);
            const double o = sig(gates[3 * H + j]);
            c[j] = f * c[j] + i * g;
            h[j] = o * std::tanh(c[j]);
        }
        out[t] = h;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Classification metrics, computed class by class from raw label pairs
// ---------------------------------------------------------------------------

struct BruteForceMetrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
};

inline BruteForceMetrics brute_force_metrics(const std::vector<int>& labels, const std::vector<int>& preds,
                                             int num_classes) {
    BruteForceMetrics m;
    const double n = static_cast<double>(labels.size());
    double correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += labels[i] == preds[i] ? 1 : 0;
    m.accuracy = n > 0 ? correct / n : 0.0;

    double f1_sum = 0.0;
    double present = 0.0;
    double weighted = 0.0;
    for (int cls = 0; cls < num_classes; ++cls) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (preds[i] == cls && labels[i] == cls) ++tp;
            if (preds[i] == cls && labels[i] != cls) ++fp;
            if (preds[i] != cls && labels[i] == cls) ++fn;
        }
        const double support = tp + fn;
        if (support == 0) continue;
        const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        const double recall = tp / support;
        const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
        f1_sum += f1;
        present += 1;
        weighted += f1 * support;
    }
    m.macro_f1 = present > 0 ? f1_sum / present : 0.0;
    m.weighted_f1 = n > 0 ? weighted / n : 0.0;
    return m;
}

// ---------------------------------------------------------------------------
// Losses and early stopping
// ---------------------------------------------------------------------------

/// Mean over rows of log(sum exp(row)) - row[target], evaluated directly.
inline double cross_entropy_oracle(const Tensor& logits, const std::vector<std::size_t>& targets) {
    double total = 0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        double z = 0;
        for (std::size_t c = 0; c < logits.cols(); ++c) z += std::exp(logits.at(r, c));
        total += std::log(z) - logits.at(r, targets[r]);
    }
    return total / static_cast<double>(logits.rows());
}

struct EarlyStopTrace {
    std::size_t stop_epoch = 0;  // 1-based; 0 when the sequence runs out first
    std::size_t best_epoch = 0;
};

/// Patience rule over a metric sequence: epoch 1 is the first best; later
/// epochs count only when strictly greater; stop once `patience` epochs in a
/// row fail to improve.
inline EarlyStopTrace early_stop_oracle(const std::vector<double>& metrics, std::size_t patience) {
    EarlyStopTrace trace;
    double best = 0;
    std::size_t since = 0;
    for (std::size_t i = 0; i < metrics.size(); ++i) {
        if (i == 0 || metrics[i] > best) {
            best = metrics[i];
            trace.best_epoch = i + 1;
            since = 0;
        } else if (++since >= patience) {
            trace.stop_epoch = i + 1;
            return trace;
        }
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Misc
// ---------------------------------------------------------------------------

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() / ("cbm-" + tag + "-" + std::to_string(stamp));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

}  // namespace cbm::testing
