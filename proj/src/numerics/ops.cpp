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

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "cbm/errors.hpp"
#include "cbm/tensor.hpp"
#include "node.hpp"

namespace cbm {

using detail::input_grad;
using detail::make_result;
using detail::Node;
using detail::node_of;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;

MatrixMap as_matrix(std::vector<double>& v, std::size_t rows, std::size_t cols) {
    return MatrixMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    detail::require_defined(a, op);
    detail::require_defined(b, op);
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
    }
}

template <typename Forward, typename Derivative>
Tensor unary(const char* op, const Tensor& x, Forward f, Derivative df) {
    detail::require_defined(x, op);
    const auto& in = node_of(x).value;
    std::vector<double> out(in.size());
    std::transform(in.begin(), in.end(), out.begin(), f);
    return make_result(op, x.shape(), std::move(out), {x}, [df](Node& self) {
        auto* gx = input_grad(self, 0);
        if (!gx) return;
        const auto& xin = self.inputs[0]->value;
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            (*gx)[i] += self.grad[i] * df(xin[i], self.value[i]);
        }
    });
}

double logistic(double v) {
    // Split by sign so exp never overflows.
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_rank2(a, "matmul");
    detail::require_rank2(b, "matmul");
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    if (b.rows() != k) {
        throw ShapeError("matmul: inner dimensions differ " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
    }
    std::vector<double> out(n * m);
    as_matrix(out, n, m).noalias() = as_matrix(node_of(a).value, n, k) * as_matrix(node_of(b).value, k, m);
    return make_result("matmul", {n, m}, std::move(out), {a, b}, [n, k, m](Node& self) {
        auto dout = as_matrix(self.grad, n, m);
        if (auto* ga = input_grad(self, 0)) {
            as_matrix(*ga, n, k).noalias() += dout * as_matrix(self.inputs[1]->value, k, m).transpose();
        }
        if (auto* gb = input_grad(self, 1)) {
            as_matrix(*gb, k, m).noalias() += as_matrix(self.inputs[0]->value, n, k).transpose() * dout;
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const auto& av = node_of(a).value;
    const auto& bv = node_of(b).value;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return make_result("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (std::size_t in = 0; in < 2; ++in) {
            if (auto* g = input_grad(self, in)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const auto& av = node_of(a).value;
    const auto& bv = node_of(b).value;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    return make_result("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
        if (auto* g = input_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
        }
        if (auto* g = input_grad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const auto& av = node_of(a).value;
    const auto& bv = node_of(b).value;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return make_result("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
        const auto& av = self.inputs[0]->value;
        const auto& bv = self.inputs[1]->value;
        if (auto* g = input_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * bv[i];
        }
        if (auto* g = input_grad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * av[i];
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    return unary("scale", a, [factor](double v) { return v * factor; },
                 [factor](double, double) { return factor; });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
    detail::require_rank2(x, "add_row");
    detail::require_defined(bias, "add_row");
    const std::size_t n = x.rows(), m = x.cols();
    if (bias.numel() != m) {
        throw ShapeError("add_row: bias " + to_string(bias.shape()) + " does not match " +
                         to_string(x.shape()));
    }
    const auto& xv = node_of(x).value;
    const auto& bv = node_of(bias).value;
    std::vector<double> out(xv.size());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c) out[r * m + c] = xv[r * m + c] + bv[c];
    }
    return make_result("add_row", x.shape(), std::move(out), {x, bias}, [n, m](Node& self) {
        if (auto* gx = input_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
        }
        if (auto* gb = input_grad(self, 1)) {
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t c = 0; c < m; ++c) (*gb)[c] += self.grad[r * m + c];
            }
        }
    });
}

Tensor sigmoid(const Tensor& x) {
    return unary("sigmoid", x, logistic, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
    return unary("tanh", x, [](double v) { return std::tanh(v); },
                 [](double, double y) { return 1.0 - y * y; });
}

Tensor lstm_cell(const Tensor& gates, const Tensor& c_prev) {
    detail::require_rank2(gates, "lstm_cell");
    detail::require_rank2(c_prev, "lstm_cell");
    const std::size_t n = c_prev.rows(), hid = c_prev.cols();
    if (gates.rows() != n || gates.cols() != 4 * hid) {
        throw ShapeError("lstm_cell: gates " + to_string(gates.shape()) + " do not match state " +
                         to_string(c_prev.shape()));
    }
    const auto& gv = node_of(gates).value;
    const auto& cv = node_of(c_prev).value;
    // act holds i, f, g, o activations followed by tanh(c), row by row.
    // Activations use Eigen's vectorized exp; tanh(x) = 2 sigmoid(2x) - 1.
    // Results are computed into aligned temporaries: on unaligned buffers Eigen
    // would evaluate a data-dependent prefix with scalar exp, which rounds
    // differently and makes runs depend on heap addresses.
    using Array = Eigen::Array<double, Eigen::Dynamic, 1>;
    using ConstArrayMap = Eigen::Map<const Array>;
    const auto h = static_cast<Eigen::Index>(hid);
    std::vector<double> act(n * 5 * hid);
    std::vector<double> out(n * 2 * hid);
    Array pre(4 * h), sig(4 * h), g(h), c(h), tc(h), hv(h);
    for (std::size_t r = 0; r < n; ++r) {
        pre = ConstArrayMap(gv.data() + r * 4 * hid, 4 * h);
        sig = 1.0 / (1.0 + (-pre).exp());
        g = 2.0 / (1.0 + (-2.0 * pre.segment(2 * h, h)).exp()) - 1.0;
        c = sig.segment(h, h) * ConstArrayMap(cv.data() + r * hid, h) + sig.head(h) * g;
        tc = 2.0 / (1.0 + (-2.0 * c).exp()) - 1.0;
        hv = sig.tail(h) * tc;

        double* ar = act.data() + r * 5 * hid;
        double* hr = out.data() + r * 2 * hid;
        std::copy_n(sig.data(), 4 * hid, ar);
        std::copy_n(g.data(), hid, ar + 2 * hid);
        std::copy_n(tc.data(), hid, ar + 4 * hid);
        std::copy_n(hv.data(), hid, hr);
        std::copy_n(c.data(), hid, hr + hid);
    }
    return make_result("lstm_cell", {n, 2 * hid}, std::move(out), {gates, c_prev},
                       [n, hid, act = std::move(act)](Node& self) {
                           auto* gg = input_grad(self, 0);
                           auto* gc = input_grad(self, 1);
                           const auto& cp = self.inputs[1]->value;
                           for (std::size_t r = 0; r < n; ++r) {
                               const double* ar = act.data() + r * 5 * hid;
                               const double* dr = self.grad.data() + r * 2 * hid;
                               for (std::size_t j = 0; j < hid; ++j) {
                                   const double i = ar[j], f = ar[hid + j], g = ar[2 * hid + j];
                                   const double o = ar[3 * hid + j], tc = ar[4 * hid + j];
                                   const double dh = dr[j];
                                   const double dc = dr[hid + j] + dh * o * (1.0 - tc * tc);
                                   if (gg) {
                                       double* gr = gg->data() + r * 4 * hid;
                                       gr[j] += dc * g * i * (1.0 - i);
                                       gr[hid + j] += dc * cp[r * hid + j] * f * (1.0 - f);
                                       gr[2 * hid + j] += dc * i * (1.0 - g * g);
                                       gr[3 * hid + j] += dh * tc * o * (1.0 - o);
                                   }
                                   if (gc) (*gc)[r * hid + j] += dc * f;
                               }
                           }
                       });
}

Tensor relu(const Tensor& x) {
    return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
                 [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& x) {
    detail::require_defined(x, "sum");
    double total = 0.0;
    for (double v : node_of(x).value) total += v;
    return make_result("sum", {}, {total}, {x}, [](Node& self) {
        if (auto* g = input_grad(self, 0)) {
            for (double& v : *g) v += self.grad[0];
        }
    });
}

Tensor mean(const Tensor& x) {
    detail::require_defined(x, "mean");
    if (x.numel() == 0) throw ShapeError("mean: empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape) {
    detail::require_defined(x, "reshape");
    if (numel(shape) != x.numel()) {
        throw ShapeError("reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
    }
    return make_result("reshape", std::move(shape), node_of(x).value, {x}, [](Node& self) {
        if (auto* g = input_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
        }
    });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
    detail::require_rank2(x, "slice_cols");
    const std::size_t n = x.rows(), m = x.cols();
    if (begin + count > m) {
        throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") outside " + to_string(x.shape()));
    }
    const auto& xv = node_of(x).value;
    std::vector<double> out(n * count);
    for (std::size_t r = 0; r < n; ++r) {
        std::copy_n(xv.begin() + r * m + begin, count, out.begin() + r * count);
    }
    return make_result("slice_cols", {n, count}, std::move(out), {x}, [n, m, begin, count](Node& self) {
        if (auto* g = input_grad(self, 0)) {
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t c = 0; c < count; ++c) (*g)[r * m + begin + c] += self.grad[r * count + c];
            }
        }
    });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
    detail::require_rank2(x, "slice_rows");
    const std::size_t n = x.rows(), m = x.cols();
    if (begin + count > n) {
        throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") outside " + to_string(x.shape()));
    }
    const auto& xv = node_of(x).value;
    std::vector<double> out(xv.begin() + begin * m, xv.begin() + (begin + count) * m);
    return make_result("slice_rows", {count, m}, std::move(out), {x}, [m, begin](Node& self) {
        if (auto* g = input_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[begin * m + i] += self.grad[i];
        }
    });
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t n = parts.front().rows();
    std::vector<std::size_t> offsets;
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        detail::require_rank2(p, "concat_cols");
        if (p.rows() != n) throw ShapeError("concat_cols: row counts differ");
        offsets.push_back(total);
        total += p.cols();
    }
    std::vector<double> out(n * total);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto& pv = node_of(parts[i]).value;
        const std::size_t w = parts[i].cols();
        for (std::size_t r = 0; r < n; ++r) {
            std::copy_n(pv.begin() + r * w, w, out.begin() + r * total + offsets[i]);
        }
    }
    return make_result("concat_cols", {n, total}, std::move(out), {parts.begin(), parts.end()},
                       [n, total, offsets](Node& self) {
                           for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                               auto* g = input_grad(self, i);
                               if (!g) continue;
                               const std::size_t w = self.inputs[i]->shape[1];
                               for (std::size_t r = 0; r < n; ++r) {
                                   for (std::size_t c = 0; c < w; ++c) {
                                       (*g)[r * w + c] += self.grad[r * total + offsets[i] + c];
                                   }
                               }
                           }
                       });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t m = parts.front().cols();
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        detail::require_rank2(p, "concat_rows");
        if (p.cols() != m) throw ShapeError("concat_rows: column counts differ");
        total += p.rows();
    }
    std::vector<double> out;
    out.reserve(total * m);
    for (const Tensor& p : parts) {
        const auto& pv = node_of(p).value;
        out.insert(out.end(), pv.begin(), pv.end());
    }
    return make_result("concat_rows", {total, m}, std::move(out), {parts.begin(), parts.end()},
                       [](Node& self) {
                           std::size_t offset = 0;
                           for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                               const std::size_t len = self.inputs[i]->value.size();
                               if (auto* g = input_grad(self, i)) {
                                   for (std::size_t j = 0; j < len; ++j) (*g)[j] += self.grad[offset + j];
                               }
                               offset += len;
                           }
                       });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
    detail::require_rank2(table, "gather_rows");
    const std::size_t vocab = table.rows(), dim = table.cols();
    const auto& tv = node_of(table).value;
    std::vector<double> out(ids.size() * dim);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= vocab) {
            throw IndexError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                             std::to_string(vocab) + " rows");
        }
        std::copy_n(tv.begin() + ids[i] * dim, dim, out.begin() + i * dim);
    }
    std::vector<std::size_t> index(ids.begin(), ids.end());
    return make_result("gather_rows", {ids.size(), dim}, std::move(out), {table},
                       [index = std::move(index), dim](Node& self) {
                           auto* g = input_grad(self, 0);
                           if (!g) return;
                           for (std::size_t i = 0; i < index.size(); ++i) {
                               for (std::size_t c = 0; c < dim; ++c) {
                                   (*g)[index[i] * dim + c] += self.grad[i * dim + c];
                               }
                           }
                       });
}

Tensor select_rows(const Tensor& fresh, const Tensor& previous, const std::vector<bool>& keep_new) {
    require_same_shape(fresh, previous, "select_rows");
    detail::require_rank2(fresh, "select_rows");
    const std::size_t n = fresh.rows(), m = fresh.cols();
    if (keep_new.size() != n) throw ShapeError("select_rows: mask length differs from row count");
    const auto& fv = node_of(fresh).value;
    const auto& pv = node_of(previous).value;
    std::vector<double> out(n * m);
    for (std::size_t r = 0; r < n; ++r) {
        const auto& src = keep_new[r] ? fv : pv;
        std::copy_n(src.begin() + r * m, m, out.begin() + r * m);
    }
    return make_result("select_rows", fresh.shape(), std::move(out), {fresh, previous},
                       [keep_new, n, m](Node& self) {
                           auto* gf = input_grad(self, 0);
                           auto* gp = input_grad(self, 1);
                           for (std::size_t r = 0; r < n; ++r) {
                               auto* g = keep_new[r] ? gf : gp;
                               if (!g) continue;
                               for (std::size_t c = 0; c < m; ++c) (*g)[r * m + c] += self.grad[r * m + c];
                           }
                       });
}

Tensor masked_mean(std::span<const Tensor> steps, const std::vector<std::vector<bool>>& mask) {
    if (steps.empty()) throw DegenerateInputError("masked_mean: empty sequence");
    const std::size_t batch = steps.front().rows(), dim = steps.front().cols();
    for (const Tensor& s : steps) {
        detail::require_rank2(s, "masked_mean");
        if (s.rows() != batch || s.cols() != dim) throw ShapeError("masked_mean: step shapes differ");
    }
    if (mask.size() != batch) throw ShapeError("masked_mean: mask rows differ from batch size");
    std::vector<double> inv_count(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        if (mask[b].size() != steps.size()) throw ShapeError("masked_mean: mask length differs from steps");
        const auto count = std::count(mask[b].begin(), mask[b].end(), true);
        if (count == 0) throw DegenerateInputError("masked_mean: every step of a row is masked");
        inv_count[b] = 1.0 / static_cast<double>(count);
    }
    std::vector<double> out(batch * dim, 0.0);
    for (std::size_t t = 0; t < steps.size(); ++t) {
        const auto& sv = node_of(steps[t]).value;
        for (std::size_t b = 0; b < batch; ++b) {
            if (!mask[b][t]) continue;
            for (std::size_t c = 0; c < dim; ++c) out[b * dim + c] += sv[b * dim + c];
        }
    }
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < dim; ++c) out[b * dim + c] *= inv_count[b];
    }
    return make_result("masked_mean", {batch, dim}, std::move(out), {steps.begin(), steps.end()},
                       [mask, inv_count, batch, dim](Node& self) {
                           for (std::size_t t = 0; t < self.inputs.size(); ++t) {
                               auto* g = input_grad(self, t);
                               if (!g) continue;
                               for (std::size_t b = 0; b < batch; ++b) {
                                   if (!mask[b][t]) continue;
                                   for (std::size_t c = 0; c < dim; ++c) {
                                       (*g)[b * dim + c] += self.grad[b * dim + c] * inv_count[b];
                                   }
                               }
                           }
                       });
}

namespace {

void require_softmax_input(const Tensor& logits, const char* op) {
    detail::require_defined(logits, op);
    if (logits.rank() != 1 && logits.rank() != 2) {
        throw ShapeError(std::string(op) + ": expected rank 1 or 2, got " + to_string(logits.shape()));
    }
    if (logits.cols() == 0) throw ShapeError(std::string(op) + ": empty row");
}

}  // namespace

Tensor softmax(const Tensor& logits) {
    require_softmax_input(logits, "softmax");
    const std::size_t n = logits.rows(), m = logits.cols();
    const auto& x = node_of(logits).value;
    std::vector<double> out(n * m);
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = x.data() + r * m;
        const double peak = *std::max_element(row, row + m);
        double z = 0.0;
        for (std::size_t c = 0; c < m; ++c) z += (out[r * m + c] = std::exp(row[c] - peak));
        for (std::size_t c = 0; c < m; ++c) out[r * m + c] /= z;
    }
    return make_result("softmax", logits.shape(), std::move(out), {logits}, [n, m](Node& self) {
        auto* g = input_grad(self, 0);
        if (!g) return;
        for (std::size_t r = 0; r < n; ++r) {
            const double* y = self.value.data() + r * m;
            const double* dy = self.grad.data() + r * m;
            double dot = 0.0;
            for (std::size_t c = 0; c < m; ++c) dot += y[c] * dy[c];
            for (std::size_t c = 0; c < m; ++c) (*g)[r * m + c] += y[c] * (dy[c] - dot);
        }
    });
}

Tensor log_softmax(const Tensor& logits) {
    require_softmax_input(logits, "log_softmax");
    const std::size_t n = logits.rows(), m = logits.cols();
    const auto& x = node_of(logits).value;
    std::vector<double> out(n * m);
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = x.data() + r * m;
        const double peak = *std::max_element(row, row + m);
        double z = 0.0;
        for (std::size_t c = 0; c < m; ++c) z += std::exp(row[c] - peak);
        const double log_z = peak + std::log(z);
        for (std::size_t c = 0; c < m; ++c) out[r * m + c] = row[c] - log_z;
    }
    return make_result("log_softmax", logits.shape(), std::move(out), {logits}, [n, m](Node& self) {
        auto* g = input_grad(self, 0);
        if (!g) return;
        for (std::size_t r = 0; r < n; ++r) {
            const double* y = self.value.data() + r * m;
            const double* dy = self.grad.data() + r * m;
            double total = 0.0;
            for (std::size_t c = 0; c < m; ++c) total += dy[c];
            for (std::size_t c = 0; c < m; ++c) (*g)[r * m + c] += dy[c] - std::exp(y[c]) * total;
        }
    });
}

}  // namespace cbm
