// Copyright 2026 The mmvae-lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include "mmvae/kernels.hpp"
#include "mmvae/tensor.hpp"

namespace mmvae {
namespace {

// Backward callback for one op. `input_grads[i]` is null when input i is a
// constant.
using InputBackward = std::function<void(std::span<const double> grad_out,
                                         std::span<std::vector<double>*> input_grads)>;

Tape* CommonTape(std::span<const Tensor* const> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->tape()) continue;
    if (tape && tape != t->tape()) {
      throw std::invalid_argument("op inputs are bound to different tapes");
    }
    tape = t->tape();
  }
  return tape;
}

// Branch-free so the loop vectorizes: an all-ones exponent marks Inf/NaN.
bool AllFinite(std::span<const double> values) {
  constexpr std::uint64_t kExponent = 0x7FF0000000000000ULL;
  std::uint64_t bad = 0;
  for (double v : values) {
    bad |= static_cast<std::uint64_t>((std::bit_cast<std::uint64_t>(v) & kExponent) == kExponent);
  }
  return bad == 0;
}

Tensor Finish(const char* op, Shape shape, std::vector<double> value,
              std::vector<const Tensor*> inputs, InputBackward fn) {
  if (!AllFinite(value)) {
    throw NonFiniteError(std::string("non-finite output from ") + op);
  }
  Tape* tape = CommonTape(inputs);
  if (!tape) return Tensor(std::move(shape), std::move(value));

  std::vector<NodeId> parents;
  std::vector<std::size_t> slots;  // parent k feeds input slots[k]
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i]->node()) {
      parents.push_back(*inputs[i]->node());
      slots.push_back(i);
    }
  }
  const std::size_t n_inputs = inputs.size();
  BackwardFn backward = [fn = std::move(fn), slots = std::move(slots), n_inputs](
                            std::span<const double> grad_out,
                            std::span<std::vector<double>*> parent_grads) {
    std::vector<std::vector<double>*> input_grads(n_inputs, nullptr);
    for (std::size_t k = 0; k < slots.size(); ++k) {
      input_grads[slots[k]] = parent_grads[k];
    }
    fn(grad_out, input_grads);
  };
  return tape->record(std::move(shape), std::move(value), std::move(parents),
                      std::move(backward));
}

void RequireSameShape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     ShapeToString(a.shape()) + " vs " + ShapeToString(b.shape()));
  }
}

void RequireMatrix(const char* op, const Tensor& a) {
  if (a.shape().size() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " +
                     ShapeToString(a.shape()));
  }
}

std::vector<double> Copy(std::span<const double> s) {
  return {s.begin(), s.end()};
}

void Accumulate(std::vector<double>* dst, std::span<const double> src) {
  kernels::active().axpy(1.0, src.data(), dst->data(), src.size());
}

// Elementwise unary op with derivative expressed from (input, output). The
// local derivative is only materialized when the input is on a tape.
template <typename F, typename D>
Tensor Unary(const char* op, const Tensor& a, F f, D dfdx) {
  const auto in = a.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  if (!a.tape()) return Finish(op, a.shape(), std::move(out), {&a}, nullptr);
  auto local = std::make_shared<std::vector<double>>(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) (*local)[i] = dfdx(in[i], out[i]);
  return Finish(op, a.shape(), std::move(out), {&a},
                [local](std::span<const double> g,
                        std::span<std::vector<double>*> grads) {
                  auto& ga = *grads[0];
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*local)[i];
                });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  RequireSameShape("add", a, b);
  std::vector<double> out = Copy(a.data());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.at(i);
  return Finish("add", a.shape(), std::move(out), {&a, &b},
                [](std::span<const double> g, std::span<std::vector<double>*> grads) {
                  if (grads[0]) Accumulate(grads[0], g);
                  if (grads[1]) Accumulate(grads[1], g);
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  RequireSameShape("sub", a, b);
  std::vector<double> out = Copy(a.data());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.at(i);
  return Finish("sub", a.shape(), std::move(out), {&a, &b},
                [](std::span<const double> g, std::span<std::vector<double>*> grads) {
                  if (grads[0]) Accumulate(grads[0], g);
                  if (grads[1]) {
                    kernels::active().axpy(-1.0, g.data(), grads[1]->data(), g.size());
                  }
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  RequireSameShape("mul", a, b);
  auto av = a.buffer();
  auto bv = b.buffer();
  std::vector<double> out(av->size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*av)[i] * (*bv)[i];
  return Finish("mul", a.shape(), std::move(out), {&a, &b},
                [av, bv](std::span<const double> g,
                         std::span<std::vector<double>*> grads) {
                  if (grads[0]) {
                    auto& ga = *grads[0];
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*bv)[i];
                  }
                  if (grads[1]) {
                    auto& gb = *grads[1];
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * (*av)[i];
                  }
                });
}

Tensor div(const Tensor& a, const Tensor& b) {
  RequireSameShape("div", a, b);
  auto av = a.buffer();
  auto bv = b.buffer();
  std::vector<double> out(av->size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if ((*bv)[i] == 0.0) throw DomainError("div: division by zero");
    out[i] = (*av)[i] / (*bv)[i];
  }
  return Finish("div", a.shape(), std::move(out), {&a, &b},
                [av, bv](std::span<const double> g,
                         std::span<std::vector<double>*> grads) {
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    const double inv = 1.0 / (*bv)[i];
                    if (grads[0]) (*grads[0])[i] += g[i] * inv;
                    if (grads[1]) (*grads[1])[i] -= g[i] * (*av)[i] * inv * inv;
                  }
                });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  RequireMatrix("matmul", a);
  RequireMatrix("matmul", b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + ShapeToString(a.shape()) +
                     " x " + ShapeToString(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  auto av = a.buffer();
  auto bv = b.buffer();
  std::vector<double> out(m * n, 0.0);
  kernels::active().gemm_nn(av->data(), bv->data(), out.data(), m, k, n);
  return Finish("matmul", {m, n}, std::move(out), {&a, &b},
                [av, bv, m, k, n](std::span<const double> g,
                                  std::span<std::vector<double>*> grads) {
                  const auto& kt = kernels::active();
                  // dA = dC B^T, dB = A^T dC
                  if (grads[0]) kt.gemm_nt(g.data(), bv->data(), grads[0]->data(), m, n, k);
                  if (grads[1]) kt.gemm_tn(av->data(), g.data(), grads[1]->data(), k, m, n);
                });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out = Copy(a.data());
  for (double& v : out) v *= factor;
  return Finish("scale", a.shape(), std::move(out), {&a},
                [factor](std::span<const double> g,
                         std::span<std::vector<double>*> grads) {
                  kernels::active().axpy(factor, g.data(), grads[0]->data(), g.size());
                });
}

Tensor add_scalar(const Tensor& a, double value) {
  std::vector<double> out = Copy(a.data());
  for (double& v : out) v += value;
  return Finish("add_scalar", a.shape(), std::move(out), {&a},
                [](std::span<const double> g, std::span<std::vector<double>*> grads) {
                  Accumulate(grads[0], g);
                });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor square(const Tensor& a) {
  return Unary(
      "square", a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

namespace {

// tanh from one exp, with a short series near zero.
double FastTanh(double x) {
  const double ax = std::abs(x);
  double t;
  if (ax < 1e-3) {
    const double x2 = ax * ax;
    t = ax * (1.0 - x2 * (1.0 / 3.0 - x2 * (2.0 / 15.0)));
  } else if (ax > 20.0) {
    t = 1.0;
  } else {
    const double e = std::exp(-2.0 * ax);
    t = (1.0 - e) / (1.0 + e);
  }
  return std::copysign(t, x);
}

}  // namespace

Tensor tanh(const Tensor& a) {
  return Unary(
      "tanh", a, [](double x) { return FastTanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return Unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return Unary(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double v : a.data()) {
    if (!(v > 0.0)) {
      throw DomainError("log: non-positive input " + std::to_string(v));
    }
  }
  return Unary(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor softplus(const Tensor& a) {
  return Unary(
      "softplus", a,
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) {
        // logistic sigmoid, evaluated without overflow
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return Unary(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  const std::size_t n = a.size();
  return Finish("sum", {}, {total}, {&a},
                [n](std::span<const double> g, std::span<std::vector<double>*> grads) {
                  auto& ga = *grads[0];
                  for (std::size_t i = 0; i < n; ++i) ga[i] += g[0];
                });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.size());
  return scale(sum(a), 1.0 / n);
}

Tensor row_sum(const Tensor& a) {
  RequireMatrix("row_sum", a);
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i] += a(i, j);
  return Finish("row_sum", {r, 1}, std::move(out), {&a},
                [r, c](std::span<const double> g, std::span<std::vector<double>*> grads) {
                  auto& ga = *grads[0];
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i];
                });
}

Tensor logsumexp_rows(const Tensor& a) {
  RequireMatrix("logsumexp_rows", a);
  const std::size_t r = a.rows(), c = a.cols();
  if (c == 0) throw ShapeError("logsumexp_rows: zero columns");
  auto av = a.buffer();
  std::vector<double> out(r);
  // softmax weights, kept for the backward pass
  auto weights = std::make_shared<std::vector<double>>(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = av->data() + i * c;
    const double shift = *std::max_element(row, row + c);
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      (*weights)[i * c + j] = std::exp(row[j] - shift);
      acc += (*weights)[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) (*weights)[i * c + j] /= acc;
    out[i] = shift + std::log(acc);
  }
  return Finish("logsumexp_rows", {r, 1}, std::move(out), {&a},
                [weights, r, c](std::span<const double> g,
                                std::span<std::vector<double>*> grads) {
                  auto& ga = *grads[0];
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                      ga[i * c + j] += g[i] * (*weights)[i * c + j];
                });
}

Tensor log_softmax_rows(const Tensor& a) {
  RequireMatrix("log_softmax_rows", a);
  const std::size_t r = a.rows(), c = a.cols();
  auto av = a.buffer();
  std::vector<double> out(r * c);
  auto probs = std::make_shared<std::vector<double>>(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = av->data() + i * c;
    const double shift = *std::max_element(row, row + c);
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += std::exp(row[j] - shift);
    const double lse = shift + std::log(acc);
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = row[j] - lse;
      (*probs)[i * c + j] = std::exp(out[i * c + j]);
    }
  }
  return Finish("log_softmax_rows", {r, c}, std::move(out), {&a},
                [probs, r, c](std::span<const double> g,
                              std::span<std::vector<double>*> grads) {
                  auto& ga = *grads[0];
                  for (std::size_t i = 0; i < r; ++i) {
                    double gsum = 0.0;
                    for (std::size_t j = 0; j < c; ++j) gsum += g[i * c + j];
                    for (std::size_t j = 0; j < c; ++j)
                      ga[i * c + j] += g[i * c + j] - (*probs)[i * c + j] * gsum;
                  }
                });
}

Tensor broadcast_add_row(const Tensor& matrix, const Tensor& row) {
  RequireMatrix("broadcast_add_row", matrix);
  RequireMatrix("broadcast_add_row", row);
  if (row.rows() != 1 || row.cols() != matrix.cols()) {
    throw ShapeError("broadcast_add_row: cannot broadcast " +
                     ShapeToString(row.shape()) + " over " +
                     ShapeToString(matrix.shape()));
  }
  const std::size_t r = matrix.rows(), c = matrix.cols();
  std::vector<double> out = Copy(matrix.data());
  const auto rv = row.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += rv[j];
  return Finish("broadcast_add_row", {r, c}, std::move(out), {&matrix, &row},
                [r, c](std::span<const double> g, std::span<std::vector<double>*> grads) {
                  if (grads[0]) Accumulate(grads[0], g);
                  if (grads[1]) kernels::active().column_sum(g.data(), grads[1]->data(), r, c);
                });
}

Tensor broadcast_mul_col(const Tensor& matrix, const Tensor& column) {
  RequireMatrix("broadcast_mul_col", matrix);
  RequireMatrix("broadcast_mul_col", column);
  if (column.cols() != 1 || column.rows() != matrix.rows()) {
    throw ShapeError("broadcast_mul_col: cannot broadcast " +
                     ShapeToString(column.shape()) + " over " +
                     ShapeToString(matrix.shape()));
  }
  const std::size_t r = matrix.rows(), c = matrix.cols();
  auto mv = matrix.buffer();
  auto cv = column.buffer();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = (*mv)[i * c + j] * (*cv)[i];
  return Finish("broadcast_mul_col", {r, c}, std::move(out), {&matrix, &column},
                [mv, cv, r, c](std::span<const double> g,
                               std::span<std::vector<double>*> grads) {
                  for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                      if (grads[0]) (*grads[0])[i * c + j] += g[i * c + j] * (*cv)[i];
                      if (grads[1]) (*grads[1])[i] += g[i * c + j] * (*mv)[i * c + j];
                    }
                  }
                });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  RequireMatrix("slice_rows", a);
  if (begin > end || end > a.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of " + ShapeToString(a.shape()));
  }
  const std::size_t c = a.cols();
  const auto d = a.data();
  std::vector<double> out(d.begin() + static_cast<std::ptrdiff_t>(begin * c),
                          d.begin() + static_cast<std::ptrdiff_t>(end * c));
  return Finish("slice_rows", {end - begin, c}, std::move(out), {&a},
                [begin, c](std::span<const double> g,
                           std::span<std::vector<double>*> grads) {
                  auto& ga = *grads[0];
                  for (std::size_t i = 0; i < g.size(); ++i) ga[begin * c + i] += g[i];
                });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  RequireMatrix("slice_cols", a);
  if (begin > end || end > a.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of " + ShapeToString(a.shape()));
  }
  const std::size_t r = a.rows(), c = a.cols(), w = end - begin;
  std::vector<double> out(r * w);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = a(i, begin + j);
  return Finish("slice_cols", {r, w}, std::move(out), {&a},
                [r, c, w, begin](std::span<const double> g,
                                 std::span<std::vector<double>*> grads) {
                  auto& ga = *grads[0];
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < w; ++j) ga[i * c + begin + j] += g[i * w + j];
                });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  std::vector<const Tensor*> inputs;
  std::vector<std::size_t> widths;
  std::size_t r = 0, c = 0;
  for (const Tensor& p : parts) {
    RequireMatrix("concat_cols", p);
    if (inputs.empty()) r = p.rows();
    if (p.rows() != r) {
      throw ShapeError("concat_cols: row counts differ " +
                       ShapeToString(parts[0].shape()) + " vs " +
                       ShapeToString(p.shape()));
    }
    inputs.push_back(&p);
    widths.push_back(p.cols());
    c += p.cols();
  }
  std::vector<double> out(r * c);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out[i * c + offset + j] = p(i, j);
    offset += p.cols();
  }
  return Finish("concat_cols", {r, c}, std::move(out), std::move(inputs),
                [widths, r, c](std::span<const double> g,
                               std::span<std::vector<double>*> grads) {
                  std::size_t off = 0;
                  for (std::size_t k = 0; k < widths.size(); ++k) {
                    const std::size_t w = widths[k];
                    if (grads[k]) {
                      auto& gk = *grads[k];
                      for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < w; ++j) gk[i * w + j] += g[i * c + off + j];
                    }
                    off += w;
                  }
                });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  std::vector<const Tensor*> inputs;
  std::vector<std::size_t> sizes;
  const std::size_t c = parts[0].cols();
  std::size_t r = 0;
  std::vector<double> out;
  for (const Tensor& p : parts) {
    RequireMatrix("concat_rows", p);
    if (p.cols() != c) {
      throw ShapeError("concat_rows: column counts differ " +
                       ShapeToString(parts[0].shape()) + " vs " +
                       ShapeToString(p.shape()));
    }
    inputs.push_back(&p);
    sizes.push_back(p.size());
    r += p.rows();
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return Finish("concat_rows", {r, c}, std::move(out), std::move(inputs),
                [sizes](std::span<const double> g, std::span<std::vector<double>*> grads) {
                  std::size_t off = 0;
                  for (std::size_t k = 0; k < sizes.size(); ++k) {
                    if (grads[k]) Accumulate(grads[k], g.subspan(off, sizes[k]));
                    off += sizes[k];
                  }
                });
}

Tensor tile_rows(const Tensor& a, std::size_t times) {
  RequireMatrix("tile_rows", a);
  const std::size_t n = a.size();
  std::vector<double> out;
  out.reserve(n * times);
  for (std::size_t t = 0; t < times; ++t) out.insert(out.end(), a.data().begin(), a.data().end());
  return Finish("tile_rows", {a.rows() * times, a.cols()}, std::move(out), {&a},
                [n, times](std::span<const double> g,
                           std::span<std::vector<double>*> grads) {
                  for (std::size_t t = 0; t < times; ++t) Accumulate(grads[0], g.subspan(t * n, n));
                });
}

Tensor repeat_cols(const Tensor& column, std::size_t times) {
  RequireMatrix("repeat_cols", column);
  if (column.cols() != 1) {
    throw ShapeError("repeat_cols: expected a column, got " +
                     ShapeToString(column.shape()));
  }
  const std::size_t r = column.rows();
  std::vector<double> out(r * times);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < times; ++j) out[i * times + j] = column.at(i);
  return Finish("repeat_cols", {r, times}, std::move(out), {&column},
                [r, times](std::span<const double> g,
                           std::span<std::vector<double>*> grads) {
                  auto& ga = *grads[0];
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < times; ++j) ga[i] += g[i * times + j];
                });
}

}  // namespace mmvae
