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

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmvae {

using Shape = std::vector<std::size_t>;

std::string ShapeToString(const Shape& shape);
std::size_t ShapeSize(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// log/sqrt of a non-positive value, an out-of-range index, and similar.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A forward pass produced NaN or Inf.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Tape;
using NodeId = std::size_t;

// Dense row-major array of doubles. Rank is 0 (scalar) or 2 (matrix); row
// vectors are 1 x n. The buffer is immutable and shared, so copies are
// cheap and a tape can hold on to forward values without copying them.
//
// A tensor that was produced on a tape carries the tape pointer and its
// node id; everything else is a constant.
class Tensor {
 public:
  Tensor();  // scalar zero
  Tensor(Shape shape, std::vector<double> data);

  static Tensor Scalar(double value);
  static Tensor Zeros(std::size_t rows, std::size_t cols);
  static Tensor Filled(std::size_t rows, std::size_t cols, double value);
  static Tensor FromRows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor RowVector(std::span<const double> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_->size(); }
  bool is_scalar() const { return shape_.empty(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return *data_; }
  const std::shared_ptr<const std::vector<double>>& buffer() const {
    return data_;
  }

  double item() const;
  double operator()(std::size_t row, std::size_t col) const;
  double at(std::size_t flat_index) const { return (*data_)[flat_index]; }
  std::vector<double> row(std::size_t r) const;

  std::optional<NodeId> node() const { return node_; }
  Tape* tape() const { return tape_; }
  bool requires_grad() const { return node_.has_value(); }

  // Same values, no tape participation.
  Tensor detach() const;

 private:
  friend class Tape;

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  std::optional<NodeId> node_;
  Tape* tape_ = nullptr;
};

// Receives the gradient of the node's output and adds the contributions for
// each parent into `parent_grads` (same order as the recorded parents).
// Buffers for parents are always allocated and zero-initialized by the
// caller before the first contribution.
using BackwardFn = std::function<void(std::span<const double> grad_out,
                                      std::span<std::vector<double>*> parent_grads)>;

// Define-by-run gradient tape. Node ids are assigned in creation order,
// which is a topological order because a node can only reference nodes that
// already exist. Not thread-safe; confine a tape and its tensors to one
// thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers `value` as a leaf and returns it bound to this tape.
  Tensor variable(const Tensor& value);

  // Used by ops: records a node whose value is `value` and returns the
  // bound tensor.
  Tensor record(Shape shape, std::vector<double> value,
                std::vector<NodeId> parents, BackwardFn backward);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  struct Node {
    Shape shape;
    std::vector<NodeId> parents;
    BackwardFn backward;  // empty for leaves
  };
  const Node& node(NodeId id) const { return nodes_.at(id); }

 private:
  std::vector<Node> nodes_;
};

// d(root)/d(node) for every node on the tape reachable from the root.
class Gradients {
 public:
  Gradients(const Tape* tape, std::vector<std::vector<double>> grads)
      : tape_(tape), grads_(std::move(grads)) {}

  // Gradient with respect to a tensor bound to the same tape; zeros when
  // the tensor did not contribute to the root.
  Tensor of(const Tensor& tensor) const;

  // Raw buffer (possibly empty when unreachable).
  const std::vector<double>& raw(NodeId id) const { return grads_.at(id); }

 private:
  const Tape* tape_;
  std::vector<std::vector<double>> grads_;
};

// Reverse sweep from a scalar root. Does not modify the tape, so calling it
// twice yields identical results.
Gradients backward(const Tape& tape, const Tensor& root);

// ---------------------------------------------------------------------------
// Forward ops. Any op whose inputs include a tape-bound tensor records a node
// on that tape. Shape errors throw ShapeError naming both shapes.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor div(const Tensor& a, const Tensor& b);  // elementwise
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // DomainError for entries <= 0
Tensor softplus(const Tensor& a);
// Values outside [lo, hi] are clamped and receive zero gradient.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);   // -> scalar
Tensor mean(const Tensor& a);  // -> scalar
// r x c -> r x 1
Tensor row_sum(const Tensor& a);
// r x c -> r x 1, max-shifted
Tensor logsumexp_rows(const Tensor& a);
// r x c -> r x c, each row minus its log-sum-exp
Tensor log_softmax_rows(const Tensor& a);

// matrix (r x c) + row (1 x c)
Tensor broadcast_add_row(const Tensor& matrix, const Tensor& row);
// matrix (r x c) * column (r x 1), scaling each row
Tensor broadcast_mul_col(const Tensor& matrix, const Tensor& column);

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
// Stacks `times` copies of `a` vertically.
Tensor tile_rows(const Tensor& a, std::size_t times);
// r x 1 -> r x n
Tensor repeat_cols(const Tensor& column, std::size_t times);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

// Throws NonFiniteError(what) if any entry is NaN or Inf.
void require_finite(const Tensor& t, const std::string& what);

// ---------------------------------------------------------------------------
// Central finite-difference gradient checking over a flat parameter vector.

struct GradCheckOptions {
  double step = 1e-5;
  double relative_tolerance = 1e-4;
  double absolute_floor = 1e-7;
};

struct GradCheckEntry {
  std::size_t index;
  double analytic;
  double numeric;
};

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::vector<GradCheckEntry> worst;  // up to 10 failing entries
  bool ok() const { return failures == 0; }
};

// Central differences of `f` at `x`.
std::vector<double> numeric_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double step = 1e-5);

// Entry i passes when |a - n| <= absolute_floor or
// |a - n| <= relative_tolerance * max(|a|, |n|).
GradCheckResult compare_gradients(std::span<const double> analytic,
                                  std::span<const double> numeric,
                                  const GradCheckOptions& options = {});

GradCheckResult check_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, std::span<const double> analytic,
    const GradCheckOptions& options = {});

}  // namespace mmvae
