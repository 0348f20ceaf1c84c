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
#include <cmath>
#include <sstream>

#include "mmvae/tensor.hpp"

namespace mmvae {

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t ShapeSize(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor()
    : data_(std::make_shared<const std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)) {
  if (shape_.size() != 0 && shape_.size() != 2) {
    throw ShapeError("tensors must be rank 0 or 2, got shape " +
                     ShapeToString(shape_));
  }
  if (ShapeSize(shape_) != data.size()) {
    throw ShapeError("shape " + ShapeToString(shape_) + " needs " +
                     std::to_string(ShapeSize(shape_)) + " values, got " +
                     std::to_string(data.size()));
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

Tensor Tensor::Scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::Zeros(std::size_t rows, std::size_t cols) {
  return Filled(rows, cols, 0.0);
}

Tensor Tensor::Filled(std::size_t rows, std::size_t cols, double value) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, value));
}

Tensor Tensor::FromRows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged rows in Tensor::FromRows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::RowVector(std::span<const double> values) {
  return Tensor({1, values.size()},
                std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const {
  if (shape_.size() != 2) throw ShapeError("rows() on scalar tensor");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() != 2) throw ShapeError("cols() on scalar tensor");
  return shape_[1];
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() needs a single element, shape is " +
                     ShapeToString(shape_));
  }
  return (*data_)[0];
}

double Tensor::operator()(std::size_t row, std::size_t col) const {
  return (*data_)[row * cols() + col];
}

std::vector<double> Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  return {data_->begin() + static_cast<std::ptrdiff_t>(r * c),
          data_->begin() + static_cast<std::ptrdiff_t>((r + 1) * c)};
}

Tensor Tensor::detach() const {
  Tensor out = *this;
  out.node_.reset();
  out.tape_ = nullptr;
  return out;
}

Tensor Tape::variable(const Tensor& value) {
  Tensor out = value.detach();
  out.node_ = nodes_.size();
  out.tape_ = this;
  nodes_.push_back(Node{value.shape(), {}, {}});
  return out;
}

Tensor Tape::record(Shape shape, std::vector<double> value,
                    std::vector<NodeId> parents, BackwardFn backward) {
  Tensor out(shape, std::move(value));
  out.node_ = nodes_.size();
  out.tape_ = this;
  nodes_.push_back(Node{std::move(shape), std::move(parents), std::move(backward)});
  return out;
}

Tensor Gradients::of(const Tensor& tensor) const {
  if (!tensor.node() || tensor.tape() != tape_) {
    return Tensor(tensor.shape(), std::vector<double>(tensor.size(), 0.0));
  }
  const auto& g = grads_.at(*tensor.node());
  if (g.empty()) {
    return Tensor(tensor.shape(), std::vector<double>(tensor.size(), 0.0));
  }
  return Tensor(tensor.shape(), g);
}

Gradients backward(const Tape& tape, const Tensor& root) {
  if (root.size() != 1) {
    throw ShapeError("backward needs a scalar root, got shape " +
                     ShapeToString(root.shape()));
  }
  std::vector<std::vector<double>> grads(tape.size());
  if (!root.node()) return Gradients(&tape, std::move(grads));
  if (root.tape() != &tape) {
    throw std::invalid_argument("backward: root belongs to a different tape");
  }

  const NodeId root_id = *root.node();
  grads[root_id].assign(1, 1.0);
  std::vector<std::vector<double>*> parent_grads;
  for (NodeId id = root_id + 1; id-- > 0;) {
    if (grads[id].empty()) continue;
    const Tape::Node& node = tape.node(id);
    if (!node.backward) continue;
    parent_grads.clear();
    for (NodeId p : node.parents) {
      if (grads[p].empty()) grads[p].assign(ShapeSize(tape.node(p).shape), 0.0);
      parent_grads.push_back(&grads[p]);
    }
    node.backward(grads[id], parent_grads);
  }
  return Gradients(&tape, std::move(grads));
}

void require_finite(const Tensor& t, const std::string& what) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NonFiniteError("non-finite value in " + what);
  }
}

}  // namespace mmvae
