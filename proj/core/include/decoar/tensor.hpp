// Copyright 2026 The decoar authors.
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
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "decoar/rng.hpp"

namespace decoar {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

namespace detail {
struct TensorStorage {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;
  bool on_graph = false;
};
}  // namespace detail

// Dense float64 array with shared storage and reverse-mode gradients.
//
// A Tensor is a cheap handle: copies alias the same storage, which is what
// ties gradient accumulation to parameter identity. Values are row-major.
// Most operations work on 2-d tensors; a tensor with a single element acts
// as a scalar in broadcasting positions. Gradients accumulate (+=) across
// backward passes until zero_grad() is called.
class Tensor {
 public:
  Tensor() : s_(std::make_shared<detail::TensorStorage>()) {}

  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{1}, {v}); }
  static Tensor row_vector(std::vector<double> v);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);
  // Entries drawn uniformly from [lo, hi).
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng);

  const Shape& shape() const { return s_->shape; }
  std::size_t ndim() const { return s_->shape.size(); }
  std::size_t numel() const { return s_->value.size(); }
  bool is_scalar() const { return numel() == 1; }

  // 2-d accessors; a 1-d tensor is read as a single row.
  std::size_t rows() const { return ndim() == 2 ? s_->shape[0] : 1; }
  std::size_t cols() const {
    return s_->shape.empty() ? 0 : s_->shape.back();
  }

  double operator()(std::size_t r, std::size_t c) const {
    return s_->value[r * cols() + c];
  }
  double& at(std::size_t r, std::size_t c) { return s_->value[r * cols() + c]; }
  double scalar_value() const;

  std::span<const double> value() const { return s_->value; }
  std::span<double> value() { return s_->value; }

  bool requires_grad() const { return s_->requires_grad; }
  Tensor& set_requires_grad(bool b = true) {
    s_->requires_grad = b;
    return *this;
  }

  bool on_graph() const { return s_->on_graph; }
  void mark_on_graph() { s_->on_graph = true; }

  bool has_grad() const { return !s_->grad.empty(); }
  std::span<const double> grad() const;
  // Allocates a zero gradient buffer on first use.
  std::vector<double>& grad_buffer();
  void zero_grad();

  // Storage identity: true when both handles alias the same data.
  bool shares_storage(const Tensor& other) const { return s_ == other.s_; }
  const void* storage_id() const { return s_.get(); }

  // Deep copy of shape/value/requires_grad; fresh storage, no gradient.
  Tensor clone() const;
  void copy_value_from(const Tensor& other);

 private:
  std::shared_ptr<detail::TensorStorage> s_;
};

// Record of one forward pass. Operations executed while a tape is active
// append their backward closures in execution order; backward() replays them
// once, in reverse, then drops the record. Graphs are rebuilt per utterance.
class Tape {
 public:
  void record(std::function<void()> backward_op) {
    ops_.push_back(std::move(backward_op));
  }
  std::size_t num_ops() const { return ops_.size(); }

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. The loss must
  // be a scalar. The recorded graph is freed afterwards.
  void backward(const Tensor& loss);
  void clear() { ops_.clear(); }

 private:
  std::vector<std::function<void()>> ops_;
};

// Installs `tape` as the active tape for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

// Suspends recording; forward results inside the scope are plain constants.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* prev_;
};

Tape* active_tape();

// Backward on the thread's active tape.
void backward(const Tensor& loss);

// --- differentiable operations ---------------------------------------------

// C = A·B for 2-d tensors with agreeing inner dimensions.
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise ops accept equal shapes or a scalar on either side; no other
// broadcasting is supported.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
// d|x|/dx at exactly 0 is defined as 0.
Tensor abs(const Tensor& x);

// Scalar sum of all entries.
Tensor sum(const Tensor& x);

// x[m×n] plus a 1×n bias added to every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// Concatenation along columns (parts share a row count) / rows.
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);

// Row/column slices of a 2-d tensor; gradients scatter back into the source.
Tensor row(const Tensor& x, std::size_t r);
Tensor rows(const Tensor& x, std::size_t first, std::size_t count);
Tensor cols(const Tensor& x, std::size_t first, std::size_t count);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace decoar
