// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode automatic differentiation over double tensors.
//
// A Var wraps a graph node. Operations build new nodes whose backward
// closures accumulate into their parents' gradients; backward() walks the
// graph in reverse topological order. Everything is single-threaded and
// evaluation order is fixed, so gradients are bit-reproducible.

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "spotkit/nn/tensor.hpp"

namespace spotkit::nn {

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape; }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return node_ != nullptr; }

  /// Gradient after backward(); zero tensor when nothing flowed in.
  Tensor grad() const;
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
  friend Var make_var(Tensor, std::vector<Var>, std::function<void(Node&)>);
};

Var make_var(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

Var constant(Tensor value);

/// Seeds d(root)/d(root) = 1 (root must hold one element) and propagates.
void backward(const Var& root);

bool grad_enabled();

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// --- elementwise -----------------------------------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var one_minus(const Var& a);
Var square(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var exp(const Var& a);
/// log(max(a, floor)); gradient is zero where the floor is active.
Var log(const Var& a, double floor = 1e-12);

// --- reductions ------------------------------------------------------------
Var sum(const Var& a);
Var mean(const Var& a);
/// Column sums of a 2-D tensor: [m,n] -> [1,n].
Var sum_rows(const Var& a);

// --- 2-D linear algebra and layout -----------------------------------------
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
/// a[m,n] + b broadcast over rows; b has n elements.
Var add_row(const Var& a, const Var& b);
/// a[m,n] * v[i] per row; v has m elements.
Var mul_col(const Var& a, const Var& v);
Var reshape(const Var& a, Shape shape);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(const Var& a, std::int64_t start, std::int64_t count);
Var slice_cols(const Var& a, std::int64_t start, std::int64_t count);

// --- row-wise normalization ------------------------------------------------
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
/// x / max(||x||, eps) per row.
Var l2_normalize_rows(const Var& a, double eps);

/// Column-wise max over rows whose mask entry is true. Gradient routes to the
/// first arg-max row. Throws Error{AllMasked} when no row is selected.
Var masked_max_rows(const Var& a, const std::vector<bool>& mask);

// --- convolution helpers ----------------------------------------------------
/// [T,C] -> [T, k*C]; row t holds rows t-pad..t-pad+k-1 (zero outside).
Var unfold_time(const Var& x, std::int64_t kernel, std::int64_t pad);

/// [N,H,W,C] -> [N*Ho*Wo, kh*kw*C] patches for a strided 2-D convolution.
Var im2col(const Var& x, std::int64_t kernel, std::int64_t stride, std::int64_t pad);

/// Shifts `fold` channels (last axis) forward along axis 0 and the next
/// `fold` channels backward; vacated positions are zero.
Var temporal_shift(const Var& x, std::int64_t fold);

/// [N,H,W,C] -> [N,C] spatial mean.
Var mean_spatial(const Var& x);

}  // namespace spotkit::nn
