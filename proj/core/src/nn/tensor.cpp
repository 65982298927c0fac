// SPDX-License-Identifier: Apache-2.0
#include "spotkit/nn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "spotkit/error.hpp"

namespace spotkit::nn {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(static_cast<std::size_t>(numel(shape)), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (static_cast<std::int64_t>(data.size()) != numel(shape)) {
    throw Error(Errc::ShapeMismatch, "tensor data size " + std::to_string(data.size()) + " does not match shape " +
                                         shape_string(shape));
  }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const auto r = static_cast<std::int64_t>(rows.size());
  const auto c = r ? static_cast<std::int64_t>(rows.begin()->size()) : 0;
  Tensor t({r, c});
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (static_cast<std::int64_t>(row.size()) != c) throw Error(Errc::ShapeMismatch, "ragged matrix literal");
    for (double v : row) t.data[i++] = v;
  }
  return t;
}

Tensor Tensor::row(std::vector<double> values) {
  const auto n = static_cast<std::int64_t>(values.size());
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::slice_leading(std::int64_t start, std::int64_t count) const {
  if (shape.empty() || start < 0 || count < 0 || start + count > shape[0]) {
    throw Error(Errc::ShapeMismatch, "slice out of range for shape " + shape_string(shape));
  }
  Shape s = shape;
  s[0] = count;
  const std::int64_t stride = shape[0] ? numel(shape) / shape[0] : 0;
  Tensor out(s);
  std::copy(data.begin() + start * stride, data.begin() + (start + count) * stride, out.data.begin());
  return out;
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.data.begin(), t.data.end(), [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) throw Error(Errc::ShapeMismatch, shape_string(a.shape) + " vs " + shape_string(b.shape));
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace spotkit::nn
