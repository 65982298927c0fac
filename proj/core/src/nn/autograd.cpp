// SPDX-License-Identifier: Apache-2.0
#include "spotkit/nn/autograd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "spotkit/error.hpp"

namespace spotkit::nn {

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

ConstMapMat as_mat(const Tensor& t) { return ConstMapMat(t.data.data(), t.shape[0], t.shape[1]); }
MapMat as_mat(Tensor& t) { return MapMat(t.data.data(), t.shape[0], t.shape[1]); }

void require_rank(const Var& v, std::int64_t rank, const char* op) {
  if (v.value().rank() != rank) {
    throw Error(Errc::ShapeMismatch, std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                                         shape_string(v.shape()));
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(Errc::ShapeMismatch, std::string(op) + ": " + shape_string(a.shape()) + " vs " +
                                         shape_string(b.shape()));
  }
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

template <typename F>
Var unary(const Var& a, Tensor out, F&& local_grad) {
  // local_grad(x, y, g) -> dL/dx contribution for a single element
  return make_var(std::move(out), {a}, [local_grad](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor& pg = p.grad_buffer();
    for (std::size_t i = 0; i < pg.data.size(); ++i) {
      pg.data[i] += local_grad(p.value.data[i], self.value.data[i], self.grad.data[i]);
    }
  });
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.shape != value.shape) grad = Tensor(value.shape, 0.0);
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Var::grad() const {
  if (node_->grad.shape == node_->value.shape) return node_->grad;
  return Tensor(node_->value.shape, 0.0);
}

void Var::zero_grad() {
  if (node_->grad.shape == node_->value.shape) std::fill(node_->grad.data.begin(), node_->grad.data.end(), 0.0);
}

Var make_var(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward) {
  Var out;
  out.node_ = std::make_shared<Node>();
  out.node_->value = std::move(value);
  if (!g_grad_enabled) return out;
  const bool needs = std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p.requires_grad(); });
  if (!needs) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(parents.size());
  for (auto& p : parents) out.node_->parents.push_back(p.node());
  out.node_->backward = std::move(backward);
  return out;
}

Var constant(Tensor value) { return Var(std::move(value), false); }

void backward(const Var& root) {
  if (root.value().size() != 1) throw Error(Errc::ShapeMismatch, "backward() needs a scalar root");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS for a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer().data[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) {
      n->grad_buffer();
      n->backward(*n);
    }
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.value().data[i];
  return make_var(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      Tensor& pg = p.grad_buffer();
      for (std::size_t i = 0; i < pg.data.size(); ++i) pg.data[i] += self.grad.data[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.value().data[i];
  return make_var(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      const double sign = k == 0 ? 1.0 : -1.0;
      Tensor& pg = p.grad_buffer();
      for (std::size_t i = 0; i < pg.data.size(); ++i) pg.data[i] += sign * self.grad.data[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.value().data[i];
  return make_var(std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i] * pb.value.data[i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i] * pa.value.data[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.data) v *= s;
  return unary(a, std::move(out), [s](double, double, double g) { return g * s; });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.data) v += s;
  return unary(a, std::move(out), [](double, double, double g) { return g; });
}

Var one_minus(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data) v = 1.0 - v;
  return unary(a, std::move(out), [](double, double, double g) { return -g; });
}

Var square(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data) v *= v;
  return unary(a, std::move(out), [](double x, double, double g) { return 2.0 * x * g; });
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data) v = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  return unary(a, std::move(out), [](double, double y, double g) { return g * y * (1.0 - y); });
}

Var tanh(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data) v = std::tanh(v);
  return unary(a, std::move(out), [](double, double y, double g) { return g * (1.0 - y * y); });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return unary(a, std::move(out), [](double x, double, double g) { return x > 0.0 ? g : 0.0; });
}

Var exp(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data) v = std::exp(v);
  return unary(a, std::move(out), [](double, double y, double g) { return g * y; });
}

Var log(const Var& a, double floor) {
  Tensor out = a.value();
  for (double& v : out.data) v = std::log(std::max(v, floor));
  return unary(a, std::move(out), [floor](double x, double, double g) { return x > floor ? g / x : 0.0; });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().data) total += v;
  return make_var(Tensor({1}, std::vector<double>{total}), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    const double g = self.grad.data[0];
    for (double& v : p.grad_buffer().data) v += g;
  });
}

Var mean(const Var& a) {
  const auto n = static_cast<double>(std::max<std::int64_t>(a.value().size(), 1));
  return scale(sum(a), 1.0 / n);
}

Var sum_rows(const Var& a) {
  require_rank(a, 2, "sum_rows");
  const auto m = a.value().rows(), n = a.value().cols();
  Tensor out({1, n}, 0.0);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) out.data[j] += a.value()(i, j);
  return make_var(std::move(out), {a}, [m, n](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j) g(i, j) += self.grad.data[j];
  });
}

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.value().cols() != b.value().rows()) {
    throw Error(Errc::ShapeMismatch, "matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor out({a.value().rows(), b.value().cols()});
  as_mat(out).noalias() = as_mat(a.value()) * as_mat(b.value());
  return make_var(std::move(out), {a, b}, [](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    const auto g = as_mat(static_cast<const Tensor&>(self.grad));
    if (pa.requires_grad) as_mat(pa.grad_buffer()).noalias() += g * as_mat(pb.value).transpose();
    if (pb.requires_grad) as_mat(pb.grad_buffer()).noalias() += as_mat(pa.value).transpose() * g;
  });
}

Var transpose(const Var& a) {
  require_rank(a, 2, "transpose");
  Tensor out({a.value().cols(), a.value().rows()});
  as_mat(out) = as_mat(a.value()).transpose();
  return make_var(std::move(out), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    as_mat(p.grad_buffer()) += as_mat(static_cast<const Tensor&>(self.grad)).transpose();
  });
}

Var add_row(const Var& a, const Var& b) {
  require_rank(a, 2, "add_row");
  const auto m = a.value().rows(), n = a.value().cols();
  if (b.value().size() != n) throw Error(Errc::ShapeMismatch, "add_row: bias size mismatch");
  Tensor out = a.value();
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) out(i, j) += b.value().data[j];
  return make_var(std::move(out), {a, b}, [m, n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
    }
    if (pb.requires_grad) {
      Tensor& g = pb.grad_buffer();
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) g.data[j] += self.grad(i, j);
    }
  });
}

Var mul_col(const Var& a, const Var& v) {
  require_rank(a, 2, "mul_col");
  const auto m = a.value().rows(), n = a.value().cols();
  if (v.value().size() != m) throw Error(Errc::ShapeMismatch, "mul_col: scale size mismatch");
  Tensor out = a.value();
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) out(i, j) *= v.value().data[i];
  return make_var(std::move(out), {a, v}, [m, n](Node& self) {
    Node& pa = parent(self, 0);
    Node& pv = parent(self, 1);
    if (pa.requires_grad) {
      Tensor& g = pa.grad_buffer();
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) g(i, j) += self.grad(i, j) * pv.value.data[i];
    }
    if (pv.requires_grad) {
      Tensor& g = pv.grad_buffer();
      for (std::int64_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < n; ++j) acc += self.grad(i, j) * pa.value(i, j);
        g.data[i] += acc;
      }
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  if (numel(shape) != a.value().size()) {
    throw Error(Errc::ShapeMismatch, "reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  Tensor out(std::move(shape), a.value().data);
  return make_var(std::move(out), {a}, [](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat_cols: no inputs");
  const auto m = parts[0].value().rows();
  std::vector<std::int64_t> offsets;
  std::int64_t total = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.value().rows() != m) throw Error(Errc::ShapeMismatch, "concat_cols: row mismatch");
    offsets.push_back(total);
    total += p.value().cols();
  }
  Tensor out({m, total});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < v.cols(); ++j) out(i, offsets[k] + j) = v(i, j);
  }
  return make_var(std::move(out), std::vector<Var>(parts.begin(), parts.end()), [offsets, m](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      Tensor& g = p.grad_buffer();
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < g.cols(); ++j) g(i, j) += self.grad(i, offsets[k] + j);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(Errc::ShapeMismatch, "concat_rows: no inputs");
  const auto n = parts[0].value().cols();
  std::vector<std::int64_t> offsets;
  std::int64_t total = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.value().cols() != n) throw Error(Errc::ShapeMismatch, "concat_rows: column mismatch");
    offsets.push_back(total);
    total += p.value().rows();
  }
  Tensor out({total, n});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& d = parts[k].value().data;
    std::copy(d.begin(), d.end(), out.data.begin() + offsets[k] * n);
  }
  return make_var(std::move(out), std::vector<Var>(parts.begin(), parts.end()), [offsets, n](Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      Node& p = parent(self, k);
      if (!p.requires_grad) continue;
      Tensor& g = p.grad_buffer();
      const auto base = static_cast<std::size_t>(offsets[k] * n);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[base + i];
    }
  });
}

Var slice_rows(const Var& a, std::int64_t start, std::int64_t count) {
  require_rank(a, 2, "slice_rows");
  Tensor out = a.value().slice_leading(start, count);
  const auto n = a.value().cols();
  return make_var(std::move(out), {a}, [start, n](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    const auto base = static_cast<std::size_t>(start * n);
    for (std::size_t i = 0; i < self.grad.data.size(); ++i) g.data[base + i] += self.grad.data[i];
  });
}

Var slice_cols(const Var& a, std::int64_t start, std::int64_t count) {
  require_rank(a, 2, "slice_cols");
  const auto m = a.value().rows();
  if (start < 0 || count < 0 || start + count > a.value().cols()) {
    throw Error(Errc::ShapeMismatch, "slice_cols out of range");
  }
  Tensor out({m, count});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < count; ++j) out(i, j) = a.value()(i, start + j);
  return make_var(std::move(out), {a}, [start, m, count](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < count; ++j) g(i, start + j) += self.grad(i, j);
  });
}

Var softmax_rows(const Var& a) {
  require_rank(a, 2, "softmax_rows");
  const auto m = a.value().rows(), n = a.value().cols();
  Tensor out = a.value();
  for (std::int64_t i = 0; i < m; ++i) {
    double mx = out(i, 0);
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, out(i, j));
    double z = 0.0;
    for (std::int64_t j = 0; j < n; ++j) z += (out(i, j) = std::exp(out(i, j) - mx));
    for (std::int64_t j = 0; j < n; ++j) out(i, j) /= z;
  }
  return make_var(std::move(out), {a}, [m, n](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::int64_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::int64_t j = 0; j < n; ++j) dot += self.grad(i, j) * self.value(i, j);
      for (std::int64_t j = 0; j < n; ++j) g(i, j) += self.value(i, j) * (self.grad(i, j) - dot);
    }
  });
}

Var log_softmax_rows(const Var& a) {
  require_rank(a, 2, "log_softmax_rows");
  const auto m = a.value().rows(), n = a.value().cols();
  Tensor out = a.value();
  for (std::int64_t i = 0; i < m; ++i) {
    double mx = out(i, 0);
    for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, out(i, j));
    double z = 0.0;
    for (std::int64_t j = 0; j < n; ++j) z += std::exp(out(i, j) - mx);
    const double lse = mx + std::log(z);
    for (std::int64_t j = 0; j < n; ++j) out(i, j) -= lse;
  }
  return make_var(std::move(out), {a}, [m, n](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::int64_t i = 0; i < m; ++i) {
      double gsum = 0.0;
      for (std::int64_t j = 0; j < n; ++j) gsum += self.grad(i, j);
      for (std::int64_t j = 0; j < n; ++j) g(i, j) += self.grad(i, j) - std::exp(self.value(i, j)) * gsum;
    }
  });
}

Var l2_normalize_rows(const Var& a, double eps) {
  require_rank(a, 2, "l2_normalize_rows");
  const auto m = a.value().rows(), n = a.value().cols();
  Tensor out = a.value();
  std::vector<double> norms(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    double ss = 0.0;
    for (std::int64_t j = 0; j < n; ++j) ss += out(i, j) * out(i, j);
    norms[i] = std::sqrt(ss);
    const double d = std::max(norms[i], eps);
    for (std::int64_t j = 0; j < n; ++j) out(i, j) /= d;
  }
  return make_var(std::move(out), {a}, [m, n, eps, norms](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::int64_t i = 0; i < m; ++i) {
      if (norms[i] > eps) {
        double dot = 0.0;
        for (std::int64_t j = 0; j < n; ++j) dot += self.grad(i, j) * self.value(i, j);
        for (std::int64_t j = 0; j < n; ++j) g(i, j) += (self.grad(i, j) - self.value(i, j) * dot) / norms[i];
      } else {
        for (std::int64_t j = 0; j < n; ++j) g(i, j) += self.grad(i, j) / eps;
      }
    }
  });
}

Var masked_max_rows(const Var& a, const std::vector<bool>& mask) {
  require_rank(a, 2, "masked_max_rows");
  const auto m = a.value().rows(), n = a.value().cols();
  if (static_cast<std::int64_t>(mask.size()) != m) throw Error(Errc::ShapeMismatch, "masked_max_rows: mask size");
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
    throw Error(Errc::AllMasked, "max pooling over a fully masked window");
  }
  Tensor out({1, n});
  std::vector<std::int64_t> arg(static_cast<std::size_t>(n), -1);
  for (std::int64_t i = 0; i < m; ++i) {
    if (!mask[i]) continue;
    for (std::int64_t j = 0; j < n; ++j) {
      if (arg[j] < 0 || a.value()(i, j) > out.data[j]) {
        out.data[j] = a.value()(i, j);
        arg[j] = i;
      }
    }
  }
  return make_var(std::move(out), {a}, [arg, n](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::int64_t j = 0; j < n; ++j) g(arg[j], j) += self.grad.data[j];
  });
}

Var unfold_time(const Var& x, std::int64_t kernel, std::int64_t pad) {
  require_rank(x, 2, "unfold_time");
  const auto t_len = x.value().rows(), c = x.value().cols();
  const auto out_rows = t_len + 2 * pad - kernel + 1;
  if (out_rows <= 0) throw Error(Errc::ShapeMismatch, "unfold_time: kernel larger than padded input");
  Tensor out({out_rows, kernel * c}, 0.0);
  for (std::int64_t t = 0; t < out_rows; ++t)
    for (std::int64_t k = 0; k < kernel; ++k) {
      const auto src = t - pad + k;
      if (src < 0 || src >= t_len) continue;
      std::copy_n(x.value().data.begin() + src * c, c, out.data.begin() + (t * kernel + k) * c);
    }
  return make_var(std::move(out), {x}, [t_len, c, kernel, pad, out_rows](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    for (std::int64_t t = 0; t < out_rows; ++t)
      for (std::int64_t k = 0; k < kernel; ++k) {
        const auto src = t - pad + k;
        if (src < 0 || src >= t_len) continue;
        const double* from = self.grad.data.data() + (t * kernel + k) * c;
        double* to = g.data.data() + src * c;
        for (std::int64_t j = 0; j < c; ++j) to[j] += from[j];
      }
  });
}

Var im2col(const Var& x, std::int64_t kernel, std::int64_t stride, std::int64_t pad) {
  require_rank(x, 4, "im2col");
  const auto n = x.value().dim(0), h = x.value().dim(1), w = x.value().dim(2), c = x.value().dim(3);
  const auto ho = (h + 2 * pad - kernel) / stride + 1;
  const auto wo = (w + 2 * pad - kernel) / stride + 1;
  if (ho <= 0 || wo <= 0) throw Error(Errc::ShapeMismatch, "im2col: kernel larger than input");
  const auto patch = kernel * kernel * c;
  Tensor out({n * ho * wo, patch}, 0.0);
  const double* src = x.value().data.data();
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t oy = 0; oy < ho; ++oy)
      for (std::int64_t ox = 0; ox < wo; ++ox) {
        double* dst = out.data.data() + ((b * ho + oy) * wo + ox) * patch;
        for (std::int64_t ky = 0; ky < kernel; ++ky) {
          const auto iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (std::int64_t kx = 0; kx < kernel; ++kx) {
            const auto ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            std::copy_n(src + ((b * h + iy) * w + ix) * c, c, dst + (ky * kernel + kx) * c);
          }
        }
      }
  return make_var(std::move(out), {x}, [=](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    double* g = p.grad_buffer().data.data();
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t oy = 0; oy < ho; ++oy)
        for (std::int64_t ox = 0; ox < wo; ++ox) {
          const double* from = self.grad.data.data() + ((b * ho + oy) * wo + ox) * patch;
          for (std::int64_t ky = 0; ky < kernel; ++ky) {
            const auto iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (std::int64_t kx = 0; kx < kernel; ++kx) {
              const auto ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= w) continue;
              double* to = g + ((b * h + iy) * w + ix) * c;
              const double* f = from + (ky * kernel + kx) * c;
              for (std::int64_t j = 0; j < c; ++j) to[j] += f[j];
            }
          }
        }
  });
}

Var temporal_shift(const Var& x, std::int64_t fold) {
  const auto& shape = x.shape();
  if (shape.size() < 2) throw Error(Errc::ShapeMismatch, "temporal_shift: rank must be >= 2");
  const auto t_len = shape.front();
  const auto c = shape.back();
  if (fold < 0 || 2 * fold > c) throw Error(Errc::ShapeMismatch, "temporal_shift: fold exceeds channels");
  if (fold == 0) return x;
  const auto per_frame = numel(shape) / t_len;
  const auto sites = per_frame / c;
  // Channels [0,fold) read from t-1, [fold,2*fold) read from t+1.
  auto source_frame = [=](std::int64_t t, std::int64_t ch) -> std::int64_t {
    if (ch < fold) return t - 1;
    if (ch < 2 * fold) return t + 1;
    return t;
  };
  Tensor out(shape, 0.0);
  const double* in = x.value().data.data();
  for (std::int64_t t = 0; t < t_len; ++t)
    for (std::int64_t s = 0; s < sites; ++s)
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const auto src = source_frame(t, ch);
        if (src < 0 || src >= t_len) continue;
        out.data[(t * sites + s) * c + ch] = in[(src * sites + s) * c + ch];
      }
  return make_var(std::move(out), {x}, [=](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    double* g = p.grad_buffer().data.data();
    for (std::int64_t t = 0; t < t_len; ++t)
      for (std::int64_t s = 0; s < sites; ++s)
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const auto src = source_frame(t, ch);
          if (src < 0 || src >= t_len) continue;
          g[(src * sites + s) * c + ch] += self.grad.data[(t * sites + s) * c + ch];
        }
  });
}

Var mean_spatial(const Var& x) {
  require_rank(x, 4, "mean_spatial");
  const auto n = x.value().dim(0), h = x.value().dim(1), w = x.value().dim(2), c = x.value().dim(3);
  const auto sites = h * w;
  Tensor out({n, c}, 0.0);
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t s = 0; s < sites; ++s)
      for (std::int64_t ch = 0; ch < c; ++ch) out(b, ch) += x.value().data[(b * sites + s) * c + ch];
  for (double& v : out.data) v /= static_cast<double>(sites);
  return make_var(std::move(out), {x}, [=](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    Tensor& g = p.grad_buffer();
    const double inv = 1.0 / static_cast<double>(sites);
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t s = 0; s < sites; ++s)
        for (std::int64_t ch = 0; ch < c; ++ch) g.data[(b * sites + s) * c + ch] += self.grad(b, ch) * inv;
  });
}

}  // namespace spotkit::nn
