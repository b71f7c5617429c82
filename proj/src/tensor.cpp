#include "svvad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace svvad {

using detail::Node;

namespace {

// Graph buffers are large and short-lived; without this glibc serves them
// with mmap/munmap pairs, which dominates the training step time.
#if defined(__GLIBC__)
const bool g_malloc_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 26);
  mallopt(M_TRIM_THRESHOLD, 1 << 26);
  return true;
}();
#endif

std::shared_ptr<Node> make_node(size_t rows, size_t cols) {
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->values.assign(rows * cols, 0.0);
  return n;
}

std::string shape_of(const Node& n) {
  return std::to_string(n.rows) + "x" + std::to_string(n.cols);
}

[[noreturn]] void shape_error(const char* op, const Node& a, const Node& b) {
  throw std::invalid_argument(std::string("svvad: ") + op +
                              " shape mismatch (" + shape_of(a) + " vs " +
                              shape_of(b) + ")");
}

[[noreturn]] void shape_error(const char* op, const Node& a) {
  throw std::invalid_argument(std::string("svvad: ") + op +
                              " invalid shape (" + shape_of(a) + ")");
}

// Wires the result node into the graph when any parent needs gradients.
Tensor finish(std::shared_ptr<Node> out,
              std::vector<std::shared_ptr<Node>> parents,
              std::function<void(const Node&)> backward_fn) {
  bool needs = false;
  for (const auto& p : parents)
    if (p->requires_grad) needs = true;
  if (needs) {
    out->requires_grad = true;
    out->is_leaf = false;
    out->parents = std::move(parents);
    out->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(out));
}

enum class BinOp { kAdd, kSub, kMul, kDiv };

double apply_bin(BinOp op, double a, double b) {
  switch (op) {
    case BinOp::kAdd: return a + b;
    case BinOp::kSub: return a - b;
    case BinOp::kMul: return a * b;
    case BinOp::kDiv: return a / b;
  }
  return 0.0;
}

Tensor broadcast_bin(const char* name, BinOp op, const Tensor& at,
                     const Tensor& bt) {
  auto a = at.node();
  auto b = bt.node();
  size_t rows = std::max(a->rows, b->rows);
  size_t cols = std::max(a->cols, b->cols);
  bool rows_ok = (a->rows == b->rows) || a->rows == 1 || b->rows == 1;
  bool cols_ok = (a->cols == b->cols) || a->cols == 1 || b->cols == 1;
  if (!rows_ok || !cols_ok) shape_error(name, *a, *b);

  auto out = make_node(rows, cols);
  const size_t ar = a->rows, ac = a->cols, br = b->rows, bc = b->cols;
  for (size_t r = 0; r < rows; ++r) {
    const size_t ra = (ar == 1) ? 0 : r;
    const size_t rb = (br == 1) ? 0 : r;
    for (size_t c = 0; c < cols; ++c) {
      const size_t ca = (ac == 1) ? 0 : c;
      const size_t cb = (bc == 1) ? 0 : c;
      out->values[r * cols + c] =
          apply_bin(op, a->values[ra * ac + ca], b->values[rb * bc + cb]);
    }
  }

  return finish(out, {a, b}, [a, b, op, rows, cols](const Node& self) {
    const size_t ar = a->rows, ac = a->cols, br = b->rows, bc = b->cols;
    if (a->requires_grad) a->ensure_grad();
    if (b->requires_grad) b->ensure_grad();
    for (size_t r = 0; r < rows; ++r) {
      const size_t ra = (ar == 1) ? 0 : r;
      const size_t rb = (br == 1) ? 0 : r;
      for (size_t c = 0; c < cols; ++c) {
        const size_t ca = (ac == 1) ? 0 : c;
        const size_t cb = (bc == 1) ? 0 : c;
        const double g = self.grad[r * cols + c];
        const double av = a->values[ra * ac + ca];
        const double bv = b->values[rb * bc + cb];
        double ga = 0.0, gb = 0.0;
        switch (op) {
          case BinOp::kAdd: ga = g; gb = g; break;
          case BinOp::kSub: ga = g; gb = -g; break;
          case BinOp::kMul: ga = g * bv; gb = g * av; break;
          case BinOp::kDiv: ga = g / bv; gb = -g * av / (bv * bv); break;
        }
        if (a->requires_grad) a->grad[ra * ac + ca] += ga;
        if (b->requires_grad) b->grad[rb * bc + cb] += gb;
      }
    }
  });
}

Tensor unary(const Tensor& xt, const std::function<double(double)>& f,
             // dval(x, y): local derivative given input x and output y
             const std::function<double(double, double)>& dval) {
  auto x = xt.node();
  auto out = make_node(x->rows, x->cols);
  for (size_t i = 0; i < x->size(); ++i) out->values[i] = f(x->values[i]);
  return finish(out, {x}, [x, dval](const Node& self) {
    x->ensure_grad();
    for (size_t i = 0; i < x->size(); ++i)
      x->grad[i] += self.grad[i] * dval(x->values[i], self.values[i]);
  });
}

}  // namespace

Tensor::Tensor(size_t rows, size_t cols, bool requires_grad) {
  node_ = make_node(rows, cols);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  Tensor t(1, 1, requires_grad);
  t.node_->values[0] = value;
  return t;
}

Tensor Tensor::from_values(size_t rows, size_t cols,
                           std::vector<double> values, bool requires_grad) {
  if (values.size() != rows * cols)
    throw std::invalid_argument(
        "svvad: from_values size " + std::to_string(values.size()) +
        " does not match shape " + std::to_string(rows) + "x" +
        std::to_string(cols));
  Tensor t(rows, cols, requires_grad);
  t.node_->values = std::move(values);
  return t;
}

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  size_t n = values.size();
  return from_values(1, n, std::move(values), requires_grad);
}

double Tensor::scalar_value() const {
  if (size() != 1)
    throw std::invalid_argument("svvad: scalar_value on tensor of shape " +
                                shape_str());
  return node_->values[0];
}

std::vector<double>& Tensor::mutable_values() {
  if (!node_->is_leaf)
    throw std::logic_error("svvad: mutable_values on a non-leaf tensor");
  return node_->values;
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad())
    throw std::logic_error("svvad: grad() before backward on " + shape_str());
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

std::string Tensor::shape_str() const { return shape_of(*node_); }

// --- elementwise -------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return broadcast_bin("add", BinOp::kAdd, a, b);
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return broadcast_bin("sub", BinOp::kSub, a, b);
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return broadcast_bin("mul", BinOp::kMul, a, b);
}
Tensor div(const Tensor& a, const Tensor& b) {
  return broadcast_bin("div", BinOp::kDiv, a, b);
}

Tensor scale(const Tensor& x, double c) {
  return unary(
      x, [c](double v) { return v * c; },
      [c](double, double) { return c; });
}

Tensor add_const(const Tensor& x, double c) {
  return unary(
      x, [c](double v) { return v + c; },
      [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& x) {
  return unary(
      x,
      [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v, double) {
        double s = 1.0 / (1.0 + std::exp(-v));
        return s + v * s * (1.0 - s);
      });
}

Tensor tanh_op(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sqrt_op(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v < 0.0)
          throw std::domain_error("svvad: sqrt of negative value");
        return std::sqrt(v);
      },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

// --- linear algebra ------------------------------------------------------

Tensor matmul(const Tensor& at, const Tensor& bt) {
  auto a = at.node();
  auto b = bt.node();
  if (a->cols != b->rows) shape_error("matmul", *a, *b);
  const size_t m = a->rows, k = a->cols, n = b->cols;
  auto out = make_node(m, n);
  const double* av = a->values.data();
  const double* bv = b->values.data();
  double* ov = out->values.data();
  for (size_t i = 0; i < m; ++i) {
    for (size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv + p * n;
      double* orow = ov + i * n;
      for (size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return finish(out, {a, b}, [a, b, m, k, n](const Node& self) {
    const double* g = self.grad.data();
    if (a->requires_grad) {
      a->ensure_grad();
      // dA[i,p] = sum_j g[i,j] * B[p,j]
      for (size_t i = 0; i < m; ++i) {
        for (size_t p = 0; p < k; ++p) {
          const double* grow = g + i * n;
          const double* brow = b->values.data() + p * n;
          double acc = 0.0;
          for (size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          a->grad[i * k + p] += acc;
        }
      }
    }
    if (b->requires_grad) {
      b->ensure_grad();
      // dB[p,j] = sum_i A[i,p] * g[i,j]
      for (size_t i = 0; i < m; ++i) {
        for (size_t p = 0; p < k; ++p) {
          const double aip = a->values[i * k + p];
          if (aip == 0.0) continue;
          const double* grow = g + i * n;
          double* brow = b->grad.data() + p * n;
          for (size_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& xt) {
  auto x = xt.node();
  auto out = make_node(x->cols, x->rows);
  for (size_t r = 0; r < x->rows; ++r)
    for (size_t c = 0; c < x->cols; ++c)
      out->values[c * x->rows + r] = x->values[r * x->cols + c];
  return finish(out, {x}, [x](const Node& self) {
    x->ensure_grad();
    for (size_t r = 0; r < x->rows; ++r)
      for (size_t c = 0; c < x->cols; ++c)
        x->grad[r * x->cols + c] += self.grad[c * x->rows + r];
  });
}

// --- normalization and attention pieces -----------------------------------

Tensor softmax_rows(const Tensor& xt) {
  auto x = xt.node();
  auto out = make_node(x->rows, x->cols);
  const size_t cols = x->cols;
  for (size_t r = 0; r < x->rows; ++r) {
    const double* xv = x->values.data() + r * cols;
    double* ov = out->values.data() + r * cols;
    double mx = xv[0];
    for (size_t c = 1; c < cols; ++c) mx = std::max(mx, xv[c]);
    double sum = 0.0;
    for (size_t c = 0; c < cols; ++c) {
      ov[c] = std::exp(xv[c] - mx);
      sum += ov[c];
    }
    for (size_t c = 0; c < cols; ++c) ov[c] /= sum;
  }
  return finish(out, {x}, [x, cols](const Node& self) {
    x->ensure_grad();
    for (size_t r = 0; r < x->rows; ++r) {
      const double* y = self.values.data() + r * cols;
      const double* g = self.grad.data() + r * cols;
      double dot = 0.0;
      for (size_t c = 0; c < cols; ++c) dot += y[c] * g[c];
      double* gx = x->grad.data() + r * cols;
      for (size_t c = 0; c < cols; ++c) gx[c] += y[c] * (g[c] - dot);
    }
  });
}

Tensor layer_norm_rows(const Tensor& xt, const Tensor& gaint,
                       const Tensor& biast, double eps) {
  auto x = xt.node();
  auto gain = gaint.node();
  auto bias = biast.node();
  if (gain->rows != 1 || gain->cols != x->cols)
    shape_error("layer_norm gain", *x, *gain);
  if (bias->rows != 1 || bias->cols != x->cols)
    shape_error("layer_norm bias", *x, *bias);
  const size_t cols = x->cols;
  auto out = make_node(x->rows, cols);
  // Cache per-row mean and inverse std for the backward pass.
  auto stats = std::make_shared<std::vector<double>>(2 * x->rows);
  for (size_t r = 0; r < x->rows; ++r) {
    const double* xv = x->values.data() + r * cols;
    double mean = 0.0;
    for (size_t c = 0; c < cols; ++c) mean += xv[c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (size_t c = 0; c < cols; ++c) var += (xv[c] - mean) * (xv[c] - mean);
    var /= static_cast<double>(cols);
    double istd = 1.0 / std::sqrt(var + eps);
    (*stats)[2 * r] = mean;
    (*stats)[2 * r + 1] = istd;
    double* ov = out->values.data() + r * cols;
    for (size_t c = 0; c < cols; ++c)
      ov[c] = (xv[c] - mean) * istd * gain->values[c] + bias->values[c];
  }
  return finish(out, {x, gain, bias}, [x, gain, bias, stats,
                                       cols](const Node& self) {
    const double fcols = static_cast<double>(cols);
    if (x->requires_grad) x->ensure_grad();
    if (gain->requires_grad) gain->ensure_grad();
    if (bias->requires_grad) bias->ensure_grad();
    for (size_t r = 0; r < x->rows; ++r) {
      const double mean = (*stats)[2 * r];
      const double istd = (*stats)[2 * r + 1];
      const double* xv = x->values.data() + r * cols;
      const double* g = self.grad.data() + r * cols;
      if (gain->requires_grad || bias->requires_grad) {
        for (size_t c = 0; c < cols; ++c) {
          const double xhat = (xv[c] - mean) * istd;
          if (gain->requires_grad) gain->grad[c] += g[c] * xhat;
          if (bias->requires_grad) bias->grad[c] += g[c];
        }
      }
      if (x->requires_grad) {
        // dxhat = g * gain; dx = istd * (dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (size_t c = 0; c < cols; ++c) {
          const double xhat = (xv[c] - mean) * istd;
          const double dxhat = g[c] * gain->values[c];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
        }
        for (size_t c = 0; c < cols; ++c) {
          const double xhat = (xv[c] - mean) * istd;
          const double dxhat = g[c] * gain->values[c];
          x->grad[r * cols + c] +=
              istd * (dxhat - sum_dxhat / fcols - xhat * sum_dxhat_xhat / fcols);
        }
      }
    }
  });
}

Tensor depthwise_conv1d(const Tensor& xt, const Tensor& kt) {
  auto x = xt.node();
  auto k = kt.node();
  if (k->cols != x->cols || k->rows % 2 == 0)
    shape_error("depthwise_conv1d", *x, *k);
  const size_t T = x->rows, F = x->cols, K = k->rows;
  const size_t pad = K / 2;
  auto out = make_node(T, F);
  for (size_t t = 0; t < T; ++t) {
    for (size_t tap = 0; tap < K; ++tap) {
      // src = t + tap - pad, zero-padded outside [0, T)
      if (t + tap < pad) continue;
      const size_t src = t + tap - pad;
      if (src >= T) continue;
      const double* xrow = x->values.data() + src * F;
      const double* krow = k->values.data() + tap * F;
      double* orow = out->values.data() + t * F;
      for (size_t f = 0; f < F; ++f) orow[f] += xrow[f] * krow[f];
    }
  }
  return finish(out, {x, k}, [x, k, T, F, K, pad](const Node& self) {
    if (x->requires_grad) x->ensure_grad();
    if (k->requires_grad) k->ensure_grad();
    for (size_t t = 0; t < T; ++t) {
      const double* grow = self.grad.data() + t * F;
      for (size_t tap = 0; tap < K; ++tap) {
        if (t + tap < pad) continue;
        const size_t src = t + tap - pad;
        if (src >= T) continue;
        const double* xrow = x->values.data() + src * F;
        const double* krow = k->values.data() + tap * F;
        if (x->requires_grad) {
          double* gx = x->grad.data() + src * F;
          for (size_t f = 0; f < F; ++f) gx[f] += grow[f] * krow[f];
        }
        if (k->requires_grad) {
          double* gk = k->grad.data() + tap * F;
          for (size_t f = 0; f < F; ++f) gk[f] += grow[f] * xrow[f];
        }
      }
    }
  });
}

// --- shape ops -------------------------------------------------------------

Tensor concat_cols(const Tensor& at, const Tensor& bt) {
  auto a = at.node();
  auto b = bt.node();
  if (a->rows != b->rows) shape_error("concat_cols", *a, *b);
  const size_t rows = a->rows, ca = a->cols, cb = b->cols;
  auto out = make_node(rows, ca + cb);
  for (size_t r = 0; r < rows; ++r) {
    std::copy_n(a->values.data() + r * ca, ca,
                out->values.data() + r * (ca + cb));
    std::copy_n(b->values.data() + r * cb, cb,
                out->values.data() + r * (ca + cb) + ca);
  }
  return finish(out, {a, b}, [a, b, rows, ca, cb](const Node& self) {
    if (a->requires_grad) a->ensure_grad();
    if (b->requires_grad) b->ensure_grad();
    for (size_t r = 0; r < rows; ++r) {
      const double* g = self.grad.data() + r * (ca + cb);
      if (a->requires_grad)
        for (size_t c = 0; c < ca; ++c) a->grad[r * ca + c] += g[c];
      if (b->requires_grad)
        for (size_t c = 0; c < cb; ++c) b->grad[r * cb + c] += g[ca + c];
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty())
    throw std::invalid_argument("svvad: concat_rows of zero tensors");
  const size_t cols = parts[0].cols();
  size_t rows = 0;
  std::vector<std::shared_ptr<Node>> nodes;
  nodes.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", *parts[0].node(), *p.node());
    rows += p.rows();
    nodes.push_back(p.node());
  }
  auto out = make_node(rows, cols);
  size_t r0 = 0;
  for (const auto& n : nodes) {
    std::copy_n(n->values.data(), n->size(), out->values.data() + r0 * cols);
    r0 += n->rows;
  }
  return finish(out, nodes, [nodes, cols](const Node& self) {
    size_t r0 = 0;
    for (const auto& n : nodes) {
      if (n->requires_grad) {
        n->ensure_grad();
        const double* g = self.grad.data() + r0 * cols;
        for (size_t i = 0; i < n->size(); ++i) n->grad[i] += g[i];
      }
      r0 += n->rows;
    }
  });
}

Tensor slice_cols(const Tensor& xt, size_t start, size_t n) {
  auto x = xt.node();
  if (start + n > x->cols) shape_error("slice_cols", *x);
  auto out = make_node(x->rows, n);
  for (size_t r = 0; r < x->rows; ++r)
    std::copy_n(x->values.data() + r * x->cols + start, n,
                out->values.data() + r * n);
  return finish(out, {x}, [x, start, n](const Node& self) {
    x->ensure_grad();
    for (size_t r = 0; r < x->rows; ++r)
      for (size_t c = 0; c < n; ++c)
        x->grad[r * x->cols + start + c] += self.grad[r * n + c];
  });
}

Tensor slice_rows(const Tensor& xt, size_t start, size_t n) {
  auto x = xt.node();
  if (start + n > x->rows) shape_error("slice_rows", *x);
  auto out = make_node(n, x->cols);
  std::copy_n(x->values.data() + start * x->cols, n * x->cols,
              out->values.data());
  return finish(out, {x}, [x, start, n](const Node& self) {
    x->ensure_grad();
    for (size_t i = 0; i < n * x->cols; ++i)
      x->grad[start * x->cols + i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& xt, const std::vector<size_t>& indices) {
  auto x = xt.node();
  for (size_t idx : indices)
    if (idx >= x->rows) shape_error("gather_rows", *x);
  auto out = make_node(indices.size(), x->cols);
  for (size_t r = 0; r < indices.size(); ++r)
    std::copy_n(x->values.data() + indices[r] * x->cols, x->cols,
                out->values.data() + r * x->cols);
  auto idx = std::make_shared<std::vector<size_t>>(indices);
  return finish(out, {x}, [x, idx](const Node& self) {
    x->ensure_grad();
    for (size_t r = 0; r < idx->size(); ++r)
      for (size_t c = 0; c < x->cols; ++c)
        x->grad[(*idx)[r] * x->cols + c] += self.grad[r * x->cols + c];
  });
}

Tensor tile_rows(const Tensor& rowt, size_t times) {
  auto row = rowt.node();
  if (row->rows != 1) shape_error("tile_rows", *row);
  auto out = make_node(times, row->cols);
  for (size_t r = 0; r < times; ++r)
    std::copy_n(row->values.data(), row->cols,
                out->values.data() + r * row->cols);
  return finish(out, {row}, [row, times](const Node& self) {
    row->ensure_grad();
    for (size_t r = 0; r < times; ++r)
      for (size_t c = 0; c < row->cols; ++c)
        row->grad[c] += self.grad[r * row->cols + c];
  });
}

Tensor reshape(const Tensor& xt, size_t rows, size_t cols) {
  auto x = xt.node();
  if (rows * cols != x->size()) shape_error("reshape", *x);
  auto out = make_node(rows, cols);
  out->values = x->values;
  return finish(out, {x}, [x](const Node& self) {
    x->ensure_grad();
    for (size_t i = 0; i < x->size(); ++i) x->grad[i] += self.grad[i];
  });
}

// --- reductions --------------------------------------------------------

Tensor sum_all(const Tensor& xt) {
  auto x = xt.node();
  auto out = make_node(1, 1);
  double acc = 0.0;
  for (double v : x->values) acc += v;
  out->values[0] = acc;
  return finish(out, {x}, [x](const Node& self) {
    x->ensure_grad();
    const double g = self.grad[0];
    for (size_t i = 0; i < x->size(); ++i) x->grad[i] += g;
  });
}

Tensor mean_all(const Tensor& xt) {
  auto x = xt.node();
  auto out = make_node(1, 1);
  double acc = 0.0;
  for (double v : x->values) acc += v;
  const double inv = 1.0 / static_cast<double>(x->size());
  out->values[0] = acc * inv;
  return finish(out, {x}, [x, inv](const Node& self) {
    x->ensure_grad();
    const double g = self.grad[0] * inv;
    for (size_t i = 0; i < x->size(); ++i) x->grad[i] += g;
  });
}

Tensor mean_rows(const Tensor& xt) {
  auto x = xt.node();
  auto out = make_node(1, x->cols);
  const double inv = 1.0 / static_cast<double>(x->rows);
  for (size_t r = 0; r < x->rows; ++r)
    for (size_t c = 0; c < x->cols; ++c)
      out->values[c] += x->values[r * x->cols + c];
  for (size_t c = 0; c < x->cols; ++c) out->values[c] *= inv;
  return finish(out, {x}, [x, inv](const Node& self) {
    x->ensure_grad();
    for (size_t r = 0; r < x->rows; ++r)
      for (size_t c = 0; c < x->cols; ++c)
        x->grad[r * x->cols + c] += self.grad[c] * inv;
  });
}

Tensor sum_cols(const Tensor& xt) {
  auto x = xt.node();
  auto out = make_node(x->rows, 1);
  for (size_t r = 0; r < x->rows; ++r) {
    double acc = 0.0;
    for (size_t c = 0; c < x->cols; ++c) acc += x->values[r * x->cols + c];
    out->values[r] = acc;
  }
  return finish(out, {x}, [x](const Node& self) {
    x->ensure_grad();
    for (size_t r = 0; r < x->rows; ++r)
      for (size_t c = 0; c < x->cols; ++c)
        x->grad[r * x->cols + c] += self.grad[r];
  });
}

Tensor softmax_cross_entropy_rows(const Tensor& logitst,
                                  const std::vector<int>& labels) {
  auto z = logitst.node();
  if (labels.size() != z->rows)
    throw std::invalid_argument(
        "svvad: cross entropy label count " + std::to_string(labels.size()) +
        " does not match rows " + std::to_string(z->rows));
  for (size_t r = 0; r < labels.size(); ++r)
    if (labels[r] < 0 || static_cast<size_t>(labels[r]) >= z->cols)
      throw std::invalid_argument("svvad: cross entropy label out of range");
  const size_t rows = z->rows, cols = z->cols;
  auto probs = std::make_shared<std::vector<double>>(rows * cols);
  auto out = make_node(1, 1);
  double total = 0.0;
  for (size_t r = 0; r < rows; ++r) {
    const double* zv = z->values.data() + r * cols;
    double mx = zv[0];
    for (size_t c = 1; c < cols; ++c) mx = std::max(mx, zv[c]);
    double sum = 0.0;
    for (size_t c = 0; c < cols; ++c) {
      (*probs)[r * cols + c] = std::exp(zv[c] - mx);
      sum += (*probs)[r * cols + c];
    }
    for (size_t c = 0; c < cols; ++c) (*probs)[r * cols + c] /= sum;
    total += mx + std::log(sum) - zv[labels[r]];
  }
  out->values[0] = total / static_cast<double>(rows);
  auto labs = std::make_shared<std::vector<int>>(labels);
  return finish(out, {z}, [z, probs, labs, rows, cols](const Node& self) {
    z->ensure_grad();
    const double g = self.grad[0] / static_cast<double>(rows);
    for (size_t r = 0; r < rows; ++r) {
      for (size_t c = 0; c < cols; ++c) {
        double p = (*probs)[r * cols + c];
        double onehot = (static_cast<size_t>((*labs)[r]) == c) ? 1.0 : 0.0;
        z->grad[r * cols + c] += g * (p - onehot);
      }
    }
  });
}

// --- backward ----------------------------------------------------------

void backward(const Tensor& loss) {
  auto root = loss.node();
  if (!root) throw std::invalid_argument("svvad: backward on empty tensor");
  if (root->size() != 1)
    throw std::invalid_argument("svvad: backward requires a scalar, got " +
                                shape_of(*root));
  if (!root->requires_grad) return;

  // Reverse postorder over the consumer->producer DAG: every node is
  // processed only after all of its consumers.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next].get();
      ++next;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }
}

// --- parameters ----------------------------------------------------------

Tensor ParameterStore::create_glorot(const std::string& name, size_t rows,
                                     size_t cols, size_t fan_in,
                                     size_t fan_out) {
  if (has(name))
    throw std::invalid_argument("svvad: duplicate parameter name " + name);
  Rng rng(mix_seed(seed_, fnv1a_hash(name)));
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(rows, cols, true);
  auto& v = t.mutable_values();
  for (auto& x : v) x = rng.uniform(-limit, limit);
  params_.push_back({name, t});
  return t;
}

Tensor ParameterStore::create_constant(const std::string& name, size_t rows,
                                       size_t cols, double value) {
  if (has(name))
    throw std::invalid_argument("svvad: duplicate parameter name " + name);
  Tensor t(rows, cols, true);
  auto& v = t.mutable_values();
  std::fill(v.begin(), v.end(), value);
  params_.push_back({name, t});
  return t;
}

bool ParameterStore::has(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

Tensor ParameterStore::get(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.tensor;
  throw std::out_of_range("svvad: no parameter named " + name);
}

size_t ParameterStore::total_size() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) p.tensor.zero_grad();
}

uint64_t ParameterStore::values_hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params_) {
    const auto& v = p.tensor.values();
    uint64_t hv = fnv1a_hash_bytes(v.data(), v.size() * sizeof(double));
    h = mix_seed(h, hv);
  }
  return h;
}

}  // namespace svvad
