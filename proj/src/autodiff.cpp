#include "tsgan/autodiff.hpp"

#include <cassert>
#include <cmath>

#include "tsgan/kernels.hpp"

namespace tsgan::autodiff {

void zero_grads(const ParamSet& params) {
  for (Param* p : params) p->zero_grad();
}

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Output width of a 1-D sliding window per (W - K + 2P)/S + 1.
std::size_t conv_out_width(const char* what, std::size_t w, std::size_t k, std::size_t s,
                           std::size_t p, bool floor_mode) {
  if (w + 2 * p < k)
    throw ValueError(std::string(what) + ": window K=" + std::to_string(k) +
                     " exceeds padded width W=" + std::to_string(w) + " P=" + std::to_string(p));
  const std::size_t span = w + 2 * p - k;
  if (!floor_mode && span % s != 0)
    throw ValueError(std::string(what) + ": geometry W=" + std::to_string(w) +
                     " K=" + std::to_string(k) + " S=" + std::to_string(s) +
                     " P=" + std::to_string(p) + " does not divide evenly");
  return span / s + 1;
}

}  // namespace

NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

std::vector<double>& Graph::grad_buf(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

NodeId Graph::input(Tensor v) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(v);
  return push(std::move(n));
}

NodeId Graph::param(Param& p) {
  for (const auto& [bound, id] : bound_params_)
    if (bound == &p) return id;
  Node n;
  n.op = Op::kParam;
  n.value = p.value;
  n.param = &p;
  n.touches_param = true;
  NodeId id = push(std::move(n));
  bound_params_.emplace_back(&p, id);
  return id;
}

Graph::Bcast Graph::classify(const char* op, const Tensor& a, const Tensor& b) const {
  if (a.shape == b.shape) return Bcast::kNone;
  if (b.is_scalar()) return Bcast::kScalarB;
  if (a.is_scalar()) return Bcast::kScalarA;
  if (a.rank() == 2 && b.rank() == 1 && b.dim(0) == a.dim(1)) return Bcast::kRowB;
  if (b.rank() == 2 && a.rank() == 1 && a.dim(0) == b.dim(1)) return Bcast::kRowA;
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape) + " and " +
                   shape_str(b.shape) + " do not conform");
}

NodeId Graph::matmul(NodeId a, NodeId b, bool transpose_b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  if (transpose_b && tb.rank() != 2)
    throw ShapeError("matmul: transpose_b requires rank-2 rhs, got " + shape_str(tb.shape));

  // Treat rank-1 operands as 1 x k (lhs) / k x 1 (rhs) and drop the unit axis
  // from the result.
  std::size_t m, k, n, kb;
  Shape out_shape;
  if (ta.rank() == 2) {
    m = ta.dim(0);
    k = ta.dim(1);
  } else if (ta.rank() == 1) {
    m = 1;
    k = ta.dim(0);
  } else {
    throw ShapeError("matmul: lhs rank must be 1 or 2, got " + shape_str(ta.shape));
  }
  if (tb.rank() == 2) {
    kb = transpose_b ? tb.dim(1) : tb.dim(0);
    n = transpose_b ? tb.dim(0) : tb.dim(1);
  } else if (tb.rank() == 1) {
    kb = tb.dim(0);
    n = 1;
  } else {
    throw ShapeError("matmul: rhs rank must be 1 or 2, got " + shape_str(tb.shape));
  }
  if (k != kb)
    throw ShapeError("matmul: inner dimensions of " + shape_str(ta.shape) + " and " +
                     shape_str(tb.shape) + (transpose_b ? " (rhs transposed)" : "") +
                     " do not match");

  if (ta.rank() == 2 && tb.rank() == 2)
    out_shape = {m, n};
  else if (ta.rank() == 2)
    out_shape = {m};
  else if (tb.rank() == 2)
    out_shape = {n};
  else
    out_shape = {1};  // vector . vector -> scalar

  Node node;
  node.op = Op::kMatmul;
  node.transpose_b = transpose_b;
  node.inputs = {a, b};
  node.touches_param = nodes_[a].touches_param || nodes_[b].touches_param;
  node.value = Tensor::zeros(out_shape);
  if (transpose_b)
    kern::gemm_nt(ta.values.data(), tb.values.data(), node.value.values.data(), m, k, n, false);
  else
    kern::gemm_nn(ta.values.data(), tb.values.data(), node.value.values.data(), m, k, n, false);
  return push(std::move(node));
}

namespace {

template <class F>
Tensor broadcast_apply(const Tensor& a, const Tensor& b, F&& f, const Tensor* big,
                       const Tensor* small, bool row) {
  Tensor out = Tensor::zeros(big ? big->shape : a.shape);
  if (!big) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
  } else if (!row) {
    const double s = (*small)[0];
    const bool small_is_b = small == &b;
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = small_is_b ? f((*big)[i], s) : f(s, (*big)[i]);
  } else {
    const std::size_t rows = big->dim(0), cols = big->dim(1);
    const bool small_is_b = small == &b;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        const double bigv = big->values[r * cols + c];
        const double sv = (*small)[c];
        out.values[r * cols + c] = small_is_b ? f(bigv, sv) : f(sv, bigv);
      }
  }
  return out;
}

}  // namespace

NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  Bcast bc = classify("add", ta, tb);
  const Tensor* big = nullptr;
  const Tensor* small = nullptr;
  bool row = false;
  if (bc == Bcast::kScalarA || bc == Bcast::kRowA) {
    big = &tb;
    small = &ta;
    row = bc == Bcast::kRowA;
  } else if (bc == Bcast::kScalarB || bc == Bcast::kRowB) {
    big = &ta;
    small = &tb;
    row = bc == Bcast::kRowB;
  }
  Node n;
  n.op = Op::kAdd;
  n.inputs = {a, b};
  n.touches_param = nodes_[a].touches_param || nodes_[b].touches_param;
  n.value = broadcast_apply(ta, tb, [](double x, double y) { return x + y; }, big, small, row);
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  Bcast bc = classify("sub", ta, tb);
  const Tensor* big = nullptr;
  const Tensor* small = nullptr;
  bool row = false;
  if (bc == Bcast::kScalarA || bc == Bcast::kRowA) {
    big = &tb;
    small = &ta;
    row = bc == Bcast::kRowA;
  } else if (bc == Bcast::kScalarB || bc == Bcast::kRowB) {
    big = &ta;
    small = &tb;
    row = bc == Bcast::kRowB;
  }
  Node n;
  n.op = Op::kSub;
  n.inputs = {a, b};
  n.touches_param = nodes_[a].touches_param || nodes_[b].touches_param;
  n.value = broadcast_apply(ta, tb, [](double x, double y) { return x - y; }, big, small, row);
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  Bcast bc = classify("mul", ta, tb);
  const Tensor* big = nullptr;
  const Tensor* small = nullptr;
  bool row = false;
  if (bc == Bcast::kScalarA || bc == Bcast::kRowA) {
    big = &tb;
    small = &ta;
    row = bc == Bcast::kRowA;
  } else if (bc == Bcast::kScalarB || bc == Bcast::kRowB) {
    big = &ta;
    small = &tb;
    row = bc == Bcast::kRowB;
  }
  Node n;
  n.op = Op::kMul;
  n.inputs = {a, b};
  n.touches_param = nodes_[a].touches_param || nodes_[b].touches_param;
  n.value = broadcast_apply(ta, tb, [](double x, double y) { return x * y; }, big, small, row);
  return push(std::move(n));
}

NodeId Graph::max(NodeId a, NodeId b) {
  const Tensor& ta = nodes_[a].value;
  const Tensor& tb = nodes_[b].value;
  Bcast bc = classify("max", ta, tb);
  const Tensor* big = nullptr;
  const Tensor* small = nullptr;
  bool row = false;
  if (bc == Bcast::kScalarA || bc == Bcast::kRowA) {
    big = &tb;
    small = &ta;
    row = bc == Bcast::kRowA;
  } else if (bc == Bcast::kScalarB || bc == Bcast::kRowB) {
    big = &ta;
    small = &tb;
    row = bc == Bcast::kRowB;
  }
  Node n;
  n.op = Op::kMax;
  n.inputs = {a, b};
  n.touches_param = nodes_[a].touches_param || nodes_[b].touches_param;
  n.value =
      broadcast_apply(ta, tb, [](double x, double y) { return x >= y ? x : y; }, big, small, row);
  return push(std::move(n));
}

NodeId Graph::concat(std::span<const NodeId> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Tensor& first = nodes_[parts[0]].value;
  const std::size_t rank = first.rank();
  if (rank != 1 && rank != 2) throw ShapeError("concat: rank must be 1 or 2");
  if (axis < 0 || static_cast<std::size_t>(axis) >= rank) throw ShapeError("concat: bad axis");

  Node n;
  n.op = Op::kConcat;
  n.axis = axis;
  n.inputs.assign(parts.begin(), parts.end());

  if (rank == 1) {
    std::size_t total = 0;
    for (NodeId id : parts) {
      const Tensor& t = nodes_[id].value;
      if (t.rank() != 1) throw ShapeError("concat: mixed ranks");
      total += t.dim(0);
      n.touches_param = n.touches_param || nodes_[id].touches_param;
    }
    n.value = Tensor::zeros({total});
    std::size_t off = 0;
    for (NodeId id : parts) {
      const Tensor& t = nodes_[id].value;
      std::copy(t.values.begin(), t.values.end(), n.value.values.begin() + off);
      off += t.size();
    }
  } else if (axis == 0) {
    const std::size_t cols = first.dim(1);
    std::size_t rows = 0;
    for (NodeId id : parts) {
      const Tensor& t = nodes_[id].value;
      if (t.rank() != 2 || t.dim(1) != cols)
        throw ShapeError("concat axis 0: shape " + shape_str(t.shape) + " vs cols " +
                         std::to_string(cols));
      rows += t.dim(0);
      n.touches_param = n.touches_param || nodes_[id].touches_param;
    }
    n.value = Tensor::zeros({rows, cols});
    std::size_t off = 0;
    for (NodeId id : parts) {
      const Tensor& t = nodes_[id].value;
      std::copy(t.values.begin(), t.values.end(), n.value.values.begin() + off);
      off += t.size();
    }
  } else {
    const std::size_t rows = first.dim(0);
    std::size_t cols = 0;
    for (NodeId id : parts) {
      const Tensor& t = nodes_[id].value;
      if (t.rank() != 2 || t.dim(0) != rows)
        throw ShapeError("concat axis 1: shape " + shape_str(t.shape) + " vs rows " +
                         std::to_string(rows));
      cols += t.dim(1);
      n.touches_param = n.touches_param || nodes_[id].touches_param;
    }
    n.value = Tensor::zeros({rows, cols});
    std::size_t col_off = 0;
    for (NodeId id : parts) {
      const Tensor& t = nodes_[id].value;
      const std::size_t tc = t.dim(1);
      for (std::size_t r = 0; r < rows; ++r)
        std::copy(t.values.begin() + r * tc, t.values.begin() + (r + 1) * tc,
                  n.value.values.begin() + r * cols + col_off);
      col_off += tc;
    }
  }
  return push(std::move(n));
}

NodeId Graph::slice(NodeId a, int axis, std::size_t start, std::size_t len) {
  const Tensor& t = nodes_[a].value;
  const std::size_t rank = t.rank();
  if (rank != 1 && rank != 2) throw ShapeError("slice: rank must be 1 or 2");
  if (axis < 0 || static_cast<std::size_t>(axis) >= rank) throw ShapeError("slice: bad axis");
  const std::size_t extent = t.dim(static_cast<std::size_t>(axis));
  if (start + len > extent || len == 0)
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") out of extent " + std::to_string(extent));

  Node n;
  n.op = Op::kSlice;
  n.axis = axis;
  n.start = start;
  n.len = len;
  n.inputs = {a};
  n.touches_param = nodes_[a].touches_param;
  if (rank == 1) {
    n.value = Tensor::zeros({len});
    std::copy(t.values.begin() + start, t.values.begin() + start + len, n.value.values.begin());
  } else if (axis == 0) {
    const std::size_t cols = t.dim(1);
    n.value = Tensor::zeros({len, cols});
    std::copy(t.values.begin() + start * cols, t.values.begin() + (start + len) * cols,
              n.value.values.begin());
  } else {
    const std::size_t rows = t.dim(0), cols = t.dim(1);
    n.value = Tensor::zeros({rows, len});
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(t.values.begin() + r * cols + start, t.values.begin() + r * cols + start + len,
                n.value.values.begin() + r * len);
  }
  return push(std::move(n));
}

NodeId Graph::reshape(NodeId a, Shape s) {
  const Tensor& t = nodes_[a].value;
  if (shape_size(s) != t.size())
    throw ShapeError("reshape: " + shape_str(t.shape) + " to " + shape_str(s) +
                     " changes element count");
  Node n;
  n.op = Op::kReshape;
  n.inputs = {a};
  n.touches_param = nodes_[a].touches_param;
  n.in_shape = t.shape;
  n.value = Tensor(std::move(s), t.values);
  return push(std::move(n));
}

NodeId Graph::sum(NodeId a) {
  const Tensor& t = nodes_[a].value;
  double acc = 0.0;
  for (double v : t.values) acc += v;
  Node n;
  n.op = Op::kSum;
  n.inputs = {a};
  n.touches_param = nodes_[a].touches_param;
  n.value = Tensor::scalar(acc);
  return push(std::move(n));
}

NodeId Graph::mean(NodeId a) {
  const Tensor& t = nodes_[a].value;
  if (t.size() == 0) throw ShapeError("mean: empty tensor");
  double acc = 0.0;
  for (double v : t.values) acc += v;
  Node n;
  n.op = Op::kMean;
  n.inputs = {a};
  n.touches_param = nodes_[a].touches_param;
  n.value = Tensor::scalar(acc / static_cast<double>(t.size()));
  return push(std::move(n));
}

#define TSGAN_UNARY(NAME, OPTAG, EXPR)                          \
  NodeId Graph::NAME(NodeId a) {                                \
    const Tensor& t = nodes_[a].value;                          \
    Node n;                                                     \
    n.op = OPTAG;                                               \
    n.inputs = {a};                                             \
    n.touches_param = nodes_[a].touches_param;                  \
    n.value = Tensor::zeros(t.shape);                           \
    for (std::size_t i = 0; i < t.size(); ++i) {                \
      const double x = t[i];                                    \
      n.value[i] = (EXPR);                                      \
    }                                                           \
    return push(std::move(n));                                  \
  }

TSGAN_UNARY(exp, Op::kExp, std::exp(x))
TSGAN_UNARY(tanh, Op::kTanh, std::tanh(x))
TSGAN_UNARY(sigmoid, Op::kSigmoid, stable_sigmoid(x))
TSGAN_UNARY(relu, Op::kRelu, x > 0.0 ? x : 0.0)
TSGAN_UNARY(abs, Op::kAbs, std::abs(x))
TSGAN_UNARY(square, Op::kSquare, x* x)
#undef TSGAN_UNARY

NodeId Graph::log(NodeId a) {
  const Tensor& t = nodes_[a].value;
  Node n;
  n.op = Op::kLog;
  n.inputs = {a};
  n.touches_param = nodes_[a].touches_param;
  n.value = Tensor::zeros(t.shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] <= 0.0)
      throw ValueError("log: non-positive input " + format_double(t[i]) + " at index " +
                       std::to_string(i));
    n.value[i] = std::log(t[i]);
  }
  return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double c) {
  const Tensor& t = nodes_[a].value;
  Node n;
  n.op = Op::kScale;
  n.c = c;
  n.inputs = {a};
  n.touches_param = nodes_[a].touches_param;
  n.value = Tensor::zeros(t.shape);
  for (std::size_t i = 0; i < t.size(); ++i) n.value[i] = c * t[i];
  return push(std::move(n));
}

NodeId Graph::conv1d(NodeId x, NodeId filters, NodeId bias, std::size_t stride, std::size_t pad,
                     bool floor_mode) {
  const Tensor& tx = nodes_[x].value;
  const Tensor& tw = nodes_[filters].value;
  const Tensor& tb = nodes_[bias].value;
  if (tx.rank() != 2) throw ShapeError("conv1d: input must be channels x width, got " + shape_str(tx.shape));
  if (tw.rank() != 3) throw ShapeError("conv1d: filters must be maps x channels x kernel, got " + shape_str(tw.shape));
  if (tb.rank() != 1 || tb.dim(0) != tw.dim(0))
    throw ShapeError("conv1d: bias " + shape_str(tb.shape) + " vs maps " + std::to_string(tw.dim(0)));
  if (tw.dim(1) != tx.dim(0))
    throw ShapeError("conv1d: input channels " + std::to_string(tx.dim(0)) + " vs filter channels " +
                     std::to_string(tw.dim(1)));
  if (stride == 0) throw ValueError("conv1d: stride must be >= 1");

  const std::size_t cin = tx.dim(0), w = tx.dim(1);
  const std::size_t maps = tw.dim(0), kk = tw.dim(2);
  const std::size_t wout = conv_out_width("conv1d", w, kk, stride, pad, floor_mode);

  Node n;
  n.op = Op::kConv1d;
  n.stride = stride;
  n.pad = pad;
  n.floor_mode = floor_mode;
  n.inputs = {x, filters, bias};
  n.touches_param =
      nodes_[x].touches_param || nodes_[filters].touches_param || nodes_[bias].touches_param;
  n.value = Tensor::zeros({maps, wout});
  for (std::size_t f = 0; f < maps; ++f) {
    for (std::size_t t = 0; t < wout; ++t) {
      double acc = tb[f];
      const std::size_t base = t * stride;  // position in padded coordinates
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xr = tx.values.data() + c * w;
        const double* wr = tw.values.data() + (f * cin + c) * kk;
        for (std::size_t j = 0; j < kk; ++j) {
          const std::size_t p = base + j;  // padded index
          if (p < pad || p >= pad + w) continue;
          acc += wr[j] * xr[p - pad];
        }
      }
      n.value.at(f, t) = acc;
    }
  }
  return push(std::move(n));
}

NodeId Graph::maxpool1d(NodeId x, std::size_t window, std::size_t stride) {
  const Tensor& tx = nodes_[x].value;
  if (tx.rank() != 2) throw ShapeError("maxpool1d: input must be channels x width, got " + shape_str(tx.shape));
  if (window == 0 || stride == 0) throw ValueError("maxpool1d: window and stride must be >= 1");
  const std::size_t ch = tx.dim(0), w = tx.dim(1);
  if (w < window)
    throw ValueError("maxpool1d: window " + std::to_string(window) + " exceeds width " +
                     std::to_string(w));
  const std::size_t wout = (w - window) / stride + 1;

  Node n;
  n.op = Op::kMaxPool1d;
  n.window = window;
  n.stride = stride;
  n.inputs = {x};
  n.touches_param = nodes_[x].touches_param;
  n.value = Tensor::zeros({ch, wout});
  n.arg.assign(ch * wout, 0);
  for (std::size_t c = 0; c < ch; ++c) {
    const double* xr = tx.values.data() + c * w;
    for (std::size_t j = 0; j < wout; ++j) {
      const std::size_t base = j * stride;
      double best = xr[base];
      std::size_t best_at = base;
      for (std::size_t t = 1; t < window; ++t) {
        if (xr[base + t] > best) {
          best = xr[base + t];
          best_at = base + t;
        }
      }
      n.value.at(c, j) = best;
      n.arg[c * wout + j] = static_cast<std::uint32_t>(best_at);
    }
  }
  return push(std::move(n));
}

NodeId Graph::minibatch_discrim(NodeId f, NodeId t3) {
  const Tensor& tf = nodes_[f].value;
  const Tensor& tt = nodes_[t3].value;
  if (tf.rank() != 2) throw ShapeError("minibatch_discrim: features must be n x A, got " + shape_str(tf.shape));
  if (tt.rank() != 3) throw ShapeError("minibatch_discrim: tensor must be A x B x C, got " + shape_str(tt.shape));
  if (tt.dim(0) != tf.dim(1))
    throw ShapeError("minibatch_discrim: feature size " + std::to_string(tf.dim(1)) +
                     " vs tensor A " + std::to_string(tt.dim(0)));
  const std::size_t nrec = tf.dim(0), fa = tf.dim(1);
  const std::size_t fb = tt.dim(1), fc = tt.dim(2);
  if (nrec < 1) throw ShapeError("minibatch_discrim: empty batch");

  Node n;
  n.op = Op::kMinibatchDiscrim;
  n.b_outputs = fb;
  n.kernel_dim = fc;
  n.inputs = {f, t3};
  n.touches_param = nodes_[f].touches_param || nodes_[t3].touches_param;

  // M = F * T viewed as (A x B*C); kept in arg-free scratch via value of the
  // node's own forward. Recomputed in backward from the stored inputs.
  std::vector<double> m(nrec * fb * fc);
  kern::gemm_nn(tf.values.data(), tt.values.data(), m.data(), nrec, fa, fb * fc, false);

  n.value = Tensor::zeros({nrec, fb});
  const long long nll = static_cast<long long>(nrec);
#pragma omp parallel for schedule(static) if (nrec * nrec * fb * fc > (1u << 15))
  for (long long il = 0; il < nll; ++il) {
    const std::size_t i = static_cast<std::size_t>(il);
    for (std::size_t b = 0; b < fb; ++b) {
      double acc = 0.0;
      const double* mi = m.data() + (i * fb + b) * fc;
      for (std::size_t j = 0; j < nrec; ++j) {
        const double* mj = m.data() + (j * fb + b) * fc;
        double l1 = 0.0;
        for (std::size_t c = 0; c < fc; ++c) l1 += std::abs(mi[c] - mj[c]);
        acc += std::exp(-l1);
      }
      n.value.at(i, b) = acc;
    }
  }
  return push(std::move(n));
}

void Graph::backward(NodeId root) {
  if (root >= nodes_.size()) throw ValueError("backward: bad root id");
  if (nodes_[root].value.size() != 1)
    throw ValueError("backward: root must be scalar, got shape " +
                     shape_str(nodes_[root].value.shape));

  // Fresh node gradients every call; parameter grads persist and accumulate.
  for (Node& n : nodes_) n.grad.clear();
  grad_buf(root)[0] = 1.0;

  for (NodeId id = root + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty()) continue;  // not on a path to the root
    if (!n.touches_param && n.op != Op::kParam) continue;
    backward_node(id);
  }

  for (Node& n : nodes_) {
    if (n.op == Op::kParam && !n.grad.empty()) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
    }
  }
}

void Graph::backward_node(NodeId id) {
  Node& n = nodes_[id];
  const std::vector<double>& g = n.grad;

  auto want = [&](NodeId in) { return nodes_[in].touches_param; };

  switch (n.op) {
    case Op::kLeaf:
    case Op::kParam:
      return;

    case Op::kMatmul: {
      const NodeId a = n.inputs[0], b = n.inputs[1];
      const Tensor& ta = nodes_[a].value;
      const Tensor& tb = nodes_[b].value;
      std::size_t m = ta.rank() == 2 ? ta.dim(0) : 1;
      std::size_t k = ta.rank() == 2 ? ta.dim(1) : ta.dim(0);
      std::size_t nn = tb.rank() == 2 ? (n.transpose_b ? tb.dim(0) : tb.dim(1)) : 1;
      if (want(a)) {
        std::vector<double>& ga = grad_buf(a);
        if (n.transpose_b)  // C = A B^T: dA += dC B
          kern::gemm_nn(g.data(), tb.values.data(), ga.data(), m, nn, k, true);
        else  // C = A B: dA += dC B^T
          kern::gemm_nt(g.data(), tb.values.data(), ga.data(), m, nn, k, true);
      }
      if (want(b)) {
        std::vector<double>& gb = grad_buf(b);
        if (n.transpose_b)  // dB += dC^T A
          kern::gemm_tn(g.data(), ta.values.data(), gb.data(), nn, m, k, true);
        else  // dB += A^T dC
          kern::gemm_tn(ta.values.data(), g.data(), gb.data(), k, m, nn, true);
      }
      return;
    }

    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kMax: {
      const NodeId a = n.inputs[0], b = n.inputs[1];
      const Tensor& ta = nodes_[a].value;
      const Tensor& tb = nodes_[b].value;
      const bool same = ta.shape == tb.shape;

      auto side_grad = [&](NodeId target, bool is_a) {
        if (!want(target)) return;
        std::vector<double>& gt = grad_buf(target);
        const Tensor& tt = nodes_[target].value;
        const Tensor& other = is_a ? tb : ta;
        for (std::size_t i = 0; i < g.size(); ++i) {
          // map output index i to this operand's index
          std::size_t ti;
          if (same || tt.size() == n.value.size()) {
            ti = i;
          } else if (tt.is_scalar()) {
            ti = 0;
          } else {  // row vector against m x n matrix
            ti = i % tt.dim(0);
          }
          double piece = 0.0;
          switch (n.op) {
            case Op::kAdd:
              piece = g[i];
              break;
            case Op::kSub:
              piece = is_a ? g[i] : -g[i];
              break;
            case Op::kMul: {
              std::size_t oi;
              if (other.size() == n.value.size())
                oi = i;
              else if (other.is_scalar())
                oi = 0;
              else
                oi = i % other.dim(0);
              piece = g[i] * other[oi];
              break;
            }
            case Op::kMax: {
              // recompute which side won; ties go to a
              std::size_t ia, ib;
              if (ta.size() == n.value.size())
                ia = i;
              else
                ia = ta.is_scalar() ? 0 : i % ta.dim(0);
              if (tb.size() == n.value.size())
                ib = i;
              else
                ib = tb.is_scalar() ? 0 : i % tb.dim(0);
              const bool a_wins = ta[ia] >= tb[ib];
              piece = (is_a == a_wins) ? g[i] : 0.0;
              break;
            }
            default:
              break;
          }
          gt[ti] += piece;
        }
      };
      side_grad(a, true);
      side_grad(b, false);
      return;
    }

    case Op::kConcat: {
      std::size_t off = 0;
      if (n.value.rank() == 1 || n.axis == 0) {
        for (NodeId in : n.inputs) {
          const std::size_t sz = nodes_[in].value.size();
          if (want(in)) {
            std::vector<double>& gi = grad_buf(in);
            for (std::size_t i = 0; i < sz; ++i) gi[i] += g[off + i];
          }
          off += sz;
        }
      } else {
        const std::size_t rows = n.value.dim(0), cols = n.value.dim(1);
        std::size_t col_off = 0;
        for (NodeId in : n.inputs) {
          const Tensor& t = nodes_[in].value;
          const std::size_t tc = t.dim(1);
          if (want(in)) {
            std::vector<double>& gi = grad_buf(in);
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < tc; ++c) gi[r * tc + c] += g[r * cols + col_off + c];
          }
          col_off += tc;
        }
      }
      return;
    }

    case Op::kSlice: {
      const NodeId a = n.inputs[0];
      if (!want(a)) return;
      std::vector<double>& ga = grad_buf(a);
      const Tensor& ta = nodes_[a].value;
      if (ta.rank() == 1) {
        for (std::size_t i = 0; i < n.len; ++i) ga[n.start + i] += g[i];
      } else if (n.axis == 0) {
        const std::size_t cols = ta.dim(1);
        for (std::size_t i = 0; i < n.len * cols; ++i) ga[n.start * cols + i] += g[i];
      } else {
        const std::size_t rows = ta.dim(0), cols = ta.dim(1);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < n.len; ++c) ga[r * cols + n.start + c] += g[r * n.len + c];
      }
      return;
    }

    case Op::kReshape: {
      const NodeId a = n.inputs[0];
      if (!want(a)) return;
      std::vector<double>& ga = grad_buf(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      return;
    }

    case Op::kSum: {
      const NodeId a = n.inputs[0];
      if (!want(a)) return;
      std::vector<double>& ga = grad_buf(a);
      for (double& v : ga) v += g[0];
      return;
    }

    case Op::kMean: {
      const NodeId a = n.inputs[0];
      if (!want(a)) return;
      std::vector<double>& ga = grad_buf(a);
      const double s = g[0] / static_cast<double>(ga.size());
      for (double& v : ga) v += s;
      return;
    }

    case Op::kExp: {
      const NodeId a = n.inputs[0];
      if (!want(a)) return;
      std::vector<double>& ga = grad_buf(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.value[i];
      return;
    }

    case Op::kLog: {
      const NodeId a = n.inputs[0];
      if (!want(a)) return;
      std::vector<double>& ga = grad_buf(a);
      const Tensor& ta = nodes_[a].value;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / ta[i];
      return;
    }

    case Op::kTanh: {
      const NodeId a = n.inputs[0];
      if (!want(a)) return;
      std::vector<double>& ga = grad_buf(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      return;
    }

    case Op::kSigmoid: {
      const NodeId a = n.inputs[0];
      if (!want(a)) return;
      std::vector<double>& ga = grad_buf(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      return;
    }

    case Op::kRelu: {
      const NodeId a = n.inputs[0];
      if (!want(a)) return;
      std::vector<double>& ga = grad_buf(a);
      const Tensor& ta = nodes_[a].value;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += ta[i] > 0.0 ? g[i] : 0.0;
      return;
    }

    case Op::kAbs: {
      const NodeId a = n.inputs[0];
      if (!want(a)) return;
      std::vector<double>& ga = grad_buf(a);
      const Tensor& ta = nodes_[a].value;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = ta[i] > 0.0 ? 1.0 : (ta[i] < 0.0 ? -1.0 : 0.0);
        ga[i] += g[i] * s;
      }
      return;
    }

    case Op::kSquare: {
      const NodeId a = n.inputs[0];
      if (!want(a)) return;
      std::vector<double>& ga = grad_buf(a);
      const Tensor& ta = nodes_[a].value;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 2.0 * ta[i];
      return;
    }

    case Op::kScale: {
      const NodeId a = n.inputs[0];
      if (!want(a)) return;
      std::vector<double>& ga = grad_buf(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.c;
      return;
    }

    case Op::kConv1d: {
      const NodeId x = n.inputs[0], filters = n.inputs[1], bias = n.inputs[2];
      const Tensor& tx = nodes_[x].value;
      const Tensor& tw = nodes_[filters].value;
      const std::size_t cin = tx.dim(0), w = tx.dim(1);
      const std::size_t maps = tw.dim(0), kk = tw.dim(2);
      const std::size_t wout = n.value.dim(1);
      const std::size_t stride = n.stride, pad = n.pad;

      if (want(bias)) {
        std::vector<double>& gb = grad_buf(bias);
        for (std::size_t f = 0; f < maps; ++f) {
          double acc = 0.0;
          for (std::size_t t = 0; t < wout; ++t) acc += g[f * wout + t];
          gb[f] += acc;
        }
      }
      if (want(filters)) {
        std::vector<double>& gw = grad_buf(filters);
        for (std::size_t f = 0; f < maps; ++f)
          for (std::size_t c = 0; c < cin; ++c) {
            const double* xr = tx.values.data() + c * w;
            double* gwr = gw.data() + (f * cin + c) * kk;
            for (std::size_t t = 0; t < wout; ++t) {
              const double gv = g[f * wout + t];
              if (gv == 0.0) continue;
              const std::size_t base = t * stride;
              for (std::size_t j = 0; j < kk; ++j) {
                const std::size_t p = base + j;
                if (p < pad || p >= pad + w) continue;
                gwr[j] += gv * xr[p - pad];
              }
            }
          }
      }
      if (want(x)) {
        std::vector<double>& gx = grad_buf(x);
        for (std::size_t f = 0; f < maps; ++f)
          for (std::size_t c = 0; c < cin; ++c) {
            const double* wr = tw.values.data() + (f * cin + c) * kk;
            double* gxr = gx.data() + c * w;
            for (std::size_t t = 0; t < wout; ++t) {
              const double gv = g[f * wout + t];
              if (gv == 0.0) continue;
              const std::size_t base = t * stride;
              for (std::size_t j = 0; j < kk; ++j) {
                const std::size_t p = base + j;
                if (p < pad || p >= pad + w) continue;
                gxr[p - pad] += gv * wr[j];
              }
            }
          }
      }
      return;
    }

    case Op::kMaxPool1d: {
      const NodeId x = n.inputs[0];
      if (!want(x)) return;
      std::vector<double>& gx = grad_buf(x);
      const std::size_t ch = n.value.dim(0), wout = n.value.dim(1);
      const std::size_t w = nodes_[x].value.dim(1);
      for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t j = 0; j < wout; ++j)
          gx[c * w + n.arg[c * wout + j]] += g[c * wout + j];
      return;
    }

    case Op::kMinibatchDiscrim: {
      const NodeId f = n.inputs[0], t3 = n.inputs[1];
      const Tensor& tf = nodes_[f].value;
      const Tensor& tt = nodes_[t3].value;
      const std::size_t nrec = tf.dim(0), fa = tf.dim(1);
      const std::size_t fb = n.b_outputs, fc = n.kernel_dim;

      std::vector<double> m(nrec * fb * fc);
      kern::gemm_nn(tf.values.data(), tt.values.data(), m.data(), nrec, fa, fb * fc, false);

      // dM[i] = sum_{j != i} (g[i,b] + g[j,b]) * (-e_ij * sign(M_i - M_j))
      std::vector<double> dm(nrec * fb * fc, 0.0);
      const long long nll = static_cast<long long>(nrec);
#pragma omp parallel for schedule(static) if (nrec * nrec * fb * fc > (1u << 15))
      for (long long il = 0; il < nll; ++il) {
        const std::size_t i = static_cast<std::size_t>(il);
        for (std::size_t b = 0; b < fb; ++b) {
          const double* mi = m.data() + (i * fb + b) * fc;
          double* dmi = dm.data() + (i * fb + b) * fc;
          for (std::size_t j = 0; j < nrec; ++j) {
            if (j == i) continue;
            const double* mj = m.data() + (j * fb + b) * fc;
            double l1 = 0.0;
            for (std::size_t c = 0; c < fc; ++c) l1 += std::abs(mi[c] - mj[c]);
            const double e = std::exp(-l1);
            const double gsum = g[i * fb + b] + g[j * fb + b];
            for (std::size_t c = 0; c < fc; ++c) {
              const double diff = mi[c] - mj[c];
              const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
              dmi[c] += gsum * (-e) * s;
            }
          }
        }
      }

      if (want(f)) {  // dF += dM * T^T  (T viewed as A x B*C)
        std::vector<double>& gf = grad_buf(f);
        kern::gemm_nt(dm.data(), tt.values.data(), gf.data(), nrec, fb * fc, fa, true);
      }
      if (want(t3)) {  // dT += F^T * dM
        std::vector<double>& gt = grad_buf(t3);
        kern::gemm_tn(tf.values.data(), dm.data(), gt.data(), fa, nrec, fb * fc, true);
      }
      return;
    }
  }
}

}  // namespace tsgan::autodiff
