#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tsgan/tensor.hpp"

namespace tsgan::autodiff {

/// Trainable tensor living outside any graph. Gradients accumulate here
/// across backward passes until zero_grads() clears them.
struct Param {
  std::string name;
  Tensor value;
  std::vector<double> grad;

  Param() = default;
  Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad.assign(value.size(), 0.0);
  }

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

using ParamSet = std::vector<Param*>;

void zero_grads(const ParamSet& params);

using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
  kLeaf,
  kParam,
  kMatmul,   // optionally B transposed
  kAdd,
  kSub,
  kMul,
  kMax,      // elementwise max of two operands
  kConcat,
  kSlice,
  kReshape,
  kSum,      // scalar sum over all elements
  kMean,     // scalar mean over all elements
  kExp,
  kLog,
  kTanh,
  kSigmoid,
  kRelu,
  kAbs,
  kSquare,
  kScale,    // constant multiple
  kConv1d,
  kMaxPool1d,
  kMinibatchDiscrim,
};

/// Define-by-run computation graph. Nodes are appended in evaluation order,
/// which is also the topological order used by backward(). Rebuilt per batch.
class Graph {
 public:
  /// Constant leaf (no gradient flows into it).
  NodeId input(Tensor v);

  /// Trainable leaf. backward() adds d(root)/d(p) into p.grad. Binding the
  /// same param again returns the existing node, so reuse across timesteps
  /// shares one leaf and its gradient accumulates over all uses.
  NodeId param(Param& p);

  // Binary ops. add/sub/mul/max broadcast a scalar operand against anything
  // and a length-n vector operand against the rows of an m x n matrix; any
  // other shape mix is a ShapeError.
  NodeId matmul(NodeId a, NodeId b, bool transpose_b = false);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId max(NodeId a, NodeId b);  // ties take the gradient on a

  NodeId concat(std::span<const NodeId> parts, int axis);
  NodeId slice(NodeId a, int axis, std::size_t start, std::size_t len);
  NodeId reshape(NodeId a, Shape s);

  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);  // ValueError on non-positive input
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId relu(NodeId a);
  NodeId abs(NodeId a);
  NodeId square(NodeId a);
  NodeId scale(NodeId a, double c);

  /// 1-D cross-correlation. x is (channels x width), filters (maps x channels
  /// x kernel), bias (maps). Zero padding of `pad` on each border. The output
  /// width follows (W - K + 2P)/S + 1; a remainder is a ValueError unless
  /// floor_mode is set, which truncates instead.
  NodeId conv1d(NodeId x, NodeId filters, NodeId bias, std::size_t stride, std::size_t pad,
                bool floor_mode = false);

  /// Per-channel max pooling, output width floor((n - window)/stride) + 1.
  /// Ties route the gradient to the first maximal position.
  NodeId maxpool1d(NodeId x, std::size_t window, std::size_t stride);

  /// Cross-batch similarity features: f is (n x A), t3 is (A x B x C); output
  /// (n x B) where out[i][b] = sum_j exp(-L1(M_i_b - M_j_b)), M_i = f_i * T.
  NodeId minibatch_discrim(NodeId f, NodeId t3);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Reverse-mode sweep from a scalar root. Node gradients are recomputed
  /// from scratch on every call; parameter gradients accumulate.
  void backward(NodeId root);

 private:
  struct Node {
    Op op;
    bool transpose_b = false;
    bool touches_param = false;
    int axis = 0;
    std::size_t start = 0, len = 0;    // slice
    std::size_t stride = 0, pad = 0;   // conv / pool
    std::size_t window = 0;
    bool floor_mode = false;
    double c = 0.0;                    // scale factor
    std::size_t b_outputs = 0, kernel_dim = 0;  // minibatch discrimination
    std::vector<NodeId> inputs;
    std::vector<std::uint32_t> arg;    // pool argmax positions
    Tensor value;
    std::vector<double> grad;
    Param* param = nullptr;
    Shape in_shape;                    // original shape, for reshape backward
  };

  NodeId push(Node n);
  Node& at(NodeId id) { return nodes_[id]; }
  std::vector<double>& grad_buf(NodeId id);

  // broadcast classification for binary elementwise ops
  enum class Bcast { kNone, kScalarA, kScalarB, kRowA, kRowB };
  Bcast classify(const char* op, const Tensor& a, const Tensor& b) const;

  void backward_node(NodeId id);

  std::vector<Node> nodes_;
  std::vector<std::pair<Param*, NodeId>> bound_params_;
};

}  // namespace tsgan::autodiff
