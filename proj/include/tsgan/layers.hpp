#pragma once

#include <span>
#include <utility>
#include <vector>

#include "tsgan/autodiff.hpp"
#include "tsgan/rng.hpp"

namespace tsgan::layers {

using autodiff::Graph;
using autodiff::NodeId;
using autodiff::Param;
using autodiff::ParamSet;

enum class Activation { kNone, kSigmoid, kRelu, kTanh };

// Weights are initialized i.i.d. uniform on [-1/sqrt(fan_in), +1/sqrt(fan_in)]
// and biases to zero, except the minibatch-discrimination tensor which is
// standard normal. Draw order is fixed (member order, row-major within each
// tensor) so a seed pins every parameter.

/// Gate parameters of one LSTM cell: input-to-gate W (hidden x input),
/// hidden-to-gate U (hidden x hidden) and bias b (hidden) for the forget,
/// input, output and candidate paths.
struct LstmParams {
  std::size_t input = 0;
  std::size_t hidden = 0;
  Param w_f, w_i, w_o, w_c;
  Param u_f, u_i, u_o, u_c;
  Param b_f, b_i, b_o, b_c;

  static LstmParams init(std::size_t input, std::size_t hidden, const std::string& prefix,
                         Rng& rng);
  ParamSet params();
};

struct Conv1dParams {
  std::size_t in_channels = 1;
  std::size_t maps = 1;
  std::size_t kernel = 3;  // odd
  std::size_t stride = 1;
  std::size_t pad = 0;
  bool floor_mode = false;  // truncate instead of rejecting uneven geometry
  Param filters;            // maps x in_channels x kernel
  Param bias;               // maps

  static Conv1dParams init(std::size_t in_channels, std::size_t maps, std::size_t kernel,
                           std::size_t stride, std::size_t pad, bool floor_mode,
                           const std::string& prefix, Rng& rng);
  ParamSet params();
};

struct MinibatchDiscriminationParams {
  std::size_t in_features = 0;  // A
  std::size_t outputs = 0;      // B
  std::size_t kernel_dim = 0;   // C
  Param t;                      // A x B x C, entries N(0,1)

  static MinibatchDiscriminationParams init(std::size_t in_features, std::size_t outputs,
                                            std::size_t kernel_dim, const std::string& prefix,
                                            Rng& rng);
  ParamSet params();
};

struct DenseParams {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::kNone;
  Param w;  // out x in
  Param b;  // out

  static DenseParams init(std::size_t in, std::size_t out, Activation act,
                          const std::string& prefix, Rng& rng);
  ParamSet params();
};

// ---- graph builders (batched: rows are records) ----

struct LstmState {
  NodeId h;
  NodeId c;
};

/// One recurrence step. x_t is (m x input), state tensors (m x hidden).
/// Gates use the logistic function, cell and output nonlinearities tanh; the
/// input gate multiplies the candidate term.
LstmState lstm_step_nodes(Graph& g, LstmParams& p, NodeId x_t, LstmState prev);

/// Unrolls lstm_step over xs left to right from zero state (or the given
/// state); returns the hidden state node per timestep.
std::vector<NodeId> lstm_sequence_nodes(Graph& g, LstmParams& p, std::span<const NodeId> xs,
                                        LstmState initial);
std::vector<NodeId> lstm_sequence_nodes(Graph& g, LstmParams& p, std::span<const NodeId> xs,
                                        std::size_t batch);

/// Forward pass over xs plus a backward pass over the reversed xs, re-reversed
/// and merged by summation at each timestep.
std::vector<NodeId> bilstm_sequence_nodes(Graph& g, LstmParams& fwd, LstmParams& bwd,
                                          std::span<const NodeId> xs, std::size_t batch);

/// Sum of the forward LSTM's final state and the backward LSTM's state after
/// consuming the reversed sequence (which corresponds to input position 0).
NodeId bilstm_final_state_nodes(Graph& g, LstmParams& fwd, LstmParams& bwd,
                                std::span<const NodeId> xs, std::size_t batch);

NodeId conv1d_nodes(Graph& g, Conv1dParams& p, NodeId x);
NodeId minibatch_discrimination_nodes(Graph& g, MinibatchDiscriminationParams& p, NodeId f);
NodeId dense_nodes(Graph& g, DenseParams& p, NodeId x);

// ---- single-series convenience API (plain tensors in, plain tensors out) ----

std::pair<Tensor, Tensor> lstm_step(LstmParams& p, const Tensor& x_t, const Tensor& h_prev,
                                    const Tensor& c_prev);
/// xs is (T x input); returns (T x hidden) of h_t starting from (h0, c0).
Tensor lstm_sequence(LstmParams& p, const Tensor& xs, const Tensor& h0, const Tensor& c0);
Tensor bilstm_sequence(LstmParams& fwd, LstmParams& bwd, const Tensor& xs);
Tensor bilstm_final_state(LstmParams& fwd, LstmParams& bwd, const Tensor& xs);
/// x is (in_channels x width); activation is applied by the caller.
Tensor conv1d(Conv1dParams& p, const Tensor& x);
Tensor maxpool1d(const Tensor& x, std::size_t window, std::size_t stride);
/// F is (n x A); returns (n x B). The caller concatenates with F.
Tensor minibatch_discrimination(MinibatchDiscriminationParams& p, const Tensor& f);
Tensor dense(DenseParams& p, const Tensor& x);

/// Output width of a conv/pool stage per (W - K + 2P)/S + 1 (pooling: P = 0,
/// always floored).
std::size_t conv_output_width(std::size_t w, std::size_t k, std::size_t s, std::size_t p,
                              bool floor_mode);
std::size_t pool_output_width(std::size_t n, std::size_t window, std::size_t stride);

NodeId apply_activation(Graph& g, Activation a, NodeId x);

}  // namespace tsgan::layers
