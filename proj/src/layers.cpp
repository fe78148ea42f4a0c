#include "tsgan/layers.hpp"

#include <cmath>

namespace tsgan::layers {

namespace {

Tensor uniform_fan_in(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.values) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

LstmParams LstmParams::init(std::size_t input, std::size_t hidden, const std::string& prefix,
                            Rng& rng) {
  if (input == 0 || hidden == 0) throw ValueError("lstm: input and hidden sizes must be positive");
  LstmParams p;
  p.input = input;
  p.hidden = hidden;
  auto w = [&](const char* name) {
    return Param(prefix + "." + name, uniform_fan_in({hidden, input}, input, rng));
  };
  auto u = [&](const char* name) {
    return Param(prefix + "." + name, uniform_fan_in({hidden, hidden}, hidden, rng));
  };
  auto b = [&](const char* name) { return Param(prefix + "." + name, Tensor::zeros({hidden})); };
  p.w_f = w("w_f");
  p.w_i = w("w_i");
  p.w_o = w("w_o");
  p.w_c = w("w_c");
  p.u_f = u("u_f");
  p.u_i = u("u_i");
  p.u_o = u("u_o");
  p.u_c = u("u_c");
  p.b_f = b("b_f");
  p.b_i = b("b_i");
  p.b_o = b("b_o");
  p.b_c = b("b_c");
  return p;
}

ParamSet LstmParams::params() {
  return {&w_f, &w_i, &w_o, &w_c, &u_f, &u_i, &u_o, &u_c, &b_f, &b_i, &b_o, &b_c};
}

Conv1dParams Conv1dParams::init(std::size_t in_channels, std::size_t maps, std::size_t kernel,
                                std::size_t stride, std::size_t pad, bool floor_mode,
                                const std::string& prefix, Rng& rng) {
  if (kernel % 2 == 0) throw ValueError("conv1d: kernel size must be odd, got " + std::to_string(kernel));
  if (stride == 0) throw ValueError("conv1d: stride must be >= 1");
  Conv1dParams p;
  p.in_channels = in_channels;
  p.maps = maps;
  p.kernel = kernel;
  p.stride = stride;
  p.pad = pad;
  p.floor_mode = floor_mode;
  p.filters = Param(prefix + ".filters",
                    uniform_fan_in({maps, in_channels, kernel}, in_channels * kernel, rng));
  p.bias = Param(prefix + ".bias", Tensor::zeros({maps}));
  return p;
}

ParamSet Conv1dParams::params() { return {&filters, &bias}; }

MinibatchDiscriminationParams MinibatchDiscriminationParams::init(std::size_t in_features,
                                                                  std::size_t outputs,
                                                                  std::size_t kernel_dim,
                                                                  const std::string& prefix,
                                                                  Rng& rng) {
  MinibatchDiscriminationParams p;
  p.in_features = in_features;
  p.outputs = outputs;
  p.kernel_dim = kernel_dim;
  Tensor t = Tensor::zeros({in_features, outputs, kernel_dim});
  for (double& v : t.values) v = rng.gauss();
  p.t = Param(prefix + ".t", std::move(t));
  return p;
}

ParamSet MinibatchDiscriminationParams::params() { return {&t}; }

DenseParams DenseParams::init(std::size_t in, std::size_t out, Activation act,
                              const std::string& prefix, Rng& rng) {
  DenseParams p;
  p.in = in;
  p.out = out;
  p.activation = act;
  p.w = Param(prefix + ".w", uniform_fan_in({out, in}, in, rng));
  p.b = Param(prefix + ".b", Tensor::zeros({out}));
  return p;
}

ParamSet DenseParams::params() { return {&w, &b}; }

NodeId apply_activation(Graph& g, Activation a, NodeId x) {
  switch (a) {
    case Activation::kNone:
      return x;
    case Activation::kSigmoid:
      return g.sigmoid(x);
    case Activation::kRelu:
      return g.relu(x);
    case Activation::kTanh:
      return g.tanh(x);
  }
  return x;
}

LstmState lstm_step_nodes(Graph& g, LstmParams& p, NodeId x_t, LstmState prev) {
  auto gate = [&](Param& w, Param& u, Param& b) {
    NodeId pre = g.add(g.add(g.matmul(x_t, g.param(w), /*transpose_b=*/true),
                             g.matmul(prev.h, g.param(u), /*transpose_b=*/true)),
                       g.param(b));
    return pre;
  };
  NodeId f_t = g.sigmoid(gate(p.w_f, p.u_f, p.b_f));
  NodeId i_t = g.sigmoid(gate(p.w_i, p.u_i, p.b_i));
  NodeId o_t = g.sigmoid(gate(p.w_o, p.u_o, p.b_o));
  NodeId cand = g.tanh(gate(p.w_c, p.u_c, p.b_c));
  NodeId c_t = g.add(g.mul(f_t, prev.c), g.mul(i_t, cand));
  NodeId h_t = g.mul(o_t, g.tanh(c_t));
  return {h_t, c_t};
}

static LstmState zero_state(Graph& g, std::size_t batch, std::size_t hidden) {
  NodeId z = g.input(Tensor::zeros({batch, hidden}));
  NodeId z2 = g.input(Tensor::zeros({batch, hidden}));
  return {z, z2};
}

std::vector<NodeId> lstm_sequence_nodes(Graph& g, LstmParams& p, std::span<const NodeId> xs,
                                        LstmState initial) {
  if (xs.empty()) throw ValueError("lstm_sequence: empty sequence");
  std::vector<NodeId> hs;
  hs.reserve(xs.size());
  LstmState s = initial;
  for (NodeId x : xs) {
    s = lstm_step_nodes(g, p, x, s);
    hs.push_back(s.h);
  }
  return hs;
}

std::vector<NodeId> lstm_sequence_nodes(Graph& g, LstmParams& p, std::span<const NodeId> xs,
                                        std::size_t batch) {
  return lstm_sequence_nodes(g, p, xs, zero_state(g, batch, p.hidden));
}

std::vector<NodeId> bilstm_sequence_nodes(Graph& g, LstmParams& fwd, LstmParams& bwd,
                                          std::span<const NodeId> xs, std::size_t batch) {
  if (fwd.hidden != bwd.hidden)
    throw ShapeError("bilstm: forward hidden " + std::to_string(fwd.hidden) +
                     " vs backward hidden " + std::to_string(bwd.hidden));
  std::vector<NodeId> hf = lstm_sequence_nodes(g, fwd, xs, batch);
  std::vector<NodeId> rev(xs.rbegin(), xs.rend());
  std::vector<NodeId> hb = lstm_sequence_nodes(g, bwd, rev, batch);
  // hb indexes the reversed sequence; re-reverse before summation
  const std::size_t t_len = xs.size();
  std::vector<NodeId> merged(t_len);
  for (std::size_t t = 0; t < t_len; ++t) merged[t] = g.add(hf[t], hb[t_len - 1 - t]);
  return merged;
}

NodeId bilstm_final_state_nodes(Graph& g, LstmParams& fwd, LstmParams& bwd,
                                std::span<const NodeId> xs, std::size_t batch) {
  if (fwd.hidden != bwd.hidden)
    throw ShapeError("bilstm: forward hidden " + std::to_string(fwd.hidden) +
                     " vs backward hidden " + std::to_string(bwd.hidden));
  std::vector<NodeId> hf = lstm_sequence_nodes(g, fwd, xs, batch);
  std::vector<NodeId> rev(xs.rbegin(), xs.rend());
  std::vector<NodeId> hb = lstm_sequence_nodes(g, bwd, rev, batch);
  return g.add(hf.back(), hb.back());
}

NodeId conv1d_nodes(Graph& g, Conv1dParams& p, NodeId x) {
  return g.conv1d(x, g.param(p.filters), g.param(p.bias), p.stride, p.pad, p.floor_mode);
}

NodeId minibatch_discrimination_nodes(Graph& g, MinibatchDiscriminationParams& p, NodeId f) {
  return g.minibatch_discrim(f, g.param(p.t));
}

NodeId dense_nodes(Graph& g, DenseParams& p, NodeId x) {
  NodeId lin = g.add(g.matmul(x, g.param(p.w), /*transpose_b=*/true), g.param(p.b));
  return apply_activation(g, p.activation, lin);
}

// ---- single-series wrappers ----

namespace {

Tensor as_row_matrix(const Tensor& v) {
  if (v.rank() == 1) return Tensor({1, v.dim(0)}, v.values);
  return v;
}

}  // namespace

std::pair<Tensor, Tensor> lstm_step(LstmParams& p, const Tensor& x_t, const Tensor& h_prev,
                                    const Tensor& c_prev) {
  Graph g;
  NodeId x = g.input(as_row_matrix(x_t));
  LstmState s0{g.input(as_row_matrix(h_prev)), g.input(as_row_matrix(c_prev))};
  LstmState s = lstm_step_nodes(g, p, x, s0);
  Tensor h = g.value(s.h);
  Tensor c = g.value(s.c);
  return {Tensor::vec(std::move(h.values)), Tensor::vec(std::move(c.values))};
}

Tensor lstm_sequence(LstmParams& p, const Tensor& xs, const Tensor& h0, const Tensor& c0) {
  if (xs.rank() != 2 || xs.dim(1) != p.input)
    throw ShapeError("lstm_sequence: xs must be T x input " + std::to_string(p.input) + ", got " +
                     shape_str(xs.shape));
  const std::size_t t_len = xs.dim(0);
  Graph g;
  NodeId xnode = g.input(xs);
  std::vector<NodeId> steps;
  steps.reserve(t_len);
  for (std::size_t t = 0; t < t_len; ++t) steps.push_back(g.slice(xnode, 0, t, 1));
  LstmState s0{g.input(as_row_matrix(h0)), g.input(as_row_matrix(c0))};
  std::vector<NodeId> hs = lstm_sequence_nodes(g, p, steps, s0);
  Tensor out = Tensor::zeros({t_len, p.hidden});
  for (std::size_t t = 0; t < t_len; ++t) {
    const Tensor& h = g.value(hs[t]);
    std::copy(h.values.begin(), h.values.end(), out.values.begin() + t * p.hidden);
  }
  return out;
}

namespace {

std::vector<NodeId> series_steps(Graph& g, const Tensor& xs) {
  NodeId xnode = g.input(xs);
  std::vector<NodeId> steps;
  steps.reserve(xs.dim(0));
  for (std::size_t t = 0; t < xs.dim(0); ++t) steps.push_back(g.slice(xnode, 0, t, 1));
  return steps;
}

}  // namespace

Tensor bilstm_sequence(LstmParams& fwd, LstmParams& bwd, const Tensor& xs) {
  if (xs.rank() != 2) throw ShapeError("bilstm_sequence: xs must be T x input");
  Graph g;
  std::vector<NodeId> steps = series_steps(g, xs);
  std::vector<NodeId> hs = bilstm_sequence_nodes(g, fwd, bwd, steps, 1);
  Tensor out = Tensor::zeros({xs.dim(0), fwd.hidden});
  for (std::size_t t = 0; t < hs.size(); ++t) {
    const Tensor& h = g.value(hs[t]);
    std::copy(h.values.begin(), h.values.end(), out.values.begin() + t * fwd.hidden);
  }
  return out;
}

Tensor bilstm_final_state(LstmParams& fwd, LstmParams& bwd, const Tensor& xs) {
  if (xs.rank() != 2) throw ShapeError("bilstm_final_state: xs must be T x input");
  Graph g;
  std::vector<NodeId> steps = series_steps(g, xs);
  NodeId h = bilstm_final_state_nodes(g, fwd, bwd, steps, 1);
  Tensor v = g.value(h);
  return Tensor::vec(std::move(v.values));
}

Tensor conv1d(Conv1dParams& p, const Tensor& x) {
  Graph g;
  NodeId y = conv1d_nodes(g, p, g.input(x));
  return g.value(y);
}

Tensor maxpool1d(const Tensor& x, std::size_t window, std::size_t stride) {
  Graph g;
  NodeId y = g.maxpool1d(g.input(x), window, stride);
  return g.value(y);
}

Tensor minibatch_discrimination(MinibatchDiscriminationParams& p, const Tensor& f) {
  Graph g;
  NodeId y = minibatch_discrimination_nodes(g, p, g.input(f));
  return g.value(y);
}

Tensor dense(DenseParams& p, const Tensor& x) {
  Graph g;
  NodeId y = dense_nodes(g, p, g.input(x));
  return g.value(y);
}

std::size_t conv_output_width(std::size_t w, std::size_t k, std::size_t s, std::size_t p,
                              bool floor_mode) {
  if (w + 2 * p < k)
    throw ValueError("conv geometry: K=" + std::to_string(k) + " exceeds W+2P=" +
                     std::to_string(w + 2 * p));
  const std::size_t span = w + 2 * p - k;
  if (!floor_mode && span % s != 0)
    throw ValueError("conv geometry: W=" + std::to_string(w) + " K=" + std::to_string(k) +
                     " S=" + std::to_string(s) + " P=" + std::to_string(p) +
                     " does not divide evenly");
  return span / s + 1;
}

std::size_t pool_output_width(std::size_t n, std::size_t window, std::size_t stride) {
  if (n < window)
    throw ValueError("pool geometry: window " + std::to_string(window) + " exceeds width " +
                     std::to_string(n));
  return (n - window) / stride + 1;
}

}  // namespace tsgan::layers
