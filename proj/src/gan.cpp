#include "tsgan/gan.hpp"

#include <cmath>

namespace tsgan::gan {

using layers::Activation;

namespace {
constexpr double kProbEps = 1e-7;
}

SeriesBatch sample_noise(std::size_t m, std::size_t t_len, Rng& rng) {
  if (m < 1 || t_len < 1) throw ValueError("sample_noise: m and T must be >= 1");
  SeriesBatch z(m, t_len);
  for (double& v : z.values) v = rng.gauss();
  return z;
}

double d_loss(std::span<const double> d_real, std::span<const double> d_fake) {
  if (d_real.empty() || d_fake.empty()) throw ValueError("d_loss: empty inputs");
  double real_term = 0.0;
  for (double p : d_real) real_term += std::log(std::clamp(p, kProbEps, 1.0 - kProbEps));
  double fake_term = 0.0;
  for (double p : d_fake) fake_term += std::log(1.0 - std::clamp(p, kProbEps, 1.0 - kProbEps));
  return -real_term / static_cast<double>(d_real.size()) -
         fake_term / static_cast<double>(d_fake.size());
}

double g_loss(std::span<const double> d_fake) {
  if (d_fake.empty()) throw ValueError("g_loss: empty input");
  double acc = 0.0;
  for (double p : d_fake) acc += std::log(std::clamp(p, kProbEps, 1.0 - kProbEps));
  return -acc / static_cast<double>(d_fake.size());
}

NodeId clamp_probs_nodes(Graph& g, NodeId probs) {
  // clamp(x, lo, hi) = max(-max(-x, -hi), lo); gradient is zero where clamped
  NodeId hi_neg = g.input(Tensor::scalar(-(1.0 - kProbEps)));
  NodeId lo = g.input(Tensor::scalar(kProbEps));
  NodeId upper = g.scale(g.max(g.scale(probs, -1.0), hi_neg), -1.0);
  return g.max(upper, lo);
}

NodeId d_loss_nodes(Graph& g, NodeId d_real, NodeId d_fake) {
  NodeId one = g.input(Tensor::scalar(1.0));
  NodeId real_term = g.mean(g.log(clamp_probs_nodes(g, d_real)));
  NodeId fake_term = g.mean(g.log(g.sub(one, clamp_probs_nodes(g, d_fake))));
  return g.sub(g.scale(real_term, -1.0), fake_term);
}

NodeId g_loss_nodes(Graph& g, NodeId d_fake) {
  return g.scale(g.mean(g.log(clamp_probs_nodes(g, d_fake))), -1.0);
}

void Adam::step(const ParamSet& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->value.size(), 0.0);
      v_[i].assign(params[i]->value.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ValueError("adam: param set changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    autodiff::Param& p = *params[i];
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    if (m.size() != p.value.size()) throw ValueError("adam: param " + p.name + " resized");
    for (std::size_t j = 0; j < m.size(); ++j) {
      const double g = p.grad[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p.value[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

// ---- generator ----

Generator::Generator(GeneratorSpec spec, Rng& rng) : spec_(spec) {
  if (spec_.layers != 2) throw ValueError("generator: only the two-layer design is supported");
  if (spec_.hidden < 1 || spec_.t_len < 1) throw ValueError("generator: bad sizes");
  const std::size_t h = spec_.hidden;
  if (spec_.kind == GeneratorKind::kLstm) {
    l1f_ = layers::LstmParams::init(1, h, "g.l1", rng);
    l2f_ = layers::LstmParams::init(h, h, "g.l2", rng);
    head_ = layers::DenseParams::init(h, 1, Activation::kTanh, "g.head", rng);
  } else {
    l1f_ = layers::LstmParams::init(1, h, "g.l1.fwd", rng);
    l1b_ = layers::LstmParams::init(1, h, "g.l1.bwd", rng);
    l2f_ = layers::LstmParams::init(h, h, "g.l2.fwd", rng);
    l2b_ = layers::LstmParams::init(h, h, "g.l2.bwd", rng);
    head_ = layers::DenseParams::init(h, spec_.t_len, Activation::kTanh, "g.head", rng);
  }
}

ParamSet Generator::params() {
  ParamSet out;
  auto extend = [&](ParamSet more) { out.insert(out.end(), more.begin(), more.end()); };
  extend(l1f_.params());
  if (spec_.kind == GeneratorKind::kBilstm) extend(l1b_.params());
  extend(l2f_.params());
  if (spec_.kind == GeneratorKind::kBilstm) extend(l2b_.params());
  extend(head_.params());
  return out;
}

NodeId Generator::build(Graph& g, NodeId z, std::size_t batch) {
  const Tensor& tz = g.value(z);
  if (tz.rank() != 2 || tz.dim(0) != batch || tz.dim(1) != spec_.t_len)
    throw ShapeError("generator: noise must be " + std::to_string(batch) + "x" +
                     std::to_string(spec_.t_len) + ", got " + shape_str(tz.shape));

  std::vector<NodeId> steps;
  steps.reserve(spec_.t_len);
  for (std::size_t t = 0; t < spec_.t_len; ++t) steps.push_back(g.slice(z, 1, t, 1));

  if (spec_.kind == GeneratorKind::kLstm) {
    std::vector<NodeId> h1 = layers::lstm_sequence_nodes(g, l1f_, steps, batch);
    std::vector<NodeId> h2 = layers::lstm_sequence_nodes(g, l2f_, h1, batch);
    std::vector<NodeId> outs;
    outs.reserve(spec_.t_len);
    for (NodeId h : h2) outs.push_back(layers::dense_nodes(g, head_, h));  // m x 1 each
    return g.concat(outs, 1);
  }
  std::vector<NodeId> h1 = layers::bilstm_sequence_nodes(g, l1f_, l1b_, steps, batch);
  NodeId final_state = layers::bilstm_final_state_nodes(g, l2f_, l2b_, h1, batch);
  return layers::dense_nodes(g, head_, final_state);  // m x T
}

SeriesBatch Generator::generate(const SeriesBatch& noise) {
  if (noise.length != spec_.t_len)
    throw ShapeError("generator: noise length " + std::to_string(noise.length) +
                     " vs configured T " + std::to_string(spec_.t_len));
  Graph g;
  NodeId z = g.input(Tensor({noise.count, noise.length}, noise.values));
  NodeId out = build(g, z, noise.count);
  SeriesBatch result(noise.count, spec_.t_len);
  result.values = g.value(out).values;
  return result;
}

// ---- discriminator ----

Discriminator::Discriminator(DiscriminatorSpec spec, std::size_t t_len, Rng& rng)
    : spec_(std::move(spec)), t_len_(t_len) {
  if (spec_.kind == DiscriminatorKind::kCnn) {
    if (spec_.conv_stack.empty()) throw ValueError("discriminator: cnn kind needs conv stages");
    std::size_t ch = 1, width = t_len_;
    for (std::size_t s = 0; s < spec_.conv_stack.size(); ++s) {
      const ConvStage& st = spec_.conv_stack[s];
      convs_.push_back(layers::Conv1dParams::init(ch, st.maps, st.kernel, st.stride, st.pad,
                                                  st.floor_mode, "d.conv" + std::to_string(s + 1),
                                                  rng));
      width = layers::conv_output_width(width, st.kernel, st.stride, st.pad, st.floor_mode);
      ch = st.maps;
      trace_.emplace_back(ch, width);
      width = layers::pool_output_width(width, st.pool_window, st.pool_stride);
      trace_.emplace_back(ch, width);
    }
    feature_size_ = ch * width;
  } else {
    if (spec_.layers != 2) throw ValueError("discriminator: only the two-layer lstm design is supported");
    l1_ = layers::LstmParams::init(1, spec_.hidden, "d.l1", rng);
    l2_ = layers::LstmParams::init(spec_.hidden, spec_.hidden, "d.l2", rng);
    feature_size_ = spec_.hidden;
  }
  if (spec_.mbd_outputs > 0) {
    mbd_ = layers::MinibatchDiscriminationParams::init(feature_size_, spec_.mbd_outputs,
                                                       spec_.mbd_kernel_dim, "d.mbd", rng);
  }
  head_ = layers::DenseParams::init(feature_size_ + spec_.mbd_outputs, 1, Activation::kSigmoid,
                                    "d.head", rng);
}

ParamSet Discriminator::params() {
  ParamSet out;
  auto extend = [&](ParamSet more) { out.insert(out.end(), more.begin(), more.end()); };
  if (spec_.kind == DiscriminatorKind::kCnn) {
    for (auto& c : convs_) extend(c.params());
  } else {
    extend(l1_.params());
    extend(l2_.params());
  }
  if (spec_.mbd_outputs > 0) extend(mbd_.params());
  extend(head_.params());
  return out;
}

NodeId Discriminator::build(Graph& g, NodeId x, std::size_t batch) {
  const Tensor& tx = g.value(x);
  if (tx.rank() != 2 || tx.dim(0) != batch || tx.dim(1) != t_len_)
    throw ShapeError("discriminator: input must be " + std::to_string(batch) + "x" +
                     std::to_string(t_len_) + ", got " + shape_str(tx.shape));

  NodeId feats;
  if (spec_.kind == DiscriminatorKind::kCnn) {
    std::vector<NodeId> rows;
    rows.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      NodeId sig = g.reshape(g.slice(x, 0, i, 1), {1, t_len_});
      for (std::size_t s = 0; s < convs_.size(); ++s) {
        sig = g.relu(layers::conv1d_nodes(g, convs_[s], sig));
        sig = g.maxpool1d(sig, spec_.conv_stack[s].pool_window, spec_.conv_stack[s].pool_stride);
      }
      rows.push_back(g.reshape(sig, {1, feature_size_}));
    }
    feats = g.concat(rows, 0);  // m x A
  } else {
    std::vector<NodeId> steps;
    steps.reserve(t_len_);
    for (std::size_t t = 0; t < t_len_; ++t) steps.push_back(g.slice(x, 1, t, 1));
    std::vector<NodeId> h1 = layers::lstm_sequence_nodes(g, l1_, steps, batch);
    std::vector<NodeId> h2 = layers::lstm_sequence_nodes(g, l2_, h1, batch);
    feats = h2.back();  // m x hidden
  }

  if (spec_.mbd_outputs > 0) {
    NodeId mb = layers::minibatch_discrimination_nodes(g, mbd_, feats);
    std::vector<NodeId> cat{feats, mb};
    feats = g.concat(cat, 1);
  }
  return layers::dense_nodes(g, head_, feats);  // m x 1, sigmoid
}

std::vector<double> Discriminator::discriminate(const SeriesBatch& batch) {
  Graph g;
  NodeId x = g.input(Tensor({batch.count, batch.length}, batch.values));
  NodeId probs = build(g, x, batch.count);
  return g.value(probs).values;
}

// ---- gan ----

namespace {

Generator make_generator(GeneratorSpec spec, std::uint64_t seed) {
  Rng root(seed);
  Rng stream = root.fork(1);
  return Generator(spec, stream);
}

Discriminator make_discriminator(DiscriminatorSpec spec, std::size_t t_len, std::uint64_t seed) {
  Rng root(seed);
  Rng stream = root.fork(2);
  return Discriminator(std::move(spec), t_len, stream);
}

}  // namespace

Gan::Gan(GeneratorSpec g_spec, DiscriminatorSpec d_spec, std::uint64_t init_seed)
    : gen_(make_generator(g_spec, init_seed)),
      disc_(make_discriminator(std::move(d_spec), g_spec.t_len, init_seed)) {}

ParamSet Gan::all_params() {
  ParamSet out = gen_.params();
  ParamSet d = disc_.params();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

SeriesBatch Gan::generate(std::size_t n, Rng& noise_rng) {
  const std::size_t chunk = 256;
  SeriesBatch out(n, t_len());
  std::size_t done = 0;
  while (done < n) {
    const std::size_t take = std::min(chunk, n - done);
    SeriesBatch z = sample_noise(take, t_len(), noise_rng);
    SeriesBatch piece = gen_.generate(z);
    std::copy(piece.values.begin(), piece.values.end(), out.values.begin() + done * t_len());
    done += take;
  }
  return out;
}

namespace {

const char* generator_kind_name(GeneratorKind k) {
  return k == GeneratorKind::kLstm ? "lstm" : "bilstm";
}
const char* discriminator_kind_name(DiscriminatorKind k) {
  return k == DiscriminatorKind::kLstm ? "lstm" : "cnn";
}

}  // namespace

nlohmann::json Gan::arch_json() const {
  nlohmann::json j;
  j["generator"] = {{"kind", generator_kind_name(gen_.spec().kind)},
                    {"layers", gen_.spec().layers},
                    {"hidden", gen_.spec().hidden},
                    {"t_len", gen_.spec().t_len}};
  nlohmann::json stages = nlohmann::json::array();
  for (const ConvStage& s : disc_.spec().conv_stack) {
    stages.push_back({{"maps", s.maps},
                      {"kernel", s.kernel},
                      {"stride", s.stride},
                      {"pad", s.pad},
                      {"floor_mode", s.floor_mode},
                      {"pool_window", s.pool_window},
                      {"pool_stride", s.pool_stride}});
  }
  j["discriminator"] = {{"kind", discriminator_kind_name(disc_.spec().kind)},
                        {"layers", disc_.spec().layers},
                        {"hidden", disc_.spec().hidden},
                        {"conv_stack", stages},
                        {"mbd_outputs", disc_.spec().mbd_outputs},
                        {"mbd_kernel_dim", disc_.spec().mbd_kernel_dim}};
  return j;
}

Gan Gan::from_arch_json(const nlohmann::json& j) {
  GeneratorSpec gs;
  const auto& jg = j.at("generator");
  gs.kind = jg.at("kind").get<std::string>() == "bilstm" ? GeneratorKind::kBilstm
                                                         : GeneratorKind::kLstm;
  gs.layers = jg.at("layers").get<std::size_t>();
  gs.hidden = jg.at("hidden").get<std::size_t>();
  gs.t_len = jg.at("t_len").get<std::size_t>();

  DiscriminatorSpec ds;
  const auto& jd = j.at("discriminator");
  ds.kind = jd.at("kind").get<std::string>() == "lstm" ? DiscriminatorKind::kLstm
                                                       : DiscriminatorKind::kCnn;
  ds.layers = jd.at("layers").get<std::size_t>();
  ds.hidden = jd.at("hidden").get<std::size_t>();
  ds.mbd_outputs = jd.at("mbd_outputs").get<std::size_t>();
  ds.mbd_kernel_dim = jd.at("mbd_kernel_dim").get<std::size_t>();
  for (const auto& js : jd.at("conv_stack")) {
    ConvStage s;
    s.maps = js.at("maps").get<std::size_t>();
    s.kernel = js.at("kernel").get<std::size_t>();
    s.stride = js.at("stride").get<std::size_t>();
    s.pad = js.at("pad").get<std::size_t>();
    s.floor_mode = js.at("floor_mode").get<bool>();
    s.pool_window = js.at("pool_window").get<std::size_t>();
    s.pool_stride = js.at("pool_stride").get<std::size_t>();
    ds.conv_stack.push_back(s);
  }
  return Gan(gs, ds, 0);
}

// ---- presets ----

std::vector<std::string> preset_names() {
  return {"lstm-gan",        "1cnn-gan",        "2cnn-gan", "1cnn-bilstm-gan",
          "2cnn-bilstm-gan", "4cnn-gan",        "4cnn-bilstm-gan"};
}

namespace {

std::vector<ConvStage> sine_stack(std::size_t stages) {
  // 40 -> C1 10x38 -> P1 10x18 -> C2 5x16 -> P2 5x7
  std::vector<ConvStage> out;
  out.push_back({10, 3, 1, 0, false, 3, 2});
  if (stages > 1) out.push_back({5, 3, 1, 0, false, 3, 2});
  return out;
}

std::vector<ConvStage> ecg_stack() {
  // 187 -> C1 3x185 -> P1 3x183 -> C2 5x181 -> P2 5x90
  //     -> C3 8x44 (floored) -> P3 8x21 -> C4 12x9 -> P4 12x3
  return {
      {3, 3, 1, 0, false, 3, 1},
      {5, 3, 1, 0, false, 3, 2},
      {8, 3, 2, 0, true, 3, 2},
      {12, 5, 2, 0, false, 5, 2},
  };
}

}  // namespace

std::pair<GeneratorSpec, DiscriminatorSpec> make_preset(const std::string& name) {
  GeneratorSpec g;
  DiscriminatorSpec d;
  g.layers = 2;
  g.hidden = 50;
  d.layers = 2;
  d.hidden = 50;

  if (name == "lstm-gan") {
    g.kind = GeneratorKind::kLstm;
    g.t_len = 40;
    d.kind = DiscriminatorKind::kLstm;
  } else if (name == "1cnn-gan") {
    g.kind = GeneratorKind::kLstm;
    g.t_len = 40;
    d.kind = DiscriminatorKind::kCnn;
    d.conv_stack = sine_stack(1);
  } else if (name == "2cnn-gan") {
    g.kind = GeneratorKind::kLstm;
    g.t_len = 40;
    d.kind = DiscriminatorKind::kCnn;
    d.conv_stack = sine_stack(2);
  } else if (name == "1cnn-bilstm-gan") {
    g.kind = GeneratorKind::kBilstm;
    g.t_len = 40;
    d.kind = DiscriminatorKind::kCnn;
    d.conv_stack = sine_stack(1);
  } else if (name == "2cnn-bilstm-gan") {
    g.kind = GeneratorKind::kBilstm;
    g.t_len = 40;
    d.kind = DiscriminatorKind::kCnn;
    d.conv_stack = sine_stack(2);
  } else if (name == "4cnn-gan") {
    g.kind = GeneratorKind::kLstm;
    g.t_len = 187;
    d.kind = DiscriminatorKind::kCnn;
    d.conv_stack = ecg_stack();
  } else if (name == "4cnn-bilstm-gan") {
    g.kind = GeneratorKind::kBilstm;
    g.t_len = 187;
    d.kind = DiscriminatorKind::kCnn;
    d.conv_stack = ecg_stack();
  } else {
    throw ValueError("unknown preset '" + name + "'");
  }
  return {g, d};
}

// ---- training ----

TrainResult train(Gan& gan, const TrainConfig& cfg, const SeriesBatch& train_data, EvalHook eval,
                  CheckpointSink sink, EpochCallback on_epoch) {
  if (!(cfg.learning_rate > 0.0)) throw ValueError("train config: learning-rate must be positive");
  if (cfg.batch_size < 2) throw ValueError("train config: batch size must be >= 2");
  if (cfg.d_steps_per_g < 1) throw ValueError("train config: d-steps-per-g-step must be >= 1");
  if (train_data.count == 0) throw ValueError("train: dataset is empty");
  if (train_data.length != gan.t_len())
    throw ShapeError("train: dataset length " + std::to_string(train_data.length) +
                     " vs architecture T " + std::to_string(gan.t_len()));

  const std::size_t m = cfg.batch_size;
  Rng root_rng(cfg.seed);
  Rng shuffle_rng = root_rng.fork(1);
  Rng noise_rng = root_rng.fork(2);

  Adam opt_d(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  Adam opt_g(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  ParamSet dp = gan.d_params();
  ParamSet gp = gan.g_params();

  data::BatchIterator batches(train_data, m, shuffle_rng);
  std::size_t per_epoch = batches.batches_per_epoch();
  if (cfg.max_batches_per_epoch > 0) per_epoch = std::min(per_epoch, cfg.max_batches_per_epoch);

  TrainResult result;
  auto diverged = [&](double loss) {
    return !std::isfinite(loss) || std::abs(loss) > cfg.divergence_threshold;
  };

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double d_loss_sum = 0.0;
    double g_loss_sum = 0.0;
    std::size_t d_steps = 0, g_steps = 0;

    for (std::size_t b = 0; b < per_epoch; ++b) {
      SeriesBatch real = batches.next();
      Tensor real_t({m, train_data.length}, real.values);

      for (std::size_t k = 0; k < cfg.d_steps_per_g; ++k) {
        SeriesBatch fake = gan.generator().generate(sample_noise(m, gan.t_len(), noise_rng));
        Graph g;
        NodeId d_real = gan.discriminator().build(g, g.input(real_t), m);
        NodeId d_fake =
            gan.discriminator().build(g, g.input(Tensor({m, fake.length}, fake.values)), m);
        NodeId loss = d_loss_nodes(g, d_real, d_fake);
        const double loss_v = g.value(loss)[0];
        if (diverged(loss_v)) {
          result.failed = true;
          result.failure = "discriminator loss " + format_double(loss_v) + " at epoch " +
                           std::to_string(epoch);
          return result;
        }
        autodiff::zero_grads(dp);
        g.backward(loss);
        opt_d.step(dp);
        ++result.d_updates;
        d_loss_sum += loss_v;
        ++d_steps;
      }

      {
        SeriesBatch z = sample_noise(m, gan.t_len(), noise_rng);
        Graph g;
        NodeId fake = gan.generator().build(g, g.input(Tensor({m, z.length}, z.values)), m);
        NodeId d_fake = gan.discriminator().build(g, fake, m);
        NodeId loss = g_loss_nodes(g, d_fake);
        const double loss_v = g.value(loss)[0];
        if (diverged(loss_v)) {
          result.failed = true;
          result.failure =
              "generator loss " + format_double(loss_v) + " at epoch " + std::to_string(epoch);
          return result;
        }
        autodiff::zero_grads(gp);
        autodiff::zero_grads(dp);
        g.backward(loss);
        opt_g.step(gp);
        ++result.g_updates;
        g_loss_sum += loss_v;
        ++g_steps;
      }
    }

    EpochReport rep;
    rep.epoch = epoch;
    rep.d_loss = d_steps > 0 ? d_loss_sum / static_cast<double>(d_steps) : 0.0;
    rep.g_loss = g_steps > 0 ? g_loss_sum / static_cast<double>(g_steps) : 0.0;
    if (eval) {
      auto [mmd2, dtw_mean] = eval(epoch, gan);
      rep.mmd2 = mmd2;
      rep.dtw_mean = dtw_mean;
    }
    if (sink) rep.checkpoint_id = sink(epoch, gan);
    if (on_epoch) on_epoch(rep);
    result.reports.push_back(std::move(rep));
  }
  return result;
}

}  // namespace tsgan::gan
