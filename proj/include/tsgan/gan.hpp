#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsgan/data.hpp"
#include "tsgan/layers.hpp"

namespace tsgan::gan {

using autodiff::Graph;
using autodiff::NodeId;
using autodiff::ParamSet;
using data::SeriesBatch;

enum class GeneratorKind { kLstm, kBilstm };
enum class DiscriminatorKind { kLstm, kCnn };

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::kLstm;
  std::size_t layers = 2;
  std::size_t hidden = 50;
  std::size_t t_len = 40;  // output series length
};

struct ConvStage {
  std::size_t maps = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 0;
  bool floor_mode = false;
  std::size_t pool_window = 3;
  std::size_t pool_stride = 2;
};

struct DiscriminatorSpec {
  DiscriminatorKind kind = DiscriminatorKind::kCnn;
  std::size_t layers = 2;   // lstm kind
  std::size_t hidden = 50;  // lstm kind
  std::vector<ConvStage> conv_stack;
  std::size_t mbd_outputs = 0;     // B; 0 disables minibatch discrimination
  std::size_t mbd_kernel_dim = 16; // C
};

struct TrainConfig {
  std::size_t epochs = 120;
  std::size_t batch_size = 50;  // must be >= 2
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t d_steps_per_g = 2;  // k
  std::uint64_t seed = 0;
  std::size_t max_batches_per_epoch = 0;  // 0 = full epoch; smoke runs cap it
  double divergence_threshold = 1e3;
};

struct EpochReport {
  std::size_t epoch = 0;
  double g_loss = 0.0;
  double d_loss = 0.0;  // sum of average real-batch and fake-batch losses
  double mmd2 = 0.0;
  double dtw_mean = 0.0;
  std::string checkpoint_id;
};

/// m x T batch of i.i.d. standard normal noise.
SeriesBatch sample_noise(std::size_t m, std::size_t t_len, Rng& rng);

// Probabilities are clamped to [1e-7, 1 - 1e-7] before any log, which bounds
// the achievable loss.
double d_loss(std::span<const double> d_real, std::span<const double> d_fake);
double g_loss(std::span<const double> d_fake);

NodeId clamp_probs_nodes(Graph& g, NodeId probs);
NodeId d_loss_nodes(Graph& g, NodeId d_real, NodeId d_fake);
NodeId g_loss_nodes(Graph& g, NodeId d_fake);

/// Adam with bias-corrected moment estimates. One step() call advances one
/// timestep over the whole param set (which must stay identical across calls).
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const ParamSet& params);
  std::uint64_t timestep() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

class Generator {
 public:
  Generator(GeneratorSpec spec, Rng& rng);

  ParamSet params();
  NodeId build(Graph& g, NodeId z, std::size_t batch);
  SeriesBatch generate(const SeriesBatch& noise);
  const GeneratorSpec& spec() const { return spec_; }

 private:
  GeneratorSpec spec_;
  layers::LstmParams l1f_, l1b_, l2f_, l2b_;  // *b_ used by the bilstm kind only
  layers::DenseParams head_;
};

class Discriminator {
 public:
  Discriminator(DiscriminatorSpec spec, std::size_t t_len, Rng& rng);

  ParamSet params();
  /// x is (m x T); returns the (m x 1) probability node.
  NodeId build(Graph& g, NodeId x, std::size_t batch);
  std::vector<double> discriminate(const SeriesBatch& batch);
  const DiscriminatorSpec& spec() const { return spec_; }

  /// (channels, width) after each conv and pool stage, cnn kind only.
  const std::vector<std::pair<std::size_t, std::size_t>>& shape_trace() const { return trace_; }
  std::size_t feature_size() const { return feature_size_; }

 private:
  DiscriminatorSpec spec_;
  std::size_t t_len_;
  std::size_t feature_size_ = 0;  // A, before minibatch features
  std::vector<layers::Conv1dParams> convs_;
  layers::LstmParams l1_, l2_;
  layers::MinibatchDiscriminationParams mbd_;
  layers::DenseParams head_;
  std::vector<std::pair<std::size_t, std::size_t>> trace_;
};

class Gan {
 public:
  Gan(GeneratorSpec g_spec, DiscriminatorSpec d_spec, std::uint64_t init_seed);

  Generator& generator() { return gen_; }
  Discriminator& discriminator() { return disc_; }
  ParamSet g_params() { return gen_.params(); }
  ParamSet d_params() { return disc_.params(); }
  ParamSet all_params();

  /// Samples noise and runs the generator, chunked to bound graph memory.
  SeriesBatch generate(std::size_t n, Rng& noise_rng);

  nlohmann::json arch_json() const;
  static Gan from_arch_json(const nlohmann::json& j);

  std::size_t t_len() const { return gen_.spec().t_len; }

 private:
  Generator gen_;
  Discriminator disc_;
};

// Named architecture presets; T = 40 for the sine family, 187 for the 4cnn
// family. mbd_outputs starts at 0 and is set from the run config.
std::vector<std::string> preset_names();
std::pair<GeneratorSpec, DiscriminatorSpec> make_preset(const std::string& name);

struct TrainResult {
  std::vector<EpochReport> reports;
  bool failed = false;
  std::string failure;
  std::size_t d_updates = 0;
  std::size_t g_updates = 0;
};

/// Returns (mmd2, dtw_mean) for the epoch.
using EvalHook = std::function<std::pair<double, double>(std::size_t epoch, Gan& gan)>;
/// Persists a checkpoint, returning its id (empty to skip).
using CheckpointSink = std::function<std::string(std::size_t epoch, Gan& gan)>;
/// Observes each finished epoch (the CLI streams the report CSV from here).
using EpochCallback = std::function<void(const EpochReport&)>;

/// Epoch-driven adversarial training: per batch, k discriminator updates with
/// fresh noise each, then one generator update. A non-finite loss or
/// |loss| > divergence_threshold flags the run failed and stops; reports up
/// to the failure are kept.
TrainResult train(Gan& gan, const TrainConfig& cfg, const SeriesBatch& train_data, EvalHook eval,
                  CheckpointSink sink, EpochCallback on_epoch = {});

}  // namespace tsgan::gan
