// Command-line driver: dataset generation/ingestion, GAN training, synthesis,
// metric evaluation and the presence-disclosure audit. Every command writes a
// manifest next to its outputs and is byte-reproducible for a fixed seed
// (timestamps live only in the manifest).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsgan/checkpoint.hpp"
#include "tsgan/data.hpp"
#include "tsgan/gan.hpp"
#include "tsgan/io.hpp"
#include "tsgan/metrics.hpp"
#include "tsgan/privacy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tsgan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitDiverged = 3;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

template <class T>
T field_or(const json& j, const char* name, T fallback) {
  if (!j.contains(name)) return fallback;
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ValueError(std::string("config field '") + name + "' has the wrong type");
  }
}

std::pair<double, double> range_field(const json& j, const char* name, double lo, double hi) {
  if (!j.contains(name)) return {lo, hi};
  const json& r = j.at(name);
  if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
    throw ValueError(std::string("config field '") + name + "' must be [lo, hi]");
  return {r[0].get<double>(), r[1].get<double>()};
}

// ---- datagen ----

int cmd_datagen(const std::string& config_path, const std::string& out_dir,
                const std::optional<std::uint64_t>& seed_override) {
  json cfg_json = io::load_json_file(config_path);
  data::SineCorpusConfig cfg;
  cfg.n_train = field_or<std::size_t>(cfg_json, "n_train", cfg.n_train);
  cfg.n_test = field_or<std::size_t>(cfg_json, "n_test", cfg.n_test);
  cfg.length = field_or<std::size_t>(cfg_json, "length", cfg.length);
  std::tie(cfg.amp_lo, cfg.amp_hi) = range_field(cfg_json, "amplitude", cfg.amp_lo, cfg.amp_hi);
  std::tie(cfg.freq_lo, cfg.freq_hi) = range_field(cfg_json, "frequency", cfg.freq_lo, cfg.freq_hi);
  std::tie(cfg.phase_lo, cfg.phase_hi) = range_field(cfg_json, "phase", cfg.phase_lo, cfg.phase_hi);
  cfg.seed = field_or<std::uint64_t>(cfg_json, "seed", cfg.seed);
  if (seed_override) cfg.seed = *seed_override;
  data::validate(cfg);

  ensure_dir(out_dir);
  auto [train, test] = data::generate_sine_corpus(cfg);
  const std::string train_path = out_dir + "/train.csv";
  const std::string test_path = out_dir + "/test.csv";
  data::save_corpus_csv(train_path, train);
  data::save_corpus_csv(test_path, test);

  json echo = cfg_json;
  echo["seed"] = cfg.seed;
  io::write_manifest(out_dir, io::make_manifest("datagen", echo, cfg.seed, {config_path},
                                                {train_path, test_path}));
  std::cout << "wrote " << train.count << " train and " << test.count << " test waves of length "
            << cfg.length << " to " << out_dir << "\n";
  return kExitOk;
}

// ---- ingest ----

data::SeriesBatch two_peak_corpus(const std::vector<data::EcgRecord>& records, int keep_label,
                                  std::size_t& skipped) {
  data::SeriesBatch out;
  for (const auto& rec : records) {
    if (rec.label != keep_label) continue;
    try {
      data::EcgRecord twin = data::make_two_peak(rec);
      out.append_row(twin.samples);
    } catch (const ValueError&) {
      ++skipped;  // record without a usable core
    }
  }
  return out;
}

int cmd_ingest(const std::string& config_path, const std::string& out_dir,
               const std::optional<std::uint64_t>&) {
  json cfg = io::load_json_file(config_path);
  ensure_dir(out_dir);

  std::vector<std::string> inputs{config_path};
  std::vector<std::string> outputs;
  json stats;

  if (cfg.contains("raw_signal")) {
    const std::string signal_path = cfg.at("raw_signal").get<std::string>();
    const std::string sidecar_path = cfg.at("sidecar").get<std::string>();
    const json sidecar = io::load_json_file(sidecar_path);
    data::RawWindowConfig rcfg;
    rcfg.source_hz = field_or<double>(sidecar, "source_hz", rcfg.source_hz);
    rcfg.gain = field_or<double>(sidecar, "gain", rcfg.gain);

    std::vector<double> signal;
    {
      std::ifstream in(signal_path);
      if (!in) throw IoError("cannot open " + signal_path);
      double v;
      while (in >> v) signal.push_back(v);
    }
    auto windows = data::preprocess_raw_windows(signal, rcfg);
    data::SeriesBatch batch;
    for (const auto& w : windows) batch.append_row(w);
    const std::string out_path = out_dir + "/windows.csv";
    data::save_corpus_csv(out_path, batch);
    inputs.push_back(signal_path);
    inputs.push_back(sidecar_path);
    outputs.push_back(out_path);
    stats["windows"] = batch.count;
    std::cout << "wrote " << batch.count << " beat windows to " << out_path << "\n";
  } else {
    const std::string train_csv = cfg.at("train_csv").get<std::string>();
    const std::string test_csv = cfg.at("test_csv").get<std::string>();
    const int keep_label = field_or<int>(cfg, "label", 0);
    std::size_t skipped = 0;
    data::SeriesBatch train = two_peak_corpus(data::load_ecg_csv(train_csv), keep_label, skipped);
    data::SeriesBatch test = two_peak_corpus(data::load_ecg_csv(test_csv), keep_label, skipped);
    const std::string train_path = out_dir + "/train.csv";
    const std::string test_path = out_dir + "/test.csv";
    data::save_corpus_csv(train_path, train);
    data::save_corpus_csv(test_path, test);
    inputs.push_back(train_csv);
    inputs.push_back(test_csv);
    outputs = {train_path, test_path};
    stats = {{"train_records", train.count}, {"test_records", test.count}, {"skipped", skipped}};
    std::cout << "wrote " << train.count << " train and " << test.count
              << " test two-peak records to " << out_dir << " (skipped " << skipped << ")\n";
  }

  json echo = cfg;
  echo["stats"] = stats;
  io::write_manifest(out_dir, io::make_manifest("ingest", echo, 0, inputs, outputs));
  return kExitOk;
}

// ---- train ----

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::optional<std::uint64_t>& seed_override,
              const std::optional<std::size_t>& epochs_override,
              const std::optional<std::size_t>& batches_override) {
  json cfg = io::load_json_file(config_path);

  const std::string preset = cfg.at("preset").get<std::string>();
  auto [g_spec, d_spec] = gan::make_preset(preset);
  d_spec.mbd_outputs = field_or<std::size_t>(cfg, "mbd_outputs", 0);
  d_spec.mbd_kernel_dim = field_or<std::size_t>(cfg, "mbd_kernel_dim", 16);

  gan::TrainConfig tc;
  tc.epochs = field_or<std::size_t>(cfg, "epochs", tc.epochs);
  tc.batch_size = field_or<std::size_t>(cfg, "batch_size", tc.batch_size);
  tc.learning_rate = field_or<double>(cfg, "learning_rate", tc.learning_rate);
  tc.beta1 = field_or<double>(cfg, "beta1", tc.beta1);
  tc.beta2 = field_or<double>(cfg, "beta2", tc.beta2);
  tc.d_steps_per_g = field_or<std::size_t>(cfg, "d_steps_per_g", tc.d_steps_per_g);
  tc.seed = field_or<std::uint64_t>(cfg, "seed", tc.seed);
  tc.max_batches_per_epoch = field_or<std::size_t>(cfg, "max_batches_per_epoch", 0);
  tc.divergence_threshold = field_or<double>(cfg, "divergence_threshold", tc.divergence_threshold);
  if (seed_override) tc.seed = *seed_override;
  if (epochs_override) tc.epochs = *epochs_override;
  if (batches_override) tc.max_batches_per_epoch = *batches_override;
  if (tc.d_steps_per_g > 5) throw ValueError("config field 'd_steps_per_g' must be in 1..5");

  const double mmd_frac = field_or<double>(cfg, "mmd_frac", 1.0);
  const double dtw_frac = field_or<double>(cfg, "dtw_frac", 0.13);

  const std::string train_csv = cfg.at("train_csv").get<std::string>();
  const std::string test_csv = cfg.at("test_csv").get<std::string>();
  data::SeriesBatch train_data = data::load_corpus_csv(train_csv);
  data::SeriesBatch test_data = data::load_corpus_csv(test_csv);
  std::size_t eval_size = field_or<std::size_t>(cfg, "eval_size", 0);
  if (eval_size == 0) eval_size = test_data.count;

  ensure_dir(out_dir);
  ensure_dir(out_dir + "/checkpoints");
  const std::string epochs_path = out_dir + "/epochs.csv";
  std::ofstream epochs_csv(epochs_path, std::ios::binary | std::ios::trunc);
  if (!epochs_csv) throw IoError("cannot write " + epochs_path);
  epochs_csv << "epoch,g_loss,d_loss,mmd2,dtw_mean,checkpoint_id\n";

  gan::Gan net(g_spec, d_spec, tc.seed);
  Rng eval_rng = Rng(tc.seed).fork(3);

  gan::EvalHook eval = [&](std::size_t, gan::Gan& g) {
    data::SeriesBatch synth = g.generate(eval_size, eval_rng);
    metrics::MetricsRecord rec = metrics::evaluate_epoch(test_data, synth, mmd_frac, dtw_frac, eval_rng);
    return std::make_pair(rec.mmd2, rec.dtw_mean);
  };
  gan::CheckpointSink sink = [&](std::size_t epoch, gan::Gan& g) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%04zu", epoch);
    gan::ParamSet all = g.all_params();
    checkpoint::save(out_dir + "/checkpoints/" + name + ".json", g.arch_json(), all);
    return std::string(name);
  };

  gan::EpochCallback on_epoch = [&](const gan::EpochReport& r) {
    epochs_csv << r.epoch << "," << format_double(r.g_loss) << "," << format_double(r.d_loss)
               << "," << format_double(r.mmd2) << "," << format_double(r.dtw_mean) << ","
               << r.checkpoint_id << "\n";
    epochs_csv.flush();
  };
  gan::TrainResult result = gan::train(net, tc, train_data, eval, sink, on_epoch);

  json echo = cfg;
  echo["seed"] = tc.seed;
  echo["epochs"] = tc.epochs;
  echo["resolved_preset"] = preset;
  if (result.failed) echo["failure"] = result.failure;
  io::write_manifest(out_dir, io::make_manifest("train", echo, tc.seed,
                                                {config_path, train_csv, test_csv},
                                                {epochs_path, out_dir + "/checkpoints"}));
  if (result.failed) {
    std::cerr << "training diverged: " << result.failure << "\n";
    return kExitDiverged;
  }
  std::cout << "trained " << preset << " for " << result.reports.size() << " epochs ("
            << result.d_updates << " D updates, " << result.g_updates << " G updates)\n";
  return kExitOk;
}

// ---- synth ----

int cmd_synth(const std::string& checkpoint_path, std::size_t n, const std::string& out_path,
              std::uint64_t seed) {
  json doc = checkpoint::load_file(checkpoint_path);
  gan::Gan net = gan::Gan::from_arch_json(doc.at("arch"));
  gan::ParamSet all = net.all_params();
  checkpoint::params_from_json(doc.at("params"), all);

  Rng rng(seed);
  data::SeriesBatch synth(0, net.t_len());
  if (n > 0) synth = net.generate(n, rng);
  synth.length = net.t_len();
  data::save_corpus_csv(out_path, synth);
  std::cout << "wrote " << synth.count << " synthetic series of length " << net.t_len() << " to "
            << out_path << "\n";
  return kExitOk;
}

// ---- eval ----

int cmd_eval(const std::string& real_csv, const std::string& synth_csv, const std::string& preset,
             std::optional<double> mmd_frac_flag, std::optional<double> dtw_frac_flag,
             std::uint64_t seed, const std::string& out_dir) {
  double mmd_frac = 1.0, dtw_frac = 0.13;  // sine protocol
  if (preset == "ecg") {
    mmd_frac = 0.65;
    dtw_frac = 0.13;
  } else if (preset != "sine") {
    throw ValueError("eval preset must be 'sine' or 'ecg'");
  }
  if (mmd_frac_flag) mmd_frac = *mmd_frac_flag;
  if (dtw_frac_flag) dtw_frac = *dtw_frac_flag;

  data::SeriesBatch real = data::load_corpus_csv(real_csv);
  data::SeriesBatch synth = data::load_corpus_csv(synth_csv);
  Rng rng(seed);
  metrics::MetricsRecord rec = metrics::evaluate_epoch(real, synth, mmd_frac, dtw_frac, rng);

  ensure_dir(out_dir);
  json report{{"mmd2", rec.mmd2},         {"dtw_mean", rec.dtw_mean}, {"mmd_frac", mmd_frac},
              {"dtw_frac", dtw_frac},     {"seed", seed},             {"real", real_csv},
              {"synth", synth_csv},       {"real_count", real.count}, {"synth_count", synth.count}};
  io::write_json_file(out_dir + "/eval.json", report);
  io::write_text_file(out_dir + "/eval.csv",
                      "mmd2,dtw_mean,mmd_frac,dtw_frac,seed\n" + format_double(rec.mmd2) + "," +
                          format_double(rec.dtw_mean) + "," + format_double(mmd_frac) + "," +
                          format_double(dtw_frac) + "," + std::to_string(seed) + "\n");
  io::write_manifest(out_dir, io::make_manifest("eval", report, seed, {real_csv, synth_csv},
                                                {out_dir + "/eval.json", out_dir + "/eval.csv"}));
  std::cout << "mmd2=" << format_double(rec.mmd2) << " dtw_mean=" << format_double(rec.dtw_mean)
            << "\n";
  return kExitOk;
}

// ---- attack ----

int cmd_attack(const std::string& train_csv, const std::string& test_csv,
               const std::string& synth_csv, const std::string& preset,
               const std::vector<std::size_t>& r_flags, std::uint64_t seed,
               const std::string& out_dir) {
  privacy::AttackConfig cfg =
      preset == "ecg" ? privacy::ecg_default_config() : privacy::sine_default_config();
  if (preset != "sine" && preset != "ecg") throw ValueError("attack preset must be 'sine' or 'ecg'");
  if (!r_flags.empty()) cfg.r_values = r_flags;
  cfg.seed = seed;

  data::SeriesBatch train = data::load_corpus_csv(train_csv);
  data::SeriesBatch test = data::load_corpus_csv(test_csv);
  data::SeriesBatch synth = data::load_corpus_csv(synth_csv);

  privacy::AttackReport report = privacy::presence_disclosure(train, test, synth, cfg);

  ensure_dir(out_dir);
  io::write_text_file(out_dir + "/attack.csv", privacy::report_to_csv(report));
  io::write_json_file(out_dir + "/attack.json", privacy::report_to_json(report));
  json echo{{"preset", preset}, {"r_values", cfg.r_values}, {"eps_fractions", cfg.eps_fractions},
            {"seed", seed}};
  io::write_manifest(out_dir,
                     io::make_manifest("attack", echo, seed, {train_csv, test_csv, synth_csv},
                                       {out_dir + "/attack.csv", out_dir + "/attack.json"}));
  std::cout << "attack grid: " << report.cells.size() << " cells, mean distance "
            << format_double(report.mean_distance) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-series GAN toolkit: synthesis, evaluation and privacy audit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", checkpoint_path, out_path;
  std::string real_csv, synth_csv, train_csv, test_csv;
  std::string preset = "sine";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t n = 0;
  std::optional<std::size_t> epochs_override, batches_override;
  std::optional<double> mmd_frac_flag, dtw_frac_flag;
  std::vector<std::size_t> r_flags;

  std::vector<CLI::Option*> seed_opts;
  auto add_seed = [&](CLI::App* cmd) {
    seed_opts.push_back(cmd->add_option("--seed", seed, "override the config seed"));
  };

  CLI::App* datagen = app.add_subcommand("datagen", "generate a sine-wave corpus");
  datagen->add_option("--config", config_path, "JSON config")->required();
  datagen->add_option("--out", out_dir, "output directory")->required();
  add_seed(datagen);

  CLI::App* ingest = app.add_subcommand("ingest", "build the two-peak ECG corpus");
  ingest->add_option("--config", config_path, "JSON config")->required();
  ingest->add_option("--out", out_dir, "output directory")->required();

  CLI::App* train = app.add_subcommand("train", "train a GAN preset");
  train->add_option("--config", config_path, "JSON config")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  add_seed(train);
  std::size_t epochs_val = 0, batches_val = 0;
  CLI::Option* opt_epochs = train->add_option("--epochs", epochs_val, "override epoch count");
  CLI::Option* opt_batches =
      train->add_option("--batches", batches_val, "cap batches per epoch (smoke mode)");

  CLI::App* synth = app.add_subcommand("synth", "generate series from a checkpoint");
  synth->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
  synth->add_option("--n", n, "number of series")->required();
  synth->add_option("--out", out_path, "output corpus CSV")->required();
  add_seed(synth);

  CLI::App* eval_cmd = app.add_subcommand("eval", "score synthetic data against real data");
  eval_cmd->add_option("--real", real_csv, "real corpus CSV")->required();
  eval_cmd->add_option("--synth", synth_csv, "synthetic corpus CSV")->required();
  eval_cmd->add_option("--preset", preset, "sine|ecg sampling fractions");
  double mmd_frac_val = 0, dtw_frac_val = 0;
  CLI::Option* opt_mmd_frac =
      eval_cmd->add_option("--mmd-frac", mmd_frac_val, "MMD subsample fraction");
  CLI::Option* opt_dtw_frac =
      eval_cmd->add_option("--dtw-frac", dtw_frac_val, "DTW subsample fraction");
  eval_cmd->add_option("--out", out_dir, "output directory")->required();
  add_seed(eval_cmd);

  CLI::App* attack = app.add_subcommand("attack", "presence-disclosure audit");
  attack->add_option("--train", train_csv, "training corpus CSV")->required();
  attack->add_option("--test", test_csv, "held-out corpus CSV")->required();
  attack->add_option("--synth", synth_csv, "synthetic corpus CSV")->required();
  attack->add_option("--preset", preset, "sine|ecg grid defaults");
  attack->add_option("--r", r_flags, "override sample sizes");
  attack->add_option("--out", out_dir, "output directory")->required();
  add_seed(attack);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitConfig;
  }

  for (CLI::Option* o : seed_opts) seed_set = seed_set || o->count() > 0;
  if (opt_epochs->count() > 0) epochs_override = epochs_val;
  if (opt_batches->count() > 0) batches_override = batches_val;
  if (opt_mmd_frac->count() > 0) mmd_frac_flag = mmd_frac_val;
  if (opt_dtw_frac->count() > 0) dtw_frac_flag = dtw_frac_val;
  std::optional<std::uint64_t> seed_override =
      seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt;

  try {
    if (datagen->parsed()) return cmd_datagen(config_path, out_dir, seed_override);
    if (ingest->parsed()) return cmd_ingest(config_path, out_dir, seed_override);
    if (train->parsed())
      return cmd_train(config_path, out_dir, seed_override, epochs_override, batches_override);
    if (synth->parsed()) return cmd_synth(checkpoint_path, n, out_path, seed);
    if (eval_cmd->parsed())
      return cmd_eval(real_csv, synth_csv, preset, mmd_frac_flag, dtw_frac_flag, seed, out_dir);
    if (attack->parsed())
      return cmd_attack(train_csv, test_csv, synth_csv, preset, r_flags, seed, out_dir);
  } catch (const ValueError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
