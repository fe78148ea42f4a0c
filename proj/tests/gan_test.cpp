#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "testutil.hpp"
#include "tsgan/checkpoint.hpp"
#include "tsgan/gan.hpp"

using namespace tsgan;
using namespace tsgan::gan;

TEST_CASE("sample_noise moments and reproducibility") {
  Rng rng(211);
  data::SeriesBatch z = sample_noise(1000, 1000, rng);  // 1e6 draws
  double mean = 0.0;
  for (double v : z.values) mean += v;
  mean /= static_cast<double>(z.values.size());
  CHECK(std::abs(mean) < 4e-3);  // 4 sigma of the sample mean

  double var = 0.0;
  for (double v : z.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(z.values.size() - 1);
  CHECK(var > 0.99);
  CHECK(var < 1.01);

  Rng r1(5), r2(5);
  CHECK(sample_noise(4, 7, r1).values == sample_noise(4, 7, r2).values);
}

TEST_CASE("generator output shape and zero-parameter constant batch") {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::kLstm;
  spec.hidden = 6;
  spec.t_len = 12;
  Rng rng(2);
  Generator gen(spec, rng);
  for (autodiff::Param* p : gen.params())
    std::fill(p->value.values.begin(), p->value.values.end(), 0.0);

  Rng noise_rng(3);
  data::SeriesBatch out = gen.generate(sample_noise(5, 12, noise_rng));
  CHECK(out.count == 5);
  CHECK(out.length == 12);
  for (double v : out.values) CHECK(v == 0.0);  // tanh(0) head on zero state
}

TEST_CASE("lstm generator forward equals the layers-module composition") {
  GeneratorSpec spec;
  spec.kind = GeneratorKind::kLstm;
  spec.hidden = 4;
  spec.t_len = 8;
  Rng rng(7);
  Generator gen(spec, rng);

  Rng noise_rng(11);
  data::SeriesBatch z = sample_noise(3, 8, noise_rng);
  data::SeriesBatch out = gen.generate(z);

  // rebuild per record: two stacked single-series LSTMs plus the dense head,
  // pulling the params back out of the generator by name
  std::map<std::string, autodiff::Param*> by_name;
  for (autodiff::Param* p : gen.params()) by_name[p->name] = p;

  layers::LstmParams l1 = layers::LstmParams::init(1, 4, "o1", noise_rng);
  layers::LstmParams l2 = layers::LstmParams::init(4, 4, "o2", noise_rng);
  layers::DenseParams head = layers::DenseParams::init(4, 1, layers::Activation::kTanh, "oh", noise_rng);
  auto copy_into = [&](layers::LstmParams& dst, const std::string& prefix) {
    auto set = [&](autodiff::Param& d, const std::string& n) { d.value = by_name.at(prefix + n)->value; };
    set(dst.w_f, ".w_f"); set(dst.w_i, ".w_i"); set(dst.w_o, ".w_o"); set(dst.w_c, ".w_c");
    set(dst.u_f, ".u_f"); set(dst.u_i, ".u_i"); set(dst.u_o, ".u_o"); set(dst.u_c, ".u_c");
    set(dst.b_f, ".b_f"); set(dst.b_i, ".b_i"); set(dst.b_o, ".b_o"); set(dst.b_c, ".b_c");
  };
  copy_into(l1, "g.l1");
  copy_into(l2, "g.l2");
  head.w.value = by_name.at("g.head.w")->value;
  head.b.value = by_name.at("g.head.b")->value;

  for (std::size_t r = 0; r < 3; ++r) {
    Tensor xs({8, 1}, std::vector<double>(z.row(r).begin(), z.row(r).end()));
    Tensor h1 = layers::lstm_sequence(l1, xs, Tensor::zeros({4}), Tensor::zeros({4}));
    Tensor h2 = layers::lstm_sequence(l2, h1, Tensor::zeros({4}), Tensor::zeros({4}));
    for (std::size_t t = 0; t < 8; ++t) {
      Tensor ht = Tensor::vec(std::vector<double>(h2.values.begin() + t * 4,
                                                  h2.values.begin() + (t + 1) * 4));
      Tensor y = layers::dense(head, ht);
      CHECK(out.row(r)[t] == doctest::Approx(y[0]).epsilon(1e-12));
    }
  }
}

TEST_CASE("discriminator zero head gives 0.5 and duplicated rows agree") {
  auto [g_spec, d_spec] = make_preset("2cnn-gan");
  Rng rng(13);
  Discriminator disc(d_spec, 40, rng);
  for (autodiff::Param* p : disc.params()) {
    if (p->name.rfind("d.head", 0) == 0)
      std::fill(p->value.values.begin(), p->value.values.end(), 0.0);
  }
  Rng nr(17);
  data::SeriesBatch x = sample_noise(6, 40, nr);
  std::vector<double> probs = disc.discriminate(x);
  for (double p : probs) CHECK(p == doctest::Approx(0.5));

  // shape trace straight from the construction
  const auto& trace = disc.shape_trace();
  REQUIRE(trace.size() == 4);
  CHECK(trace[0] == std::pair<std::size_t, std::size_t>{10, 38});
  CHECK(trace[1] == std::pair<std::size_t, std::size_t>{10, 18});
  CHECK(trace[2] == std::pair<std::size_t, std::size_t>{5, 16});
  CHECK(trace[3] == std::pair<std::size_t, std::size_t>{5, 7});

  // duplicated batch row: identical probabilities (with minibatch features on)
  DiscriminatorSpec with_mbd = d_spec;
  with_mbd.mbd_outputs = 3;
  Rng rng2(19);
  Discriminator disc2(with_mbd, 40, rng2);
  data::SeriesBatch dup = x;
  std::copy(x.row(2).begin(), x.row(2).end(), dup.row_ptr(4));  // row 4 := row 2
  std::vector<double> p2 = disc2.discriminate(dup);
  CHECK(p2[2] == doctest::Approx(p2[4]).epsilon(1e-12));
}

TEST_CASE("discriminator outputs stay in (0,1) and losses are batch-order invariant") {
  auto [g_spec, d_spec] = make_preset("1cnn-gan");
  d_spec.mbd_outputs = 5;
  Rng rng(23);
  Discriminator disc(d_spec, 40, rng);
  Rng nr(29);
  data::SeriesBatch x = sample_noise(8, 40, nr);
  std::vector<double> probs = disc.discriminate(x);
  for (double p : probs) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }

  // permute the batch rows: outputs permute with them, losses unchanged
  std::vector<std::size_t> perm{3, 1, 7, 0, 5, 2, 6, 4};
  data::SeriesBatch xp = x.select(perm);
  std::vector<double> probs_p = disc.discriminate(xp);
  for (std::size_t i = 0; i < perm.size(); ++i)
    CHECK(probs_p[i] == doctest::Approx(probs[perm[i]]).epsilon(1e-12));

  Rng nr2(31);
  data::SeriesBatch y = sample_noise(8, 40, nr2);
  std::vector<double> fake = disc.discriminate(y);
  std::vector<double> fake_perm;
  for (std::size_t i : perm) fake_perm.push_back(fake[i]);
  CHECK(d_loss(probs, fake) == doctest::Approx(d_loss(probs_p, fake_perm)).epsilon(1e-12));
  CHECK(g_loss(fake) == doctest::Approx(g_loss(fake_perm)).epsilon(1e-12));
}

TEST_CASE("loss fixtures and the scalar oracle") {
  std::vector<double> half{0.5, 0.5};
  CHECK(d_loss(half, half) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(g_loss(half) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  std::vector<double> ones{1.0, 1.0};
  std::vector<double> zeros{0.0, 0.0};
  CHECK(d_loss(ones, zeros) == doctest::Approx(2e-7).epsilon(1e-3));
  CHECK(g_loss(ones) == doctest::Approx(1e-7).epsilon(1e-3));

  Rng rng(37);
  std::vector<double> a(9), b(7);
  for (double& v : a) v = rng.uniform(0.01, 0.99);
  for (double& v : b) v = rng.uniform(0.01, 0.99);
  double want_d = 0.0;
  for (double p : a) want_d += -std::log(p) / 9.0;
  for (double p : b) want_d += -std::log(1.0 - p) / 7.0;
  CHECK(d_loss(a, b) == doctest::Approx(want_d).epsilon(1e-12));
  double want_g = 0.0;
  for (double p : b) want_g += -std::log(p) / 7.0;
  CHECK(g_loss(b) == doctest::Approx(want_g).epsilon(1e-12));

  // graph losses agree with the numeric ones
  autodiff::Graph g;
  autodiff::NodeId na = g.input(Tensor::vec(a));
  autodiff::NodeId nb = g.input(Tensor::vec(b));
  CHECK(g.value(d_loss_nodes(g, na, nb))[0] == doctest::Approx(d_loss(a, b)).epsilon(1e-12));
  CHECK(g.value(g_loss_nodes(g, nb))[0] == doctest::Approx(g_loss(b)).epsilon(1e-12));
}

TEST_CASE("adam zero-gradient step, step-size bound and scalar trajectory oracle") {
  autodiff::Param p("p", Tensor::vec({1.0, -2.0}));
  Adam opt(0.01, 0.9, 0.999, 1e-8);
  opt.step({&p});
  CHECK(p.value.values == std::vector<double>{1.0, -2.0});
  CHECK(opt.timestep() == 1);

  // first step with a gradient moves by at most lr
  p.grad = {0.3, -4.0};
  opt.step({&p});
  CHECK(std::abs(p.value[0] - 1.0) <= 0.01 + 1e-12);
  CHECK(std::abs(p.value[1] + 2.0) <= 0.01 + 1e-12);

  // five steps on f(w) = w^2 against an independent scalar recurrence
  autodiff::Param w("w", Tensor::scalar(0.7));
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Adam opt2(lr, b1, b2, eps);
  double w_ref = 0.7, m = 0.0, v = 0.0;
  for (int t = 1; t <= 5; ++t) {
    w.zero_grad();
    w.grad[0] = 2.0 * w.value[0];
    opt2.step({&w});
    const double grad = 2.0 * w_ref;
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad * grad;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    w_ref -= lr * mh / (std::sqrt(vh) + eps);
    CHECK(w.value[0] == doctest::Approx(w_ref).epsilon(1e-12));
  }
}

TEST_CASE("train counts optimizer invocations and is seed-deterministic") {
  auto [g_spec, d_spec] = make_preset("1cnn-gan");
  g_spec.hidden = 8;  // desk-size for the unit test
  d_spec.mbd_outputs = 3;

  data::SineCorpusConfig scfg;
  scfg.n_train = 16;
  scfg.n_test = 4;
  scfg.seed = 1;
  auto [train_data, test_data] = data::generate_sine_corpus(scfg);

  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 16;
  tc.d_steps_per_g = 1;
  tc.seed = 9;

  Gan gan1(g_spec, d_spec, tc.seed);
  TrainResult r1 = train(gan1, tc, train_data, {}, {});
  CHECK(r1.d_updates == 1);
  CHECK(r1.g_updates == 1);  // exactly 2 optimizer invocations
  REQUIRE(r1.reports.size() == 1);
  CHECK(std::isfinite(r1.reports[0].d_loss));
  CHECK(std::isfinite(r1.reports[0].g_loss));

  tc.epochs = 2;
  tc.batch_size = 8;
  tc.d_steps_per_g = 2;
  Gan gan2(g_spec, d_spec, tc.seed);
  TrainResult r2 = train(gan2, tc, train_data, {}, {});
  Gan gan3(g_spec, d_spec, tc.seed);
  TrainResult r3 = train(gan3, tc, train_data, {}, {});
  REQUIRE(r2.reports.size() == r3.reports.size());
  for (std::size_t i = 0; i < r2.reports.size(); ++i) {
    CHECK(r2.reports[i].g_loss == r3.reports[i].g_loss);
    CHECK(r2.reports[i].d_loss == r3.reports[i].d_loss);
  }
  CHECK(r2.d_updates == 2 * 2 * 2);  // epochs * batches * k
}

TEST_CASE("train flags divergence instead of throwing") {
  auto [g_spec, d_spec] = make_preset("1cnn-gan");
  g_spec.hidden = 4;
  data::SineCorpusConfig scfg;
  scfg.n_train = 8;
  scfg.n_test = 4;
  auto [train_data, test_data] = data::generate_sine_corpus(scfg);

  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.seed = 5;
  tc.divergence_threshold = 1e-12;  // everything trips it
  Gan gan(g_spec, d_spec, tc.seed);
  TrainResult r = train(gan, tc, train_data, {}, {});
  CHECK(r.failed);
  CHECK(!r.failure.empty());
}

TEST_CASE("train validates its config") {
  auto [g_spec, d_spec] = make_preset("1cnn-gan");
  data::SeriesBatch data(4, 40);
  Gan gan(g_spec, d_spec, 1);
  TrainConfig tc;
  tc.batch_size = 1;
  CHECK_THROWS_AS(train(gan, tc, data, {}, {}), ValueError);
  tc.batch_size = 2;
  tc.learning_rate = 0.0;
  CHECK_THROWS_AS(train(gan, tc, data, {}, {}), ValueError);
}

TEST_CASE("preset list matches the seven architectures") {
  auto names = preset_names();
  REQUIRE(names.size() == 7);
  CHECK(names == std::vector<std::string>{"lstm-gan", "1cnn-gan", "2cnn-gan", "1cnn-bilstm-gan",
                                          "2cnn-bilstm-gan", "4cnn-gan", "4cnn-bilstm-gan"});
  for (const auto& n : names) {
    auto [g_spec, d_spec] = make_preset(n);
    CHECK(g_spec.hidden == 50);
    Gan gan(g_spec, d_spec, 0);  // constructs and traces without error
    CHECK(gan.t_len() == (n.rfind("4cnn", 0) == 0 ? 187 : 40));
  }
  CHECK_THROWS_AS(make_preset("8cnn-gan"), ValueError);
}

TEST_CASE("resolved 4cnn stack trace on length-187 input") {
  auto [g_spec, d_spec] = make_preset("4cnn-gan");
  Rng rng(3);
  Discriminator disc(d_spec, 187, rng);
  const auto& t = disc.shape_trace();
  REQUIRE(t.size() == 8);
  using P = std::pair<std::size_t, std::size_t>;
  CHECK(t[0] == P{3, 185});
  CHECK(t[1] == P{3, 183});
  CHECK(t[2] == P{5, 181});
  CHECK(t[3] == P{5, 90});
  CHECK(t[4] == P{8, 44});
  CHECK(t[5] == P{8, 21});
  CHECK(t[6] == P{12, 9});
  CHECK(t[7] == P{12, 3});
  CHECK(disc.feature_size() == 36);
}

TEST_CASE("checkpoint round-trip yields bit-identical generation") {
  auto [g_spec, d_spec] = make_preset("1cnn-bilstm-gan");
  g_spec.hidden = 6;
  d_spec.mbd_outputs = 3;
  Gan a(g_spec, d_spec, 77);

  nlohmann::json doc;
  doc["arch"] = a.arch_json();
  {
    gan::ParamSet params = a.all_params();
    doc["params"] = checkpoint::params_to_json(params);
  }

  Gan b = Gan::from_arch_json(doc.at("arch"));
  {
    gan::ParamSet params = b.all_params();
    checkpoint::params_from_json(doc.at("params"), params);
  }

  Rng n1(123), n2(123);
  data::SeriesBatch za = sample_noise(4, a.t_len(), n1);
  data::SeriesBatch zb = sample_noise(4, b.t_len(), n2);
  CHECK(a.generator().generate(za).values == b.generator().generate(zb).values);
}
