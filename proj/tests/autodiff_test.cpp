#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "tsgan/autodiff.hpp"

using namespace tsgan;
using autodiff::Graph;
using autodiff::NodeId;
using autodiff::Param;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(s));
  for (double& v : t.values) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("forward op identities") {
  Graph g;
  NodeId a = g.input(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  NodeId eye = g.input(Tensor::identity(2));
  NodeId prod = g.matmul(a, eye);
  CHECK(g.value(prod).values == std::vector<double>{1, 2, 3, 4});

  NodeId s = g.sigmoid(g.input(Tensor::scalar(0.0)));
  CHECK(g.value(s)[0] == doctest::Approx(0.5));

  NodeId r = g.relu(g.input(Tensor::vec({-1.0, 0.0, 2.0})));
  CHECK(g.value(r).values == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("shape errors name the op and shapes") {
  Graph g;
  NodeId a = g.input(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  NodeId b = g.input(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("matmul"), ShapeError);
  NodeId c = g.input(Tensor::vec({1, 2}));
  CHECK_THROWS_AS(g.add(a, c), ShapeError);
}

TEST_CASE("log rejects non-positive input") {
  Graph g;
  NodeId a = g.input(Tensor::vec({1.0, -0.5}));
  CHECK_THROWS_AS(g.log(a), ValueError);
  NodeId b = g.input(Tensor::vec({0.0}));
  CHECK_THROWS_AS(g.log(b), ValueError);
}

TEST_CASE("backward of sum of squares") {
  Param x("x", Tensor::vec({1.0, 2.0}));
  Graph g;
  NodeId root = g.sum(g.square(g.param(x)));
  g.backward(root);
  CHECK(x.grad[0] == doctest::Approx(2.0));
  CHECK(x.grad[1] == doctest::Approx(4.0));
}

TEST_CASE("backward of sigmoid at zero") {
  Param w("w", Tensor::scalar(0.0));
  Graph g;
  NodeId root = g.sigmoid(g.param(w));
  g.backward(root);
  CHECK(w.grad[0] == doctest::Approx(0.25));
}

TEST_CASE("backward requires a scalar root") {
  Param x("x", Tensor::vec({1.0, 2.0}));
  Graph g;
  NodeId root = g.square(g.param(x));
  CHECK_THROWS_AS(g.backward(root), ValueError);
}

TEST_CASE("grad accumulation doubles without zero_grads and clears with it") {
  Param x("x", Tensor::vec({0.3, -0.7, 1.1}));
  auto run_backward = [&] {
    Graph g;
    NodeId root = g.sum(g.square(g.param(x)));
    g.backward(root);
  };
  run_backward();
  std::vector<double> once = x.grad;
  run_backward();
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(x.grad[i] == doctest::Approx(2.0 * once[i]));

  autodiff::zero_grads({&x});
  for (double v : x.grad) CHECK(v == 0.0);

  Param fresh("f", Tensor::vec({1.0}));
  autodiff::zero_grads({&fresh});
  CHECK(fresh.grad[0] == 0.0);
}

TEST_CASE("two backward calls on the same graph also double param grads") {
  Param x("x", Tensor::vec({0.5, 0.25}));
  Graph g;
  NodeId root = g.sum(g.square(g.param(x)));
  g.backward(root);
  std::vector<double> once = x.grad;
  g.backward(root);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(x.grad[i] == doctest::Approx(2.0 * once[i]));
}

TEST_CASE("linearity of backward") {
  Rng rng(5);
  Param x("x", random_tensor({4}, rng));
  const double a = 0.7, b = -1.3;

  auto grad_of = [&](auto&& build) {
    autodiff::zero_grads({&x});
    Graph g;
    g.backward(build(g));
    return x.grad;
  };

  auto f = [&](Graph& g) { return g.sum(g.square(g.param(x))); };
  auto h = [&](Graph& g) { return g.sum(g.tanh(g.param(x))); };
  std::vector<double> gf = grad_of(f);
  std::vector<double> gh = grad_of(h);
  std::vector<double> combined = grad_of(
      [&](Graph& g) { return g.add(g.scale(f(g), a), g.scale(h(g), b)); });
  for (std::size_t i = 0; i < combined.size(); ++i)
    CHECK(combined[i] == doctest::Approx(a * gf[i] + b * gh[i]).epsilon(1e-12));
}

TEST_CASE("determinism: same graph same seed gives bit-identical values and grads") {
  auto run = [] {
    Rng rng(123);
    Param w("w", random_tensor({6, 6}, rng));
    Param b("b", random_tensor({6}, rng));
    Graph g;
    NodeId x = g.input(random_tensor({3, 6}, rng));
    NodeId y = g.mean(g.square(g.tanh(g.add(g.matmul(x, g.param(w), true), g.param(b)))));
    g.backward(y);
    std::vector<double> out = g.value(y).values;
    out.insert(out.end(), w.grad.begin(), w.grad.end());
    out.insert(out.end(), b.grad.begin(), b.grad.end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("finite differences validate every primitive op") {
  Rng rng(17);
  // scalar-output builders over a 3x4 param and a 4-vector param
  Param a("a", random_tensor({3, 4}, rng));
  Param v("v", random_tensor({4}, rng, 0.1, 1.5));  // positive for log
  Param w("w", random_tensor({5, 4}, rng));

  using Build = std::function<NodeId(Graph&)>;
  std::vector<std::pair<const char*, Build>> cases;
  cases.emplace_back("matmul_nt+mean", [&](Graph& g) { return g.mean(g.matmul(g.param(a), g.param(w), true)); });
  cases.emplace_back("matmul_vec", [&](Graph& g) { return g.mean(g.matmul(g.param(a), g.param(v))); });
  cases.emplace_back("add_row_broadcast", [&](Graph& g) { return g.mean(g.square(g.add(g.param(a), g.param(v)))); });
  cases.emplace_back("sub_scalar", [&](Graph& g) {
    return g.mean(g.square(g.sub(g.param(a), g.input(Tensor::scalar(0.3)))));
  });
  cases.emplace_back("mul_broadcast", [&](Graph& g) { return g.mean(g.mul(g.param(a), g.param(v))); });
  cases.emplace_back("max_vs_const", [&](Graph& g) {
    return g.mean(g.max(g.param(a), g.input(Tensor::scalar(0.1))));
  });
  cases.emplace_back("concat_slice", [&](Graph& g) {
    NodeId c = g.concat(std::vector<NodeId>{g.param(a), g.param(a)}, 1);
    return g.mean(g.square(g.slice(c, 1, 2, 4)));
  });
  cases.emplace_back("reshape_sum", [&](Graph& g) { return g.sum(g.reshape(g.param(a), {4, 3})); });
  cases.emplace_back("exp_mean", [&](Graph& g) { return g.mean(g.exp(g.param(a))); });
  cases.emplace_back("log_mean", [&](Graph& g) { return g.mean(g.log(g.param(v))); });
  cases.emplace_back("tanh_mean", [&](Graph& g) { return g.mean(g.tanh(g.param(a))); });
  cases.emplace_back("sigmoid_mean", [&](Graph& g) { return g.mean(g.sigmoid(g.param(a))); });
  cases.emplace_back("abs_mean", [&](Graph& g) { return g.mean(g.abs(g.param(a))); });
  cases.emplace_back("square_scale", [&](Graph& g) { return g.scale(g.mean(g.square(g.param(a))), -2.5); });

  for (auto& [name, build] : cases) {
    CAPTURE(name);
    autodiff::zero_grads({&a, &v, &w});
    Graph g;
    NodeId root = build(g);
    g.backward(root);
    auto eval = [&] {
      Graph fresh;
      return fresh.value(build(fresh))[0];
    };
    auto res = testutil::check_grads({&a, &v, &w}, eval);
    CHECK_MESSAGE(res.ok, name, ": ", res.what);
  }
}

TEST_CASE("finite differences validate conv, pool and minibatch discrimination nodes") {
  Rng rng(29);
  Param x("x", random_tensor({2, 9}, rng));
  Param filt("filt", random_tensor({3, 2, 3}, rng));
  Param bias("bias", random_tensor({3}, rng));

  auto conv_build = [&](Graph& g) {
    return g.mean(g.square(g.conv1d(g.param(x), g.param(filt), g.param(bias), 1, 1)));
  };
  autodiff::zero_grads({&x, &filt, &bias});
  {
    Graph g;
    g.backward(conv_build(g));
  }
  auto conv_eval = [&] {
    Graph g;
    return g.value(conv_build(g))[0];
  };
  auto res = testutil::check_grads({&x, &filt, &bias}, conv_eval);
  CHECK_MESSAGE(res.ok, "conv1d: ", res.what);

  auto pool_build = [&](Graph& g) { return g.mean(g.maxpool1d(g.param(x), 3, 2)); };
  autodiff::zero_grads({&x});
  {
    Graph g;
    g.backward(pool_build(g));
  }
  auto pool_eval = [&] {
    Graph g;
    return g.value(pool_build(g))[0];
  };
  res = testutil::check_grads({&x}, pool_eval);
  CHECK_MESSAGE(res.ok, "maxpool1d: ", res.what);

  Param f("f", random_tensor({4, 5}, rng));
  Param t3("t3", random_tensor({5, 2, 3}, rng));
  auto mbd_build = [&](Graph& g) { return g.mean(g.square(g.minibatch_discrim(g.param(f), g.param(t3)))); };
  autodiff::zero_grads({&f, &t3});
  {
    Graph g;
    g.backward(mbd_build(g));
  }
  auto mbd_eval = [&] {
    Graph g;
    return g.value(mbd_build(g))[0];
  };
  res = testutil::check_grads({&f, &t3}, mbd_eval);
  CHECK_MESSAGE(res.ok, "minibatch_discrim: ", res.what);
}

TEST_CASE("conv1d geometry errors") {
  Graph g;
  NodeId x = g.input(Tensor::zeros({1, 10}));
  NodeId filt = g.input(Tensor::zeros({2, 1, 3}));
  NodeId bias = g.input(Tensor::zeros({2}));
  // (10 - 3) / 2 leaves a remainder
  CHECK_THROWS_WITH_AS(g.conv1d(x, filt, bias, 2, 0), doctest::Contains("divide"), ValueError);
  // floor mode accepts it: (10 - 3) / 2 + 1 = 4
  NodeId y = g.conv1d(x, filt, bias, 2, 0, true);
  CHECK(g.value(y).shape == Shape{2, 4});
  NodeId tiny = g.input(Tensor::zeros({1, 2}));
  CHECK_THROWS_AS(g.conv1d(tiny, filt, bias, 1, 0), ValueError);
}

TEST_CASE("maxpool1d window errors and ties") {
  Graph g;
  NodeId x = g.input(Tensor::zeros({1, 2}));
  CHECK_THROWS_AS(g.maxpool1d(x, 3, 1), ValueError);

  // tie routes gradient to the first maximal position
  Param p("p", Tensor::matrix(1, 3, {1.0, 1.0, 0.0}));
  Graph g2;
  NodeId root = g2.sum(g2.maxpool1d(g2.param(p), 3, 1));
  g2.backward(root);
  CHECK(p.grad == std::vector<double>{1.0, 0.0, 0.0});
}
