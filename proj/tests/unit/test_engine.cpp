#include <doctest.h>

#include "oracles.hpp"
#include "zcnas/common/error.hpp"
#include "zcnas/engine/network.hpp"

using namespace zc;

namespace {

Network linear_net(int in, int out, bool bias) {
  GraphBuilder g;
  int x = g.input({static_cast<std::size_t>(in)});
  x = g.linear(x, in, out, bias, "fc");
  return Network(g.build(x), InitConfig{});
}

Tensor row(std::vector<double> v) {
  const auto n = v.size();
  return Tensor({1, n}, std::move(v));
}

GradientSet single(const std::string& name, Tensor t) {
  GradientSet g;
  g.params.emplace(name, std::move(t));
  return g;
}

}  // namespace

TEST_CASE("zero-initialized linear layer outputs zero") {
  Network net = linear_net(2, 1, true);
  net.parameter("fc.weight").data = {0.0, 0.0};
  net.parameter("fc.bias").data = {0.0};
  const Tensor y = net.forward(row({1.0, 1.0}));
  REQUIRE(y.size() == 1);
  CHECK(y[0] == 0.0);
}

TEST_CASE("same spec and seed give bit-identical parameters") {
  Rng rng(3);
  const auto t = oracle::random_tiny_net(rng);
  for (InitScheme s : {InitScheme::Default, InitScheme::KaimingNormal, InitScheme::XavierUniform}) {
    const InitConfig init{s, BiasMode::SchemeDefault, 42};
    Network a(t.graph, init), b(t.graph, init);
    for (std::size_t p = 0; p < a.values().size(); ++p) CHECK(a.values()[p].data == b.values()[p].data);
    Network c(t.graph, InitConfig{s, BiasMode::SchemeDefault, 43});
    CHECK(a.values()[0].data != c.values()[0].data);
  }
}

TEST_CASE("zero bias mode zeroes every bias") {
  Rng rng(4);
  const auto t = oracle::random_tiny_net(rng);
  Network net(t.graph, InitConfig{InitScheme::KaimingNormal, BiasMode::Zero, 1});
  for (std::size_t p = 0; p < net.parameters().size(); ++p) {
    const auto& meta = net.parameters()[p];
    if (meta.is_bias && meta.name.find("bn") == std::string::npos)
      for (double v : net.values()[p].data) CHECK(v == 0.0);
  }
}

TEST_CASE("default init draws within the fan-in bound") {
  Network net = linear_net(16, 8, true);
  for (double v : net.parameter("fc.weight").data) CHECK(std::abs(v) <= 0.25);
  for (double v : net.parameter("fc.bias").data) CHECK(std::abs(v) <= 0.25);
}

TEST_CASE("channel mismatch between layers is a shape error") {
  GraphBuilder g;
  int x = g.input({3, 4, 4});
  x = g.conv2d(x, 3, 8, 3, 1, 1, false, "a");
  x = g.conv2d(x, 4, 8, 3, 1, 1, false, "b");
  CHECK_THROWS_AS(Network(g.build(x), InitConfig{}), ShapeError);
}

TEST_CASE("cyclic graph is rejected") {
  GraphSpec spec;
  NodeSpec in;
  in.name = "input";
  in.kind = OpKind::Input;
  in.shape = {2};
  NodeSpec a;
  a.name = "a";
  a.kind = OpKind::Relu;
  a.inputs = {2};
  NodeSpec b;
  b.name = "b";
  b.kind = OpKind::Relu;
  b.inputs = {1};
  spec.nodes = {in, a, b};
  CHECK_THROWS_AS(Network(spec, InitConfig{}), ShapeError);
}

TEST_CASE("unknown operator kind is rejected") {
  CHECK_THROWS_AS(parse_op_kind("softmax"), ShapeError);
  CHECK(parse_op_kind("conv2d") == OpKind::Conv2d);
}

TEST_CASE("skip connection network is the identity") {
  GraphBuilder g;
  const int x = g.input({2, 3, 3});
  const int z = g.zero(x, "none");
  const int y = g.add({x, z}, "sum");
  Network net(g.build(y), InitConfig{});
  Rng rng(5);
  const Tensor in = oracle::random_tensor({2, 2, 3, 3}, rng);
  CHECK(net.forward(in).data == in.data);
}

TEST_CASE("hand linear layer") {
  Network net = linear_net(2, 1, true);
  net.parameter("fc.weight").data = {1.0, 1.0};
  net.parameter("fc.bias").data = {0.0};
  CHECK(net.forward(row({2.0, 3.0}))[0] == 5.0);
}

TEST_CASE("all-ones 3x3 convolution on an all-ones image") {
  GraphBuilder g;
  int x = g.input({1, 3, 3});
  x = g.conv2d(x, 1, 1, 3, 1, 1, false, "conv");
  Network net(g.build(x), InitConfig{});
  std::fill(net.parameter("conv.weight").data.begin(), net.parameter("conv.weight").data.end(), 1.0);
  const Tensor y = net.forward(Tensor({1, 1, 3, 3}, 1.0));
  CHECK(y[4] == 9.0);
  for (std::size_t corner : {0u, 2u, 6u, 8u}) CHECK(y[corner] == 4.0);
  CHECK(y[1] == 6.0);
}

TEST_CASE("non-finite activation names the node") {
  Network net = linear_net(1, 1, false);
  net.parameter("fc.weight").data = {1e308};
  try {
    net.forward(row({1e308}));
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.node() == net.node_index("fc"));
  }
}

TEST_CASE("squared error gradient by hand") {
  Network net = linear_net(1, 1, false);
  net.parameter("fc.weight").data = {1.0};
  const auto g = net.backward(LossSpec::squared_error(row({0.0})), row({2.0}));
  CHECK(g.params.at("fc.weight")[0] == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(g.loss == doctest::Approx(2.0));
}

TEST_CASE("zeroized branch gets exactly zero gradient") {
  GraphBuilder g;
  const int x = g.input({3});
  const int a = g.linear(x, 3, 2, true, "dead");
  const int z = g.zero(a, "none");
  const int b = g.linear(x, 3, 2, true, "live");
  const int y = g.add({z, b}, "sum");
  Network net(g.build(y), InitConfig{InitScheme::Default, BiasMode::SchemeDefault, 9});
  Rng rng(1);
  const auto grads = net.backward(LossSpec::cross_entropy({0, 1}), oracle::random_tensor({2, 3}, rng));
  for (double v : grads.params.at("dead.weight").data) CHECK(v == 0.0);
  for (double v : grads.params.at("dead.bias").data) CHECK(v == 0.0);
  double live = 0.0;
  for (double v : grads.params.at("live.weight").data) live += std::abs(v);
  CHECK(live > 0.0);
}

TEST_CASE("cross-entropy needs one label per sample") {
  Network net = linear_net(2, 3, true);
  CHECK_THROWS_AS(net.backward(LossSpec::cross_entropy({0}), Tensor({2, 2}, 1.0)), Error);
}

TEST_CASE("backward matches central differences on random networks") {
  Rng rng(2024);
  for (int trial = 0; trial < 6; ++trial) {
    const auto t = oracle::random_tiny_net(rng);
    Network net(t.graph, InitConfig{InitScheme::Default, BiasMode::SchemeDefault, static_cast<std::uint64_t>(trial)});
    zc::Shape bs = t.input;
    bs.insert(bs.begin(), 3);
    const Tensor batch = oracle::random_tensor(bs, rng);
    const LossSpec loss = LossSpec::cross_entropy(oracle::random_labels(3, t.classes, rng));
    const auto analytic = oracle::flatten(net, net.backward(loss, batch));
    const auto fd = oracle::fd_gradient(net, batch, loss);
    CAPTURE(trial);
    CHECK(oracle::max_rel_error(analytic, fd) <= 1e-4);
  }
}

TEST_CASE("every node has an activation gradient after backward") {
  Rng rng(8);
  const auto t = oracle::random_tiny_net(rng);
  Network net(t.graph, InitConfig{});
  zc::Shape bs = t.input;
  bs.insert(bs.begin(), 2);
  const auto g = net.backward(LossSpec::cross_entropy(oracle::random_labels(2, t.classes, rng)),
                              oracle::random_tensor(bs, rng));
  const auto acts = net.activations();
  CHECK(acts.size() == t.graph.nodes.size());
  for (const auto& [name, a] : acts) {
    REQUIRE(g.activations.count(name) == 1);
    CHECK(g.activations.at(name).shape == a.shape);
  }
}

TEST_CASE("hvp of a unit Hessian returns the direction") {
  Network net = linear_net(1, 1, false);
  net.parameter("fc.weight").data = {0.7};
  const LossSpec loss = LossSpec::squared_error(row({0.0}));
  for (HvpMethod m : {HvpMethod::DualNumbers, HvpMethod::FiniteDifference}) {
    const auto hv = net.hvp(loss, row({1.0}), single("fc.weight", Tensor({1, 1}, 3.0)), m);
    CHECK(hv.params.at("fc.weight")[0] == doctest::Approx(3.0).epsilon(1e-9));
  }
}

TEST_CASE("hvp of the all-ones Hessian") {
  Network net = linear_net(2, 1, false);
  net.parameter("fc.weight").data = {0.3, -0.8};
  const LossSpec loss = LossSpec::squared_error(row({0.0}));
  for (HvpMethod m : {HvpMethod::DualNumbers, HvpMethod::FiniteDifference}) {
    const auto hv = net.hvp(loss, row({1.0, 1.0}), single("fc.weight", Tensor({1, 2}, std::vector<double>{1.0, 0.0})), m);
    CHECK(hv.params.at("fc.weight")[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(hv.params.at("fc.weight")[1] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("hvp matches the explicitly assembled Hessian") {
  Rng rng(77);
  for (int trial = 0; trial < 4; ++trial) {
    const auto t = oracle::random_hessian_net(rng);
    Network net(t.graph, InitConfig{InitScheme::Default, BiasMode::SchemeDefault, static_cast<std::uint64_t>(trial)});
    REQUIRE(net.parameter_count() <= 200);
    const Tensor batch = oracle::random_tensor({4, 1, 3, 3}, rng);
    const LossSpec loss = LossSpec::cross_entropy(oracle::random_labels(4, 3, rng));
    const auto H = oracle::explicit_hessian(net, batch, loss);
    std::vector<double> v(net.parameter_count());
    for (auto& x : v) x = normal(rng);
    const auto expect = oracle::matvec(H, v);
    for (HvpMethod m : {HvpMethod::DualNumbers, HvpMethod::FiniteDifference}) {
      const auto got = oracle::flatten(net, net.hvp(loss, batch, oracle::unflatten(net, v), m));
      CAPTURE(trial);
      CHECK(oracle::norm_rel_error(got, expect) <= 1e-3);
    }
  }
}

TEST_CASE("hvp is linear in the direction") {
  Rng rng(5);
  const auto t = oracle::random_hessian_net(rng);
  Network net(t.graph, InitConfig{});
  const Tensor batch = oracle::random_tensor({4, 1, 3, 3}, rng);
  const LossSpec loss = LossSpec::cross_entropy(oracle::random_labels(4, 3, rng));
  const std::size_t n = net.parameter_count();
  std::vector<double> v1(n), v2(n), mix(n);
  for (std::size_t i = 0; i < n; ++i) {
    v1[i] = normal(rng);
    v2[i] = normal(rng);
    mix[i] = 2.5 * v1[i] - 0.75 * v2[i];
  }
  const auto h1 = oracle::flatten(net, net.hvp(loss, batch, oracle::unflatten(net, v1)));
  const auto h2 = oracle::flatten(net, net.hvp(loss, batch, oracle::unflatten(net, v2)));
  const auto hm = oracle::flatten(net, net.hvp(loss, batch, oracle::unflatten(net, mix)));
  std::vector<double> comb(n);
  for (std::size_t i = 0; i < n; ++i) comb[i] = 2.5 * h1[i] - 0.75 * h2[i];
  CHECK(oracle::norm_rel_error(hm, comb) <= 1e-8);
}

TEST_CASE("hvp direction must mirror the parameters") {
  Network net = linear_net(2, 1, true);
  CHECK_THROWS_AS(net.hvp(LossSpec::squared_error(row({0.0})), row({1.0, 1.0}), single("fc.weight", Tensor({1, 2}))),
                  ShapeError);
}

TEST_CASE("sgd with zero gradients and no decay leaves parameters unchanged") {
  Network net = linear_net(3, 2, true);
  const auto before = net.values();
  GradientSet g;
  for (std::size_t p = 0; p < net.parameters().size(); ++p)
    g.params.emplace(net.parameters()[p].name, Tensor(net.values()[p].shape));
  sgd_step(net, g, SgdHyper{0.1, 0.9, true, 0.0});
  for (std::size_t p = 0; p < before.size(); ++p) CHECK(net.values()[p].data == before[p].data);
}

TEST_CASE("plain sgd step by hand") {
  Network net = linear_net(1, 1, false);
  net.parameter("fc.weight").data = {1.0};
  sgd_step(net, single("fc.weight", Tensor({1, 1}, 1.0)), SgdHyper{0.1, 0.0, false, 0.0});
  CHECK(net.parameter("fc.weight")[0] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("momentum buffers persist across steps") {
  Network net = linear_net(1, 1, false);
  net.parameter("fc.weight").data = {0.0};
  const SgdHyper hp{0.1, 0.9, false, 0.0};
  sgd_step(net, single("fc.weight", Tensor({1, 1}, 1.0)), hp);
  CHECK(net.parameter("fc.weight")[0] == doctest::Approx(-0.1).epsilon(1e-14));
  sgd_step(net, single("fc.weight", Tensor({1, 1}, 1.0)), hp);
  CHECK(net.parameter("fc.weight")[0] == doctest::Approx(-0.29).epsilon(1e-14));
}

TEST_CASE("negative learning rate is rejected") {
  Network net = linear_net(1, 1, false);
  CHECK_THROWS_AS(sgd_step(net, single("fc.weight", Tensor({1, 1}, 1.0)), SgdHyper{-0.1, 0.0, false, 0.0}),
                  ConfigError);
}

TEST_CASE("forward and gradients are bit-reproducible") {
  Rng rng(6);
  const auto t = oracle::random_tiny_net(rng);
  zc::Shape bs = t.input;
  bs.insert(bs.begin(), 3);
  const Tensor batch = oracle::random_tensor(bs, rng);
  const LossSpec loss = LossSpec::cross_entropy(oracle::random_labels(3, t.classes, rng));
  Network a(t.graph, InitConfig{}), b(t.graph, InitConfig{});
  CHECK(a.forward(batch).data == b.forward(batch).data);
  CHECK(oracle::flatten(a, a.backward(loss, batch)) == oracle::flatten(b, b.backward(loss, batch)));
}

TEST_CASE("batchnorm running statistics use momentum 0.1 and the unbiased variance") {
  GraphBuilder g;
  int x = g.input({1, 1, 2});
  x = g.batchnorm(x, 1, "bn");
  Network net(g.build(x), InitConfig{});
  net.forward(Tensor({2, 1, 1, 2}, std::vector<double>{1.0, 2.0, 3.0, 4.0}));
  net.set_training(false);
  // running mean = 0.1 * 2.5, running var = 0.9 + 0.1 * (5/3)
  const double mean = 0.25, var = 0.9 + 0.1 * (5.0 / 3.0);
  const Tensor y = net.forward(Tensor({1, 1, 1, 2}, std::vector<double>{1.0, 2.0}));
  CHECK(y[0] == doctest::Approx((1.0 - mean) / std::sqrt(var + 1e-5)).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx((2.0 - mean) / std::sqrt(var + 1e-5)).epsilon(1e-12));
}
