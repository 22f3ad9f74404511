#include <doctest.h>

#include <map>
#include <set>

#include "oracles.hpp"
#include "zcnas/common/error.hpp"
#include "zcnas/space/space.hpp"

using namespace zc;

namespace {

SpaceSpec make_space(int n_nodes, std::vector<std::string> ops) {
  SpaceSpec s;
  s.name = "custom";
  s.n_nodes = n_nodes;
  s.op_set = std::move(ops);
  return s;
}

Architecture uniform_arch(const SpaceSpec& spec, int op) {
  return Architecture{std::vector<int>(static_cast<std::size_t>(spec.edge_count()), op)};
}

int op_of(const SpaceSpec& spec, const std::string& label) {
  for (std::size_t i = 0; i < spec.op_set.size(); ++i)
    if (spec.op_set[i] == label) return static_cast<int>(i);
  return -1;
}

std::uint64_t brute_power(std::uint64_t base, int exp) {
  std::uint64_t n = 1;
  for (int i = 0; i < exp; ++i) n *= base;
  return n;
}

// Parameter count of the macro skeleton summed component by component.
std::uint64_t expected_params(const Architecture& a, const SpaceSpec& spec, const ScaleConfig& sc) {
  std::uint64_t c = static_cast<std::uint64_t>(sc.channels);
  std::uint64_t total = static_cast<std::uint64_t>(sc.in_channels) * c * 9 + 2 * c;
  for (int s = 0; s < sc.stages; ++s) {
    if (s > 0) {
      total += c * (2 * c) * 9 + 2 * (2 * c);
      c *= 2;
    }
    for (int k = 0; k < sc.cells_per_stage; ++k)
      for (int op : a.ops) {
        const auto& label = spec.op_set[static_cast<std::size_t>(op)];
        if (label == "nor_conv_3x3") total += 9 * c * c + 2 * c;
        if (label == "nor_conv_1x1") total += c * c + 2 * c;
      }
  }
  const auto k = static_cast<std::uint64_t>(sc.classes);
  return total + 2 * c + c * k + k;
}

// Multiply-accumulates of the skeleton, with the spatial size of a stride-2
// 3x3 conv with padding 1 being floor((r - 1) / 2) + 1.
std::uint64_t expected_macs(const Architecture& a, const SpaceSpec& spec, const ScaleConfig& sc) {
  std::uint64_t c = static_cast<std::uint64_t>(sc.channels);
  std::uint64_t r = static_cast<std::uint64_t>(sc.resolution);
  std::uint64_t total = 9 * static_cast<std::uint64_t>(sc.in_channels) * c * r * r;
  for (int s = 0; s < sc.stages; ++s) {
    if (s > 0) {
      r = (r - 1) / 2 + 1;
      total += 9 * c * 2 * c * r * r;
      c *= 2;
    }
    for (int k = 0; k < sc.cells_per_stage; ++k)
      for (int op : a.ops) {
        const auto& label = spec.op_set[static_cast<std::size_t>(op)];
        if (label == "nor_conv_3x3") total += 9 * c * c * r * r;
        if (label == "nor_conv_1x1") total += c * c * r * r;
      }
  }
  return total + c * static_cast<std::uint64_t>(sc.classes);
}

}  // namespace

TEST_CASE("default space has 15625 architectures") {
  const auto spec = nb201_space();
  CHECK(spec.edge_count() == 6);
  CHECK(space_size(spec) == 15625);
  CHECK(enumerate_space(spec).size() == 15625);
}

TEST_CASE("one edge with two ops gives two architectures") {
  const auto spec = make_space(2, {"none", "skip_connect"});
  const auto all = enumerate_space(spec);
  REQUIRE(all.size() == 2);
  CHECK(all[0].ops == std::vector<int>{0});
  CHECK(all[1].ops == std::vector<int>{1});
}

TEST_CASE("space size equals op count to the power of edge count") {
  const std::vector<std::vector<std::string>> op_sets = {
      {"none"}, {"none", "skip_connect"}, {"nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3"}, nb201_space().op_set};
  for (int n = 2; n <= 5; ++n)
    for (const auto& ops : op_sets) {
      const auto spec = make_space(n, ops);
      CHECK(space_size(spec) == brute_power(ops.size(), n * (n - 1) / 2));
    }
  CHECK_THROWS_AS(space_size(make_space(40, nb201_space().op_set)), ConfigError);
  CHECK_THROWS_AS(enumerate_space(nb201_space(), 100), ConfigError);
}

TEST_CASE("invalid spaces are rejected") {
  CHECK_THROWS_AS(make_space(1, {"none"}).validate(), ConfigError);
  CHECK_THROWS_AS(make_space(3, {}).validate(), ConfigError);
  CHECK_THROWS_AS(make_space(3, {"none", "none"}).validate(), ConfigError);
  CHECK_THROWS_AS(make_space(3, {"dilated_conv"}).validate(), ConfigError);
  CHECK(cell_op_from_label("nor_conv_3x3") == CellOp::Conv3x3);
  CHECK(cell_op_from_label("skip") == CellOp::Skip);
}

TEST_CASE("enumeration is lexicographic and matches the index mapping") {
  const auto spec = mini_space();
  const auto all = enumerate_space(spec);
  REQUIRE(all.size() == 125);
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(arch_index(spec, all[i]) == i);
    if (i > 0) CHECK(all[i - 1] < all[i]);
  }
  CHECK_THROWS_AS(arch_from_index(spec, 125), ConfigError);
}

TEST_CASE("canonical string of a known cell") {
  const auto spec = nb201_space();
  const Architecture a{{op_of(spec, "nor_conv_3x3"), op_of(spec, "skip_connect"), op_of(spec, "none"),
                        op_of(spec, "avg_pool_3x3"), op_of(spec, "nor_conv_1x1"), op_of(spec, "skip_connect")}};
  const std::string s = "|nor_conv_3x3~0|+|skip_connect~0|none~1|+|avg_pool_3x3~0|nor_conv_1x1~1|skip_connect~2|";
  CHECK(canonical_string(a, spec) == s);
  CHECK(parse_string(s, spec) == a);
}

TEST_CASE("string round trip over the whole default space is injective") {
  const auto spec = nb201_space();
  std::set<std::string> seen;
  for (const auto& a : enumerate_space(spec)) {
    const auto s = canonical_string(a, spec);
    CHECK(seen.insert(s).second);
    if (parse_string(s, spec) != a) FAIL("round trip failed for " << s);
  }
  CHECK(seen.size() == 15625);
}

TEST_CASE("malformed strings are rejected") {
  const auto spec = mini_space();
  CHECK_THROWS_AS(parse_string("|conv_5x5~0|+|none~0|none~1|", spec), ConfigError);
  CHECK_THROWS_AS(parse_string("|none~0|+|none~0|", spec), ConfigError);
  CHECK_THROWS_AS(parse_string("|none~0|+|none~0|none~1|+|none~0|", spec), ConfigError);
  CHECK_THROWS_AS(parse_string("|none~1|+|none~0|none~1|", spec), ConfigError);
  CHECK_THROWS_AS(parse_string("|none|+|none~0|none~1|", spec), ConfigError);
  CHECK_THROWS_AS(parse_string("", spec), ConfigError);
  CHECK_THROWS_AS(canonical_string(Architecture{{0, 0}}, spec), ConfigError);
}

TEST_CASE("random architectures are uniform over edge ops") {
  const auto spec = nb201_space();
  Rng rng(derive_seed(11, 1));
  const int draws = 100000;
  std::vector<std::vector<int>> counts(6, std::vector<int>(5, 0));
  for (int i = 0; i < draws; ++i) {
    const auto a = random_architecture(spec, rng);
    REQUIRE(a.ops.size() == 6);
    for (std::size_t e = 0; e < 6; ++e) ++counts[e][static_cast<std::size_t>(a.ops[e])];
  }
  // 24 degrees of freedom; 99% critical value 42.98.
  const double expected = draws / 5.0;
  double chi2 = 0.0;
  for (const auto& edge : counts)
    for (int c : edge) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 42.98);
}

TEST_CASE("random architecture in a one-op space is constant") {
  const auto spec = make_space(4, {"nor_conv_3x3"});
  Rng rng(5);
  for (int i = 0; i < 20; ++i) CHECK(random_architecture(spec, rng) == uniform_arch(spec, 0));
}

TEST_CASE("random architectures are reproducible from the seed") {
  const auto spec = nb201_space();
  Rng a(77), b(77), c(78);
  std::vector<Architecture> xa, xb, xc;
  for (int i = 0; i < 50; ++i) {
    xa.push_back(random_architecture(spec, a));
    xb.push_back(random_architecture(spec, b));
    xc.push_back(random_architecture(spec, c));
  }
  CHECK(xa == xb);
  CHECK(xa != xc);
}

TEST_CASE("neighbours differ in exactly one edge") {
  const auto spec = nb201_space();
  Rng rng(9);
  for (int t = 0; t < 30; ++t) {
    const auto a = random_architecture(spec, rng);
    const auto nb = neighbors(a, spec);
    CHECK(nb.size() == 24);
    CHECK(std::set<Architecture>(nb.begin(), nb.end()).size() == 24);
    for (const auto& b : nb) {
      int diff = 0;
      for (std::size_t e = 0; e < 6; ++e) diff += a.ops[e] != b.ops[e];
      CHECK(diff == 1);
      const auto back = neighbors(b, spec);
      CHECK(std::find(back.begin(), back.end(), a) != back.end());
    }
  }
}

TEST_CASE("neighbour count is edges times ops minus one") {
  const auto all_ops = nb201_space().op_set;
  for (int n = 2; n <= 5; ++n)
    for (std::size_t k = 1; k <= 5; ++k) {
      const std::vector<std::string> ops(all_ops.begin(), all_ops.begin() + static_cast<long>(k));
      const auto spec = make_space(n, ops);
      CHECK(neighbors(uniform_arch(spec, 0), spec).size() ==
            static_cast<std::size_t>(spec.edge_count()) * (k - 1));
    }
  const auto single = make_space(4, {"none"});
  CHECK(neighbors(uniform_arch(single, 0), single).empty());
}

TEST_CASE("mutation is uniform over neighbours") {
  const auto spec = nb201_space();
  const Architecture a{{0, 1, 2, 3, 4, 0}};
  const auto nb = neighbors(a, spec);
  std::map<Architecture, int> counts;
  Rng rng(21);
  const int draws = 24000;
  for (int i = 0; i < draws; ++i) {
    const auto b = mutate(a, spec, rng);
    REQUIRE(std::find(nb.begin(), nb.end(), b) != nb.end());
    ++counts[b];
  }
  CHECK(counts.size() == 24);
  // 23 degrees of freedom; 99% critical value 41.64.
  const double expected = draws / 24.0;
  double chi2 = 0.0;
  for (const auto& [arch, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 41.64);
}

TEST_CASE("mutation in a one-op space is an error") {
  const auto spec = make_space(3, {"skip_connect"});
  Rng rng(1);
  CHECK_THROWS_AS(mutate(uniform_arch(spec, 0), spec, rng), ConfigError);
}

TEST_CASE("parameter count matches the skeleton") {
  const auto spec = nb201_space();
  Rng rng(31);
  const std::vector<ScaleConfig> scales = {ScaleConfig{}, ScaleConfig{16, 8, 2, 3, 10, 3}, ScaleConfig{4, 2, 1, 1, 2, 1},
                                           ScaleConfig{8, 3, 0, 2, 5, 3}};
  for (const auto& sc : scales)
    for (int t = 0; t < 10; ++t) {
      const auto a = random_architecture(spec, rng);
      const Network net = materialize(a, spec, sc, InitConfig{});
      CHECK(net.parameter_count() == expected_params(a, spec, sc));
    }
}

TEST_CASE("skip cell has fewer parameters than a conv3x3 cell") {
  const auto spec = nb201_space();
  const ScaleConfig sc;
  const auto skip = materialize(uniform_arch(spec, op_of(spec, "skip_connect")), spec, sc, InitConfig{});
  const auto conv = materialize(uniform_arch(spec, op_of(spec, "nor_conv_3x3")), spec, sc, InitConfig{});
  CHECK(skip.parameter_count() < conv.parameter_count());
}

TEST_CASE("all-none cell makes the logits equal the classifier bias") {
  const auto spec = nb201_space();
  const ScaleConfig sc;
  Network net = materialize(uniform_arch(spec, op_of(spec, "none")), spec, sc, InitConfig{InitScheme::Default,
                                                                                              BiasMode::SchemeDefault, 4});
  Rng rng(8);
  const Tensor x = oracle::random_tensor({5, 3, 8, 8}, rng);
  const Tensor y = net.forward(x);
  const Tensor& bias = net.parameter("classifier.bias");
  REQUIRE(y.shape == Shape{5, 4});
  for (std::size_t n = 0; n < 5; ++n)
    for (std::size_t k = 0; k < 4; ++k) CHECK(y[n * 4 + k] == doctest::Approx(bias[k]).epsilon(1e-12));
}

TEST_CASE("materialized network output shape and determinism") {
  const auto spec = mini_space();
  const ScaleConfig sc{16, 4, 1, 3, 7, 3};
  const Architecture a{{3, 2, 4}};
  const InitConfig init{InitScheme::KaimingNormal, BiasMode::Zero, 12};
  Network n1 = materialize(a, spec, sc, init), n2 = materialize(a, spec, sc, init);
  Rng rng(3);
  const Tensor x = oracle::random_tensor({2, 3, 16, 16}, rng);
  const Tensor y1 = n1.forward(x), y2 = n2.forward(x);
  CHECK(y1.shape == Shape{2, 7});
  CHECK(y1.data == y2.data);
}

TEST_CASE("resolution too small for the stage count is rejected") {
  const auto spec = mini_space();
  CHECK_THROWS_AS(build_graph(uniform_arch(spec, 0), spec, ScaleConfig{2, 4, 1, 3, 4, 3}), ConfigError);
  CHECK_THROWS_AS(build_graph(Architecture{{0, 0}}, spec, ScaleConfig{}), ConfigError);
  CHECK_THROWS_AS(build_graph(Architecture{{0, 0, 9}}, spec, ScaleConfig{}), ConfigError);
}

TEST_CASE("MAC count matches the closed form") {
  const auto spec = nb201_space();
  Rng rng(41);
  const std::vector<ScaleConfig> scales = {ScaleConfig{}, ScaleConfig{32, 16, 1, 3, 10, 3}, ScaleConfig{7, 3, 2, 3, 4, 3}};
  for (const auto& sc : scales)
    for (int t = 0; t < 10; ++t) {
      const auto a = random_architecture(spec, rng);
      CHECK(flops(a, spec, sc) == expected_macs(a, spec, sc));
    }
}

TEST_CASE("none cell contributes no cell MACs") {
  const auto spec = nb201_space();
  const ScaleConfig sc{16, 8, 1, 3, 10, 3};
  const auto none = flops(uniform_arch(spec, op_of(spec, "none")), spec, sc);
  const auto skip = flops(uniform_arch(spec, op_of(spec, "skip_connect")), spec, sc);
  const auto pool = flops(uniform_arch(spec, op_of(spec, "avg_pool_3x3")), spec, sc);
  CHECK(none == expected_macs(uniform_arch(spec, 0), make_space(4, {"none"}), sc));
  CHECK(none == skip);
  CHECK(none == pool);
}

TEST_CASE("halving resolution quarters every conv's MACs") {
  const auto spec = nb201_space();
  Rng rng(43);
  for (int t = 0; t < 10; ++t) {
    const auto a = random_architecture(spec, rng);
    const ScaleConfig big{32, 8, 1, 3, 10, 3}, small{16, 8, 1, 3, 10, 3};
    const std::uint64_t classifier = 32 * 10;
    CHECK(flops(a, spec, big) - classifier == 4 * (flops(a, spec, small) - classifier));
  }
}

TEST_CASE("MAC count does not depend on initialization") {
  const auto spec = nb201_space();
  const Architecture a{{3, 3, 2, 1, 4, 0}};
  const ScaleConfig sc;
  const auto base = flops(a, spec, sc);
  for (std::uint64_t seed : {0, 1, 99}) {
    const Network net = materialize(a, spec, sc, InitConfig{InitScheme::XavierUniform, BiasMode::Zero, seed});
    CHECK(flops(net.graph()) == base);
  }
}
