#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "oracles.hpp"
#include "zcnas/bench/synthetic.hpp"
#include "zcnas/bench/tabular.hpp"
#include "zcnas/common/error.hpp"

using namespace zc;

namespace {

std::string work_path(const std::string& name) { return std::string(ZCNAS_WORK_DIR) + "/" + name; }

DatasetSpec small_data() {
  DatasetSpec d;
  d.n_train = 64;
  d.n_val = 32;
  d.n_test = 32;
  return d;
}

TrainConfig quick_train(int epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 16;
  return t;
}

// input -> conv -> relu -> global pool -> linear, no batchnorm anywhere.
GraphSpec plain_net(int classes) {
  GraphBuilder g;
  int x = g.input({3, 8, 8});
  x = g.conv2d(x, 3, 4, 3, 1, 1, true, "conv");
  x = g.relu(x, "relu");
  x = g.global_avg_pool(x, "gap");
  x = g.flatten(x, "flat");
  x = g.linear(x, 4, classes, true, "fc");
  return g.build(x);
}

MinibenchConfig two_arch_bench() {
  MinibenchConfig cfg;
  cfg.space.name = "pair";
  cfg.space.n_nodes = 2;
  cfg.space.op_set = {"skip_connect", "nor_conv_3x3"};
  cfg.data = small_data();
  cfg.train = quick_train(2);
  cfg.seeds = 2;
  return cfg;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) lines.push_back(l);
  return lines;
}

bool same_records(const TabularBenchmark& a, const TabularBenchmark& b) {
  if (a.records.size() != b.records.size()) return false;
  for (const auto& [arch, recs] : a.records) {
    const auto it = b.records.find(arch);
    if (it == b.records.end() || it->second.size() != recs.size()) return false;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& x = recs[i];
      const auto& y = it->second[i];
      if (x.seed != y.seed || x.val_acc != y.val_acc || x.test_acc != y.test_acc || x.failed != y.failed) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("dataset generation is deterministic") {
  const DatasetSpec spec = small_data();
  const auto a = gen_dataset(spec, 5), b = gen_dataset(spec, 5), c = gen_dataset(spec, 6);
  CHECK(a.train.images.data == b.train.images.data);
  CHECK(a.val.labels == b.val.labels);
  CHECK(a.test.images.data == b.test.images.data);
  CHECK(a.train.images.data != c.train.images.data);
  CHECK(dataset_digest(a) == dataset_digest(b));
  CHECK(dataset_digest(a) != dataset_digest(c));
}

TEST_CASE("dataset splits have the requested shapes and balanced classes") {
  DatasetSpec spec = small_data();
  spec.n_train = 67;
  spec.classes = 5;
  const auto d = gen_dataset(spec, 1);
  CHECK(d.train.images.shape == Shape{67, 3, 8, 8});
  CHECK(d.val.size() == 32);
  CHECK(d.test.size() == 32);
  for (const Split* s : {&d.train, &d.val, &d.test}) {
    std::vector<int> counts(5, 0);
    for (int l : s->labels) {
      REQUIRE(l >= 0);
      REQUIRE(l < 5);
      ++counts[static_cast<std::size_t>(l)];
    }
    CHECK(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()) <= 1);
  }
}

TEST_CASE("more classes than samples is rejected") {
  DatasetSpec spec = small_data();
  spec.classes = 65;
  CHECK_THROWS_AS(gen_dataset(spec, 0), ConfigError);
}

TEST_CASE("noiseless samples equal their class template") {
  DatasetSpec spec = small_data();
  spec.sigma = 0.0;
  const auto d = gen_dataset(spec, 3);
  const std::size_t per = 3 * 8 * 8;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    const double* x = d.test.images.ptr() + i * per;
    const double* t = d.templates.ptr() + static_cast<std::size_t>(d.test.labels[i]) * per;
    CHECK(std::equal(x, x + per, t));
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t k = 0; k < 4; ++k) {
      double dist = 0.0;
      for (std::size_t p = 0; p < per; ++p) {
        const double diff = x[p] - d.templates[k * per + p];
        dist += diff * diff;
      }
      if (dist < best_d) {
        best_d = dist;
        best = k;
      }
    }
    correct += static_cast<int>(best) == d.test.labels[i];
  }
  CHECK(correct == d.test.size());
}

TEST_CASE("a linear model beats chance on the default dataset") {
  const DatasetSpec spec;
  const auto d = gen_dataset(spec, 0);
  GraphBuilder g;
  int x = g.input({3, 8, 8});
  x = g.flatten(x, "flat");
  x = g.linear(x, 3 * 8 * 8, spec.classes, true, "fc");
  Network net(g.build(x), InitConfig{InitScheme::Default, BiasMode::SchemeDefault, 1});
  TrainConfig cfg;
  cfg.lr = 0.01;
  const auto rec = train(net, d, cfg);
  REQUIRE_FALSE(rec.failed);
  CHECK(rec.val_acc.size() == 10);
  CHECK(rec.test_acc > 1.0 / spec.classes);
}

TEST_CASE("cosine schedule values") {
  CHECK(cosine_lr(0.1, 0, 10) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(cosine_lr(0.1, 5, 10) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(std::abs(cosine_lr(0.1, 10, 10)) < 1e-17);
  for (int e = 0; e <= 7; ++e)
    CHECK(cosine_lr(0.3, e, 7) == doctest::Approx(0.15 * (1.0 + std::cos(std::numbers::pi * e / 7.0))));
}

TEST_CASE("zero learning rate leaves parameters and the curve unchanged") {
  const auto d = gen_dataset(small_data(), 2);
  Network net(plain_net(4), InitConfig{InitScheme::KaimingNormal, BiasMode::SchemeDefault, 3});
  const auto before = net.values();
  TrainConfig cfg = quick_train(4);
  cfg.lr = 0.0;
  const auto rec = train(net, d, cfg);
  REQUIRE(rec.val_acc.size() == 4);
  for (double v : rec.val_acc) CHECK(v == rec.val_acc[0]);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(net.values()[i].data == before[i].data);
}

TEST_CASE("an all-conv3x3 cell overfits 32 samples") {
  DatasetSpec spec = small_data();
  spec.n_train = 32;
  const auto d = gen_dataset(spec, 4);
  const auto space = mini_space();
  Network net = materialize(Architecture{{3, 3, 3}}, space, ScaleConfig{}, InitConfig{InitScheme::Default,
                                                                                          BiasMode::SchemeDefault, 4});
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 8;
  cfg.flip = false;
  cfg.crop = false;
  cfg.weight_decay = 0.0;
  const auto rec = train(net, d, cfg);
  REQUIRE_FALSE(rec.failed);
  CHECK(evaluate_accuracy(net, d.train) >= 0.95);
}

TEST_CASE("training is deterministic") {
  const auto d = gen_dataset(small_data(), 7);
  const auto space = mini_space();
  const InitConfig init{InitScheme::Default, BiasMode::SchemeDefault, 9};
  TrainConfig cfg = quick_train(3);
  cfg.seed = 11;
  Network a = materialize(Architecture{{3, 1, 2}}, space, ScaleConfig{}, init);
  Network b = materialize(Architecture{{3, 1, 2}}, space, ScaleConfig{}, init);
  const auto ra = train(a, d, cfg), rb = train(b, d, cfg);
  CHECK(ra.val_acc == rb.val_acc);
  CHECK(ra.test_acc == rb.test_acc);
  for (std::size_t i = 0; i < a.values().size(); ++i) CHECK(a.values()[i].data == b.values()[i].data);
  for (double v : ra.val_acc) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("divergent training marks the record failed") {
  const auto d = gen_dataset(small_data(), 1);
  Network net(plain_net(4), InitConfig{InitScheme::KaimingNormal, BiasMode::SchemeDefault, 1});
  TrainConfig cfg = quick_train(5);
  cfg.lr = 1e200;
  const auto rec = train(net, d, cfg);
  CHECK(rec.failed);
  CHECK(rec.test_acc == 0.0);
  CHECK(rec.val_acc.size() < 5);
  CHECK_FALSE(rec.error.empty());
}

TEST_CASE("invalid training configs are rejected") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.epochs = 1;
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("mini-bench over a two-architecture space") {
  const auto cfg = two_arch_bench();
  const std::string path = work_path("pair_bench.jsonl");
  std::filesystem::remove(path);
  int trained = 0;
  const auto bench = build_minibench(cfg, path, false, [&](const std::string&, const TrainRecord&) { ++trained; });
  CHECK(bench.records.size() == 2);
  CHECK(trained == 4);
  CHECK(bench.record_count() == 4);
  for (const auto& [arch, recs] : bench.records) {
    REQUIRE(recs.size() == 2);
    for (const auto& r : recs) {
      CHECK(r.val_acc.size() == 2);
      CHECK(r.test_acc >= 0.0);
      CHECK(r.test_acc <= 1.0);
    }
    CHECK(recs[0].seed != recs[1].seed);
  }
  CHECK(same_records(load_benchmark(path), bench));
  CHECK(load_benchmark(path).space == "pair");
}

TEST_CASE("mini-bench resume skips completed records") {
  const auto cfg = two_arch_bench();
  const std::string full = work_path("resume_full.jsonl"), part = work_path("resume_part.jsonl");
  std::filesystem::remove(full);
  const auto reference = build_minibench(cfg, full, false);
  const auto lines = read_lines(full);
  REQUIRE(lines.size() == 5);
  {
    std::ofstream out(part, std::ios::trunc);
    out << lines[0] << '\n' << lines[1] << '\n' << lines[3] << '\n';
  }
  int trained = 0;
  const auto resumed = build_minibench(cfg, part, true, [&](const std::string&, const TrainRecord&) { ++trained; });
  CHECK(trained == 2);
  CHECK(same_records(resumed, reference));
  CHECK(read_lines(part) == lines);

  trained = 0;
  (void)build_minibench(cfg, part, true, [&](const std::string&, const TrainRecord&) { ++trained; });
  CHECK(trained == 0);
}

TEST_CASE("mini-bench rebuild is record-identical") {
  auto cfg = two_arch_bench();
  cfg.workers = 2;
  const std::string a = work_path("det_a.jsonl"), b = work_path("det_b.jsonl");
  std::filesystem::remove(a);
  std::filesystem::remove(b);
  const auto x = build_minibench(cfg, a, false);
  cfg.workers = 1;
  const auto y = build_minibench(cfg, b, false);
  CHECK(same_records(x, y));
  CHECK(read_lines(a) == read_lines(b));
}

TEST_CASE("query on a single-seed benchmark is constant") {
  TabularBenchmark bench;
  bench.space = "t";
  TrainRecord r;
  r.test_acc = 0.625;
  r.val_acc = {0.5, 0.6};
  bench.records["x"] = {r};
  Rng rng(1);
  for (int i = 0; i < 50; ++i) CHECK(query(bench, "x", rng) == 0.625);
  CHECK_THROWS_AS(query(bench, "y", rng), Error);
}

TEST_CASE("query samples seeds uniformly and never mutates") {
  TabularBenchmark bench;
  bench.space = "t";
  for (int s = 0; s < 4; ++s) {
    TrainRecord r;
    r.seed = static_cast<std::uint64_t>(s);
    r.test_acc = 0.1 * (s + 1);
    r.val_acc = {0.1 * s};
    bench.records["x"].push_back(r);
  }
  const TabularBenchmark copy = bench;
  Rng rng(99);
  std::map<double, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[query(bench, "x", rng)];
  CHECK(counts.size() == 4);
  // 3 degrees of freedom; 99% critical value 11.34.
  double chi2 = 0.0;
  for (const auto& [v, c] : counts) chi2 += (c - draws / 4.0) * (c - draws / 4.0) / (draws / 4.0);
  CHECK(chi2 < 11.34);
  CHECK(same_records(bench, copy));
}

TEST_CASE("failed records count as zero accuracy") {
  TabularBenchmark bench;
  TrainRecord ok, bad;
  ok.test_acc = 0.8;
  ok.val_acc = {0.7};
  bad.failed = true;
  bad.error = "diverged";
  bench.records["x"] = {ok, bad};
  CHECK(bench.mean_accuracy("x") == doctest::Approx(0.4));
  const std::string path = work_path("failed_bench.jsonl");
  save_benchmark(path, bench);
  const auto back = load_benchmark(path);
  REQUIRE(back.records.at("x").size() == 2);
  CHECK(back.records.at("x")[1].failed);
  CHECK(read_lines(path)[2].find("\"failed\"") != std::string::npos);
}

TEST_CASE("reduced training with the identity config equals plain training") {
  const auto d = gen_dataset(small_data(), 3);
  const auto space = mini_space();
  const Architecture a{{3, 2, 1}};
  const ScaleConfig base;
  const InitConfig init{InitScheme::Default, BiasMode::SchemeDefault, 6};
  const TrainConfig cfg = quick_train(3);
  Network net = materialize(a, space, base, init);
  const auto direct = train(net, d, cfg);
  const auto reduced = reduced_training_proxy(a, space, base, ReducedTrainConfig{8, 4, 3}, cfg, d, init);
  CHECK(direct.val_acc == reduced.val_acc);
  CHECK(direct.test_acc == reduced.test_acc);
}

TEST_CASE("halving resolution and channels cuts MACs by sixteen") {
  const auto spec = nb201_space();
  const Architecture conv{std::vector<int>(6, 3)};
  const ScaleConfig base{16, 8, 1, 3, 4, 3}, half{8, 4, 1, 3, 4, 3};
  const double ratio = static_cast<double>(flops(conv, spec, half)) / static_cast<double>(flops(conv, spec, base));
  CHECK(ratio >= 0.9 / 16.0);
  CHECK(ratio <= 1.1 / 16.0);
}

TEST_CASE("reduced training with a longer horizon changes the early curve") {
  const auto d = gen_dataset(small_data(), 8);
  const auto space = mini_space();
  const Architecture a{{3, 3, 2}};
  const ScaleConfig base;
  const InitConfig init{InitScheme::Default, BiasMode::SchemeDefault, 2};
  const TrainConfig cfg = quick_train(1);
  const auto e10 = reduced_training_proxy(a, space, base, ReducedTrainConfig{8, 4, 10}, cfg, d, init);
  const auto e20 = reduced_training_proxy(a, space, base, ReducedTrainConfig{8, 4, 20}, cfg, d, init);
  REQUIRE(e10.val_acc.size() == 10);
  REQUIRE(e20.val_acc.size() == 20);
  CHECK(std::vector<double>(e20.val_acc.begin(), e20.val_acc.begin() + 10) != e10.val_acc);
  CHECK_THROWS_AS(reduced_training_proxy(a, space, base, ReducedTrainConfig{16, 4, 1}, cfg, d, init), ConfigError);
}

TEST_CASE("reduced resolution resizes the dataset") {
  const auto d = gen_dataset(small_data(), 8);
  const auto small = resize_dataset(d, 4);
  CHECK(small.train.images.shape == Shape{64, 3, 4, 4});
  CHECK(small.train.labels == d.train.labels);
  // Area averaging of the top-left 2x2 block.
  const double avg = (d.train.images[0] + d.train.images[1] + d.train.images[8] + d.train.images[9]) / 4.0;
  CHECK(small.train.images[0] == doctest::Approx(avg).epsilon(1e-12));
}

TEST_CASE("synthetic tabular bench with a perfect proxy") {
  SyntheticTabularSpec cfg;
  cfg.target_rho = 1.0;
  const auto t = gen_synthetic_tabular(nb201_space(), cfg);
  REQUIRE(t.archs.size() == 15625);
  CHECK(t.measured_rho == 1.0);
  std::vector<std::size_t> idx(t.archs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return t.accuracy[a] < t.accuracy[b]; });
  for (std::size_t i = 1; i < idx.size(); ++i)
    if (t.accuracy[idx[i]] > t.accuracy[idx[i - 1]]) CHECK(t.proxy[idx[i]] > t.proxy[idx[i - 1]]);
}

TEST_CASE("synthetic tabular bench with an uninformative proxy") {
  SyntheticTabularSpec cfg;
  cfg.target_rho = 0.0;
  cfg.seed = 3;
  const auto t = gen_synthetic_tabular(nb201_space(), cfg);
  CHECK(std::abs(oracle::brute_spearman(t.accuracy, t.proxy)) <= 0.05);
}

TEST_CASE("synthetic tabular bench calibrated to 0.76") {
  for (std::uint64_t seed : {0, 1, 2}) {
    SyntheticTabularSpec cfg;
    cfg.seed = seed;
    cfg.seeds = 3;
    cfg.seed_noise = 0.01;
    const auto t = gen_synthetic_tabular(nb201_space(), cfg);
    const double rho = oracle::brute_spearman(t.accuracy, t.proxy);
    CHECK(rho >= 0.74);
    CHECK(rho <= 0.78);
    CHECK(rho == doctest::Approx(t.measured_rho).epsilon(1e-9));
    CHECK(t.bench.records.size() == 15625);
    for (std::size_t i = 0; i < 50; ++i) {
      const auto& recs = t.bench.records.at(t.archs[i]);
      CHECK(recs.size() == 3);
      CHECK(t.bench.mean_accuracy(t.archs[i]) == doctest::Approx(t.accuracy[i]).epsilon(1e-12));
      for (const auto& r : recs) {
        CHECK(r.test_acc >= 0.0);
        CHECK(r.test_acc <= 1.0);
      }
    }
  }
}

TEST_CASE("synthetic tabular targets outside [-1, 1] are rejected") {
  SyntheticTabularSpec cfg;
  cfg.target_rho = 1.5;
  CHECK_THROWS_AS(gen_synthetic_tabular(mini_space(), cfg), ConfigError);
}

TEST_CASE("synthetic proxy file loads as a proxy table") {
  SyntheticTabularSpec cfg;
  const auto t = gen_synthetic_tabular(mini_space(), cfg);
  const std::string path = work_path("synthetic_proxy.jsonl");
  save_synthetic_proxy(path, t, "synflow");
  const auto table = load_proxy_table(path);
  REQUIRE(table.size() == 125);
  for (std::size_t i = 0; i < t.archs.size(); ++i) CHECK(table.at(t.archs[i]).at("synflow") == t.proxy[i]);
}
