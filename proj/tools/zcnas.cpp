#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "zcnas/analysis/sensitivity.hpp"
#include "zcnas/analysis/tables.hpp"
#include "zcnas/bench/synthetic.hpp"
#include "zcnas/bench/tabular.hpp"
#include "zcnas/common/error.hpp"
#include "zcnas/common/parallel.hpp"
#include "zcnas/io/config.hpp"
#include "zcnas/io/csv.hpp"
#include "zcnas/io/files.hpp"
#include "zcnas/io/manifest.hpp"
#include "zcnas/io/svg.hpp"
#include "zcnas/search/experiment.hpp"

namespace fs = std::filesystem;
using namespace zc;

namespace {

const std::set<std::string> kConfigKeys = {
    "space", "n_nodes", "ops", "resolution", "channels", "cells_per_stage", "stages", "classes",
    "data.n_train", "data.n_val", "data.n_test", "data.sigma", "data.smooth", "data.seed",
    "train.lr", "train.momentum", "train.nesterov", "train.weight_decay", "train.epochs", "train.batch_size",
    "train.flip", "train.crop", "train.crop_pad", "bench.seeds",
    "init.scheme", "init.bias_mode", "init.seed",
    "proxy.batch_size", "proxy.data_mode", "proxy.jacob_eps", "proxy.scope", "proxy.hvp"};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Everything a command may need, resolved from preset, config file and flags.
struct Setup {
  KeyValueConfig kv;
  SpaceSpec space;
  ScaleConfig scale;
  DatasetSpec data;
  std::uint64_t data_seed = 0;
  TrainConfig train;
  InitConfig init;
  ProxyConfig proxy;
  int bench_seeds = 3;
};

Setup resolve(KeyValueConfig kv) {
  kv.check_keys(kConfigKeys);
  Setup s;
  const std::string preset = kv.get("space", "mini");
  if (preset == "mini") s.space = mini_space();
  else if (preset == "nb201-like") s.space = nb201_space();
  else throw ConfigError("unknown space preset '" + preset + "'");
  s.space.n_nodes = static_cast<int>(kv.get_int("n_nodes", s.space.n_nodes));
  if (kv.has("ops")) s.space.op_set = split_list(kv.get("ops", ""));
  const SpaceSpec base = preset == "mini" ? mini_space() : nb201_space();
  if (s.space.n_nodes != base.n_nodes || s.space.op_set != base.op_set) s.space.name = "custom";
  s.space.validate();

  s.scale.resolution = static_cast<int>(kv.get_int("resolution", s.scale.resolution));
  s.scale.channels = static_cast<int>(kv.get_int("channels", s.scale.channels));
  s.scale.cells_per_stage = static_cast<int>(kv.get_int("cells_per_stage", s.scale.cells_per_stage));
  s.scale.stages = static_cast<int>(kv.get_int("stages", s.scale.stages));
  s.scale.classes = static_cast<int>(kv.get_int("classes", s.scale.classes));
  s.scale.validate();

  s.data.resolution = s.scale.resolution;
  s.data.classes = s.scale.classes;
  s.data.channels = s.scale.in_channels;
  s.data.n_train = static_cast<int>(kv.get_int("data.n_train", s.data.n_train));
  s.data.n_val = static_cast<int>(kv.get_int("data.n_val", s.data.n_val));
  s.data.n_test = static_cast<int>(kv.get_int("data.n_test", s.data.n_test));
  s.data.sigma = kv.get_double("data.sigma", s.data.sigma);
  s.data.smooth = static_cast<int>(kv.get_int("data.smooth", s.data.smooth));
  s.data.validate();
  s.data_seed = kv.get_u64("data.seed", 0);

  s.train.lr = kv.get_double("train.lr", s.train.lr);
  s.train.momentum = kv.get_double("train.momentum", s.train.momentum);
  s.train.nesterov = kv.get_bool("train.nesterov", s.train.nesterov);
  s.train.weight_decay = kv.get_double("train.weight_decay", s.train.weight_decay);
  s.train.epochs = static_cast<int>(kv.get_int("train.epochs", s.train.epochs));
  s.train.batch_size = static_cast<int>(kv.get_int("train.batch_size", s.train.batch_size));
  s.train.flip = kv.get_bool("train.flip", s.train.flip);
  s.train.crop = kv.get_bool("train.crop", s.train.crop);
  s.train.crop_pad = static_cast<int>(kv.get_int("train.crop_pad", s.train.crop_pad));
  s.train.validate();
  s.bench_seeds = static_cast<int>(kv.get_int("bench.seeds", s.bench_seeds));
  if (s.bench_seeds < 1) throw ConfigError("bench.seeds must be >= 1");

  s.init.scheme = parse_init_scheme(kv.get("init.scheme", init_scheme_name(s.init.scheme)));
  s.init.bias_mode = parse_bias_mode(kv.get("init.bias_mode", bias_mode_name(s.init.bias_mode)));
  s.init.seed = kv.get_u64("init.seed", 0);

  s.proxy.batch_size = static_cast<int>(kv.get_int("proxy.batch_size", s.proxy.batch_size));
  if (s.proxy.batch_size < 1) throw ConfigError("proxy.batch_size must be >= 1");
  s.proxy.data_mode = parse_data_mode(kv.get("proxy.data_mode", data_mode_name(s.proxy.data_mode)));
  s.proxy.jacob_eps = kv.get_double("proxy.jacob_eps", s.proxy.jacob_eps);
  s.proxy.scope = parse_param_scope(kv.get("proxy.scope", param_scope_name(s.proxy.scope)));
  const std::string hvp = kv.get("proxy.hvp", "dual");
  if (hvp == "dual") s.proxy.hvp = HvpMethod::DualNumbers;
  else if (hvp == "fd") s.proxy.hvp = HvpMethod::FiniteDifference;
  else throw ConfigError("proxy.hvp must be dual or fd");
  s.proxy.seed = s.init.seed;

  std::string ops;
  for (const auto& o : s.space.op_set) ops += (ops.empty() ? "" : ",") + o;
  kv.set("space", preset);
  kv.set("n_nodes", std::to_string(s.space.n_nodes));
  kv.set("ops", ops);
  kv.set("resolution", std::to_string(s.scale.resolution));
  kv.set("channels", std::to_string(s.scale.channels));
  kv.set("cells_per_stage", std::to_string(s.scale.cells_per_stage));
  kv.set("stages", std::to_string(s.scale.stages));
  kv.set("classes", std::to_string(s.scale.classes));
  kv.set("data.n_train", std::to_string(s.data.n_train));
  kv.set("data.n_val", std::to_string(s.data.n_val));
  kv.set("data.n_test", std::to_string(s.data.n_test));
  kv.set("data.sigma", format_double(s.data.sigma));
  kv.set("data.smooth", std::to_string(s.data.smooth));
  kv.set("data.seed", std::to_string(s.data_seed));
  kv.set("train.lr", format_double(s.train.lr));
  kv.set("train.momentum", format_double(s.train.momentum));
  kv.set("train.nesterov", s.train.nesterov ? "true" : "false");
  kv.set("train.weight_decay", format_double(s.train.weight_decay));
  kv.set("train.epochs", std::to_string(s.train.epochs));
  kv.set("train.batch_size", std::to_string(s.train.batch_size));
  kv.set("train.flip", s.train.flip ? "true" : "false");
  kv.set("train.crop", s.train.crop ? "true" : "false");
  kv.set("train.crop_pad", std::to_string(s.train.crop_pad));
  kv.set("bench.seeds", std::to_string(s.bench_seeds));
  kv.set("init.scheme", init_scheme_name(s.init.scheme));
  kv.set("init.bias_mode", bias_mode_name(s.init.bias_mode));
  kv.set("init.seed", std::to_string(s.init.seed));
  kv.set("proxy.batch_size", std::to_string(s.proxy.batch_size));
  kv.set("proxy.data_mode", data_mode_name(s.proxy.data_mode));
  kv.set("proxy.jacob_eps", format_double(s.proxy.jacob_eps));
  kv.set("proxy.scope", param_scope_name(s.proxy.scope));
  kv.set("proxy.hvp", s.proxy.hvp == HvpMethod::DualNumbers ? "dual" : "fd");
  s.kv = std::move(kv);
  return s;
}

// Flags shared by commands that read a configuration.
struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;  // key=value overrides
  std::string space;
  int resolution = 0, channels = 0;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int workers = 0;

  void add(CLI::App* app, bool with_config = true) {
    if (with_config) {
      app->add_option("--config", config, "key = value configuration file");
      app->add_option("--set", sets, "override a configuration key (key=value)");
      app->add_option("--space", space, "space preset: mini or nb201-like");
      app->add_option("--resolution", resolution, "input resolution r");
      app->add_option("--channels", channels, "stem channels c");
    }
    app->add_option("--out", out, "output directory")->required();
    app->add_option("--seed", seed, "base seed")->each([this](const std::string&) { seed_given = true; });
    app->add_option("--workers", workers, "worker threads (default: ZCNAS_WORKERS or 1)");
  }

  int worker_count() const { return workers > 0 ? workers : default_workers(); }

  Setup setup() const {
    KeyValueConfig kv;
    if (!config.empty()) kv = KeyValueConfig::load(config);
    if (!space.empty()) kv.set("space", space);
    if (resolution > 0) kv.set("resolution", std::to_string(resolution));
    if (channels > 0) kv.set("channels", std::to_string(channels));
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      kv.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed_given) kv.set("init.seed", std::to_string(seed));
    return resolve(std::move(kv));
  }

  RunManifest manifest(const std::string& command, const Setup* s) const {
    RunManifest m;
    m.command = command;
    if (s) m.config = s->kv.values();
    m.seeds.push_back(seed);
    if (!config.empty()) m.add_input(config);
    return m;
  }
};

// The configured setup, defaulting the space preset to the benchmark's.
Setup setup_for_bench(CommonFlags flags, const TabularBenchmark& bench) {
  if (flags.config.empty() && flags.space.empty() && (bench.space == "mini" || bench.space == "nb201-like"))
    flags.space = bench.space;
  Setup s = flags.setup();
  if (s.space.name != bench.space)
    throw ConfigError("benchmark space '" + bench.space + "' differs from configured space '" + s.space.name + "'");
  return s;
}

std::string out_path(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

DataBatch real_batch(const Setup& s, std::string& digest) {
  const auto data = gen_dataset(s.data, s.data_seed);
  digest = dataset_digest(data);
  return DataBatch{data.train.images, data.train.labels};
}

std::string rho_cell(const std::optional<RhoResult>& r) { return r ? csv_number(r->rho) : "--"; }

// ---- score -----------------------------------------------------------------

struct ScoreFlags {
  CommonFlags common;
  std::string metrics = "all";
  std::vector<std::string> archs;
  bool all = false;
  int sample = 0;
};

int cmd_score(const ScoreFlags& f) {
  const Setup s = f.common.setup();
  ScoreRequest req{parse_metric_list(f.metrics), s.proxy, s.init, {}};
  std::vector<Architecture> archs;
  const int modes = (f.archs.empty() ? 0 : 1) + (f.all ? 1 : 0) + (f.sample > 0 ? 1 : 0);
  if (modes != 1) throw ConfigError("exactly one of --arch, --all, --sample is required");
  if (f.all) archs = enumerate_space(s.space);
  for (const auto& a : f.archs) archs.push_back(parse_string(a, s.space));
  if (f.sample > 0) {
    Rng rng(derive_seed(f.common.seed, 0x5a3b));
    std::set<Architecture> seen;
    const auto n = std::min<std::uint64_t>(static_cast<std::uint64_t>(f.sample), space_size(s.space));
    while (archs.size() < n) {
      Architecture a = random_architecture(s.space, rng);
      if (seen.insert(a).second) archs.push_back(std::move(a));
    }
  }
  DataBatch real;
  const bool use_real = s.proxy.data_mode == DataMode::RealBatch;
  if (use_real) real = real_batch(s, req.data_digest);

  ScoreCache cache;
  std::vector<std::map<Metric, ProxyScore>> results(archs.size());
  parallel_for(archs.size(), f.common.worker_count(), [&](std::size_t i) {
    results[i] = score(archs[i], s.space, s.scale, req, &cache, use_real ? &real : nullptr);
  });
  std::vector<ScoreRecord> recs;
  bool failed = false;
  for (std::size_t i = 0; i < archs.size(); ++i)
    for (const auto& [m, sc] : results[i]) {
      recs.push_back({canonical_string(archs[i], s.space), sc});
      failed = failed || !sc.ok;
    }
  ensure_directory(f.common.out);
  write_score_file(out_path(f.common.out, "scores.jsonl"), recs);
  RunManifest man = f.common.manifest("score", &s);
  man.config["metrics"] = f.metrics;
  man.config["archs"] = f.all ? "all" : f.sample > 0 ? "sample:" + std::to_string(f.sample) : std::to_string(archs.size());
  write_manifest(f.common.out, man, {"scores.jsonl"});
  std::printf("scored %zu architectures, %zu records%s\n", archs.size(), recs.size(),
              failed ? " (some metrics failed)" : "");
  return failed ? 2 : 0;
}

// ---- bench -----------------------------------------------------------------

struct BenchBuildFlags {
  CommonFlags common;
  bool resume = false;
};

int cmd_bench_build(const BenchBuildFlags& f) {
  const Setup s = f.common.setup();
  MinibenchConfig cfg;
  cfg.space = s.space;
  cfg.scale = s.scale;
  cfg.data = s.data;
  cfg.data_seed = s.data_seed;
  cfg.train = s.train;
  cfg.init = s.init;
  cfg.seeds = s.bench_seeds;
  cfg.workers = f.common.worker_count();
  ensure_directory(f.common.out);
  const std::string path = out_path(f.common.out, "bench.jsonl");
  std::size_t failed = 0, trained = 0;
  const auto bench = build_minibench(cfg, path, f.resume, [&](const std::string& arch, const TrainRecord& r) {
    ++trained;
    if (r.failed) {
      ++failed;
      std::fprintf(stderr, "training failed: %s seed %llu: %s\n", arch.c_str(),
                   static_cast<unsigned long long>(r.seed), r.error.c_str());
    }
  });
  write_manifest(f.common.out, f.common.manifest("bench build", &s), {"bench.jsonl"});
  std::printf("benchmark: %zu architectures, %zu records, trained %zu new records, %zu failed\n",
              bench.records.size(), bench.record_count(), trained, failed);
  return 0;
}

struct BenchSynthFlags {
  CommonFlags common;
  std::string space = "nb201-like";
  SyntheticTabularSpec spec;
};

int cmd_bench_synthetic(BenchSynthFlags f) {
  SpaceSpec space;
  if (f.space == "mini") space = mini_space();
  else if (f.space == "nb201-like") space = nb201_space();
  else throw ConfigError("unknown space preset '" + f.space + "'");
  f.spec.seed = f.common.seed;
  const auto t = gen_synthetic_tabular(space, f.spec);
  ensure_directory(f.common.out);
  save_benchmark(out_path(f.common.out, "bench.jsonl"), t.bench);
  save_synthetic_proxy(out_path(f.common.out, "proxy.jsonl"), t, f.spec.metric);
  RunManifest m = f.common.manifest("bench synthetic", nullptr);
  m.config = {{"space", f.space},
              {"rho", format_double(f.spec.target_rho)},
              {"arch_noise", format_double(f.spec.arch_noise)},
              {"seed_noise", format_double(f.spec.seed_noise)},
              {"seeds", std::to_string(f.spec.seeds)},
              {"metric", f.spec.metric}};
  write_manifest(f.common.out, m, {"bench.jsonl", "proxy.jsonl"});
  std::printf("synthetic benchmark: %zu architectures, measured rho %.4f (alpha %.4f)\n", t.archs.size(),
              t.measured_rho, t.alpha);
  return 0;
}

// ---- search ----------------------------------------------------------------

struct SearchFlags {
  CommonFlags common;
  std::string algo = "rand";
  std::string bench;
  std::string proxy_table;
  bool live_proxy = false;
  std::string metric = "synflow";
  SearchConfig cfg;
  int repeats = 32;
};

int cmd_search(SearchFlags f) {
  if (!file_exists(f.bench)) throw ConfigError("benchmark file not found: " + f.bench);
  f.cfg.algo = parse_algorithm(f.algo);
  f.cfg.seed = f.common.seed;
  f.cfg.validate();
  if ((f.cfg.warmup > 0 || f.cfg.move > 0) && f.proxy_table.empty() && !f.live_proxy)
    throw ConfigError("warmup and move proposal need --proxy-table or --live-proxy");
  if (!f.proxy_table.empty() && f.live_proxy) throw ConfigError("--proxy-table and --live-proxy are exclusive");

  const TabularBenchmark bench = load_benchmark(f.bench);
  const Setup setup = setup_for_bench(f.common, bench);
  const SpaceSpec& space = setup.space;

  ProxyTable table;
  if (!f.proxy_table.empty()) table = load_proxy_table(f.proxy_table);
  SearchEnv env = make_env(space, bench, f.proxy_table.empty() ? nullptr : &table, f.metric);

  ScoreCache cache;
  DataBatch real;
  ScoreRequest req;
  if (f.live_proxy) {
    const Metric m = parse_metric(f.metric);
    req = ScoreRequest{{m}, setup.proxy, setup.init, {}};
    const bool use_real = setup.proxy.data_mode == DataMode::RealBatch;
    if (use_real) real = real_batch(setup, req.data_digest);
    env.proxy = [&, m, use_real](const Architecture& a) -> std::optional<double> {
      const auto r = score(a, setup.space, setup.scale, req, &cache, use_real ? &real : nullptr).at(m);
      if (!r.ok) return std::nullopt;
      return r.rank_key();
    };
  }

  const auto traces = run_repeats(env, f.cfg, f.repeats, f.common.worker_count());
  ensure_directory(f.common.out);
  ensure_directory(out_path(f.common.out, "traces"));
  std::vector<std::string> outputs;
  for (std::size_t r = 0; r < traces.size(); ++r) {
    char name[64];
    std::snprintf(name, sizeof name, "traces/trace_%03zu.jsonl", r);
    write_file_atomic(out_path(f.common.out, name), trace_jsonl(traces[r]));
    outputs.emplace_back(name);
  }
  const auto rows = summarize(traces);
  write_file_atomic(out_path(f.common.out, "summary.csv"), summary_csv(rows));
  outputs.emplace_back("summary.csv");

  LineSeries series{std::string(algorithm_name(f.cfg.algo)) + (f.cfg.warmup ? " warmup" : "") +
                        (f.cfg.move ? " move" : ""),
                    {}, {}, {}, {}};
  for (const auto& r : rows) {
    series.xs.push_back(r.index);
    series.ys.push_back(r.median);
    series.lo.push_back(r.q25);
    series.hi.push_back(r.q75);
  }
  write_file_atomic(out_path(f.common.out, "best_so_far.svg"),
                    render_svg(LineChart{"best accuracy so far", "trained models", "accuracy", {series}}));
  outputs.emplace_back("best_so_far.svg");

  RunManifest man = f.common.manifest("search", &setup);
  man.config["algo"] = f.algo;
  man.config["metric"] = f.metric;
  man.config["budget"] = std::to_string(f.cfg.budget);
  man.config["warmup"] = std::to_string(f.cfg.warmup);
  man.config["move"] = std::to_string(f.cfg.move);
  man.config["repeats"] = std::to_string(f.repeats);
  man.config["ae.pool"] = std::to_string(f.cfg.ae.pool);
  man.config["ae.sample"] = std::to_string(f.cfg.ae.sample);
  man.config["rl.lr"] = format_double(f.cfg.rl.lr);
  man.config["rl.baseline_decay"] = format_double(f.cfg.rl.baseline_decay);
  man.config["pred.models_per_round"] = std::to_string(f.cfg.pred.models_per_round);
  man.config["pred.candidates"] = std::to_string(f.cfg.pred.candidates);
  man.config["proxy"] = f.live_proxy ? "live" : f.proxy_table.empty() ? "none" : "table";
  man.add_input(f.bench);
  if (!f.proxy_table.empty()) man.add_input(f.proxy_table);
  for (std::size_t r = 0; r < traces.size(); ++r) man.seeds.push_back(repeat_seed(f.cfg.seed, static_cast<int>(r)));
  write_manifest(f.common.out, man, outputs);
  if (!rows.empty())
    std::printf("%s: %d repeats, final median best %.4f [%.4f, %.4f]\n", f.algo.c_str(), f.repeats,
                rows.back().median, rows.back().q25, rows.back().q75);
  return 0;
}

// ---- report ----------------------------------------------------------------

struct ReportFlags {
  CommonFlags common;
  std::string bench;
  std::vector<std::string> scores;
  std::string metrics;
  bool accuracy_column = false;
  std::string label = "bench";
  int clusters = 1000;
  int sample = 0;
  std::string seeds = "0,1,2";
  std::string inits = "default/scheme-default,default/zero,kaiming-normal/scheme-default,xavier-uniform/scheme-default";
  std::string batch_sizes = "32,64,128";
};

struct ReportInputs {
  TabularBenchmark bench;
  ProxyTable proxies;
  std::vector<std::string> metrics;
};

ReportInputs load_report_inputs(const ReportFlags& f) {
  if (!file_exists(f.bench)) throw ConfigError("benchmark file not found: " + f.bench);
  ReportInputs in;
  in.bench = load_benchmark(f.bench);
  for (const auto& p : f.scores) {
    if (!file_exists(p)) throw ConfigError("score file not found: " + p);
    for (auto& [arch, ms] : load_proxy_table(p))
      for (auto& [m, v] : ms) in.proxies[arch][m] = v;
  }
  if (f.accuracy_column)
    for (const auto& [arch, recs] : in.bench.records) in.proxies[arch]["accuracy"] = in.bench.mean_accuracy(arch);
  if (!f.metrics.empty()) {
    in.metrics = split_list(f.metrics);
  } else {
    std::set<std::string> present;
    for (const auto& [arch, ms] : in.proxies)
      for (const auto& [m, v] : ms) present.insert(m);
    for (Metric m : all_metrics())
      if (present.erase(metric_name(m))) in.metrics.emplace_back(metric_name(m));
    for (const auto& m : present) in.metrics.push_back(m);
    const std::set<std::string> have(in.metrics.begin(), in.metrics.end());
    if (have.count("synflow") && have.count("jacob_cov") && have.count("snip")) in.metrics.emplace_back("vote");
  }
  return in;
}

RunManifest report_manifest(const ReportFlags& f, const std::string& what) {
  RunManifest m = f.common.manifest("report " + what, nullptr);
  m.add_input(f.bench);
  for (const auto& p : f.scores) m.add_input(p);
  m.config["label"] = f.label;
  if (!f.metrics.empty()) m.config["metrics"] = f.metrics;
  if (f.accuracy_column) m.config["accuracy_column"] = "true";
  return m;
}

int cmd_report_correlate(const ReportFlags& f) {
  const auto in = load_report_inputs(f);
  ensure_directory(f.common.out);
  std::vector<std::string> header{"dataset"};
  std::vector<std::string> row{f.label};
  std::vector<std::string> counts{"n"};
  BarChart bars{"Spearman rho (" + f.label + ")", "rho", {}, {}};
  for (const auto& m : in.metrics) {
    const auto r = try_rho(ranked_table(in.bench, in.proxies, m));
    header.push_back(m);
    row.push_back(rho_cell(r));
    counts.push_back(r ? std::to_string(r->n) + "/" + std::to_string(r->n + r->excluded) : "--");
    bars.labels.push_back(m);
    bars.values.push_back(r ? r->rho : std::numeric_limits<double>::quiet_NaN());
  }
  CsvTable t(header);
  t.add_row(row);
  t.add_row(counts);
  write_file_atomic(out_path(f.common.out, "correlation.csv"), t.str());
  write_file_atomic(out_path(f.common.out, "correlation.svg"), render_svg(bars));

  const auto curve = epoch_correlation_curve(in.bench);
  CsvTable ct({"epoch", "rho"});
  LineSeries ls{"validation accuracy", {}, {}, {}, {}};
  for (std::size_t e = 0; e < curve.size(); ++e) {
    ct.add_row({std::to_string(e + 1), curve[e] ? csv_number(*curve[e]) : "--"});
    if (curve[e]) {
      ls.xs.push_back(static_cast<double>(e + 1));
      ls.ys.push_back(*curve[e]);
    }
  }
  write_file_atomic(out_path(f.common.out, "epoch_correlation.csv"), ct.str());
  write_file_atomic(out_path(f.common.out, "epoch_correlation.svg"),
                    render_svg(LineChart{"validation accuracy vs final test accuracy", "epoch", "Spearman rho", {ls}}));
  write_manifest(f.common.out, report_manifest(f, "correlate"),
                 {"correlation.csv", "correlation.svg", "epoch_correlation.csv", "epoch_correlation.svg"});
  std::cout << t.str();
  return 0;
}

int cmd_report_tables(const ReportFlags& f) {
  const auto in = load_report_inputs(f);
  ensure_directory(f.common.out);
  const auto rows = metric_rows(in.bench, in.proxies, in.metrics);
  CsvTable t({"metric", "rho", "rho_top10", "top10_overlap_pct", "top_n", "top_n_in_top5pct", "cluster_match_pct",
              "cluster_size", "local_rho", "excluded"});
  const SpaceSpec space = setup_for_bench(f.common, in.bench).space;
  const ArchLookup acc = [&](const std::string& a) -> std::optional<double> {
    if (!in.bench.contains(a)) return std::nullopt;
    return in.bench.mean_accuracy(a);
  };
  BarChart bars{"top-10% overlap (" + f.label + ")", "percent", {}, {}};
  for (const auto& r : rows) {
    const RankedTable rt = ranked_table(in.bench, in.proxies, r.metric);
    std::map<std::string, double> key;
    for (std::size_t i = 0; i < rt.size(); ++i)
      if (rt.proxy[i]) key[rt.archs[i]] = *rt.proxy[i];
    const ArchLookup px = [&](const std::string& a) -> std::optional<double> {
      const auto it = key.find(a);
      if (it == key.end()) return std::nullopt;
      return it->second;
    };
    Rng rng(derive_seed(f.common.seed, fnv1a(r.metric)));
    const auto c = cluster_analysis(space, acc, px, static_cast<std::size_t>(f.clusters), rng);
    const std::size_t excluded = r.rho ? r.rho->excluded : rt.size() - key.size();
    t.add_row({r.metric, rho_cell(r.rho), rho_cell(r.top_rho), csv_number(r.top_overlap), std::to_string(r.top_n),
               std::to_string(r.top_n_hits), c.clusters ? csv_number(c.top_match_pct) : "--",
               c.clusters ? csv_number(c.avg_cluster_size) : "--", c.rho_clusters ? csv_number(c.local_rho) : "--",
               std::to_string(excluded)});
    bars.labels.push_back(r.metric);
    bars.values.push_back(r.top_overlap);
  }
  write_file_atomic(out_path(f.common.out, "tables.csv"), t.str());
  write_file_atomic(out_path(f.common.out, "tables.svg"), render_svg(bars));
  RunManifest m = report_manifest(f, "tables");
  m.config["clusters"] = std::to_string(f.clusters);
  write_manifest(f.common.out, m, {"tables.csv", "tables.svg"});
  std::cout << t.str();
  return 0;
}

int cmd_report_sensitivity(const ReportFlags& f) {
  if (!file_exists(f.bench)) throw ConfigError("benchmark file not found: " + f.bench);
  const TabularBenchmark bench = load_benchmark(f.bench);
  const Setup s = setup_for_bench(f.common, bench);
  std::vector<Architecture> archs;
  std::vector<double> acc;
  for (const auto& [a, recs] : bench.records) {
    archs.push_back(parse_string(a, s.space));
    acc.push_back(bench.mean_accuracy(a));
  }
  if (f.sample > 0 && static_cast<std::size_t>(f.sample) < archs.size()) {
    Rng rng(derive_seed(f.common.seed, 0x5e75));
    std::vector<std::size_t> idx(archs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(f.sample));
    std::sort(idx.begin(), idx.end());
    std::vector<Architecture> a2;
    std::vector<double> c2;
    for (auto i : idx) {
      a2.push_back(archs[i]);
      c2.push_back(acc[i]);
    }
    archs = std::move(a2);
    acc = std::move(c2);
  }
  SensitivityAxes axes;
  for (const auto& v : split_list(f.seeds)) axes.seeds.push_back(std::stoull(v));
  for (const auto& v : split_list(f.inits)) {
    const auto slash = v.find('/');
    InitConfig ic;
    ic.scheme = parse_init_scheme(v.substr(0, slash));
    if (slash != std::string::npos) ic.bias_mode = parse_bias_mode(v.substr(slash + 1));
    axes.inits.push_back(ic);
  }
  for (const auto& v : split_list(f.batch_sizes)) axes.batch_sizes.push_back(std::stoi(v));
  ScoreRequest req{parse_metric_list(f.metrics.empty() ? "all" : f.metrics), s.proxy, s.init, {}};
  DataBatch real;
  const bool use_real = s.proxy.data_mode == DataMode::RealBatch;
  if (use_real) real = real_batch(s, req.data_digest);
  const auto cells = sensitivity_sweep(archs, acc, s.space, s.scale, req, axes, f.common.worker_count(),
                                       use_real ? &real : nullptr);
  std::vector<std::string> header{"axis", "value"};
  for (Metric m : req.metrics) header.emplace_back(metric_name(m));
  CsvTable t(header);
  std::vector<LineSeries> series;
  for (Metric m : req.metrics) series.push_back({metric_name(m), {}, {}, {}, {}});
  for (std::size_t i = 0; i < cells.size(); i += req.metrics.size()) {
    std::vector<std::string> row{cells[i].axis, cells[i].value};
    for (std::size_t k = 0; k < req.metrics.size(); ++k) {
      const auto& c = cells[i + k];
      row.push_back(c.rho ? csv_number(*c.rho) : "--");
      if (c.rho) {
        series[k].xs.push_back(static_cast<double>(i / req.metrics.size() + 1));
        series[k].ys.push_back(*c.rho);
      }
    }
    t.add_row(row);
  }
  ensure_directory(f.common.out);
  write_file_atomic(out_path(f.common.out, "sensitivity.csv"), t.str());
  write_file_atomic(out_path(f.common.out, "sensitivity.svg"),
                    render_svg(LineChart{"sensitivity", "sweep point", "Spearman rho", series}));
  RunManifest m = report_manifest(f, "sensitivity");
  m.config = s.kv.values();
  m.config["sample"] = std::to_string(f.sample);
  m.config["sweep.seeds"] = f.seeds;
  m.config["sweep.inits"] = f.inits;
  m.config["sweep.batch_sizes"] = f.batch_sizes;
  write_manifest(f.common.out, m, {"sensitivity.csv", "sensitivity.svg"});
  std::cout << t.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-cost proxies for neural architecture search"};
  app.require_subcommand(1);
  app.set_version_flag("--version", toolkit_version());
  int rc = 0;

  ScoreFlags score_f;
  auto* score_cmd = app.add_subcommand("score", "score architectures with zero-cost proxies");
  score_f.common.add(score_cmd);
  score_cmd->add_option("--metrics", score_f.metrics, "'all' or a comma-separated metric list");
  score_cmd->add_option("--arch", score_f.archs, "canonical architecture string (repeatable)");
  score_cmd->add_flag("--all", score_f.all, "score the whole space");
  score_cmd->add_option("--sample", score_f.sample, "score N random distinct architectures");
  score_cmd->callback([&] { rc = cmd_score(score_f); });

  auto* bench_cmd = app.add_subcommand("bench", "build benchmarks");
  bench_cmd->require_subcommand(1);
  BenchBuildFlags build_f;
  auto* build_cmd = bench_cmd->add_subcommand("build", "train every architecture of the space");
  build_f.common.add(build_cmd);
  build_cmd->add_flag("--resume", build_f.resume, "continue an interrupted build");
  build_cmd->callback([&] { rc = cmd_bench_build(build_f); });

  BenchSynthFlags synth_f;
  auto* synth_cmd = bench_cmd->add_subcommand("synthetic", "generate a synthetic tabular benchmark and proxy");
  synth_f.common.add(synth_cmd, false);
  synth_cmd->add_option("--space", synth_f.space, "space preset: mini or nb201-like");
  synth_cmd->add_option("--rho", synth_f.spec.target_rho, "target Spearman rho of the proxy");
  synth_cmd->add_option("--arch-noise", synth_f.spec.arch_noise, "per-architecture accuracy noise");
  synth_cmd->add_option("--seed-noise", synth_f.spec.seed_noise, "per-seed accuracy noise");
  synth_cmd->add_option("--seeds", synth_f.spec.seeds, "records per architecture");
  synth_cmd->add_option("--metric", synth_f.spec.metric, "metric name written to the proxy table");
  synth_cmd->add_option("--tolerance", synth_f.spec.tolerance, "calibration tolerance on rho");
  synth_cmd->add_flag("--resume", "accepted for symmetry; generation is deterministic");
  synth_cmd->callback([&] { rc = cmd_bench_synthetic(synth_f); });

  SearchFlags search_f;
  auto* search_cmd = app.add_subcommand("search", "run a search algorithm against a benchmark");
  search_f.common.add(search_cmd);
  search_cmd->add_option("--algo", search_f.algo, "rand, rl, ae or predictor");
  search_cmd->add_option("--bench", search_f.bench, "benchmark file")->required();
  search_cmd->add_option("--proxy-table", search_f.proxy_table, "score or synthetic proxy file");
  search_cmd->add_flag("--live-proxy", search_f.live_proxy, "score architectures on demand");
  search_cmd->add_option("--metric", search_f.metric, "proxy metric name");
  search_cmd->add_option("--warmup", search_f.cfg.warmup, "zero-cost warmup models N");
  search_cmd->add_option("--move", search_f.cfg.move, "zero-cost move proposal R");
  search_cmd->add_option("--budget", search_f.cfg.budget, "trained models T");
  search_cmd->add_option("--repeats", search_f.repeats, "independent repeats");
  search_cmd->add_option("--ae-pool", search_f.cfg.ae.pool, "aging evolution pool size P");
  search_cmd->add_option("--ae-sample", search_f.cfg.ae.sample, "aging evolution sample size S");
  search_cmd->add_option("--rl-lr", search_f.cfg.rl.lr, "controller learning rate");
  search_cmd->add_option("--rl-decay", search_f.cfg.rl.baseline_decay, "EMA baseline decay");
  search_cmd->add_option("--pred-per-round", search_f.cfg.pred.models_per_round, "predictor models per round");
  search_cmd->add_option("--pred-candidates", search_f.cfg.pred.candidates, "predictor candidates per round");
  search_cmd->callback([&] { rc = cmd_search(search_f); });

  auto* report_cmd = app.add_subcommand("report", "analyse benchmarks and scores");
  report_cmd->require_subcommand(1);
  ReportFlags corr_f, tables_f, sens_f;
  auto add_report = [](CLI::App* c, ReportFlags& f) {
    f.common.add(c);
    c->add_option("--bench", f.bench, "benchmark file")->required();
    c->add_option("--metrics", f.metrics, "metric columns (default: all present, plus vote)");
    c->add_option("--label", f.label, "row label");
  };
  auto* corr_cmd = report_cmd->add_subcommand("correlate", "global Spearman rho per metric and per-epoch curve");
  add_report(corr_cmd, corr_f);
  corr_cmd->add_option("--scores", corr_f.scores, "score files (repeatable)");
  corr_cmd->add_flag("--accuracy-column", corr_f.accuracy_column, "add the accuracy itself as a metric");
  corr_cmd->callback([&] { rc = cmd_report_correlate(corr_f); });
  auto* tables_cmd = report_cmd->add_subcommand("tables", "top-set, top-n and cluster statistics per metric");
  add_report(tables_cmd, tables_f);
  tables_cmd->add_option("--scores", tables_f.scores, "score files (repeatable)");
  tables_cmd->add_flag("--accuracy-column", tables_f.accuracy_column, "add the accuracy itself as a metric");
  tables_cmd->add_option("--clusters", tables_f.clusters, "random cluster centers");
  tables_cmd->callback([&] { rc = cmd_report_tables(tables_f); });
  auto* sens_cmd = report_cmd->add_subcommand("sensitivity", "rescore under varied seeds, inits and batch sizes");
  add_report(sens_cmd, sens_f);
  sens_cmd->add_option("--sample", sens_f.sample, "architectures to rescore (0: all)");
  sens_cmd->add_option("--seeds", sens_f.seeds, "comma-separated init seeds");
  sens_cmd->add_option("--inits", sens_f.inits, "comma-separated scheme/bias-mode pairs");
  sens_cmd->add_option("--batch-sizes", sens_f.batch_sizes, "comma-separated proxy batch sizes");
  sens_cmd->callback([&] { rc = cmd_report_sensitivity(sens_f); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}
