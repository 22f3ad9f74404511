#include "zcnas/bench/tabular.hpp"

#include <fstream>
#include <json.hpp>
#include <mutex>
#include <set>

#include "zcnas/common/error.hpp"
#include "zcnas/common/parallel.hpp"
#include "zcnas/io/files.hpp"

namespace zc {

namespace {
constexpr const char* kBenchFormat = "zcnas-bench";
constexpr int kBenchVersion = 1;

TabularBenchmark parse_benchmark(const std::string& path, bool tolerate_torn_tail) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open benchmark file: " + path);
  TabularBenchmark b;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      if (tolerate_torn_tail && in.peek() == std::char_traits<char>::eof()) break;
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    try {
      if (j.contains("format")) {
        if (j.at("format") != kBenchFormat || j.value("version", 0) != kBenchVersion)
          throw ConfigError(path + ": unsupported benchmark format");
        b.space = j.value("space", std::string());
        header = true;
        continue;
      }
      TrainRecord r;
      const std::string arch = j.at("arch").get<std::string>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.val_acc = j.at("val_acc").get<std::vector<double>>();
      r.test_acc = j.at("test_acc").get<double>();
      const std::string status = j.at("status").get<std::string>();
      if (status != "ok" && status != "failed") throw ConfigError(path + ": bad status '" + status + "'");
      r.failed = status == "failed";
      r.error = j.value("error", std::string());
      for (double a : r.val_acc)
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError(path + ": accuracy outside [0,1]");
      if (!(r.test_acc >= 0.0 && r.test_acc <= 1.0)) throw ConfigError(path + ": accuracy outside [0,1]");
      b.records[arch].push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!header) throw ConfigError(path + ": missing benchmark header");
  return b;
}

}  // namespace

double TabularBenchmark::mean_accuracy(const std::string& arch) const {
  const auto it = records.find(arch);
  if (it == records.end() || it->second.empty()) throw Error("unknown architecture: " + arch);
  double s = 0.0;
  for (const auto& r : it->second) s += r.failed ? 0.0 : r.test_acc;
  return s / static_cast<double>(it->second.size());
}

std::size_t TabularBenchmark::record_count() const {
  std::size_t n = 0;
  for (const auto& [a, rs] : records) n += rs.size();
  return n;
}

double query(const TabularBenchmark& bench, const std::string& arch, Rng& rng) {
  const auto it = bench.records.find(arch);
  if (it == bench.records.end() || it->second.empty()) throw Error("unknown architecture: " + arch);
  const auto& r = it->second[uniform_index(rng, it->second.size())];
  return r.failed ? 0.0 : r.test_acc;
}

std::string bench_header_json(const std::string& space) {
  return nlohmann::ordered_json{{"format", kBenchFormat}, {"version", kBenchVersion}, {"space", space}}.dump();
}

std::string train_record_json(const std::string& arch, const TrainRecord& r) {
  nlohmann::ordered_json j;
  j["arch"] = arch;
  j["seed"] = r.seed;
  j["val_acc"] = r.val_acc;
  j["test_acc"] = r.failed ? 0.0 : r.test_acc;
  j["status"] = r.failed ? "failed" : "ok";
  if (r.failed) j["error"] = r.error;
  return j.dump();
}

void save_benchmark(const std::string& path, const TabularBenchmark& bench) {
  std::string out = bench_header_json(bench.space) + "\n";
  for (const auto& [arch, rs] : bench.records) {
    std::vector<const TrainRecord*> sorted;
    for (const auto& r : rs) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->seed < b->seed; });
    for (const auto* r : sorted) out += train_record_json(arch, *r) + "\n";
  }
  write_file_atomic(path, out);
}

TabularBenchmark load_benchmark(const std::string& path) { return parse_benchmark(path, false); }

InitConfig record_init(const MinibenchConfig& cfg, std::uint64_t arch_index, int slot) {
  InitConfig init = cfg.init;
  init.seed = derive_seed(cfg.init.seed, arch_index, static_cast<std::uint64_t>(slot));
  return init;
}

TrainConfig record_train(const MinibenchConfig& cfg, std::uint64_t arch_index, int slot) {
  TrainConfig t = cfg.train;
  t.seed = derive_seed(cfg.train.seed ^ 0x5eedULL, arch_index, static_cast<std::uint64_t>(slot));
  return t;
}

TabularBenchmark build_minibench(const MinibenchConfig& cfg, const std::string& path, bool resume,
                                 const std::function<void(const std::string&, const TrainRecord&)>& on_record) {
  if (cfg.seeds < 1) throw ConfigError("seeds per architecture must be >= 1");
  cfg.train.validate();
  if (cfg.data.resolution != cfg.scale.resolution || cfg.data.classes != cfg.scale.classes ||
      cfg.data.channels != cfg.scale.in_channels)
    throw ConfigError("dataset shape does not match the scale configuration");
  const auto archs = enumerate_space(cfg.space);
  const SyntheticDataset data = gen_dataset(cfg.data, cfg.data_seed);

  TabularBenchmark bench;
  bench.space = cfg.space.name;
  std::set<std::pair<std::string, std::uint64_t>> done;
  if (resume && file_exists(path)) {
    bench = parse_benchmark(path, true);
    if (bench.space != cfg.space.name) throw ConfigError("existing benchmark belongs to space '" + bench.space + "'");
    for (const auto& [arch, rs] : bench.records)
      for (const auto& r : rs) done.emplace(arch, r.seed);
    // Drops a torn trailing line before appending.
    save_benchmark(path, bench);
  } else {
    write_file_atomic(path, bench_header_json(cfg.space.name) + "\n");
  }

  std::vector<std::pair<std::size_t, int>> todo;
  std::vector<std::string> names(archs.size());
  for (std::size_t a = 0; a < archs.size(); ++a) {
    names[a] = canonical_string(archs[a], cfg.space);
    for (int s = 0; s < cfg.seeds; ++s)
      if (!done.count({names[a], static_cast<std::uint64_t>(s)})) todo.emplace_back(a, s);
  }

  std::mutex mu;
  parallel_for(todo.size(), cfg.workers, [&](std::size_t i) {
    const auto [a, slot] = todo[i];
    TrainRecord rec;
    try {
      Network net = materialize(archs[a], cfg.space, cfg.scale, record_init(cfg, a, slot));
      rec = train(net, data, record_train(cfg, a, slot));
    } catch (const Error& e) {
      rec = TrainRecord{};
      rec.failed = true;
      rec.error = e.what();
    }
    rec.seed = static_cast<std::uint64_t>(slot);
    std::lock_guard lock(mu);
    append_line(path, train_record_json(names[a], rec));
    if (on_record) on_record(names[a], rec);
    bench.records[names[a]].push_back(std::move(rec));
  });

  for (auto& [arch, rs] : bench.records)
    std::stable_sort(rs.begin(), rs.end(), [](const TrainRecord& x, const TrainRecord& y) { return x.seed < y.seed; });
  save_benchmark(path, bench);
  return bench;
}

}  // namespace zc
