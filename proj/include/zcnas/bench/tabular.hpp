#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "zcnas/bench/train.hpp"
#include "zcnas/common/rng.hpp"
#include "zcnas/space/space.hpp"

namespace zc {

struct TabularBenchmark {
  std::string space;  // space name the canonical strings belong to
  std::map<std::string, std::vector<TrainRecord>> records;

  bool contains(const std::string& arch) const { return records.count(arch) != 0; }
  // Mean final test accuracy over seeds (failed records count as 0).
  double mean_accuracy(const std::string& arch) const;
  std::size_t record_count() const;
};

// Uniformly picks one seed's final test accuracy. Throws Error for unknown archs.
double query(const TabularBenchmark& bench, const std::string& arch, Rng& rng);

// Line-delimited JSON: a format header, then one record per line with
// arch, seed, val_acc, test_acc and status (ok|failed).
std::string bench_header_json(const std::string& space);
std::string train_record_json(const std::string& arch, const TrainRecord& r);
void save_benchmark(const std::string& path, const TabularBenchmark& bench);
TabularBenchmark load_benchmark(const std::string& path);

struct MinibenchConfig {
  SpaceSpec space = mini_space();
  ScaleConfig scale;
  DatasetSpec data;
  std::uint64_t data_seed = 0;
  TrainConfig train;
  InitConfig init;  // seed is the base for per-record seeds
  int seeds = 3;
  int workers = 1;
};

// Seeds used for record (arch index, seed slot): initialization and training.
InitConfig record_init(const MinibenchConfig& cfg, std::uint64_t arch_index, int slot);
TrainConfig record_train(const MinibenchConfig& cfg, std::uint64_t arch_index, int slot);

// Trains every (architecture, seed slot) pair. Each finished record is
// appended to `path` immediately; with `resume` the existing file is read
// first and its pairs are skipped. On completion `path` is rewritten in
// canonical (arch, seed) order. `on_record` sees each newly trained record.
TabularBenchmark build_minibench(const MinibenchConfig& cfg, const std::string& path, bool resume,
                                 const std::function<void(const std::string&, const TrainRecord&)>& on_record = {});

}  // namespace zc
