#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "zcnas/proxy/proxy.hpp"
#include "zcnas/space/space.hpp"

namespace zc {

struct ScoreRequest {
  std::vector<Metric> metrics;
  ProxyConfig proxy;
  InitConfig init;
  // Identifies the real batch when proxy.data_mode is RealBatch.
  std::string data_digest;
};

std::uint64_t score_fingerprint(const std::string& arch, Metric m, const SpaceSpec& spec, const ScaleConfig& scale,
                                const ScoreRequest& req);
std::string fingerprint_hex(std::uint64_t fp);

// One record per (architecture, metric). Lookups and inserts may come from
// several threads.
struct ScoreRecord {
  std::string arch;
  ProxyScore score;
};

class ScoreCache {
 public:
  std::optional<ProxyScore> find(std::uint64_t fingerprint) const;
  void insert(const std::string& arch, const ProxyScore& s);
  std::size_t size() const;
  std::size_t hits() const;
  // Records sorted by (arch, metric name, fingerprint).
  std::vector<ScoreRecord> records() const;

  // Line-delimited JSON with a format header line.
  void load(const std::string& path);
  void save(const std::string& path) const;

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::uint64_t, ScoreRecord> map_;
  mutable std::size_t hits_ = 0;
};

// Materializes once, then runs every requested metric on that network and
// one shared batch. Failed metrics appear with ok == false.
std::map<Metric, ProxyScore> score(const Architecture& arch, const SpaceSpec& spec, const ScaleConfig& scale,
                                   const ScoreRequest& req, ScoreCache* cache = nullptr,
                                   const DataBatch* real = nullptr);

// Score-file records as a table: arch string -> rank key per metric name.
// Failed entries are omitted. Synthetic proxy tables use the same format.
using ProxyTable = std::map<std::string, std::map<std::string, double>>;
ProxyTable load_proxy_table(const std::string& path);
// `metric_label` replaces the metric name (synthetic proxy tables).
void write_score_file(const std::string& path, const std::vector<ScoreRecord>& records,
                      const std::string& metric_label = {});
std::string score_record_json(const ScoreRecord& r, const std::string& metric_label = {});

}  // namespace zc
