#include "zcnas/proxy/score.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <sstream>

#include "zcnas/common/error.hpp"
#include "zcnas/common/rng.hpp"
#include "zcnas/io/files.hpp"

namespace zc {

namespace {
constexpr const char* kScoreFormat = "zcnas-scores";
constexpr int kScoreVersion = 1;
}  // namespace

std::uint64_t score_fingerprint(const std::string& arch, Metric m, const SpaceSpec& spec, const ScaleConfig& scale,
                                const ScoreRequest& req) {
  std::ostringstream os;
  os << "arch=" << arch << ";metric=" << metric_name(m) << ";space=" << spec.name << ':' << spec.n_nodes;
  for (const auto& op : spec.op_set) os << ',' << op;
  os << ";scale=" << scale.resolution << ',' << scale.channels << ',' << scale.cells_per_stage << ','
     << scale.stages << ',' << scale.classes << ',' << scale.in_channels;
  os << ";init=" << init_scheme_name(req.init.scheme) << ',' << bias_mode_name(req.init.bias_mode) << ','
     << req.init.seed;
  // synflow is data-free.
  if (m != Metric::Synflow) {
    os << ";batch=" << req.proxy.batch_size << ',' << data_mode_name(req.proxy.data_mode) << ',' << req.proxy.seed;
    if (req.proxy.data_mode == DataMode::RealBatch) os << ',' << req.data_digest;
  }
  if (m == Metric::JacobCov) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%a", req.proxy.jacob_eps);
    os << ";k=" << buf;
  }
  if (m == Metric::GradNorm || m == Metric::Snip || m == Metric::Grasp)
    os << ";scope=" << param_scope_name(req.proxy.scope);
  return fnv1a(os.str());
}

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

std::optional<ProxyScore> ScoreCache::find(std::uint64_t fingerprint) const {
  std::lock_guard lock(mu_);
  const auto it = map_.find(fingerprint);
  if (it == map_.end()) return std::nullopt;
  ++hits_;
  return it->second.score;
}

void ScoreCache::insert(const std::string& arch, const ProxyScore& s) {
  std::lock_guard lock(mu_);
  map_.insert_or_assign(s.fingerprint, ScoreRecord{arch, s});
}

std::size_t ScoreCache::size() const {
  std::lock_guard lock(mu_);
  return map_.size();
}

std::size_t ScoreCache::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::vector<ScoreRecord> ScoreCache::records() const {
  std::vector<ScoreRecord> out;
  {
    std::lock_guard lock(mu_);
    out.reserve(map_.size());
    for (const auto& [fp, r] : map_) out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const ScoreRecord& a, const ScoreRecord& b) {
    const std::string ma = metric_name(a.score.metric), mb = metric_name(b.score.metric);
    if (a.arch != b.arch) return a.arch < b.arch;
    if (ma != mb) return ma < mb;
    return a.score.fingerprint < b.score.fingerprint;
  });
  return out;
}

std::string score_record_json(const ScoreRecord& r, const std::string& metric_label) {
  nlohmann::ordered_json j;
  j["arch"] = r.arch;
  j["metric"] = metric_label.empty() ? std::string(metric_name(r.score.metric)) : metric_label;
  if (r.score.ok) {
    j["value"] = r.score.value;
    if (r.score.log_domain) j["domain"] = "log";
  } else {
    j["value"] = "failed";
    j["error"] = r.score.error;
  }
  j["fingerprint"] = fingerprint_hex(r.score.fingerprint);
  return j.dump();
}

void write_score_file(const std::string& path, const std::vector<ScoreRecord>& records,
                      const std::string& metric_label) {
  std::string out = nlohmann::ordered_json{{"format", kScoreFormat}, {"version", kScoreVersion}}.dump() + "\n";
  for (const auto& r : records) out += score_record_json(r, metric_label) + "\n";
  write_file_atomic(path, out);
}

namespace {

template <class F>
void read_score_lines(const std::string& path, F&& on_record) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open score file: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("format")) {
      if (j["format"] != kScoreFormat || j.value("version", 0) != kScoreVersion)
        throw ConfigError(path + ": unsupported score file format");
      continue;
    }
    try {
      ScoreRecord r;
      r.arch = j.at("arch").get<std::string>();
      const std::string metric = j.at("metric").get<std::string>();
      const auto& v = j.at("value");
      if (v.is_string()) {
        r.score.ok = false;
        r.score.error = j.value("error", std::string("failed"));
      } else {
        r.score.value = v.get<double>();
        r.score.log_domain = j.value("domain", std::string()) == "log";
      }
      r.score.fingerprint = std::stoull(j.at("fingerprint").get<std::string>(), nullptr, 16);
      on_record(r, metric);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const std::invalid_argument&) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": bad fingerprint");
    }
  }
}

}  // namespace

void ScoreCache::load(const std::string& path) {
  read_score_lines(path, [&](ScoreRecord& r, const std::string& metric) {
    r.score.metric = parse_metric(metric);
    insert(r.arch, r.score);
  });
}

void ScoreCache::save(const std::string& path) const { write_score_file(path, records()); }

ProxyTable load_proxy_table(const std::string& path) {
  ProxyTable t;
  read_score_lines(path, [&](const ScoreRecord& r, const std::string& metric) {
    if (!r.score.ok) return;
    double key = r.score.value;
    if (metric == "synflow" && !r.score.log_domain)
      key = key > 0.0 ? std::log(key) : std::numeric_limits<double>::lowest();
    t[r.arch][metric] = std::max(key, std::numeric_limits<double>::lowest());
  });
  return t;
}

std::map<Metric, ProxyScore> score(const Architecture& arch, const SpaceSpec& spec, const ScaleConfig& scale,
                                   const ScoreRequest& req, ScoreCache* cache, const DataBatch* real) {
  const std::string name = canonical_string(arch, spec);
  std::map<Metric, ProxyScore> out;
  std::vector<Metric> todo;
  for (Metric m : req.metrics) {
    const auto fp = score_fingerprint(name, m, spec, scale, req);
    if (cache) {
      if (auto hit = cache->find(fp)) {
        out[m] = *hit;
        continue;
      }
    }
    todo.push_back(m);
  }
  if (todo.empty()) return out;

  Network net = materialize(arch, spec, scale, req.init);
  const bool needs_data = std::any_of(todo.begin(), todo.end(), [](Metric m) { return m != Metric::Synflow; });
  DataBatch data;
  if (needs_data) data = make_batch(req.proxy, net.input_shape(), scale.classes, real);
  for (Metric m : todo) {
    ProxyScore s = run_metric(m, net, data, req.proxy);
    s.fingerprint = score_fingerprint(name, m, spec, scale, req);
    if (cache) cache->insert(name, s);
    out[m] = s;
  }
  return out;
}

}  // namespace zc
