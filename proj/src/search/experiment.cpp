#include "zcnas/search/experiment.hpp"

#include <algorithm>
#include <json.hpp>

#include "zcnas/analysis/stats.hpp"
#include "zcnas/common/error.hpp"
#include "zcnas/common/parallel.hpp"
#include "zcnas/io/csv.hpp"

namespace zc {

std::uint64_t repeat_seed(std::uint64_t base, int r) { return derive_seed(base, 0x5eed0000ULL + static_cast<std::uint64_t>(r)); }

std::vector<SearchTrace> run_repeats(const SearchEnv& env, const SearchConfig& cfg, int repeats, int workers) {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  cfg.validate();
  std::vector<SearchTrace> out(static_cast<std::size_t>(repeats));
  parallel_for(out.size(), workers, [&](std::size_t r) {
    SearchConfig c = cfg;
    c.seed = repeat_seed(cfg.seed, static_cast<int>(r));
    out[r] = run_search(env, c);
  });
  return out;
}

namespace {

double best_at(const SearchTrace& t, std::size_t i) {
  if (t.events.empty()) return 0.0;
  return t.events[std::min(i, t.events.size() - 1)].best;
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<SearchTrace>& traces) {
  std::size_t len = 0;
  for (const auto& t : traces) len = std::max(len, t.events.size());
  std::vector<SummaryRow> rows;
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<double> v;
    for (const auto& t : traces) v.push_back(best_at(t, i));
    rows.push_back({static_cast<int>(i + 1), median(v), quantile(v, 0.25), quantile(v, 0.75)});
  }
  return rows;
}

std::vector<double> samples_to_threshold_all(const std::vector<SearchTrace>& traces, double threshold, int budget) {
  std::vector<double> out;
  for (const auto& t : traces) {
    const auto s = samples_to_threshold(t, threshold);
    out.push_back(s ? *s : budget + 1);
  }
  return out;
}

std::vector<double> final_best_all(const std::vector<SearchTrace>& traces) {
  std::vector<double> out;
  for (const auto& t : traces) out.push_back(t.events.empty() ? 0.0 : t.events.back().best);
  return out;
}

std::vector<double> best_at_all(const std::vector<SearchTrace>& traces, int index) {
  if (index < 1) throw ConfigError("index is 1-based");
  std::vector<double> out;
  for (const auto& t : traces) out.push_back(best_at(t, static_cast<std::size_t>(index - 1)));
  return out;
}

std::string trace_jsonl(const SearchTrace& t) {
  std::string s;
  for (const auto& e : t.events) {
    nlohmann::ordered_json j;
    j["index"] = e.index;
    j["arch"] = e.arch;
    j["acc"] = e.acc;
    j["best"] = e.best;
    s += j.dump() + "\n";
  }
  return s;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  CsvTable t({"index", "median", "q25", "q75"});
  for (const auto& r : rows) t.add_row({std::to_string(r.index), csv_number(r.median), csv_number(r.q25), csv_number(r.q75)});
  return t.str();
}

}  // namespace zc
