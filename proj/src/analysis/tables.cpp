#include "zcnas/analysis/tables.hpp"

#include <algorithm>

#include "zcnas/common/error.hpp"
#include "zcnas/proxy/proxy.hpp"

namespace zc {

namespace {

std::optional<double> lookup(const ProxyTable& p, const std::string& arch, const std::string& metric) {
  const auto it = p.find(arch);
  if (it == p.end()) return std::nullopt;
  const auto jt = it->second.find(metric);
  if (jt == it->second.end()) return std::nullopt;
  return jt->second;
}

}  // namespace

RankedTable ranked_table(const TabularBenchmark& bench, const ProxyTable& proxies, const std::string& metric) {
  if (metric == "vote") return vote_table(bench, proxies);
  RankedTable t;
  for (const auto& [arch, recs] : bench.records) t.add(arch, lookup(proxies, arch, metric), bench.mean_accuracy(arch));
  return t;
}

RankedTable vote_table(const TabularBenchmark& bench, const ProxyTable& proxies) {
  std::vector<std::string> names;
  std::vector<VoteTriple> triples;
  for (const auto& [arch, recs] : bench.records) {
    names.push_back(arch);
    triples.push_back({lookup(proxies, arch, "synflow"), lookup(proxies, arch, "jacob_cov"),
                       lookup(proxies, arch, "snip")});
  }
  const auto order = vote_rank(names, triples);
  std::vector<double> pos(names.size());
  for (std::size_t r = 0; r < order.size(); ++r) pos[order[r]] = static_cast<double>(order.size() - r);
  RankedTable t;
  for (std::size_t i = 0; i < names.size(); ++i) t.add(names[i], pos[i], bench.mean_accuracy(names[i]));
  return t;
}

std::optional<RhoResult> try_rho(const RankedTable& t) {
  try {
    return table_spearman(t);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::optional<RhoResult> try_top_rho(const RankedTable& t, double fraction) {
  try {
    return top_fraction_spearman(t, fraction);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<MetricRow> metric_rows(const TabularBenchmark& bench, const ProxyTable& proxies,
                                   const std::vector<std::string>& metrics) {
  std::vector<MetricRow> rows;
  for (const auto& m : metrics) {
    const RankedTable t = ranked_table(bench, proxies, m);
    MetricRow r;
    r.metric = m;
    r.rho = try_rho(t);
    r.top_rho = try_top_rho(t, 0.1);
    if (t.size() > 0) {
      r.top_overlap = top_overlap(t, 0.1);
      r.top_n = std::min<std::size_t>(64, t.size());
      r.top_n_hits = top_n_count(t, r.top_n, 0.05);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<std::optional<double>> epoch_correlation_curve(const TabularBenchmark& bench) {
  std::size_t epochs = 0;
  for (const auto& [arch, recs] : bench.records)
    for (const auto& r : recs) epochs = std::max(epochs, r.val_acc.size());
  std::vector<std::optional<double>> out;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::vector<double> xs, ys;
    for (const auto& [arch, recs] : bench.records) {
      double sum = 0.0;
      bool complete = !recs.empty();
      for (const auto& r : recs) {
        if (r.val_acc.size() <= e) complete = false;
        else sum += r.val_acc[e];
      }
      if (!complete) continue;
      xs.push_back(sum / static_cast<double>(recs.size()));
      ys.push_back(bench.mean_accuracy(arch));
    }
    try {
      out.push_back(spearman(xs, ys));
    } catch (const Error&) {
      out.push_back(std::nullopt);
    }
  }
  return out;
}

}  // namespace zc
