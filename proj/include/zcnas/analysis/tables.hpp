#pragma once

#include <optional>
#include <string>
#include <vector>

#include "zcnas/analysis/stats.hpp"
#include "zcnas/bench/tabular.hpp"
#include "zcnas/proxy/score.hpp"

namespace zc {

// Rows in benchmark order; proxy absent where the table has no entry.
RankedTable ranked_table(const TabularBenchmark& bench, const ProxyTable& proxies, const std::string& metric);

// Proxy column = Copeland position score (higher is better) from the
// synflow/jacob_cov/snip vote.
RankedTable vote_table(const TabularBenchmark& bench, const ProxyTable& proxies);

// Spearman that reports undefined cases (too few rows, constant column) as nullopt.
std::optional<RhoResult> try_rho(const RankedTable& t);
std::optional<RhoResult> try_top_rho(const RankedTable& t, double fraction);

struct MetricRow {
  std::string metric;
  std::optional<RhoResult> rho;
  std::optional<RhoResult> top_rho;  // top 10% by accuracy
  double top_overlap = 0.0;          // percent
  std::size_t top_n = 0;             // min(64, rows)
  std::size_t top_n_hits = 0;        // proxy top-n within accuracy top 5%
};

// `metrics` may include "vote".
std::vector<MetricRow> metric_rows(const TabularBenchmark& bench, const ProxyTable& proxies,
                                   const std::vector<std::string>& metrics);

// Spearman between mean validation accuracy at each epoch and mean final
// test accuracy, over architectures whose records all cover that epoch.
std::vector<std::optional<double>> epoch_correlation_curve(const TabularBenchmark& bench);

}  // namespace zc
