#pragma once

#include <string>
#include <vector>

#include "zcnas/search/search.hpp"

namespace zc {

// Seed of repeat `r` for a base config.
std::uint64_t repeat_seed(std::uint64_t base, int r);

// Independent searches, one per repeat, run across `workers` threads. The
// result is ordered by repeat and does not depend on the worker count.
std::vector<SearchTrace> run_repeats(const SearchEnv& env, const SearchConfig& cfg, int repeats, int workers);

struct SummaryRow {
  int index = 0;
  double median = 0.0, q25 = 0.0, q75 = 0.0;
};

// Best-so-far quartiles per trained-model index. A trace shorter than the
// longest one holds its final best.
std::vector<SummaryRow> summarize(const std::vector<SearchTrace>& traces);

// Per-repeat statistic; nullopt-valued repeats are reported as budget + 1.
std::vector<double> samples_to_threshold_all(const std::vector<SearchTrace>& traces, double threshold, int budget);
std::vector<double> final_best_all(const std::vector<SearchTrace>& traces);
std::vector<double> best_at_all(const std::vector<SearchTrace>& traces, int index);

// {index, arch, acc, best} per line.
std::string trace_jsonl(const SearchTrace& t);
std::string summary_csv(const std::vector<SummaryRow>& rows);

}  // namespace zc
