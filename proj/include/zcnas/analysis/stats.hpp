#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zcnas/common/rng.hpp"
#include "zcnas/space/space.hpp"

namespace zc {

// 1-based ranks, ascending; tied values share the mean of their positions.
std::vector<double> mid_ranks(const std::vector<double>& xs);

// Pearson correlation of mid-ranks. Throws Error for n < 2, non-finite
// input, or a constant series.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

// Parallel columns; absent proxies are excluded pairwise.
struct RankedTable {
  std::vector<std::string> archs;
  std::vector<std::optional<double>> proxy;
  std::vector<double> accuracy;

  std::size_t size() const { return archs.size(); }
  void validate() const;
  void add(std::string arch, std::optional<double> p, double acc);
};

struct RhoResult {
  double rho = 0.0;
  std::size_t n = 0;         // pairs used
  std::size_t excluded = 0;  // rows without a proxy value
};

RhoResult table_spearman(const RankedTable& t);

enum class TopBy { Accuracy, Proxy };

// Indices of the ceil(fraction * n) best rows by the chosen column, best
// first; ties go to the smaller canonical string. Rows without a proxy are
// never in a proxy top set.
std::vector<std::size_t> top_indices(const RankedTable& t, double fraction, TopBy by);
std::vector<std::size_t> top_n_indices(const RankedTable& t, std::size_t n, TopBy by);

// Spearman restricted to the top fraction (selected by accuracy unless `by` says otherwise).
RhoResult top_fraction_spearman(const RankedTable& t, double fraction = 0.1, TopBy by = TopBy::Accuracy);
// Percentage of the accuracy top set that is also in the proxy top set.
double top_overlap(const RankedTable& t, double fraction = 0.1);
// Number of the proxy top-n rows that are in the accuracy top `accuracy_fraction`.
std::size_t top_n_count(const RankedTable& t, std::size_t n = 64, double accuracy_fraction = 0.05);

struct ClusterResult {
  double top_match_pct = 0.0;
  double avg_cluster_size = 0.0;
  double local_rho = 0.0;      // mean over clusters with a defined rho
  std::size_t rho_clusters = 0;
  std::size_t clusters = 0;
  std::size_t skipped = 0;     // clusters with a member lacking a proxy value
};

// Lookups return nullopt for unknown architectures.
using ArchLookup = std::function<std::optional<double>(const std::string&)>;

// Random centers drawn uniformly; cluster = center plus its edit-distance-1
// neighbours. A cluster matches when the proxy's best member (ties to the
// smaller canonical string) has the cluster's maximal accuracy.
ClusterResult cluster_analysis(const SpaceSpec& spec, const ArchLookup& accuracy, const ArchLookup& proxy,
                               std::size_t n_clusters, Rng& rng);

// Quantile by linear interpolation between order statistics (q in [0,1]).
double quantile(std::vector<double> xs, double q);
double median(std::vector<double> xs);

}  // namespace zc
