#include "zcnas/analysis/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zcnas/common/error.hpp"

namespace zc {

std::vector<double> mid_ranks(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error("spearman: series differ in length");
  const std::size_t n = xs.size();
  if (n < 2) throw Error("spearman needs at least two points");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw Error("spearman: non-finite value");
  const auto rx = mid_ranks(xs);
  const auto ry = mid_ranks(ys);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = rx[i] - mean, dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("spearman: constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

void RankedTable::validate() const {
  if (proxy.size() != archs.size() || accuracy.size() != archs.size())
    throw Error("ranked table columns differ in length");
  for (double a : accuracy)
    if (!std::isfinite(a)) throw Error("ranked table has a non-finite accuracy");
}

void RankedTable::add(std::string arch, std::optional<double> p, double acc) {
  archs.push_back(std::move(arch));
  proxy.push_back(p);
  accuracy.push_back(acc);
}

namespace {

RhoResult rho_on(const RankedTable& t, const std::vector<std::size_t>& rows) {
  RhoResult r;
  std::vector<double> xs, ys;
  for (std::size_t i : rows) {
    if (!t.proxy[i]) {
      ++r.excluded;
      continue;
    }
    xs.push_back(*t.proxy[i]);
    ys.push_back(t.accuracy[i]);
  }
  r.n = xs.size();
  r.rho = spearman(xs, ys);
  return r;
}

std::vector<std::size_t> ranked_rows(const RankedTable& t, TopBy by) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (by == TopBy::Accuracy || t.proxy[i]) rows.push_back(i);
  auto value = [&](std::size_t i) { return by == TopBy::Accuracy ? t.accuracy[i] : *t.proxy[i]; };
  std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    const double va = value(a), vb = value(b);
    if (va != vb) return va > vb;
    return t.archs[a] < t.archs[b];
  });
  return rows;
}

std::size_t top_count(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("fraction must be in (0, 1]");
  const double want = std::ceil(fraction * static_cast<double>(n) - 1e-9);
  return std::min(n, static_cast<std::size_t>(want));
}

}  // namespace

RhoResult table_spearman(const RankedTable& t) {
  t.validate();
  std::vector<std::size_t> rows(t.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rho_on(t, rows);
}

std::vector<std::size_t> top_n_indices(const RankedTable& t, std::size_t n, TopBy by) {
  auto rows = ranked_rows(t, by);
  if (rows.size() > n) rows.resize(n);
  return rows;
}

std::vector<std::size_t> top_indices(const RankedTable& t, double fraction, TopBy by) {
  return top_n_indices(t, top_count(t.size(), fraction), by);
}

RhoResult top_fraction_spearman(const RankedTable& t, double fraction, TopBy by) {
  t.validate();
  const auto rows = top_indices(t, fraction, by);
  if (rows.size() < 2) throw Error("top-fraction subset has fewer than two rows");
  return rho_on(t, rows);
}

double top_overlap(const RankedTable& t, double fraction) {
  t.validate();
  if (t.size() == 0) throw Error("top_overlap on an empty table");
  const auto acc = top_indices(t, fraction, TopBy::Accuracy);
  auto prox = top_indices(t, fraction, TopBy::Proxy);
  std::sort(prox.begin(), prox.end());
  std::size_t both = 0;
  for (std::size_t i : acc)
    if (std::binary_search(prox.begin(), prox.end(), i)) ++both;
  return 100.0 * static_cast<double>(both) / static_cast<double>(acc.size());
}

std::size_t top_n_count(const RankedTable& t, std::size_t n, double accuracy_fraction) {
  t.validate();
  if (n > t.size()) throw Error("top_n_count: n exceeds the table size");
  auto acc = top_indices(t, accuracy_fraction, TopBy::Accuracy);
  std::sort(acc.begin(), acc.end());
  std::size_t count = 0;
  for (std::size_t i : top_n_indices(t, n, TopBy::Proxy))
    if (std::binary_search(acc.begin(), acc.end(), i)) ++count;
  return count;
}

ClusterResult cluster_analysis(const SpaceSpec& spec, const ArchLookup& accuracy, const ArchLookup& proxy,
                               std::size_t n_clusters, Rng& rng) {
  ClusterResult res;
  const std::uint64_t size = space_size(spec);
  double match = 0.0, size_sum = 0.0, rho_sum = 0.0;
  for (std::size_t k = 0; k < n_clusters; ++k) {
    const Architecture center = arch_from_index(spec, std::uniform_int_distribution<std::uint64_t>(0, size - 1)(rng));
    std::vector<Architecture> members{center};
    for (auto& nb : neighbors(center, spec)) members.push_back(std::move(nb));

    std::vector<std::string> names;
    std::vector<double> acc, prx;
    bool complete = true;
    for (const auto& m : members) {
      names.push_back(canonical_string(m, spec));
      const auto a = accuracy(names.back());
      const auto p = proxy(names.back());
      if (!a || !p) {
        complete = false;
        break;
      }
      acc.push_back(*a);
      prx.push_back(*p);
    }
    if (!complete) {
      ++res.skipped;
      continue;
    }
    ++res.clusters;
    size_sum += static_cast<double>(members.size());
    std::size_t best = 0;
    for (std::size_t i = 1; i < members.size(); ++i)
      if (prx[i] > prx[best] || (prx[i] == prx[best] && names[i] < names[best])) best = i;
    if (acc[best] == *std::max_element(acc.begin(), acc.end())) match += 1.0;
    const bool acc_const = std::all_of(acc.begin(), acc.end(), [&](double v) { return v == acc[0]; });
    const bool prx_const = std::all_of(prx.begin(), prx.end(), [&](double v) { return v == prx[0]; });
    if (members.size() >= 2 && !acc_const && !prx_const) {
      rho_sum += spearman(prx, acc);
      ++res.rho_clusters;
    }
  }
  if (res.clusters > 0) {
    res.top_match_pct = 100.0 * match / static_cast<double>(res.clusters);
    res.avg_cluster_size = size_sum / static_cast<double>(res.clusters);
  }
  if (res.rho_clusters > 0) res.local_rho = rho_sum / static_cast<double>(res.rho_clusters);
  return res;
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw Error("quantile of an empty series");
  if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile level outside [0, 1]");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

}  // namespace zc
