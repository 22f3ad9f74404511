#pragma once
// Independent reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "zcnas/analysis/stats.hpp"
#include "zcnas/common/rng.hpp"
#include "zcnas/engine/network.hpp"
#include "zcnas/space/space.hpp"

namespace oracle {

using zc::GradientSet;
using zc::Network;
using zc::Rng;
using zc::Tensor;

inline Tensor random_tensor(const zc::Shape& s, Rng& rng, double scale = 1.0) {
  Tensor t(s);
  for (auto& v : t.data) v = scale * zc::normal(rng);
  return t;
}

inline std::vector<int> random_labels(std::size_t n, int classes, Rng& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(zc::uniform_index(rng, static_cast<std::size_t>(classes)));
  return y;
}

struct TinyNet {
  zc::GraphSpec graph;
  zc::Shape input;  // per sample
  int classes = 0;
};

// Random small CNN touching every operator kind: conv, batchnorm, relu,
// avgpool, zero, add, global pool, flatten, linear.
inline TinyNet random_tiny_net(Rng& rng) {
  zc::GraphBuilder g;
  const int cin = 1 + static_cast<int>(zc::uniform_index(rng, 2));
  const int hw = 4 + static_cast<int>(zc::uniform_index(rng, 2));
  const int c1 = 2 + static_cast<int>(zc::uniform_index(rng, 2));
  const int classes = 2 + static_cast<int>(zc::uniform_index(rng, 2));
  const int k1 = zc::uniform_index(rng, 2) ? 3 : 1;
  TinyNet t;
  t.input = {static_cast<std::size_t>(cin), static_cast<std::size_t>(hw), static_cast<std::size_t>(hw)};
  t.classes = classes;
  int x = g.input(t.input);
  x = g.conv2d(x, cin, c1, k1, 1, k1 / 2, zc::uniform_index(rng, 2) == 1, "c1");
  x = g.batchnorm(x, c1, "bn1");
  x = g.relu(x, "r1");
  const int a = g.avgpool(x, 3, 1, 1, "pool");
  const int b = g.conv2d(x, c1, c1, 1, 1, 0, true, "c2");
  const int z = g.zero(x, "z");
  x = g.add({a, b, z}, "sum");
  const int stride = zc::uniform_index(rng, 2) ? 2 : 1;
  x = g.conv2d(x, c1, c1, 3, stride, 1, false, "c3");
  x = g.relu(x, "r2");
  if (zc::uniform_index(rng, 2)) {
    x = g.global_avg_pool(x, "gap");
    x = g.flatten(x, "flat");
    x = g.linear(x, c1, classes, true, "fc");
  } else {
    const int side = (hw + 2 - 3) / stride + 1;
    x = g.flatten(x, "flat");
    x = g.linear(x, c1 * side * side, classes, true, "fc");
  }
  t.graph = g.build(x);
  return t;
}

// Tiny nets with at most ~150 parameters for the explicit Hessian.
inline TinyNet random_hessian_net(Rng& rng) {
  zc::GraphBuilder g;
  const int c = 2 + static_cast<int>(zc::uniform_index(rng, 2));
  TinyNet t;
  t.input = {1, 3, 3};
  t.classes = 3;
  int x = g.input(t.input);
  x = g.conv2d(x, 1, c, 2, 1, 0, true, "c1");
  if (zc::uniform_index(rng, 2)) x = g.batchnorm(x, c, "bn");
  x = g.relu(x, "r");
  const int p = g.avgpool(x, 3, 1, 1, "pool");
  x = g.add({p, g.conv2d(x, c, c, 1, 1, 0, false, "c2")}, "sum");
  x = g.flatten(x, "flat");
  x = g.linear(x, c * 4, 3, true, "fc");
  t.graph = g.build(x);
  return t;
}

// Flattens parameter gradients in network parameter order.
inline std::vector<double> flatten(const Network& net, const GradientSet& g) {
  std::vector<double> out;
  for (const auto& p : net.parameters()) {
    const auto& t = g.params.at(p.name);
    out.insert(out.end(), t.data.begin(), t.data.end());
  }
  return out;
}

inline std::vector<double> flatten_values(const std::vector<Tensor>& vals) {
  std::vector<double> out;
  for (const auto& t : vals) out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

inline GradientSet unflatten(const Network& net, const std::vector<double>& x) {
  GradientSet g;
  std::size_t k = 0;
  for (std::size_t p = 0; p < net.parameters().size(); ++p) {
    Tensor t(net.values()[p].shape);
    for (auto& v : t.data) v = x[k++];
    g.params.emplace(net.parameters()[p].name, std::move(t));
  }
  return g;
}

inline void set_flat(std::vector<Tensor>& vals, std::size_t idx, double v) {
  for (auto& t : vals) {
    if (idx < t.size()) {
      t[idx] = v;
      return;
    }
    idx -= t.size();
  }
}

inline double loss_at(const Network& net, const std::vector<Tensor>& vals, const Tensor& batch,
                      const zc::LossSpec& loss) {
  zc::PassOptions opt;
  opt.bypass_batchnorm = loss.kind == zc::LossKind::SynflowProduct;
  return net.evaluate<double>(vals, batch, &loss, opt).loss;
}

inline std::vector<double> grad_at(const Network& net, const std::vector<Tensor>& vals, const Tensor& batch,
                                   const zc::LossSpec& loss) {
  zc::PassOptions opt;
  opt.bypass_batchnorm = loss.kind == zc::LossKind::SynflowProduct;
  const auto r = net.evaluate<double>(vals, batch, &loss, opt);
  return flatten_values(r.param_grads);
}

// Central differences of the loss, one parameter at a time.
inline std::vector<double> fd_gradient(const Network& net, const Tensor& batch, const zc::LossSpec& loss,
                                       double h = 1e-5) {
  std::vector<Tensor> vals = net.values();
  const auto flat = flatten_values(vals);
  std::vector<double> g(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    set_flat(vals, i, flat[i] + h);
    const double lp = loss_at(net, vals, batch, loss);
    set_flat(vals, i, flat[i] - h);
    const double lm = loss_at(net, vals, batch, loss);
    set_flat(vals, i, flat[i]);
    g[i] = (lp - lm) / (2.0 * h);
  }
  return g;
}

// Column j = central difference of the analytic gradient along e_j.
inline std::vector<std::vector<double>> explicit_hessian(const Network& net, const Tensor& batch,
                                                         const zc::LossSpec& loss, double h = 1e-5) {
  std::vector<Tensor> vals = net.values();
  const auto flat = flatten_values(vals);
  const std::size_t n = flat.size();
  std::vector<std::vector<double>> H(n, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    set_flat(vals, j, flat[j] + h);
    const auto gp = grad_at(net, vals, batch, loss);
    set_flat(vals, j, flat[j] - h);
    const auto gm = grad_at(net, vals, batch, loss);
    set_flat(vals, j, flat[j]);
    for (std::size_t i = 0; i < n; ++i) H[i][j] = (gp[i] - gm[i]) / (2.0 * h);
  }
  return H;
}

inline std::vector<double> matvec(const std::vector<std::vector<double>>& A, const std::vector<double>& x) {
  std::vector<double> y(A.size(), 0.0);
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += A[i][j] * x[j];
  return y;
}

// Element-wise relative error with a small absolute floor.
inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-6) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), floor}));
  return m;
}

inline double norm_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

// ---- statistics ------------------------------------------------------------

// Mid-ranks by counting: rank = 1 + #smaller + (#equal - 1) / 2.
inline std::vector<double> brute_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double y : x) {
      if (y < x[i]) less += 1;
      if (y == x[i]) equal += 1;
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

inline double brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = brute_ranks(x), ry = brute_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += rx[i], my += ry[i];
  mx /= n, my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Row i beats row j when its value is larger, or equal with a smaller name.
inline bool beats(double vi, const std::string& ni, double vj, const std::string& nj) {
  return vi > vj || (vi == vj && ni < nj);
}

inline std::set<std::size_t> brute_top(const std::vector<std::string>& names, const std::vector<double>& v,
                                       const std::vector<bool>& present, std::size_t k) {
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!present[i]) continue;
    std::size_t better = 0;
    for (std::size_t j = 0; j < v.size(); ++j)
      if (j != i && present[j] && beats(v[j], names[j], v[i], names[i])) ++better;
    if (better < k) out.insert(i);
  }
  return out;
}

inline std::size_t ceil_count(double fraction, std::size_t n) {
  std::size_t k = 0;
  while (static_cast<double>(k) < fraction * static_cast<double>(n) - 1e-9) ++k;
  return std::min(k, n);
}

inline double brute_top_overlap(const zc::RankedTable& t, double fraction) {
  std::vector<double> p(t.size()), a = t.accuracy;
  std::vector<bool> has(t.size()), all(t.size(), true);
  for (std::size_t i = 0; i < t.size(); ++i) {
    has[i] = t.proxy[i].has_value();
    p[i] = has[i] ? *t.proxy[i] : 0.0;
  }
  const std::size_t k = ceil_count(fraction, t.size());
  const auto ta = brute_top(t.archs, a, all, k);
  const auto tp = brute_top(t.archs, p, has, k);
  std::size_t both = 0;
  for (auto i : ta) both += tp.count(i);
  return 100.0 * static_cast<double>(both) / static_cast<double>(ta.size());
}

inline std::size_t brute_top_n_count(const zc::RankedTable& t, std::size_t n, double accuracy_fraction) {
  std::vector<double> p(t.size());
  std::vector<bool> has(t.size()), all(t.size(), true);
  for (std::size_t i = 0; i < t.size(); ++i) {
    has[i] = t.proxy[i].has_value();
    p[i] = has[i] ? *t.proxy[i] : 0.0;
  }
  const auto ta = brute_top(t.archs, t.accuracy, all, ceil_count(accuracy_fraction, t.size()));
  const auto tp = brute_top(t.archs, p, has, n);
  std::size_t c = 0;
  for (auto i : tp) c += ta.count(i);
  return c;
}

struct BruteCluster {
  double match_pct = 0.0, avg_size = 0.0, local_rho = 0.0;
  std::size_t clusters = 0, rho_clusters = 0;
};

// Same center sequence as the library: one uniform index per cluster.
inline BruteCluster brute_cluster(const zc::SpaceSpec& spec, const std::map<std::string, double>& acc,
                                  const std::map<std::string, double>& proxy, std::size_t n_clusters, Rng& rng) {
  BruteCluster r;
  const auto size = zc::space_size(spec);
  double matches = 0, sizes = 0, rho_sum = 0;
  for (std::size_t c = 0; c < n_clusters; ++c) {
    const auto center = zc::arch_from_index(spec, std::uniform_int_distribution<std::uint64_t>(0, size - 1)(rng));
    std::vector<zc::Architecture> members{center};
    for (auto& n : zc::neighbors(center, spec)) members.push_back(n);
    std::vector<std::string> names;
    std::vector<double> a, p;
    bool complete = true;
    for (const auto& m : members) {
      const auto s = zc::canonical_string(m, spec);
      if (!acc.count(s) || !proxy.count(s)) {
        complete = false;
        break;
      }
      names.push_back(s);
      a.push_back(acc.at(s));
      p.push_back(proxy.at(s));
    }
    if (!complete) continue;
    ++r.clusters;
    sizes += static_cast<double>(members.size());
    std::size_t best = 0;
    for (std::size_t i = 1; i < names.size(); ++i)
      if (beats(p[i], names[i], p[best], names[best])) best = i;
    const double amax = *std::max_element(a.begin(), a.end());
    if (a[best] == amax) matches += 1;
    const bool const_a = std::all_of(a.begin(), a.end(), [&](double v) { return v == a[0]; });
    const bool const_p = std::all_of(p.begin(), p.end(), [&](double v) { return v == p[0]; });
    if (names.size() >= 2 && !const_a && !const_p) {
      rho_sum += brute_spearman(p, a);
      ++r.rho_clusters;
    }
  }
  if (r.clusters) {
    r.match_pct = 100.0 * matches / static_cast<double>(r.clusters);
    r.avg_size = sizes / static_cast<double>(r.clusters);
  }
  if (r.rho_clusters) r.local_rho = rho_sum / static_cast<double>(r.rho_clusters);
  return r;
}

// ---- XML -------------------------------------------------------------------

// Minimal well-formedness check: balanced, properly nested tags, quoted
// attributes, known entities only, exactly one root element.
inline bool xml_well_formed(const std::string& s) {
  std::vector<std::string> stack;
  std::size_t i = 0, roots = 0;
  auto name_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':' || c == '.'; };
  while (i < s.size()) {
    if (s[i] == '<') {
      if (s.compare(i, 5, "<?xml") == 0) {
        const auto e = s.find("?>", i);
        if (e == std::string::npos) return false;
        i = e + 2;
        continue;
      }
      const bool closing = i + 1 < s.size() && s[i + 1] == '/';
      std::size_t j = i + (closing ? 2 : 1);
      const std::size_t start = j;
      while (j < s.size() && name_char(s[j])) ++j;
      const std::string name = s.substr(start, j - start);
      if (name.empty()) return false;
      if (closing) {
        while (j < s.size() && s[j] == ' ') ++j;
        if (j >= s.size() || s[j] != '>' || stack.empty() || stack.back() != name) return false;
        stack.pop_back();
        i = j + 1;
        continue;
      }
      std::set<std::string> attrs;
      for (;;) {
        while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j >= s.size()) return false;
        if (s[j] == '>') {
          if (stack.empty()) ++roots;
          stack.push_back(name);
          ++j;
          break;
        }
        if (s.compare(j, 2, "/>") == 0) {
          if (stack.empty()) ++roots;
          j += 2;
          break;
        }
        const std::size_t as = j;
        while (j < s.size() && name_char(s[j])) ++j;
        if (j == as || !attrs.insert(s.substr(as, j - as)).second) return false;
        if (j >= s.size() || s[j] != '=') return false;
        ++j;
        if (j >= s.size() || s[j] != '"') return false;
        const auto close = s.find('"', j + 1);
        if (close == std::string::npos) return false;
        if (s.substr(j + 1, close - j - 1).find('<') != std::string::npos) return false;
        j = close + 1;
      }
      i = j;
    } else if (s[i] == '&') {
      const auto e = s.find(';', i);
      if (e == std::string::npos) return false;
      const std::string ent = s.substr(i, e - i + 1);
      if (ent != "&amp;" && ent != "&lt;" && ent != "&gt;" && ent != "&quot;" && ent != "&apos;") return false;
      i = e + 1;
    } else {
      if (stack.empty() && !std::isspace(static_cast<unsigned char>(s[i]))) return false;
      ++i;
    }
  }
  return stack.empty() && roots == 1;
}

}  // namespace oracle
