#include "zcnas/search/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "zcnas/common/error.hpp"
#include "zcnas/search/search.hpp"

namespace zc {

namespace {

GraphSpec predictor_graph(int ops, int edges, int hidden) {
  GraphBuilder g;
  int x = g.input({static_cast<std::size_t>(ops), 1, static_cast<std::size_t>(2 * edges)}, "pair");
  x = g.conv2d(x, ops, hidden, 1, 1, 0, true, "embed");
  x = g.relu(x, "embed.relu");
  x = g.flatten(x, "flat");
  x = g.linear(x, hidden * 2 * edges, 2, true, "head");
  return g.build(x);
}

std::vector<double> squared_normalized_adjacency(int n_nodes) {
  const auto edges = cell_edges(n_nodes);
  const std::size_t e = edges.size();
  std::vector<double> a(e * e, 0.0);
  for (std::size_t i = 0; i < e; ++i)
    for (std::size_t j = 0; j < e; ++j)
      if (i == j || edges[i].second == edges[j].first || edges[j].second == edges[i].first) a[i * e + j] = 1.0;
  for (std::size_t i = 0; i < e; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < e; ++j) s += a[i * e + j];
    for (std::size_t j = 0; j < e; ++j) a[i * e + j] /= s;
  }
  std::vector<double> a2(e * e, 0.0);
  for (std::size_t i = 0; i < e; ++i)
    for (std::size_t k = 0; k < e; ++k)
      for (std::size_t j = 0; j < e; ++j) a2[i * e + j] += a[i * e + k] * a[k * e + j];
  return a2;
}

}  // namespace

PairPredictor::PairPredictor(const SpaceSpec& spec, int hidden, std::uint64_t seed)
    : edges_(spec.edge_count()),
      ops_(static_cast<int>(spec.op_set.size())),
      norm_adj2_(squared_normalized_adjacency(spec.n_nodes)),
      net_(predictor_graph(static_cast<int>(spec.op_set.size()), spec.edge_count(), hidden),
           InitConfig{InitScheme::Default, BiasMode::SchemeDefault, seed}) {}

std::vector<double> PairPredictor::features(const Architecture& a) const {
  const auto e = static_cast<std::size_t>(edges_);
  const auto k = static_cast<std::size_t>(ops_);
  std::vector<double> f(k * e, 0.0);
  for (std::size_t v = 0; v < e; ++v)
    for (std::size_t u = 0; u < e; ++u) f[static_cast<std::size_t>(a.ops[u]) * e + v] += norm_adj2_[v * e + u];
  return f;
}

Tensor PairPredictor::pair_batch(const std::vector<std::vector<double>>& feats,
                                 const std::vector<std::pair<std::uint32_t, std::uint32_t>>& idx) const {
  const auto e = static_cast<std::size_t>(edges_);
  const auto k = static_cast<std::size_t>(ops_);
  Tensor t({idx.size(), k, 1, 2 * e});
  for (std::size_t n = 0; n < idx.size(); ++n) {
    const auto& fa = feats[idx[n].first];
    const auto& fb = feats[idx[n].second];
    double* dst = t.ptr() + n * k * 2 * e;
    for (std::size_t c = 0; c < k; ++c) {
      std::copy_n(fa.data() + c * e, e, dst + c * 2 * e);
      std::copy_n(fb.data() + c * e, e, dst + c * 2 * e + e);
    }
  }
  return t;
}

void PairPredictor::fit(const std::vector<std::vector<double>>& feats, const std::vector<Pair>& pairs, int steps,
                        int batch, double lr, Rng& rng) {
  if (pairs.empty()) return;
  SgdHyper hp{lr, 0.9, true, 0.0};
  for (int s = 0; s < steps; ++s) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> idx;
    std::vector<int> labels;
    for (int i = 0; i < batch; ++i) {
      const auto& p = pairs[uniform_index(rng, pairs.size())];
      if (uniform01(rng) < 0.5) {
        idx.emplace_back(p.a, p.b);
        labels.push_back(p.a_wins ? 0 : 1);
      } else {
        idx.emplace_back(p.b, p.a);
        labels.push_back(p.a_wins ? 1 : 0);
      }
    }
    const auto g = net_.backward(LossSpec::cross_entropy(std::move(labels)), pair_batch(feats, idx));
    sgd_step(net_, g, hp);
  }
}

std::vector<double> PairPredictor::predict(const std::vector<std::vector<double>>& feats,
                                           const std::vector<std::pair<std::uint32_t, std::uint32_t>>& idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  constexpr std::size_t kChunk = 4096;
  for (std::size_t start = 0; start < idx.size(); start += kChunk) {
    const std::vector<std::pair<std::uint32_t, std::uint32_t>> part(
        idx.begin() + static_cast<long>(start), idx.begin() + static_cast<long>(std::min(idx.size(), start + kChunk)));
    const PassOptions opt{false, true};
    const Tensor x = pair_batch(feats, part);
    const auto r = net_.evaluate<double>(net_.values(), x, nullptr, opt);
    const Tensor& logits = r.activations[static_cast<std::size_t>(net_.output_node())];
    for (std::size_t n = 0; n < part.size(); ++n) {
      const double d = logits[n * 2 + 1] - logits[n * 2];
      out.push_back(1.0 / (1.0 + std::exp(d)));
    }
  }
  return out;
}

std::vector<double> PairPredictor::pairwise(const std::vector<std::vector<double>>& feats) {
  const auto n = static_cast<std::uint32_t>(feats.size());
  std::vector<std::pair<std::uint32_t, std::uint32_t>> idx;
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < n; ++j)
      if (i != j) idx.emplace_back(i, j);
  const auto p = predict(feats, idx);
  std::vector<double> out(static_cast<std::size_t>(n) * n, 0.5);
  for (std::size_t t = 0; t < idx.size(); ++t) out[idx[t].first * static_cast<std::size_t>(n) + idx[t].second] = p[t];
  return out;
}

double PairPredictor::pair_accuracy(const std::vector<std::vector<double>>& feats, const std::vector<Pair>& pairs) {
  if (pairs.empty()) return 0.0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> idx;
  for (const auto& p : pairs) idx.emplace_back(p.a, p.b);
  const auto prob = predict(feats, idx);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if ((prob[i] > 0.5) == pairs[i].a_wins) ++ok;
  return static_cast<double>(ok) / static_cast<double>(pairs.size());
}

SearchTrace predictor_search(const SearchEnv& env, const SearchConfig& cfg) {
  cfg.validate();
  SearchTrace trace;
  Rng rng(derive_seed(cfg.seed, 0xb9f0ULL));
  Rng query_rng(derive_seed(cfg.seed, 0x9e4aULL));
  PairPredictor model(env.space, cfg.pred.hidden, derive_seed(cfg.seed, 0x1417ULL));
  const std::uint64_t size = space_size(env.space);

  std::vector<std::vector<double>> feats;
  std::vector<PairPredictor::Pair> pairs;
  std::vector<std::uint32_t> trained_ids;
  std::vector<double> trained_acc;
  std::set<std::uint64_t> trained;
  double best = 0.0;

  auto add_features = [&](const Architecture& a) {
    feats.push_back(model.features(a));
    return static_cast<std::uint32_t>(feats.size() - 1);
  };
  auto score = [&](const Architecture& a) {
    ++trace.proxy_evals;
    const auto p = env.proxy(a);
    return p ? *p : -std::numeric_limits<double>::infinity();
  };

  if (cfg.warmup > 0) {
    std::set<std::uint64_t> seen;
    std::vector<Architecture> warm;
    std::vector<double> keys;
    std::vector<std::string> names;
    while (warm.size() < static_cast<std::size_t>(cfg.warmup) && seen.size() < size) {
      Architecture a = random_architecture(env.space, rng);
      if (!seen.insert(arch_index(env.space, a)).second) continue;
      keys.push_back(score(a));
      names.push_back(canonical_string(a, env.space));
      add_features(a);
      warm.push_back(std::move(a));
    }
    for (std::uint32_t i = 0; i < warm.size(); ++i)
      for (std::uint32_t j = i + 1; j < warm.size(); ++j) {
        const bool i_wins = keys[i] != keys[j] ? keys[i] > keys[j] : names[i] < names[j];
        pairs.push_back({i, j, i_wins});
      }
    trace.warmup_pairs = pairs.size();
  }

  bool usable = true;
  auto refit = [&] {
    try {
      model.fit(feats, pairs, cfg.pred.train_steps, cfg.pred.pair_batch, cfg.pred.lr, rng);
      usable = true;
    } catch (const NumericalError&) {
      usable = false;
    }
  };
  if (!pairs.empty()) refit();

  while (static_cast<int>(trace.events.size()) < cfg.budget && trained.size() < size) {
    std::vector<Architecture> cands;
    std::set<std::uint64_t> picked;
    const std::uint64_t untrained = size - trained.size();
    const auto want = std::min<std::uint64_t>(static_cast<std::uint64_t>(cfg.pred.candidates), untrained);
    if (want == untrained) {
      for (std::uint64_t i = 0; i < size; ++i)
        if (!trained.count(i)) cands.push_back(arch_from_index(env.space, i));
    } else {
      while (cands.size() < want) {
        Architecture a = random_architecture(env.space, rng);
        const auto id = arch_index(env.space, a);
        if (trained.count(id) || !picked.insert(id).second) continue;
        cands.push_back(std::move(a));
      }
    }

    std::vector<std::string> names;
    for (const auto& a : cands) names.push_back(canonical_string(a, env.space));
    std::vector<std::size_t> order(cands.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (!pairs.empty() && usable) {
      std::vector<std::vector<double>> cf;
      for (const auto& a : cands) cf.push_back(model.features(a));
      std::vector<double> wins(cands.size(), 0.0);
      bool finite = true;
      try {
        const auto p = model.pairwise(cf);
        const std::size_t n = cands.size();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double s = 0.5 * (p[i * n + j] + 1.0 - p[j * n + i]);
            if (!std::isfinite(s)) finite = false;
            if (s > 0.5) wins[i] += 1.0;
          }
      } catch (const NumericalError&) {
        finite = false;
      }
      if (finite) {
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
          if (wins[x] != wins[y]) return wins[x] > wins[y];
          return names[x] < names[y];
        });
      } else {
        usable = false;
      }
    }
    if (!pairs.empty() && !usable) {
      ++trace.fallback_rounds;
      std::vector<double> keys;
      for (const auto& a : cands) keys.push_back(score(a));
      std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (keys[x] != keys[y]) return keys[x] > keys[y];
        return names[x] < names[y];
      });
    }

    const std::size_t take = std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg.pred.models_per_round));
    for (std::size_t t = 0; t < take && static_cast<int>(trace.events.size()) < cfg.budget; ++t) {
      const Architecture& a = cands[order[t]];
      const double acc = env.train(a, query_rng);
      best = trace.events.empty() ? acc : std::max(best, acc);
      trace.events.push_back({static_cast<int>(trace.events.size()) + 1, names[order[t]], acc, best});
      trained.insert(arch_index(env.space, a));
      const std::uint32_t id = add_features(a);
      for (std::size_t k = 0; k < trained_ids.size(); ++k)
        pairs.push_back({id, trained_ids[k], acc > trained_acc[k]});
      trained_ids.push_back(id);
      trained_acc.push_back(acc);
    }
    refit();
  }
  return trace;
}

}  // namespace zc
