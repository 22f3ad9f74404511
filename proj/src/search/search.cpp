#include "zcnas/search/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <set>

#include "zcnas/common/error.hpp"

namespace zc {

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Rand: return "rand";
    case Algorithm::RL: return "rl";
    case Algorithm::AE: return "ae";
    case Algorithm::Predictor: return "predictor";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view s) {
  if (s == "rand" || s == "random") return Algorithm::Rand;
  if (s == "rl" || s == "reinforce") return Algorithm::RL;
  if (s == "ae" || s == "evolution") return Algorithm::AE;
  if (s == "predictor" || s == "bp") return Algorithm::Predictor;
  throw ConfigError("unknown search algorithm: " + std::string(s));
}

void SearchConfig::validate() const {
  if (budget < 1) throw ConfigError("budget must be >= 1");
  if (warmup < 0 || move < 0) throw ConfigError("warmup and move must be >= 0");
  if (algo == Algorithm::AE) {
    if (ae.pool < 1 || ae.sample < 1) throw ConfigError("AE pool and sample sizes must be >= 1");
    if (warmup > 0 && warmup < ae.pool) throw ConfigError("AE warmup needs at least pool-size models");
  }
  if (algo == Algorithm::RL && !(rl.lr > 0.0 && rl.baseline_decay >= 0.0 && rl.baseline_decay < 1.0))
    throw ConfigError("invalid RL hyper-parameters");
  if (algo == Algorithm::Predictor) {
    if (warmup == 1) throw ConfigError("predictor warmup needs at least two models");
    if (pred.models_per_round < 1 || pred.candidates < 1 || pred.hidden < 1 || pred.train_steps < 0 ||
        pred.pair_batch < 1 || !(pred.lr > 0.0))
      throw ConfigError("invalid predictor hyper-parameters");
  }
}

SearchEnv make_env(const SpaceSpec& space, const TabularBenchmark& bench, const ProxyTable* table,
                   const std::string& metric) {
  SearchEnv env;
  env.space = space;
  env.train = [&bench, space](const Architecture& a, Rng& rng) { return query(bench, canonical_string(a, space), rng); };
  env.proxy = [table, metric, space](const Architecture& a) -> std::optional<double> {
    if (!table) return std::nullopt;
    const auto it = table->find(canonical_string(a, space));
    if (it == table->end()) return std::nullopt;
    const auto m = it->second.find(metric);
    if (m == it->second.end()) return std::nullopt;
    return m->second;
  };
  return env;
}

namespace {

double key_of(const std::optional<double>& v) { return v ? *v : -std::numeric_limits<double>::infinity(); }

// Appends trained-model events and tracks the best-so-far.
class Recorder {
 public:
  Recorder(const SearchEnv& env, const SearchConfig& cfg, SearchTrace& trace, Rng& rng)
      : env_(env), cfg_(cfg), trace_(trace), rng_(rng) {}

  bool exhausted() const { return static_cast<int>(trace_.events.size()) >= cfg_.budget; }

  double train(const Architecture& a) {
    const double acc = env_.train(a, rng_);
    best_ = trace_.events.empty() ? acc : std::max(best_, acc);
    trace_.events.push_back({static_cast<int>(trace_.events.size()) + 1, canonical_string(a, env_.space), acc, best_});
    return acc;
  }

  std::optional<double> score(const Architecture& a) {
    ++trace_.proxy_evals;
    return env_.proxy(a);
  }

 private:
  const SearchEnv& env_;
  const SearchConfig& cfg_;
  SearchTrace& trace_;
  Rng& rng_;
  double best_ = 0.0;
};

// n distinct uniform architectures (all of them when n >= space size), in draw order.
std::vector<Architecture> sample_distinct(const SpaceSpec& spec, std::uint64_t n, Rng& rng) {
  const std::uint64_t size = space_size(spec);
  std::vector<Architecture> out;
  if (n >= size) {
    std::vector<std::uint64_t> idx(size);
    std::iota(idx.begin(), idx.end(), std::uint64_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    for (auto i : idx) out.push_back(arch_from_index(spec, i));
    return out;
  }
  std::set<std::uint64_t> seen;
  while (out.size() < n) {
    Architecture a = random_architecture(spec, rng);
    if (seen.insert(arch_index(spec, a)).second) out.push_back(std::move(a));
  }
  return out;
}

// Sorts by proxy descending; missing values last, ties by canonical string.
std::vector<Architecture> rank_by_proxy(std::vector<Architecture> archs, Recorder& rec, const SpaceSpec& spec) {
  struct Item {
    double key;
    std::string name;
    Architecture arch;
  };
  std::vector<Item> items;
  items.reserve(archs.size());
  for (auto& a : archs) {
    const double k = key_of(rec.score(a));
    items.push_back({k, canonical_string(a, spec), std::move(a)});
  }
  std::sort(items.begin(), items.end(), [](const Item& x, const Item& y) {
    if (x.key != y.key) return x.key > y.key;
    return x.name < y.name;
  });
  std::vector<Architecture> out;
  out.reserve(items.size());
  for (auto& it : items) out.push_back(std::move(it.arch));
  return out;
}

template <class F>
SearchTrace timed(F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  SearchTrace t = body();
  t.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return t;
}

}  // namespace

SearchTrace random_search(const SearchEnv& env, const SearchConfig& cfg) {
  cfg.validate();
  return timed([&] {
    SearchTrace trace;
    Rng rng(derive_seed(cfg.seed, 0x4a4dULL));
    Rng query_rng(derive_seed(cfg.seed, 0x9e4aULL));
    Recorder rec(env, cfg, trace, query_rng);
    std::set<std::uint64_t> trained;
    const std::uint64_t size = space_size(env.space);
    if (cfg.warmup > 0) {
      for (const auto& a : rank_by_proxy(sample_distinct(env.space, static_cast<std::uint64_t>(cfg.warmup), rng), rec,
                                         env.space)) {
        if (rec.exhausted()) break;
        trained.insert(arch_index(env.space, a));
        rec.train(a);
      }
    }
    while (!rec.exhausted() && trained.size() < size) {
      Architecture a = random_architecture(env.space, rng);
      if (!trained.insert(arch_index(env.space, a)).second) continue;
      rec.train(a);
    }
    return trace;
  });
}

SearchTrace aging_evolution(const SearchEnv& env, const SearchConfig& cfg) {
  cfg.validate();
  if (env.space.op_set.size() < 2) throw ConfigError("aging evolution needs at least two ops");
  return timed([&] {
    SearchTrace trace;
    Rng rng(derive_seed(cfg.seed, 0xae01ULL));
    Rng query_rng(derive_seed(cfg.seed, 0x9e4aULL));
    Recorder rec(env, cfg, trace, query_rng);
    std::deque<std::pair<Architecture, double>> pool;
    const auto p = static_cast<std::size_t>(cfg.ae.pool);

    if (cfg.warmup > 0) {
      auto ranked = rank_by_proxy(sample_distinct(env.space, static_cast<std::uint64_t>(cfg.warmup), rng), rec,
                                  env.space);
      if (ranked.size() > p) ranked.resize(p);
      for (auto& a : ranked) {
        if (rec.exhausted()) break;
        const double acc = rec.train(a);
        pool.emplace_back(std::move(a), acc);
      }
    } else {
      while (pool.size() < p && !rec.exhausted()) {
        Architecture a = random_architecture(env.space, rng);
        const double acc = rec.train(a);
        pool.emplace_back(std::move(a), acc);
      }
    }

    while (!rec.exhausted()) {
      const std::size_t s = std::min(static_cast<std::size_t>(cfg.ae.sample), pool.size());
      std::vector<std::size_t> idx(pool.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::size_t parent = pool.size();
      for (std::size_t k = 0; k < s; ++k) {
        const std::size_t j = k + uniform_index(rng, idx.size() - k);
        std::swap(idx[k], idx[j]);
        if (parent == pool.size() || pool[idx[k]].second > pool[parent].second) parent = idx[k];
      }
      const Architecture& pa = pool[parent].first;
      Architecture child;
      if (cfg.move > 0) {
        auto cands = neighbors(pa, env.space);
        if (static_cast<std::size_t>(cfg.move) < cands.size()) {
          std::shuffle(cands.begin(), cands.end(), rng);
          cands.resize(static_cast<std::size_t>(cfg.move));
        }
        child = rank_by_proxy(std::move(cands), rec, env.space).front();
      } else {
        child = mutate(pa, env.space, rng);
      }
      const double acc = rec.train(child);
      pool.emplace_back(std::move(child), acc);
      while (pool.size() > p) pool.pop_front();
    }
    return trace;
  });
}

Controller::Controller(int edges, int ops)
    : edges_(edges), ops_(ops), logits_(static_cast<std::size_t>(edges * ops), 0.0) {
  if (edges < 1 || ops < 1) throw ConfigError("controller needs edges and ops");
}

double Controller::prob(int edge, int op) const {
  const double* l = logits_.data() + static_cast<std::size_t>(edge * ops_);
  const double m = *std::max_element(l, l + ops_);
  double z = 0.0;
  for (int o = 0; o < ops_; ++o) z += std::exp(l[o] - m);
  return std::exp(l[op] - m) / z;
}

Architecture Controller::sample(Rng& rng) const {
  Architecture a;
  a.ops.resize(static_cast<std::size_t>(edges_));
  for (int e = 0; e < edges_; ++e) {
    double u = uniform01(rng);
    int pick = ops_ - 1;
    for (int o = 0; o < ops_; ++o) {
      u -= prob(e, o);
      if (u < 0.0) {
        pick = o;
        break;
      }
    }
    a.ops[static_cast<std::size_t>(e)] = pick;
  }
  return a;
}

void Controller::update(const Architecture& arch, double advantage, double lr) {
  for (int e = 0; e < edges_; ++e) {
    std::vector<double> p(static_cast<std::size_t>(ops_));
    for (int o = 0; o < ops_; ++o) p[static_cast<std::size_t>(o)] = prob(e, o);
    for (int o = 0; o < ops_; ++o) {
      const double ind = arch.ops[static_cast<std::size_t>(e)] == o ? 1.0 : 0.0;
      logits_[static_cast<std::size_t>(e * ops_ + o)] += lr * advantage * (ind - p[static_cast<std::size_t>(o)]);
    }
  }
}

double Controller::entropy() const {
  double h = 0.0;
  for (int e = 0; e < edges_; ++e)
    for (int o = 0; o < ops_; ++o) {
      const double p = prob(e, o);
      if (p > 0.0) h -= p * std::log(p);
    }
  return h;
}

double RewardNormalizer::operator()(double x) {
  if (!seen_) {
    lo_ = hi_ = x;
    seen_ = true;
  } else {
    lo_ = std::min(lo_, x);
    hi_ = std::max(hi_, x);
  }
  if (hi_ == lo_) return 0.0;
  return std::clamp(2.0 * (x - lo_) / (hi_ - lo_) - 1.0, -1.0, 1.0);
}

SearchTrace reinforce_search(const SearchEnv& env, const SearchConfig& cfg) {
  cfg.validate();
  return timed([&] {
    SearchTrace trace;
    Rng rng(derive_seed(cfg.seed, 0x41e1ULL));
    Rng query_rng(derive_seed(cfg.seed, 0x9e4aULL));
    Recorder rec(env, cfg, trace, query_rng);
    Controller ctl(env.space.edge_count(), static_cast<int>(env.space.op_set.size()));
    RewardNormalizer norm;
    std::optional<double> proxy_base, acc_base;
    const double decay = cfg.rl.baseline_decay;

    auto proxy_update = [&](bool warmup) {
      const Architecture a = ctl.sample(rng);
      const auto p = rec.score(a);
      if (!p) return;
      const double r = norm(*p);
      if (!proxy_base) proxy_base = r;
      ctl.update(a, r - *proxy_base, cfg.rl.lr);
      proxy_base = decay * *proxy_base + (1.0 - decay) * r;
      if (warmup) {
        trace.warmup_rewards.push_back(r);
        trace.warmup_entropy.push_back(ctl.entropy());
      }
    };

    for (int i = 0; i < cfg.warmup; ++i) proxy_update(true);
    while (!rec.exhausted()) {
      const Architecture a = ctl.sample(rng);
      const double acc = rec.train(a);
      if (!acc_base) acc_base = acc;
      ctl.update(a, acc - *acc_base, cfg.rl.lr);
      acc_base = decay * *acc_base + (1.0 - decay) * acc;
      for (int k = 0; k < cfg.move && !rec.exhausted(); ++k) proxy_update(false);
    }
    return trace;
  });
}

SearchTrace run_search(const SearchEnv& env, const SearchConfig& cfg) {
  switch (cfg.algo) {
    case Algorithm::Rand: return random_search(env, cfg);
    case Algorithm::AE: return aging_evolution(env, cfg);
    case Algorithm::RL: return reinforce_search(env, cfg);
    case Algorithm::Predictor: return predictor_search(env, cfg);
  }
  throw ConfigError("unknown algorithm");
}

std::optional<int> samples_to_threshold(const SearchTrace& t, double threshold) {
  for (const auto& e : t.events)
    if (e.best >= threshold) return e.index;
  return std::nullopt;
}

}  // namespace zc
