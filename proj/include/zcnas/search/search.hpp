#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zcnas/bench/tabular.hpp"
#include "zcnas/common/rng.hpp"
#include "zcnas/proxy/score.hpp"
#include "zcnas/space/space.hpp"

namespace zc {

enum class Algorithm { Rand, RL, AE, Predictor };
const char* algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view s);

struct AeParams {
  int pool = 64;
  int sample = 10;
};

struct RlParams {
  double lr = 0.1;
  double baseline_decay = 0.9;
};

struct PredictorParams {
  int models_per_round = 10;
  int candidates = 256;   // random unseen models ranked per round
  int hidden = 16;
  int train_steps = 150;  // minibatch SGD steps per (re)fit
  int pair_batch = 64;
  double lr = 0.05;
};

struct SearchConfig {
  Algorithm algo = Algorithm::Rand;
  int budget = 100;  // trained models T
  int warmup = 0;    // N proxy-scored models; 0 disables warmup
  int move = 0;      // R; 0 disables move proposal
  AeParams ae;
  RlParams rl;
  PredictorParams pred;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SearchEvent {
  int index = 0;  // 1-based trained-model count
  std::string arch;
  double acc = 0.0;
  double best = 0.0;
};

struct SearchTrace {
  std::vector<SearchEvent> events;
  std::size_t proxy_evals = 0;
  double wall_seconds = 0.0;
  // RL only: normalized warmup rewards and controller entropy after each warmup update.
  std::vector<double> warmup_rewards;
  std::vector<double> warmup_entropy;
  // Predictor only: pairs in the training set after warmup; rounds that fell back to proxy ranking.
  std::size_t warmup_pairs = 0;
  int fallback_rounds = 0;
};

// What a search may ask: train a model (accuracy, consumes budget) or score
// it with the zero-cost proxy (free). A missing proxy value ranks last.
struct SearchEnv {
  SpaceSpec space;
  std::function<double(const Architecture&, Rng&)> train;
  std::function<std::optional<double>(const Architecture&)> proxy;
};

// Accuracy from `bench` via query(); proxy rank keys from `table[arch][metric]`.
// Both referenced objects must outlive the returned environment.
SearchEnv make_env(const SpaceSpec& space, const TabularBenchmark& bench, const ProxyTable* table,
                   const std::string& metric);

SearchTrace random_search(const SearchEnv& env, const SearchConfig& cfg);
SearchTrace aging_evolution(const SearchEnv& env, const SearchConfig& cfg);
SearchTrace reinforce_search(const SearchEnv& env, const SearchConfig& cfg);
SearchTrace predictor_search(const SearchEnv& env, const SearchConfig& cfg);
SearchTrace run_search(const SearchEnv& env, const SearchConfig& cfg);

// Edge-factorized categorical policy.
class Controller {
 public:
  Controller(int edges, int ops);
  Architecture sample(Rng& rng) const;
  // REINFORCE step on log p(arch) scaled by `advantage`.
  void update(const Architecture& arch, double advantage, double lr);
  double entropy() const;
  // Probability of op `op` on edge `edge`.
  double prob(int edge, int op) const;

 private:
  int edges_, ops_;
  std::vector<double> logits_;
};

// Online min-max scaling to [-1, 1]; 0 while min == max.
class RewardNormalizer {
 public:
  double operator()(double x);

 private:
  bool seen_ = false;
  double lo_ = 0.0, hi_ = 0.0;
};

// Index of the first event whose best-so-far reaches `threshold`, 1-based;
// nullopt when never reached.
std::optional<int> samples_to_threshold(const SearchTrace& t, double threshold);

}  // namespace zc
