#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "zcnas/bench/tabular.hpp"
#include "zcnas/proxy/score.hpp"
#include "zcnas/space/space.hpp"

namespace zc {

// Accuracy is a smooth function of how often each op appears in the cell,
// plus Gaussian noise per architecture (`arch_noise`) and per seed
// (`seed_noise`). The proxy blends the accuracy rank with an independent
// uniform series: alpha * rank/n + (1 - |alpha|) * u, with alpha in [-1, 1]
// found by bisection so the measured Spearman rho lands within `tolerance` of the target.
struct SyntheticTabularSpec {
  double target_rho = 0.76;
  double arch_noise = 0.35;
  double seed_noise = 0.0;
  int seeds = 1;
  std::uint64_t seed = 0;
  double tolerance = 0.02;
  int max_iterations = 60;
  std::string metric = "synthetic";
};

struct SyntheticTabular {
  TabularBenchmark bench;
  std::vector<std::string> archs;  // enumeration order
  std::vector<double> accuracy;    // mean accuracy per arch
  std::vector<double> proxy;       // per arch
  double alpha = 0.0;
  double measured_rho = 0.0;
};

// Throws ConfigError when |target| > 1 and Error when calibration does not converge.
SyntheticTabular gen_synthetic_tabular(const SpaceSpec& spec, const SyntheticTabularSpec& cfg);

// Proxy table in score-file form (metric = cfg.metric).
void save_synthetic_proxy(const std::string& path, const SyntheticTabular& t, const std::string& metric);

}  // namespace zc
