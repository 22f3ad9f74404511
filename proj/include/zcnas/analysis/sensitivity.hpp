#pragma once

#include <optional>
#include <string>
#include <vector>

#include "zcnas/analysis/stats.hpp"
#include "zcnas/proxy/score.hpp"

namespace zc {

struct SensitivityAxes {
  std::vector<std::uint64_t> seeds;  // init seed (also seeds the batch)
  std::vector<InitConfig> inits;     // scheme and bias mode; seed taken from the base request
  std::vector<int> batch_sizes;
};

struct SensitivityCell {
  std::string axis;  // seed | init | batch
  std::string value;
  Metric metric = Metric::Synflow;
  std::optional<double> rho;  // nullopt when undefined
  std::size_t n = 0;
  std::size_t excluded = 0;   // failed scores
};

// Varies one axis at a time around `base` and rescores every architecture.
// Rows come in axis order (seed, init, batch), then axis value, then metric.
std::vector<SensitivityCell> sensitivity_sweep(const std::vector<Architecture>& archs,
                                               const std::vector<double>& accuracy, const SpaceSpec& spec,
                                               const ScaleConfig& scale, const ScoreRequest& base,
                                               const SensitivityAxes& axes, int workers,
                                               const DataBatch* real = nullptr);

}  // namespace zc
