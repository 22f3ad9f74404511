#include "zcnas/analysis/sensitivity.hpp"

#include "zcnas/common/error.hpp"
#include "zcnas/common/parallel.hpp"

namespace zc {

namespace {

void sweep_point(const std::string& axis, const std::string& value, const std::vector<Architecture>& archs,
                 const std::vector<double>& accuracy, const SpaceSpec& spec, const ScaleConfig& scale,
                 const ScoreRequest& req, int workers, const DataBatch* real, std::vector<SensitivityCell>& out) {
  std::vector<std::map<Metric, ProxyScore>> scores(archs.size());
  parallel_for(archs.size(), workers, [&](std::size_t i) { scores[i] = score(archs[i], spec, scale, req, nullptr, real); });
  for (Metric m : req.metrics) {
    RankedTable t;
    for (std::size_t i = 0; i < archs.size(); ++i) {
      const auto& s = scores[i].at(m);
      t.add(canonical_string(archs[i], spec), s.ok ? std::optional<double>(s.rank_key()) : std::nullopt, accuracy[i]);
    }
    SensitivityCell c{axis, value, m, std::nullopt, 0, 0};
    try {
      const auto r = table_spearman(t);
      c.rho = r.rho;
      c.n = r.n;
      c.excluded = r.excluded;
    } catch (const Error&) {
      for (const auto& p : t.proxy) (p ? c.n : c.excluded) += 1;
    }
    out.push_back(c);
  }
}

}  // namespace

std::vector<SensitivityCell> sensitivity_sweep(const std::vector<Architecture>& archs,
                                               const std::vector<double>& accuracy, const SpaceSpec& spec,
                                               const ScaleConfig& scale, const ScoreRequest& base,
                                               const SensitivityAxes& axes, int workers, const DataBatch* real) {
  if (archs.size() != accuracy.size()) throw Error("architectures and accuracies differ in length");
  std::vector<SensitivityCell> out;
  for (std::uint64_t s : axes.seeds) {
    ScoreRequest req = base;
    req.init.seed = s;
    req.proxy.seed = s;
    sweep_point("seed", std::to_string(s), archs, accuracy, spec, scale, req, workers, real, out);
  }
  for (const auto& init : axes.inits) {
    ScoreRequest req = base;
    req.init.scheme = init.scheme;
    req.init.bias_mode = init.bias_mode;
    sweep_point("init", std::string(init_scheme_name(init.scheme)) + "/" + bias_mode_name(init.bias_mode), archs,
                accuracy, spec, scale, req, workers, real, out);
  }
  for (int b : axes.batch_sizes) {
    ScoreRequest req = base;
    req.proxy.batch_size = b;
    sweep_point("batch", std::to_string(b), archs, accuracy, spec, scale, req, workers, real, out);
  }
  return out;
}

}  // namespace zc
