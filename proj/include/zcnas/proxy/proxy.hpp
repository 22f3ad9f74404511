#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zcnas/engine/network.hpp"

namespace zc {

enum class Metric { GradNorm, Snip, Grasp, Fisher, Synflow, JacobCov };

const char* metric_name(Metric m);
// Throws ConfigError for unknown ids.
Metric parse_metric(std::string_view s);
const std::vector<Metric>& all_metrics();
// "all" or a comma-separated list.
std::vector<Metric> parse_metric_list(std::string_view s);

enum class DataMode { RealBatch, RandomBatch, OnesBatch };
const char* data_mode_name(DataMode m);
DataMode parse_data_mode(std::string_view s);

// Which parameters the per-parameter saliencies sum over.
enum class ParamScope { All, Weights };
const char* param_scope_name(ParamScope s);
ParamScope parse_param_scope(std::string_view s);

struct ProxyConfig {
  int batch_size = 128;
  DataMode data_mode = DataMode::RandomBatch;
  std::uint64_t seed = 0;
  double jacob_eps = 1e-5;
  ParamScope scope = ParamScope::All;
  HvpMethod hvp = HvpMethod::DualNumbers;
};

struct ProxyScore {
  Metric metric = Metric::Synflow;
  double value = 0.0;
  bool ok = true;
  bool log_domain = false;  // synflow only: value holds log S
  std::string error;        // set when !ok
  std::uint64_t fingerprint = 0;

  // Monotone finite key used for ranking. synflow compares on log S in both
  // domains; S = 0 maps to the lowest finite double.
  double rank_key() const;
};

// Per-metric entry points. Each runs its own forward/backward on `net` with
// batchnorm in training mode; none of them changes parameter values.
double grad_norm(Network& net, const Tensor& batch, const std::vector<int>& labels,
                 ParamScope scope = ParamScope::All);
double snip(Network& net, const Tensor& batch, const std::vector<int>& labels, ParamScope scope = ParamScope::All);
double grasp(Network& net, const Tensor& batch, const std::vector<int>& labels, ParamScope scope = ParamScope::All,
             HvpMethod method = HvpMethod::DualNumbers);
double fisher(Network& net, const Tensor& batch, const std::vector<int>& labels);

struct SynflowResult {
  double value = 0.0;
  bool log_domain = false;
};
// Linear domain first; on overflow, rescored with log-magnitude arithmetic
// and the result is log S. `force_log` skips the linear attempt.
SynflowResult synflow(Network& net, bool force_log = false);

// Throws DegenerateModel when a Jacobian row has zero variance.
double jacob_cov(Network& net, const Tensor& batch, double k = 1e-5);
// Score from a B x D row-major matrix of per-sample Jacobian rows.
double jacob_cov_from_rows(const std::vector<double>& rows, std::size_t b, std::size_t d, double k = 1e-5);

// Rank keys of the three voting metrics; absent entries lose to present ones.
struct VoteTriple {
  std::optional<double> synflow;
  std::optional<double> jacob_cov;
  std::optional<double> snip;
};

// +1 if a beats b on a majority (exact ties count half each), -1 if b does, 0 on a tie.
int vote_compare(const VoteTriple& a, const VoteTriple& b);

// Indices into `triples`, best first. Copeland count of vote_compare wins;
// ties broken by synflow descending, then by name ascending.
std::vector<std::size_t> vote_rank(const std::vector<std::string>& names, const std::vector<VoteTriple>& triples);

// Inputs for a metric run on `net`: batch and labels drawn per cfg.data_mode.
// RealBatch uses `real` (first batch_size samples).
struct DataBatch {
  Tensor images;
  std::vector<int> labels;
};
DataBatch make_batch(const ProxyConfig& cfg, const Shape& input_shape, int classes, const DataBatch* real);

// Runs a single metric; failures come back as !ok with the message.
ProxyScore run_metric(Metric m, Network& net, const DataBatch& data, const ProxyConfig& cfg);

}  // namespace zc
