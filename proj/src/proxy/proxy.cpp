#include "zcnas/proxy/proxy.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "zcnas/common/error.hpp"
#include "zcnas/common/rng.hpp"

namespace zc {

namespace {

constexpr struct {
  Metric m;
  const char* name;
} kMetricNames[] = {
    {Metric::GradNorm, "grad_norm"}, {Metric::Snip, "snip"},         {Metric::Grasp, "grasp"},
    {Metric::Fisher, "fisher"},      {Metric::Synflow, "synflow"},   {Metric::JacobCov, "jacob_cov"},
};

bool is_weight(const Network& net, const Parameter& p) {
  if (p.is_bias) return false;
  const auto kind = net.graph().nodes[static_cast<std::size_t>(p.node)].kind;
  return kind == OpKind::Conv2d || kind == OpKind::Linear;
}

bool in_scope(const Network& net, const Parameter& p, ParamScope scope) {
  return scope == ParamScope::All || is_weight(net, p);
}

}  // namespace

const char* metric_name(Metric m) {
  for (const auto& e : kMetricNames)
    if (e.m == m) return e.name;
  return "?";
}

Metric parse_metric(std::string_view s) {
  for (const auto& e : kMetricNames)
    if (s == e.name) return e.m;
  throw ConfigError("unknown metric: " + std::string(s));
}

const std::vector<Metric>& all_metrics() {
  static const std::vector<Metric> all = {Metric::GradNorm, Metric::Snip,    Metric::Grasp,
                                          Metric::Fisher,   Metric::Synflow, Metric::JacobCov};
  return all;
}

std::vector<Metric> parse_metric_list(std::string_view s) {
  if (s == "all") return all_metrics();
  std::vector<Metric> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const auto tok = s.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    const Metric m = parse_metric(tok);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

const char* data_mode_name(DataMode m) {
  switch (m) {
    case DataMode::RealBatch: return "real-batch";
    case DataMode::RandomBatch: return "random-batch";
    case DataMode::OnesBatch: return "ones-batch";
  }
  return "?";
}

DataMode parse_data_mode(std::string_view s) {
  if (s == "real-batch" || s == "real") return DataMode::RealBatch;
  if (s == "random-batch" || s == "random") return DataMode::RandomBatch;
  if (s == "ones-batch" || s == "ones") return DataMode::OnesBatch;
  throw ConfigError("unknown data mode: " + std::string(s));
}

const char* param_scope_name(ParamScope s) { return s == ParamScope::All ? "all" : "weights"; }

ParamScope parse_param_scope(std::string_view s) {
  if (s == "all") return ParamScope::All;
  if (s == "weights") return ParamScope::Weights;
  throw ConfigError("unknown parameter scope: " + std::string(s));
}

double ProxyScore::rank_key() const {
  double key = value;
  if (metric == Metric::Synflow && !log_domain) key = value > 0.0 ? std::log(value) : -HUGE_VAL;
  return std::max(key, std::numeric_limits<double>::lowest());
}

double grad_norm(Network& net, const Tensor& batch, const std::vector<int>& labels, ParamScope scope) {
  const auto g = net.backward(LossSpec::cross_entropy(labels), batch);
  double total = 0.0;
  for (const auto& p : net.parameters()) {
    if (!in_scope(net, p, scope)) continue;
    double sq = 0.0;
    for (double v : g.params.at(p.name).data) sq += v * v;
    total += std::sqrt(sq);
  }
  return total;
}

double snip(Network& net, const Tensor& batch, const std::vector<int>& labels, ParamScope scope) {
  const auto g = net.backward(LossSpec::cross_entropy(labels), batch);
  double total = 0.0;
  for (std::size_t i = 0; i < net.parameters().size(); ++i) {
    const auto& p = net.parameters()[i];
    if (!in_scope(net, p, scope)) continue;
    const auto& gp = g.params.at(p.name);
    const auto& w = net.values()[i];
    for (std::size_t e = 0; e < w.size(); ++e) total += std::abs(gp[e] * w[e]);
  }
  return total;
}

double grasp(Network& net, const Tensor& batch, const std::vector<int>& labels, ParamScope scope,
             HvpMethod method) {
  const auto loss = LossSpec::cross_entropy(labels);
  GradientSet g = net.backward(loss, batch);
  g.activations.clear();
  const auto hg = net.hvp(loss, batch, g, method);
  double total = 0.0;
  for (std::size_t i = 0; i < net.parameters().size(); ++i) {
    const auto& p = net.parameters()[i];
    if (!in_scope(net, p, scope)) continue;
    const auto& h = hg.params.at(p.name);
    const auto& w = net.values()[i];
    for (std::size_t e = 0; e < w.size(); ++e) total -= h[e] * w[e];
  }
  return total;
}

double fisher(Network& net, const Tensor& batch, const std::vector<int>& labels) {
  const auto g = net.backward(LossSpec::cross_entropy(labels), batch);
  double total = 0.0;
  for (const auto& node : net.graph().nodes) {
    if (node.kind != OpKind::Conv2d && node.kind != OpKind::Linear) continue;
    const Tensor& z = net.activation(node.name);
    const auto it = g.activations.find(node.name);
    if (it == g.activations.end()) throw Error("missing activation gradient for '" + node.name + "'");
    const Tensor& dz = it->second;
    const std::size_t n = z.dim(0), c = z.dim(1), inner = z.size() / (n * c);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t p = 0; p < inner; ++p) {
          const std::size_t idx = (b * c + ch) * inner + p;
          s += dz[idx] * z[idx];
        }
      total += s * s;
    }
  }
  return total;
}

SynflowResult synflow(Network& net, bool force_log) {
  PassOptions opt;
  opt.training = true;
  opt.bypass_batchnorm = true;
  Shape in{1};
  in.insert(in.end(), net.input_shape().begin(), net.input_shape().end());
  const auto& params = net.parameters();

  if (!force_log) {
    try {
      std::vector<Tensor> abs_params = net.values();
      for (auto& t : abs_params)
        for (auto& v : t.data) v = std::abs(v);
      const Tensor ones(in, 1.0);
      const auto loss = LossSpec::synflow_product();
      const auto r = net.evaluate<double>(abs_params, ones, &loss, opt);
      double total = 0.0;
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (!is_weight(net, params[i])) continue;
        for (std::size_t e = 0; e < abs_params[i].size(); ++e) total += r.param_grads[i][e] * abs_params[i][e];
      }
      if (std::isfinite(total)) return {total, false};
    } catch (const NumericalError&) {
    }
  }

  std::vector<BasicTensor<LogMag>> lp(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& src = net.values()[i];
    lp[i] = BasicTensor<LogMag>(src.shape);
    for (std::size_t e = 0; e < src.size(); ++e) lp[i][e] = LogMag(std::abs(src[e]));
  }
  const BasicTensor<LogMag> ones(in, LogMag(1.0));
  const auto loss = LossSpec::synflow_product();
  const auto r = net.evaluate<LogMag>(lp, ones, &loss, opt);
  LogMag total;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!is_weight(net, params[i])) continue;
    for (std::size_t e = 0; e < lp[i].size(); ++e) total += r.param_grads[i][e] * lp[i][e];
  }
  return {total.l, true};
}

double jacob_cov_from_rows(const std::vector<double>& rows, std::size_t b, std::size_t d, double k) {
  if (b < 2) throw Error("jacob_cov needs at least two samples");
  if (rows.size() != b * d) throw ShapeError("jacobian row matrix has the wrong size");
  Eigen::MatrixXd j(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t c = 0; c < d; ++c) j(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i * d + c];
  for (Eigen::Index i = 0; i < j.rows(); ++i) {
    j.row(i).array() -= j.row(i).mean();
    const double norm = j.row(i).norm();
    if (!(norm > 0.0)) throw DegenerateModel("zero-variance jacobian row " + std::to_string(i));
    j.row(i) /= norm;
  }
  const Eigen::MatrixXd corr = j * j.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError(-1, "eigen decomposition failed");
  double score = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double s = es.eigenvalues()(i) + k;
    score -= std::log(s) + 1.0 / s;
  }
  return score;
}

double jacob_cov(Network& net, const Tensor& batch, double k) {
  const auto g = net.backward(LossSpec::sum_of_outputs(), batch);
  const auto& input_name = net.graph().nodes[static_cast<std::size_t>(net.input_node())].name;
  const Tensor& dx = g.activations.at(input_name);
  const std::size_t b = dx.dim(0);
  return jacob_cov_from_rows(dx.data, b, dx.size() / b, k);
}

int vote_compare(const VoteTriple& a, const VoteTriple& b) {
  auto cmp = [](const std::optional<double>& x, const std::optional<double>& y) {
    if (!x && !y) return 0;
    if (!x) return -1;
    if (!y) return 1;
    return *x > *y ? 1 : (*x < *y ? -1 : 0);
  };
  // Twice the score so half points stay integral.
  int a2 = 0, b2 = 0;
  for (int c : {cmp(a.synflow, b.synflow), cmp(a.jacob_cov, b.jacob_cov), cmp(a.snip, b.snip)}) {
    if (c > 0) a2 += 2;
    else if (c < 0) b2 += 2;
    else { ++a2; ++b2; }
  }
  return a2 > b2 ? 1 : (a2 < b2 ? -1 : 0);
}

std::vector<std::size_t> vote_rank(const std::vector<std::string>& names, const std::vector<VoteTriple>& triples) {
  if (names.size() != triples.size()) throw Error("vote_rank: names and triples differ in length");
  const std::size_t n = triples.size();
  std::vector<long> wins(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const int c = vote_compare(triples[i], triples[j]);
      if (c > 0) ++wins[i];
      else if (c < 0) ++wins[j];
    }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (wins[x] != wins[y]) return wins[x] > wins[y];
    const auto& sx = triples[x].synflow;
    const auto& sy = triples[y].synflow;
    if (sx.has_value() != sy.has_value()) return sx.has_value();
    if (sx && *sx != *sy) return *sx > *sy;
    return names[x] < names[y];
  });
  return order;
}

DataBatch make_batch(const ProxyConfig& cfg, const Shape& input_shape, int classes, const DataBatch* real) {
  if (cfg.batch_size < 1) throw ConfigError("batch size must be positive");
  if (classes < 1) throw ConfigError("class count must be positive");
  const auto b = static_cast<std::size_t>(cfg.batch_size);
  Shape shape{b};
  shape.insert(shape.end(), input_shape.begin(), input_shape.end());
  DataBatch out;
  out.labels.resize(b);
  if (cfg.data_mode == DataMode::RealBatch) {
    if (!real) throw ConfigError("real-batch mode needs a dataset");
    if (real->images.rank() != shape.size() || real->images.dim(0) < b ||
        !std::equal(input_shape.begin(), input_shape.end(), real->images.shape.begin() + 1))
      throw ConfigError("dataset does not provide " + std::to_string(b) + " samples of shape " +
                        shape_string(input_shape));
    const std::size_t per = numel(input_shape);
    out.images = Tensor(shape, std::vector<double>(real->images.data.begin(),
                                                   real->images.data.begin() + static_cast<long>(b * per)));
    std::copy_n(real->labels.begin(), b, out.labels.begin());
    return out;
  }
  Rng rng(derive_seed(cfg.seed, 0xda7aULL));
  out.images = Tensor(shape, cfg.data_mode == DataMode::OnesBatch ? 1.0 : 0.0);
  if (cfg.data_mode == DataMode::RandomBatch)
    for (auto& v : out.images.data) v = normal(rng);
  for (auto& l : out.labels) l = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(classes)));
  return out;
}

ProxyScore run_metric(Metric m, Network& net, const DataBatch& data, const ProxyConfig& cfg) {
  ProxyScore s;
  s.metric = m;
  try {
    switch (m) {
      case Metric::GradNorm: s.value = grad_norm(net, data.images, data.labels, cfg.scope); break;
      case Metric::Snip: s.value = snip(net, data.images, data.labels, cfg.scope); break;
      case Metric::Grasp: s.value = grasp(net, data.images, data.labels, cfg.scope, cfg.hvp); break;
      case Metric::Fisher: s.value = fisher(net, data.images, data.labels); break;
      case Metric::Synflow: {
        const auto r = synflow(net);
        s.value = r.value;
        s.log_domain = r.log_domain;
        break;
      }
      case Metric::JacobCov: s.value = jacob_cov(net, data.images, cfg.jacob_eps); break;
    }
    if (!std::isfinite(s.value) && !(m == Metric::Synflow && s.log_domain))
      throw NumericalError(-1, "non-finite score");
  } catch (const Error& e) {
    s.ok = false;
    s.value = 0.0;
    s.error = e.what();
  }
  return s;
}

}  // namespace zc
