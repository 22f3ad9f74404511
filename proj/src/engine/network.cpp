#include "zcnas/engine/network.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include "ops.hpp"
#include "zcnas/common/error.hpp"
#include "zcnas/common/rng.hpp"

namespace zc {

const char* init_scheme_name(InitScheme s) {
  switch (s) {
    case InitScheme::Default: return "default";
    case InitScheme::KaimingNormal: return "kaiming-normal";
    case InitScheme::XavierUniform: return "xavier-uniform";
  }
  return "?";
}

InitScheme parse_init_scheme(std::string_view s) {
  if (s == "default") return InitScheme::Default;
  if (s == "kaiming-normal" || s == "kaiming") return InitScheme::KaimingNormal;
  if (s == "xavier-uniform" || s == "xavier") return InitScheme::XavierUniform;
  throw ConfigError("unknown init scheme: " + std::string(s));
}

const char* bias_mode_name(BiasMode m) { return m == BiasMode::Zero ? "zero" : "scheme-default"; }

BiasMode parse_bias_mode(std::string_view s) {
  if (s == "zero") return BiasMode::Zero;
  if (s == "scheme-default" || s == "default") return BiasMode::SchemeDefault;
  throw ConfigError("unknown bias mode: " + std::string(s));
}

namespace {

std::size_t out_extent(std::size_t in, int k, int s, int p) {
  const long v = (static_cast<long>(in) + 2L * p - k);
  if (v < 0 || s < 1) return 0;
  return static_cast<std::size_t>(v / s + 1);
}

// Kahn's algorithm; among ready nodes the lowest original index goes first,
// so already-ordered graphs keep their order.
std::vector<int> topological_order(const GraphSpec& g) {
  const std::size_t n = g.nodes.size();
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<int>> users(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int in : g.nodes[i].inputs) {
      if (in < 0 || static_cast<std::size_t>(in) >= n)
        throw ShapeError("node '" + g.nodes[i].name + "' references missing input " + std::to_string(in));
      ++indegree[i];
      users[static_cast<std::size_t>(in)].push_back(static_cast<int>(i));
    }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push(static_cast<int>(i));
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    const int u = ready.top();
    ready.pop();
    order.push_back(u);
    for (int v : users[static_cast<std::size_t>(u)])
      if (--indegree[static_cast<std::size_t>(v)] == 0) ready.push(v);
  }
  if (order.size() != n) throw ShapeError("operator graph contains a cycle");
  return order;
}

void expect_inputs(const NodeSpec& n, std::size_t count) {
  if (n.inputs.size() != count)
    throw ShapeError("node '" + n.name + "' (" + op_kind_name(n.kind) + ") expects " + std::to_string(count) +
                     " input(s), got " + std::to_string(n.inputs.size()));
}

[[noreturn]] void mismatch(const NodeSpec& n, const std::string& detail) {
  throw ShapeError("shape mismatch at node '" + n.name + "' (" + op_kind_name(n.kind) + "): " + detail);
}

template <class T>
bool all_finite(const BasicTensor<T>& t) {
  for (const auto& v : t.data)
    if (!is_finite(v)) return false;
  return true;
}

template <class T>
BasicTensor<T> batch_shaped(std::size_t n, const Shape& per_sample) {
  Shape s{n};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return BasicTensor<T>(std::move(s));
}

}  // namespace

Network::Network(const GraphSpec& spec, const InitConfig& init) {
  // Validate kinds up front so an out-of-range enum reports as unknown.
  for (const auto& n : spec.nodes) (void)op_kind_name(n.kind);

  const auto order = topological_order(spec);
  std::vector<int> new_index(spec.nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) new_index[static_cast<std::size_t>(order[i])] = static_cast<int>(i);
  graph_.nodes.reserve(order.size());
  for (int old : order) {
    NodeSpec n = spec.nodes[static_cast<std::size_t>(old)];
    for (int& in : n.inputs) in = new_index[static_cast<std::size_t>(in)];
    graph_.nodes.push_back(std::move(n));
  }
  if (graph_.nodes.empty()) throw ShapeError("empty operator graph");
  const int out_old = spec.output < 0 ? static_cast<int>(spec.nodes.size()) - 1 : spec.output;
  if (out_old >= static_cast<int>(spec.nodes.size())) throw ShapeError("output node out of range");
  output_ = new_index[static_cast<std::size_t>(out_old)];
  graph_.output = output_;

  std::set<std::string> names;
  for (const auto& n : graph_.nodes) {
    if (n.name.empty()) throw ShapeError("node without a name");
    if (!names.insert(n.name).second) throw ShapeError("duplicate node name '" + n.name + "'");
  }

  const std::size_t count = graph_.nodes.size();
  shapes_.resize(count);
  weight_of_.assign(count, -1);
  bias_of_.assign(count, -1);
  running_mean_.resize(count);
  running_var_.resize(count);

  auto add_param = [&](int node, const std::string& suffix, Shape shape, bool is_bias) {
    params_.push_back({graph_.nodes[static_cast<std::size_t>(node)].name + "." + suffix, node, is_bias});
    values_.emplace_back(std::move(shape));
    return static_cast<int>(params_.size()) - 1;
  };

  for (std::size_t i = 0; i < count; ++i) {
    const NodeSpec& n = graph_.nodes[i];
    const int id = static_cast<int>(i);
    auto in_shape = [&](std::size_t k) -> const Shape& { return shapes_[static_cast<std::size_t>(n.inputs.at(k))]; };
    switch (n.kind) {
      case OpKind::Input:
        expect_inputs(n, 0);
        if (input_ >= 0) throw ShapeError("graph has more than one input node");
        if (n.shape.empty() || numel(n.shape) == 0) mismatch(n, "input shape must be non-empty");
        input_ = id;
        shapes_[i] = n.shape;
        break;
      case OpKind::Linear:
        expect_inputs(n, 1);
        if (n.in_features < 1 || n.out_features < 1) mismatch(n, "features must be positive");
        if (in_shape(0) != Shape{static_cast<std::size_t>(n.in_features)})
          mismatch(n, "expected input [" + std::to_string(n.in_features) + "], got " + shape_string(in_shape(0)));
        shapes_[i] = {static_cast<std::size_t>(n.out_features)};
        weight_of_[i] = add_param(id, "weight", {static_cast<std::size_t>(n.out_features), static_cast<std::size_t>(n.in_features)}, false);
        if (n.bias) bias_of_[i] = add_param(id, "bias", {static_cast<std::size_t>(n.out_features)}, true);
        break;
      case OpKind::Conv2d: {
        expect_inputs(n, 1);
        const Shape& s = in_shape(0);
        if (s.size() != 3) mismatch(n, "conv2d needs a [C,H,W] input, got " + shape_string(s));
        if (n.in_channels < 1 || n.out_channels < 1 || n.kernel < 1 || n.stride < 1 || n.padding < 0)
          mismatch(n, "invalid conv2d attributes");
        if (s[0] != static_cast<std::size_t>(n.in_channels))
          mismatch(n, "expected " + std::to_string(n.in_channels) + " input channels, got " + std::to_string(s[0]));
        const auto ho = out_extent(s[1], n.kernel, n.stride, n.padding);
        const auto wo = out_extent(s[2], n.kernel, n.stride, n.padding);
        if (ho == 0 || wo == 0) mismatch(n, "input " + shape_string(s) + " too small for the kernel");
        shapes_[i] = {static_cast<std::size_t>(n.out_channels), ho, wo};
        const auto k = static_cast<std::size_t>(n.kernel);
        weight_of_[i] = add_param(id, "weight", {static_cast<std::size_t>(n.out_channels), s[0], k, k}, false);
        if (n.bias) bias_of_[i] = add_param(id, "bias", {static_cast<std::size_t>(n.out_channels)}, true);
        break;
      }
      case OpKind::Relu:
      case OpKind::Zero:
        expect_inputs(n, 1);
        shapes_[i] = in_shape(0);
        break;
      case OpKind::BatchNorm:
        expect_inputs(n, 1);
        if (in_shape(0).empty() || in_shape(0)[0] != static_cast<std::size_t>(n.channels))
          mismatch(n, "expected " + std::to_string(n.channels) + " channels, got " + shape_string(in_shape(0)));
        shapes_[i] = in_shape(0);
        weight_of_[i] = add_param(id, "weight", {static_cast<std::size_t>(n.channels)}, false);
        bias_of_[i] = add_param(id, "bias", {static_cast<std::size_t>(n.channels)}, true);
        running_mean_[i].assign(static_cast<std::size_t>(n.channels), 0.0);
        running_var_[i].assign(static_cast<std::size_t>(n.channels), 1.0);
        break;
      case OpKind::AvgPool: {
        expect_inputs(n, 1);
        const Shape& s = in_shape(0);
        if (s.size() != 3) mismatch(n, "avgpool needs a [C,H,W] input");
        if (n.kernel < 1 || n.stride < 1 || n.padding < 0 || 2 * n.padding >= n.kernel + 1)
          mismatch(n, "invalid avgpool attributes");
        const auto ho = out_extent(s[1], n.kernel, n.stride, n.padding);
        const auto wo = out_extent(s[2], n.kernel, n.stride, n.padding);
        if (ho == 0 || wo == 0) mismatch(n, "input too small for the pooling window");
        shapes_[i] = {s[0], ho, wo};
        break;
      }
      case OpKind::Add:
        if (n.inputs.empty()) mismatch(n, "add needs at least one input");
        for (std::size_t k = 1; k < n.inputs.size(); ++k)
          if (in_shape(k) != in_shape(0))
            mismatch(n, "operands " + shape_string(in_shape(0)) + " and " + shape_string(in_shape(k)));
        shapes_[i] = in_shape(0);
        break;
      case OpKind::GlobalAvgPool:
        expect_inputs(n, 1);
        if (in_shape(0).size() != 3) mismatch(n, "global-pool needs a [C,H,W] input");
        shapes_[i] = {in_shape(0)[0], 1, 1};
        break;
      case OpKind::Flatten:
        expect_inputs(n, 1);
        shapes_[i] = {numel(in_shape(0))};
        break;
    }
  }
  if (input_ < 0) throw ShapeError("graph has no input node");

  // Initialization: one derived stream per parameter so values do not depend
  // on how many random draws other parameters consumed.
  for (std::size_t p = 0; p < params_.size(); ++p) {
    const NodeSpec& n = graph_.nodes[static_cast<std::size_t>(params_[p].node)];
    Tensor& t = values_[p];
    Rng rng(derive_seed(init.seed, fnv1a(params_[p].name)));
    if (n.kind == OpKind::BatchNorm) {
      std::fill(t.data.begin(), t.data.end(), params_[p].is_bias ? 0.0 : 1.0);
      continue;
    }
    double fan_in = 0.0, fan_out = 0.0;
    if (n.kind == OpKind::Linear) {
      fan_in = n.in_features;
      fan_out = n.out_features;
    } else {
      fan_in = static_cast<double>(n.in_channels) * n.kernel * n.kernel;
      fan_out = static_cast<double>(n.out_channels) * n.kernel * n.kernel;
    }
    const double default_bound = 1.0 / std::sqrt(fan_in);
    if (params_[p].is_bias) {
      if (init.bias_mode == BiasMode::Zero) {
        std::fill(t.data.begin(), t.data.end(), 0.0);
      } else {
        std::uniform_real_distribution<double> u(-default_bound, default_bound);
        for (auto& v : t.data) v = u(rng);
      }
      continue;
    }
    switch (init.scheme) {
      case InitScheme::Default: {
        std::uniform_real_distribution<double> u(-default_bound, default_bound);
        for (auto& v : t.data) v = u(rng);
        break;
      }
      case InitScheme::KaimingNormal: {
        std::normal_distribution<double> g(0.0, std::sqrt(2.0 / fan_in));
        for (auto& v : t.data) v = g(rng);
        break;
      }
      case InitScheme::XavierUniform: {
        const double b = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> u(-b, b);
        for (auto& v : t.data) v = u(rng);
        break;
      }
    }
  }
}

int Network::parameter_index(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return static_cast<int>(i);
  return -1;
}

Tensor& Network::parameter(const std::string& name) {
  const int i = parameter_index(name);
  if (i < 0) throw Error("no parameter named '" + name + "'");
  return values_[static_cast<std::size_t>(i)];
}

const Tensor& Network::parameter(const std::string& name) const {
  const int i = parameter_index(name);
  if (i < 0) throw Error("no parameter named '" + name + "'");
  return values_[static_cast<std::size_t>(i)];
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (const auto& v : values_) total += v.size();
  return total;
}

int Network::node_index(const std::string& name) const {
  for (std::size_t i = 0; i < graph_.nodes.size(); ++i)
    if (graph_.nodes[i].name == name) return static_cast<int>(i);
  return -1;
}

void Network::check_batch(const Tensor& batch) const {
  const Shape& in = input_shape();
  if (batch.rank() != in.size() + 1 || batch.dim(0) == 0 ||
      !std::equal(in.begin(), in.end(), batch.shape.begin() + 1))
    throw ShapeError("batch shape " + shape_string(batch.shape) + " does not match network input " +
                     shape_string(in));
  if (batch.size() != numel(batch.shape)) throw ShapeError("batch data length does not match its shape");
}

template <class T>
PassResult<T> Network::evaluate(std::span<const BasicTensor<T>> params, const BasicTensor<T>& batch,
                                const LossSpec* loss, const PassOptions& opt,
                                const BasicTensor<T>* output_grad) const {
  if (params.size() != values_.size()) throw ShapeError("parameter count mismatch");
  for (std::size_t p = 0; p < params.size(); ++p)
    if (params[p].shape != values_[p].shape) throw ShapeError("parameter '" + params_[p].name + "' shape mismatch");

  const std::size_t count = graph_.nodes.size();
  const std::size_t nb = batch.dim(0);
  PassResult<T> r;
  r.activations.resize(count);
  r.bn_mean.resize(count);
  r.bn_var.resize(count);

  auto weight = [&](std::size_t i) -> const BasicTensor<T>& { return params[static_cast<std::size_t>(weight_of_[i])]; };
  auto bias = [&](std::size_t i) -> const BasicTensor<T>* {
    return bias_of_[i] < 0 ? nullptr : &params[static_cast<std::size_t>(bias_of_[i])];
  };
  auto conv_geom = [&](std::size_t i) {
    const NodeSpec& n = graph_.nodes[i];
    const Shape& in = shapes_[static_cast<std::size_t>(n.inputs[0])];
    return ops::ConvGeom{nb, in[0], in[1], in[2], static_cast<std::size_t>(n.out_channels),
                         static_cast<std::size_t>(n.kernel), static_cast<std::size_t>(n.stride),
                         static_cast<std::size_t>(n.padding), shapes_[i][1], shapes_[i][2]};
  };

  for (std::size_t i = 0; i < count; ++i) {
    const NodeSpec& n = graph_.nodes[i];
    auto& y = r.activations[i];
    auto x = [&](std::size_t k) -> const BasicTensor<T>& { return r.activations[static_cast<std::size_t>(n.inputs[k])]; };
    switch (n.kind) {
      case OpKind::Input: y = batch; break;
      case OpKind::Linear:
        ops::linear_forward(x(0), weight(i), bias(i), nb, static_cast<std::size_t>(n.in_features),
                            static_cast<std::size_t>(n.out_features), y);
        break;
      case OpKind::Conv2d: ops::conv2d_forward(x(0), weight(i), bias(i), conv_geom(i), y); break;
      case OpKind::Relu: ops::relu_forward(x(0), y); break;
      case OpKind::Zero: y = BasicTensor<T>(x(0).shape); break;
      case OpKind::BatchNorm:
        if (opt.bypass_batchnorm)
          y = x(0);
        else if (opt.training)
          ops::batchnorm_train_forward(x(0), weight(i), *bias(i), y, r.bn_mean[i], r.bn_var[i]);
        else
          ops::batchnorm_eval_forward(x(0), weight(i), *bias(i), running_mean_[i], running_var_[i], y);
        break;
      case OpKind::AvgPool:
        ops::avgpool_forward(x(0), static_cast<std::size_t>(n.kernel), static_cast<std::size_t>(n.stride),
                             static_cast<std::size_t>(n.padding), shapes_[i][1], shapes_[i][2], y);
        break;
      case OpKind::Add:
        y = x(0);
        for (std::size_t k = 1; k < n.inputs.size(); ++k) {
          const auto& o = x(k);
          for (std::size_t e = 0; e < y.size(); ++e) y[e] += o[e];
        }
        break;
      case OpKind::GlobalAvgPool: ops::gap_forward(x(0), y); break;
      case OpKind::Flatten:
        y = x(0);
        y.shape = {nb, numel(shapes_[i])};
        break;
    }
    if (!all_finite(y))
      throw NumericalError(static_cast<int>(i), "non-finite activation at node " + std::to_string(i) + " ('" +
                                                    n.name + "')");
  }

  if (!loss && !output_grad) return r;

  // Loss and its gradient with respect to the output.
  const auto& out = r.activations[static_cast<std::size_t>(output_)];
  BasicTensor<T> dout(out.shape);
  if (output_grad) {
    if (output_grad->shape != out.shape) throw ShapeError("output gradient shape mismatch");
    dout = *output_grad;
  } else {
    switch (loss->kind) {
      case LossKind::SumOfOutputs:
      case LossKind::SynflowProduct: {
        T total(0.0);
        for (const auto& v : out.data) total += v;
        r.loss = total;
        std::fill(dout.data.begin(), dout.data.end(), T(1.0));
        break;
      }
      case LossKind::CrossEntropy:
        if constexpr (std::is_same_v<T, LogMag>) {
          throw Error("cross-entropy is not defined in the log-magnitude domain");
        } else {
          if (loss->labels.size() != nb) throw Error("cross-entropy needs one label per sample");
          if (out.rank() != 2) throw ShapeError("cross-entropy needs [N, K] logits");
          const std::size_t k = out.dim(1);
          using std::exp;
          using std::log;
          T total(0.0);
          for (std::size_t s = 0; s < nb; ++s) {
            const int label = loss->labels[s];
            if (label < 0 || static_cast<std::size_t>(label) >= k) throw Error("label out of range");
            T m = out[s * k];
            for (std::size_t c = 1; c < k; ++c)
              if (out[s * k + c] > m) m = out[s * k + c];
            T z(0.0);
            for (std::size_t c = 0; c < k; ++c) z += exp(out[s * k + c] - m);
            total += m + log(z) - out[s * k + static_cast<std::size_t>(label)];
            for (std::size_t c = 0; c < k; ++c) {
              T g = exp(out[s * k + c] - m) / z;
              if (c == static_cast<std::size_t>(label)) g -= T(1.0);
              dout[s * k + c] = g * T(1.0 / static_cast<double>(nb));
            }
          }
          r.loss = total * T(1.0 / static_cast<double>(nb));
        }
        break;
      case LossKind::SquaredError:
        if constexpr (std::is_same_v<T, LogMag>) {
          throw Error("squared error is not defined in the log-magnitude domain");
        } else {
          if (loss->targets.shape != out.shape) throw Error("squared-error targets must match the output shape");
          T total(0.0);
          for (std::size_t e = 0; e < out.size(); ++e) {
            const T d = out[e] - T(loss->targets[e]);
            total += d * d;
            dout[e] = d;
          }
          r.loss = total * T(0.5);
        }
        break;
    }
    if (!is_finite(r.loss)) throw NumericalError(-1, "non-finite loss");
  }

  // Reverse sweep. Every node gets a gradient slot, zero where unreached.
  r.activation_grads.resize(count);
  for (std::size_t i = 0; i < count; ++i) r.activation_grads[i] = BasicTensor<T>(r.activations[i].shape);
  r.param_grads.resize(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) r.param_grads[p] = BasicTensor<T>(params[p].shape);
  r.activation_grads[static_cast<std::size_t>(output_)] = std::move(dout);

  for (std::size_t ii = count; ii-- > 0;) {
    const NodeSpec& n = graph_.nodes[ii];
    const auto& dy = r.activation_grads[ii];
    auto dx = [&](std::size_t k) -> BasicTensor<T>& { return r.activation_grads[static_cast<std::size_t>(n.inputs[k])]; };
    auto x = [&](std::size_t k) -> const BasicTensor<T>& { return r.activations[static_cast<std::size_t>(n.inputs[k])]; };
    auto dw = [&]() -> BasicTensor<T>& { return r.param_grads[static_cast<std::size_t>(weight_of_[ii])]; };
    auto db = [&]() -> BasicTensor<T>* {
      return bias_of_[ii] < 0 ? nullptr : &r.param_grads[static_cast<std::size_t>(bias_of_[ii])];
    };
    switch (n.kind) {
      case OpKind::Input:
      case OpKind::Zero: break;
      case OpKind::Linear:
        ops::linear_backward(x(0), weight(ii), dy, nb, static_cast<std::size_t>(n.in_features),
                             static_cast<std::size_t>(n.out_features), &dx(0), dw(), db());
        break;
      case OpKind::Conv2d: ops::conv2d_backward(x(0), weight(ii), dy, conv_geom(ii), &dx(0), dw(), db()); break;
      case OpKind::Relu: ops::relu_backward(x(0), dy, dx(0)); break;
      case OpKind::BatchNorm:
        if (opt.bypass_batchnorm) {
          auto& g = dx(0);
          for (std::size_t e = 0; e < g.size(); ++e) g[e] += dy[e];
        } else if (opt.training) {
          ops::batchnorm_train_backward(x(0), weight(ii), dy, dx(0), dw(), *db());
        } else {
          ops::batchnorm_eval_backward(x(0), weight(ii), running_mean_[ii], running_var_[ii], dy, dx(0), dw(), *db());
        }
        break;
      case OpKind::AvgPool: {
        const Shape& in = shapes_[static_cast<std::size_t>(n.inputs[0])];
        ops::avgpool_backward(dy, static_cast<std::size_t>(n.kernel), static_cast<std::size_t>(n.stride),
                              static_cast<std::size_t>(n.padding), in[1], in[2], dx(0));
        break;
      }
      case OpKind::Add:
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          auto& g = dx(k);
          for (std::size_t e = 0; e < g.size(); ++e) g[e] += dy[e];
        }
        break;
      case OpKind::GlobalAvgPool: {
        const Shape& in = shapes_[static_cast<std::size_t>(n.inputs[0])];
        ops::gap_backward(dy, in[1] * in[2], dx(0));
        break;
      }
      case OpKind::Flatten: {
        auto& g = dx(0);
        for (std::size_t e = 0; e < g.size(); ++e) g[e] += dy[e];
        break;
      }
    }
  }
  for (std::size_t p = 0; p < r.param_grads.size(); ++p)
    if (!all_finite(r.param_grads[p]))
      throw NumericalError(params_[p].node, "non-finite gradient for parameter '" + params_[p].name + "'");
  return r;
}

template PassResult<double> Network::evaluate<double>(std::span<const Tensor>, const Tensor&, const LossSpec*,
                                                      const PassOptions&, const Tensor*) const;
template PassResult<Dual> Network::evaluate<Dual>(std::span<const BasicTensor<Dual>>, const BasicTensor<Dual>&,
                                                  const LossSpec*, const PassOptions&,
                                                  const BasicTensor<Dual>*) const;
template PassResult<LogMag> Network::evaluate<LogMag>(std::span<const BasicTensor<LogMag>>, const BasicTensor<LogMag>&,
                                                      const LossSpec*, const PassOptions&,
                                                      const BasicTensor<LogMag>*) const;

Tensor Network::forward(const Tensor& batch) {
  check_batch(batch);
  PassOptions opt;
  opt.training = training_;
  return forward_cached(batch, opt);
}

Tensor Network::forward_cached(const Tensor& batch, const PassOptions& opt) {
  auto r = evaluate<double>(values_, batch, nullptr, opt);
  if (opt.training && !opt.bypass_batchnorm) {
    for (std::size_t i = 0; i < graph_.nodes.size(); ++i) {
      if (r.bn_mean[i].empty()) continue;
      const double m = static_cast<double>(r.activations[i].size() / r.activations[i].dim(1));
      const double unbias = m > 1.0 ? m / (m - 1.0) : 1.0;
      for (std::size_t c = 0; c < r.bn_mean[i].size(); ++c) {
        running_mean_[i][c] = (1.0 - bn_momentum()) * running_mean_[i][c] + bn_momentum() * r.bn_mean[i][c];
        running_var_[i][c] = (1.0 - bn_momentum()) * running_var_[i][c] + bn_momentum() * r.bn_var[i][c] * unbias;
      }
    }
  }
  cache_ = std::move(r.activations);
  cached_input_ = batch;
  cache_opts_ = opt;
  has_cache_ = true;
  return cache_[static_cast<std::size_t>(output_)];
}

GradientSet Network::to_gradient_set(const PassResult<double>& r) const {
  GradientSet g;
  g.loss = r.loss;
  for (std::size_t p = 0; p < params_.size(); ++p) g.params.emplace(params_[p].name, r.param_grads[p]);
  for (std::size_t i = 0; i < graph_.nodes.size(); ++i)
    g.activations.emplace(graph_.nodes[i].name, r.activation_grads[i]);
  return g;
}

GradientSet Network::backward(const LossSpec& loss, const Tensor& batch) {
  check_batch(batch);
  PassOptions opt;
  opt.training = training_;
  opt.bypass_batchnorm = loss.kind == LossKind::SynflowProduct;
  forward_cached(batch, opt);
  auto r = evaluate<double>(values_, batch, &loss, opt);
  return to_gradient_set(r);
}

GradientSet Network::backward_from_output(const Tensor& output_grad) {
  if (!has_cache_) throw Error("backward_from_output needs a prior forward");
  auto r = evaluate<double>(values_, cached_input_, nullptr, cache_opts_, &output_grad);
  return to_gradient_set(r);
}

GradientSet Network::hvp(const LossSpec& loss, const Tensor& batch, const GradientSet& v, HvpMethod method) {
  check_batch(batch);
  for (std::size_t p = 0; p < params_.size(); ++p) {
    auto it = v.params.find(params_[p].name);
    if (it == v.params.end()) throw ShapeError("hvp direction lacks parameter '" + params_[p].name + "'");
    if (it->second.shape != values_[p].shape) throw ShapeError("hvp direction shape mismatch for '" + params_[p].name + "'");
  }
  if (v.params.size() != params_.size()) throw ShapeError("hvp direction has extra entries");

  PassOptions opt;
  opt.training = training_;
  opt.bypass_batchnorm = loss.kind == LossKind::SynflowProduct;
  GradientSet out;

  if (method == HvpMethod::DualNumbers) {
    std::vector<BasicTensor<Dual>> dp(params_.size());
    for (std::size_t p = 0; p < params_.size(); ++p) {
      const Tensor& dir = v.params.at(params_[p].name);
      dp[p] = BasicTensor<Dual>(values_[p].shape);
      for (std::size_t e = 0; e < dir.size(); ++e) dp[p][e] = Dual(values_[p][e], dir[e]);
    }
    BasicTensor<Dual> db(batch.shape);
    for (std::size_t e = 0; e < batch.size(); ++e) db[e] = Dual(batch[e]);
    auto r = evaluate<Dual>(dp, db, &loss, opt);
    out.loss = r.loss.v;
    for (std::size_t p = 0; p < params_.size(); ++p) {
      Tensor t(values_[p].shape);
      for (std::size_t e = 0; e < t.size(); ++e) t[e] = r.param_grads[p][e].d;
      out.params.emplace(params_[p].name, std::move(t));
    }
    return out;
  }

  double theta_inf = 0.0, v_inf = 0.0;
  for (std::size_t p = 0; p < params_.size(); ++p) {
    for (double x : values_[p].data) theta_inf = std::max(theta_inf, std::abs(x));
    for (double x : v.params.at(params_[p].name).data) v_inf = std::max(v_inf, std::abs(x));
  }
  if (v_inf == 0.0) {
    for (std::size_t p = 0; p < params_.size(); ++p) out.params.emplace(params_[p].name, Tensor(values_[p].shape));
    return out;
  }
  const double eps = 1e-4 * (1.0 + theta_inf) / v_inf;
  auto shifted = [&](double sign) {
    std::vector<Tensor> vals = values_;
    for (std::size_t p = 0; p < params_.size(); ++p) {
      const Tensor& dir = v.params.at(params_[p].name);
      for (std::size_t e = 0; e < dir.size(); ++e) vals[p][e] += sign * eps * dir[e];
    }
    return evaluate<double>(vals, batch, &loss, opt);
  };
  const auto plus = shifted(1.0);
  const auto minus = shifted(-1.0);
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor t(values_[p].shape);
    for (std::size_t e = 0; e < t.size(); ++e) t[e] = (plus.param_grads[p][e] - minus.param_grads[p][e]) / (2.0 * eps);
    out.params.emplace(params_[p].name, std::move(t));
  }
  return out;
}

std::map<std::string, Tensor> Network::activations() const {
  std::map<std::string, Tensor> m;
  if (!has_cache_) return m;
  for (std::size_t i = 0; i < graph_.nodes.size(); ++i) m.emplace(graph_.nodes[i].name, cache_[i]);
  return m;
}

const Tensor& Network::activation(const std::string& name) const {
  if (!has_cache_) throw Error("no cached activations; run forward first");
  const int i = node_index(name);
  if (i < 0) throw Error("no node named '" + name + "'");
  return cache_[static_cast<std::size_t>(i)];
}

void sgd_step(Network& net, const GradientSet& grads, const SgdHyper& hp) {
  if (hp.lr < 0.0) throw ConfigError("learning rate must be nonnegative");
  const auto& params = net.params_;
  if (net.momentum_.size() != params.size()) net.momentum_.assign(params.size(), Tensor{});
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto it = grads.params.find(params[p].name);
    if (it == grads.params.end()) throw Error("gradient missing for parameter '" + params[p].name + "'");
    const Tensor& g = it->second;
    Tensor& w = net.values_[p];
    if (g.shape != w.shape) throw ShapeError("gradient shape mismatch for '" + params[p].name + "'");
    Tensor& buf = net.momentum_[p];
    const bool first = buf.size() == 0;
    if (hp.momentum != 0.0 && first) buf = Tensor(w.shape);
    for (std::size_t e = 0; e < w.size(); ++e) {
      double d = g[e] + hp.weight_decay * w[e];
      if (hp.momentum != 0.0) {
        buf[e] = first ? d : hp.momentum * buf[e] + d;
        d = hp.nesterov ? d + hp.momentum * buf[e] : buf[e];
      }
      w[e] -= hp.lr * d;
    }
  }
}

}  // namespace zc
