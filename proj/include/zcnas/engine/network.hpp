#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "zcnas/engine/graph.hpp"
#include "zcnas/engine/scalars.hpp"
#include "zcnas/engine/tensor.hpp"

namespace zc {

enum class InitScheme { Default, KaimingNormal, XavierUniform };
enum class BiasMode { SchemeDefault, Zero };

const char* init_scheme_name(InitScheme s);
InitScheme parse_init_scheme(std::string_view s);
const char* bias_mode_name(BiasMode m);
BiasMode parse_bias_mode(std::string_view s);

// "default" draws weights and biases from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
// kaiming-normal uses N(0, 2/fan_in); xavier-uniform uses
// U(+-sqrt(6/(fan_in+fan_out))). Under scheme-default biases keep the
// U(+-1/sqrt(fan_in)) rule for every scheme. Batchnorm scale/shift start at 1/0.
struct InitConfig {
  InitScheme scheme = InitScheme::Default;
  BiasMode bias_mode = BiasMode::SchemeDefault;
  std::uint64_t seed = 0;
};

enum class LossKind {
  CrossEntropy,    // mean over the batch; needs one label per sample
  SynflowProduct,  // sum of outputs with batchnorm bypassed; no targets
  SumOfOutputs,    // sum of outputs; no targets
  SquaredError,    // 0.5 * sum (y - t)^2; needs a target tensor shaped like the output
};

struct LossSpec {
  LossKind kind = LossKind::CrossEntropy;
  std::vector<int> labels;
  Tensor targets;

  static LossSpec cross_entropy(std::vector<int> labels) { return {LossKind::CrossEntropy, std::move(labels), {}}; }
  static LossSpec sum_of_outputs() { return {LossKind::SumOfOutputs, {}, {}}; }
  static LossSpec synflow_product() { return {LossKind::SynflowProduct, {}, {}}; }
  static LossSpec squared_error(Tensor t) { return {LossKind::SquaredError, {}, std::move(t)}; }
};

struct Parameter {
  std::string name;
  int node = -1;
  bool is_bias = false;
};

// Gradients keyed by parameter name and by activation (node) name.
struct GradientSet {
  std::map<std::string, Tensor> params;
  std::map<std::string, Tensor> activations;
  double loss = 0.0;
};

struct PassOptions {
  bool training = true;          // batchnorm uses batch statistics
  bool bypass_batchnorm = false;  // batchnorm nodes act as identity
};

template <class T>
struct PassResult {
  std::vector<BasicTensor<T>> activations;       // per node, batch-major
  std::vector<BasicTensor<T>> activation_grads;  // per node; empty without backward
  std::vector<BasicTensor<T>> param_grads;       // per parameter; empty without backward
  std::vector<std::vector<double>> bn_mean;       // per node; batch statistics when used
  std::vector<std::vector<double>> bn_var;
  T loss{};
};

struct SgdHyper {
  double lr = 0.1;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 5e-4;
};

enum class HvpMethod { DualNumbers, FiniteDifference };

class Network {
 public:
  Network(const GraphSpec& spec, const InitConfig& init);

  // Returns output logits and caches every node's activation.
  Tensor forward(const Tensor& batch);
  // Runs forward on `batch`, then reverse mode from the loss.
  GradientSet backward(const LossSpec& loss, const Tensor& batch);
  // Reverse mode from an explicit output gradient, reusing the cached forward.
  GradientSet backward_from_output(const Tensor& output_grad);
  // Hessian-of-loss times v with respect to the parameters.
  GradientSet hvp(const LossSpec& loss, const Tensor& batch, const GradientSet& v,
                  HvpMethod method = HvpMethod::DualNumbers);

  // Generic pass with substituted parameters and scalar type. Does not touch
  // the activation cache or the running statistics.
  template <class T>
  PassResult<T> evaluate(std::span<const BasicTensor<T>> params, const BasicTensor<T>& batch,
                         const LossSpec* loss, const PassOptions& opt,
                         const BasicTensor<T>* output_grad = nullptr) const;

  // Parameter metadata; values()[i] holds the tensor of parameters()[i].
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  std::vector<Tensor>& values() noexcept { return values_; }
  const std::vector<Tensor>& values() const noexcept { return values_; }
  Tensor& parameter(const std::string& name);
  const Tensor& parameter(const std::string& name) const;
  int parameter_index(const std::string& name) const;
  std::size_t parameter_count() const;

  const GraphSpec& graph() const noexcept { return graph_; }
  const Shape& node_shape(int node) const { return shapes_.at(static_cast<std::size_t>(node)); }
  int output_node() const noexcept { return output_; }
  const Shape& input_shape() const { return shapes_.at(static_cast<std::size_t>(input_)); }
  const Shape& output_shape() const { return shapes_.at(static_cast<std::size_t>(output_)); }
  int input_node() const noexcept { return input_; }
  int node_index(const std::string& name) const;

  // Cached activations from the last forward(), keyed by node name.
  std::map<std::string, Tensor> activations() const;
  const Tensor& activation(const std::string& name) const;

  void set_training(bool on) noexcept { training_ = on; }
  bool training() const noexcept { return training_; }
  double bn_momentum() const noexcept { return 0.1; }

  friend void sgd_step(Network& net, const GradientSet& grads, const SgdHyper& hp);

 private:
  Tensor forward_cached(const Tensor& batch, const PassOptions& opt);
  void check_batch(const Tensor& batch) const;
  GradientSet to_gradient_set(const PassResult<double>& r) const;

  GraphSpec graph_;
  std::vector<Shape> shapes_;
  std::vector<int> weight_of_;  // per node, -1 when absent
  std::vector<int> bias_of_;
  std::vector<Parameter> params_;
  std::vector<Tensor> values_;
  std::vector<std::vector<double>> running_mean_;
  std::vector<std::vector<double>> running_var_;
  std::vector<Tensor> momentum_;
  std::vector<Tensor> cache_;
  Tensor cached_input_;
  PassOptions cache_opts_{};
  int input_ = -1;
  int output_ = -1;
  bool training_ = true;
  bool has_cache_ = false;
};

inline Network build_network(const GraphSpec& spec, const InitConfig& init) { return Network(spec, init); }

// SGD with (Nesterov) momentum and L2 weight decay, PyTorch semantics.
// Momentum buffers live in the network and persist across calls.
void sgd_step(Network& net, const GradientSet& grads, const SgdHyper& hp);

extern template PassResult<double> Network::evaluate<double>(std::span<const Tensor>, const Tensor&, const LossSpec*,
                                                             const PassOptions&, const Tensor*) const;
extern template PassResult<Dual> Network::evaluate<Dual>(std::span<const BasicTensor<Dual>>, const BasicTensor<Dual>&,
                                                         const LossSpec*, const PassOptions&,
                                                         const BasicTensor<Dual>*) const;
extern template PassResult<LogMag> Network::evaluate<LogMag>(std::span<const BasicTensor<LogMag>>,
                                                             const BasicTensor<LogMag>&, const LossSpec*,
                                                             const PassOptions&, const BasicTensor<LogMag>*) const;

}  // namespace zc
