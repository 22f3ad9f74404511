#include "zcnas/engine/graph.hpp"

#include <sstream>

#include "zcnas/common/error.hpp"

namespace zc {

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

namespace {
constexpr struct {
  OpKind kind;
  const char* name;
} kOpNames[] = {
    {OpKind::Input, "input"},         {OpKind::Linear, "linear"},
    {OpKind::Conv2d, "conv2d"},       {OpKind::Relu, "relu"},
    {OpKind::BatchNorm, "batchnorm"}, {OpKind::AvgPool, "avgpool"},
    {OpKind::Add, "add"},             {OpKind::GlobalAvgPool, "global-pool"},
    {OpKind::Flatten, "flatten"},     {OpKind::Zero, "zero"},
};
}  // namespace

const char* op_kind_name(OpKind kind) {
  for (const auto& e : kOpNames)
    if (e.kind == kind) return e.name;
  throw ShapeError("unknown operator kind");
}

OpKind parse_op_kind(std::string_view name) {
  for (const auto& e : kOpNames)
    if (name == e.name) return e.kind;
  throw ShapeError("unknown operator kind: " + std::string(name));
}

int GraphBuilder::push(NodeSpec node) {
  if (node.name.empty())
    node.name = std::string(op_kind_name(node.kind)) + std::to_string(spec_.nodes.size());
  spec_.nodes.push_back(std::move(node));
  return static_cast<int>(spec_.nodes.size()) - 1;
}

int GraphBuilder::input(Shape per_sample, std::string name) {
  NodeSpec n;
  n.kind = OpKind::Input;
  n.name = std::move(name);
  n.shape = std::move(per_sample);
  return push(std::move(n));
}

int GraphBuilder::linear(int x, int in_features, int out_features, bool bias, std::string name) {
  NodeSpec n;
  n.kind = OpKind::Linear;
  n.name = std::move(name);
  n.inputs = {x};
  n.in_features = in_features;
  n.out_features = out_features;
  n.bias = bias;
  return push(std::move(n));
}

int GraphBuilder::conv2d(int x, int in_channels, int out_channels, int kernel, int stride, int padding,
                         bool bias, std::string name) {
  NodeSpec n;
  n.kind = OpKind::Conv2d;
  n.name = std::move(name);
  n.inputs = {x};
  n.in_channels = in_channels;
  n.out_channels = out_channels;
  n.kernel = kernel;
  n.stride = stride;
  n.padding = padding;
  n.bias = bias;
  return push(std::move(n));
}

int GraphBuilder::relu(int x, std::string name) {
  NodeSpec n;
  n.kind = OpKind::Relu;
  n.name = std::move(name);
  n.inputs = {x};
  return push(std::move(n));
}

int GraphBuilder::batchnorm(int x, int channels, std::string name) {
  NodeSpec n;
  n.kind = OpKind::BatchNorm;
  n.name = std::move(name);
  n.inputs = {x};
  n.channels = channels;
  return push(std::move(n));
}

int GraphBuilder::avgpool(int x, int kernel, int stride, int padding, std::string name) {
  NodeSpec n;
  n.kind = OpKind::AvgPool;
  n.name = std::move(name);
  n.inputs = {x};
  n.kernel = kernel;
  n.stride = stride;
  n.padding = padding;
  return push(std::move(n));
}

int GraphBuilder::add(std::vector<int> xs, std::string name) {
  NodeSpec n;
  n.kind = OpKind::Add;
  n.name = std::move(name);
  n.inputs = std::move(xs);
  return push(std::move(n));
}

int GraphBuilder::global_avg_pool(int x, std::string name) {
  NodeSpec n;
  n.kind = OpKind::GlobalAvgPool;
  n.name = std::move(name);
  n.inputs = {x};
  return push(std::move(n));
}

int GraphBuilder::flatten(int x, std::string name) {
  NodeSpec n;
  n.kind = OpKind::Flatten;
  n.name = std::move(name);
  n.inputs = {x};
  return push(std::move(n));
}

int GraphBuilder::zero(int x, std::string name) {
  NodeSpec n;
  n.kind = OpKind::Zero;
  n.name = std::move(name);
  n.inputs = {x};
  return push(std::move(n));
}

GraphSpec GraphBuilder::build(int output) const {
  GraphSpec g = spec_;
  g.output = output;
  return g;
}

}  // namespace zc
