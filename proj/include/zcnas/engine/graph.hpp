#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "zcnas/engine/tensor.hpp"

namespace zc {

enum class OpKind { Input, Linear, Conv2d, Relu, BatchNorm, AvgPool, Add, GlobalAvgPool, Flatten, Zero };

const char* op_kind_name(OpKind kind);
// Throws ShapeError for names that are not operators.
OpKind parse_op_kind(std::string_view name);

struct NodeSpec {
  std::string name;
  OpKind kind = OpKind::Input;
  std::vector<int> inputs;
  Shape shape;  // Input only: per-sample shape
  int in_features = 0;
  int out_features = 0;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  bool bias = true;
  int channels = 0;  // BatchNorm
};

// Operator DAG. Node inputs refer to indices into `nodes`; the order of
// `nodes` does not have to be topological. `output < 0` means the last node.
struct GraphSpec {
  std::vector<NodeSpec> nodes;
  int output = -1;
};

class GraphBuilder {
 public:
  int input(Shape per_sample, std::string name = "input");
  int linear(int x, int in_features, int out_features, bool bias = true, std::string name = {});
  int conv2d(int x, int in_channels, int out_channels, int kernel, int stride, int padding,
             bool bias = false, std::string name = {});
  int relu(int x, std::string name = {});
  int batchnorm(int x, int channels, std::string name = {});
  int avgpool(int x, int kernel, int stride, int padding, std::string name = {});
  int add(std::vector<int> xs, std::string name = {});
  int global_avg_pool(int x, std::string name = {});
  int flatten(int x, std::string name = {});
  int zero(int x, std::string name = {});

  GraphSpec build(int output = -1) const;
  std::size_t size() const noexcept { return spec_.nodes.size(); }

 private:
  int push(NodeSpec node);
  GraphSpec spec_;
};

}  // namespace zc
