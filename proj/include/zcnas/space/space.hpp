#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zcnas/common/rng.hpp"
#include "zcnas/engine/network.hpp"

namespace zc {

// What an edge label does inside a cell.
enum class CellOp { None, Skip, Conv1x1, Conv3x3, AvgPool3x3 };

// Accepts the long tokens (none, skip_connect, nor_conv_1x1, nor_conv_3x3,
// avg_pool_3x3) and the short aliases
// (none, skip, conv1x1, conv3x3, avgpool3x3).
CellOp cell_op_from_label(std::string_view label);

struct SpaceSpec {
  std::string name = "nb201-like";
  int n_nodes = 4;
  std::vector<std::string> op_set = {"none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3"};

  int edge_count() const { return n_nodes * (n_nodes - 1) / 2; }
  // Throws ConfigError on an invalid spec.
  void validate() const;
};

SpaceSpec nb201_space();
SpaceSpec mini_space();

// Macro skeleton: stem conv (3->c) + BN, `stages` stages of `cells_per_stage`
// cells, a stride-2 ReLU-conv3x3-BN reduction doubling channels between
// stages, then BN-ReLU-global pool-linear classifier.
struct ScaleConfig {
  int resolution = 8;
  int channels = 4;
  int cells_per_stage = 1;
  int stages = 3;
  int classes = 4;
  int in_channels = 3;

  void validate() const;
};

struct Architecture {
  std::vector<int> ops;  // one op index per edge, edges grouped by target node

  auto operator<=>(const Architecture&) const = default;
};

// (source, target) of each edge in encoding order.
std::vector<std::pair<int, int>> cell_edges(int n_nodes);

// Exact count; throws ConfigError if it does not fit in 64 bits.
std::uint64_t space_size(const SpaceSpec& spec);

// Edge 0 is the most significant digit.
Architecture arch_from_index(const SpaceSpec& spec, std::uint64_t index);
std::uint64_t arch_index(const SpaceSpec& spec, const Architecture& arch);

// Every architecture once in lexicographic edge-op order. Throws
// ConfigError when the space has more than `limit` members.
std::vector<Architecture> enumerate_space(const SpaceSpec& spec, std::uint64_t limit = 1'000'000);

std::string canonical_string(const Architecture& arch, const SpaceSpec& spec);
// Throws ConfigError on an unknown token or malformed string.
Architecture parse_string(std::string_view s, const SpaceSpec& spec);

Architecture random_architecture(const SpaceSpec& spec, Rng& rng);
std::vector<Architecture> neighbors(const Architecture& arch, const SpaceSpec& spec);
// Uniform over neighbors(arch); throws ConfigError on a single-op space.
Architecture mutate(const Architecture& arch, const SpaceSpec& spec, Rng& rng);

GraphSpec build_graph(const Architecture& arch, const SpaceSpec& spec, const ScaleConfig& scale);
Network materialize(const Architecture& arch, const SpaceSpec& spec, const ScaleConfig& scale,
                    const InitConfig& init);

// Multiply-accumulates for one sample: conv k*k*Cin*Cout*Ho*Wo, linear Cin*Cout.
std::uint64_t flops(const Architecture& arch, const SpaceSpec& spec, const ScaleConfig& scale);
std::uint64_t flops(const GraphSpec& graph);

}  // namespace zc
