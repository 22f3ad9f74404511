#include "zcnas/space/space.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "zcnas/common/error.hpp"

namespace zc {

CellOp cell_op_from_label(std::string_view label) {
  if (label == "none" || label == "zero") return CellOp::None;
  if (label == "skip_connect" || label == "skip") return CellOp::Skip;
  if (label == "nor_conv_1x1" || label == "conv1x1") return CellOp::Conv1x1;
  if (label == "nor_conv_3x3" || label == "conv3x3") return CellOp::Conv3x3;
  if (label == "avg_pool_3x3" || label == "avgpool3x3") return CellOp::AvgPool3x3;
  throw ConfigError("unknown cell operation: " + std::string(label));
}

void SpaceSpec::validate() const {
  if (n_nodes < 2) throw ConfigError("a cell needs at least 2 nodes");
  if (op_set.empty()) throw ConfigError("op set is empty");
  std::set<std::string> seen;
  for (const auto& op : op_set) {
    (void)cell_op_from_label(op);
    if (op.find_first_of("|~+") != std::string::npos) throw ConfigError("op label contains a reserved character");
    if (!seen.insert(op).second) throw ConfigError("duplicate op label: " + op);
  }
}

SpaceSpec nb201_space() { return SpaceSpec{}; }

SpaceSpec mini_space() {
  SpaceSpec s;
  s.name = "mini";
  s.n_nodes = 3;
  return s;
}

void ScaleConfig::validate() const {
  if (resolution < 1 || channels < 1) throw ConfigError("resolution and channels must be >= 1");
  if (cells_per_stage < 0 || stages < 1 || classes < 1 || in_channels < 1)
    throw ConfigError("invalid macro skeleton");
  if (stages > 1 && resolution < (1 << (stages - 1)))
    throw ConfigError("resolution " + std::to_string(resolution) + " is too small for " + std::to_string(stages) +
                      " stages");
}

std::vector<std::pair<int, int>> cell_edges(int n_nodes) {
  std::vector<std::pair<int, int>> e;
  for (int j = 1; j < n_nodes; ++j)
    for (int i = 0; i < j; ++i) e.emplace_back(i, j);
  return e;
}

std::uint64_t space_size(const SpaceSpec& spec) {
  spec.validate();
  std::uint64_t n = 1;
  const auto base = static_cast<std::uint64_t>(spec.op_set.size());
  for (int e = 0; e < spec.edge_count(); ++e) {
    if (n > std::numeric_limits<std::uint64_t>::max() / base) throw ConfigError("search space size overflows");
    n *= base;
  }
  return n;
}

Architecture arch_from_index(const SpaceSpec& spec, std::uint64_t index) {
  const auto base = static_cast<std::uint64_t>(spec.op_set.size());
  Architecture a;
  a.ops.assign(static_cast<std::size_t>(spec.edge_count()), 0);
  for (std::size_t e = a.ops.size(); e-- > 0;) {
    a.ops[e] = static_cast<int>(index % base);
    index /= base;
  }
  if (index != 0) throw ConfigError("architecture index out of range");
  return a;
}

std::uint64_t arch_index(const SpaceSpec& spec, const Architecture& arch) {
  const auto base = static_cast<std::uint64_t>(spec.op_set.size());
  std::uint64_t idx = 0;
  for (int op : arch.ops) idx = idx * base + static_cast<std::uint64_t>(op);
  return idx;
}

std::vector<Architecture> enumerate_space(const SpaceSpec& spec, std::uint64_t limit) {
  const auto n = space_size(spec);
  if (n > limit)
    throw ConfigError("space has " + std::to_string(n) + " architectures, above the enumeration limit " +
                      std::to_string(limit));
  std::vector<Architecture> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(arch_from_index(spec, i));
  return out;
}

std::string canonical_string(const Architecture& arch, const SpaceSpec& spec) {
  if (static_cast<int>(arch.ops.size()) != spec.edge_count()) throw ConfigError("architecture has wrong edge count");
  std::string s;
  std::size_t e = 0;
  for (int j = 1; j < spec.n_nodes; ++j) {
    if (j > 1) s += '+';
    s += '|';
    for (int i = 0; i < j; ++i, ++e) {
      const int op = arch.ops[e];
      if (op < 0 || op >= static_cast<int>(spec.op_set.size())) throw ConfigError("op index out of range");
      s += spec.op_set[static_cast<std::size_t>(op)];
      s += '~';
      s += std::to_string(i);
      s += '|';
    }
  }
  return s;
}

Architecture parse_string(std::string_view s, const SpaceSpec& spec) {
  auto fail = [&](const std::string& why) -> ConfigError {
    return ConfigError("cannot parse architecture '" + std::string(s) + "': " + why);
  };
  Architecture a;
  std::size_t pos = 0;
  for (int j = 1; j < spec.n_nodes; ++j) {
    if (j > 1) {
      if (pos >= s.size() || s[pos] != '+') throw fail("expected '+' before node " + std::to_string(j));
      ++pos;
    }
    if (pos >= s.size() || s[pos] != '|') throw fail("expected '|'");
    ++pos;
    for (int i = 0; i < j; ++i) {
      const auto bar = s.find('|', pos);
      if (bar == std::string_view::npos) throw fail("unterminated edge");
      const auto tok = s.substr(pos, bar - pos);
      const auto tilde = tok.rfind('~');
      if (tilde == std::string_view::npos) throw fail("edge without source index");
      const auto label = tok.substr(0, tilde);
      if (tok.substr(tilde + 1) != std::to_string(i)) throw fail("unexpected source index in '" + std::string(tok) + "'");
      const auto it = std::find(spec.op_set.begin(), spec.op_set.end(), label);
      if (it == spec.op_set.end()) throw fail("unknown op token '" + std::string(label) + "'");
      a.ops.push_back(static_cast<int>(it - spec.op_set.begin()));
      pos = bar + 1;
    }
  }
  if (pos != s.size()) throw fail("wrong edge count");
  return a;
}

Architecture random_architecture(const SpaceSpec& spec, Rng& rng) {
  Architecture a;
  a.ops.resize(static_cast<std::size_t>(spec.edge_count()));
  for (auto& op : a.ops) op = static_cast<int>(uniform_index(rng, spec.op_set.size()));
  return a;
}

std::vector<Architecture> neighbors(const Architecture& arch, const SpaceSpec& spec) {
  std::vector<Architecture> out;
  const int k = static_cast<int>(spec.op_set.size());
  out.reserve(arch.ops.size() * static_cast<std::size_t>(std::max(k - 1, 0)));
  for (std::size_t e = 0; e < arch.ops.size(); ++e)
    for (int op = 0; op < k; ++op) {
      if (op == arch.ops[e]) continue;
      Architecture b = arch;
      b.ops[e] = op;
      out.push_back(std::move(b));
    }
  return out;
}

Architecture mutate(const Architecture& arch, const SpaceSpec& spec, Rng& rng) {
  if (spec.op_set.size() < 2) throw ConfigError("cannot mutate in a single-op space");
  if (arch.ops.empty()) throw ConfigError("cannot mutate an architecture without edges");
  const std::size_t k = spec.op_set.size();
  const std::size_t pick = uniform_index(rng, arch.ops.size() * (k - 1));
  Architecture b = arch;
  const std::size_t e = pick / (k - 1);
  int op = static_cast<int>(pick % (k - 1));
  if (op >= arch.ops[e]) ++op;
  b.ops[e] = op;
  return b;
}

namespace {

int build_cell(GraphBuilder& g, int x, int c, const Architecture& arch, const SpaceSpec& spec,
               const std::string& prefix) {
  std::vector<int> node_out{x};
  std::size_t e = 0;
  for (int j = 1; j < spec.n_nodes; ++j) {
    std::vector<int> terms;
    for (int i = 0; i < j; ++i, ++e) {
      const int src = node_out[static_cast<std::size_t>(i)];
      const std::string tag = prefix + ".e" + std::to_string(i) + std::to_string(j);
      switch (cell_op_from_label(spec.op_set[static_cast<std::size_t>(arch.ops[e])])) {
        case CellOp::None: terms.push_back(g.zero(src, tag + ".zero")); break;
        case CellOp::Skip: terms.push_back(src); break;
        case CellOp::Conv1x1:
        case CellOp::Conv3x3: {
          const bool big = cell_op_from_label(spec.op_set[static_cast<std::size_t>(arch.ops[e])]) == CellOp::Conv3x3;
          const int r = g.relu(src, tag + ".relu");
          const int cv = g.conv2d(r, c, c, big ? 3 : 1, 1, big ? 1 : 0, false, tag + ".conv");
          terms.push_back(g.batchnorm(cv, c, tag + ".bn"));
          break;
        }
        case CellOp::AvgPool3x3: terms.push_back(g.avgpool(src, 3, 1, 1, tag + ".pool")); break;
      }
    }
    node_out.push_back(terms.size() == 1 ? terms[0] : g.add(terms, prefix + ".n" + std::to_string(j)));
  }
  return node_out.back();
}

}  // namespace

GraphSpec build_graph(const Architecture& arch, const SpaceSpec& spec, const ScaleConfig& scale) {
  spec.validate();
  scale.validate();
  if (static_cast<int>(arch.ops.size()) != spec.edge_count()) throw ConfigError("architecture has wrong edge count");
  for (int op : arch.ops)
    if (op < 0 || op >= static_cast<int>(spec.op_set.size())) throw ConfigError("op index out of range");

  GraphBuilder g;
  const auto r = static_cast<std::size_t>(scale.resolution);
  int x = g.input({static_cast<std::size_t>(scale.in_channels), r, r});
  int c = scale.channels;
  x = g.conv2d(x, scale.in_channels, c, 3, 1, 1, false, "stem.conv");
  x = g.batchnorm(x, c, "stem.bn");
  for (int s = 0; s < scale.stages; ++s) {
    const std::string stage = "s" + std::to_string(s);
    if (s > 0) {
      x = g.relu(x, stage + ".reduce.relu");
      x = g.conv2d(x, c, 2 * c, 3, 2, 1, false, stage + ".reduce.conv");
      c *= 2;
      x = g.batchnorm(x, c, stage + ".reduce.bn");
    }
    for (int k = 0; k < scale.cells_per_stage; ++k)
      x = build_cell(g, x, c, arch, spec, stage + ".c" + std::to_string(k));
  }
  x = g.batchnorm(x, c, "head.bn");
  x = g.relu(x, "head.relu");
  x = g.global_avg_pool(x, "head.pool");
  x = g.flatten(x, "head.flatten");
  x = g.linear(x, c, scale.classes, true, "classifier");
  return g.build(x);
}

Network materialize(const Architecture& arch, const SpaceSpec& spec, const ScaleConfig& scale,
                    const InitConfig& init) {
  return Network(build_graph(arch, spec, scale), init);
}

std::uint64_t flops(const GraphSpec& graph) {
  // Spatial extents propagate through the node list; it is built in order.
  std::vector<std::pair<std::size_t, std::size_t>> hw(graph.nodes.size(), {1, 1});
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const NodeSpec& n = graph.nodes[i];
    if (n.kind == OpKind::Input) {
      if (n.shape.size() == 3) hw[i] = {n.shape[1], n.shape[2]};
      continue;
    }
    const auto in = hw[static_cast<std::size_t>(n.inputs.at(0))];
    switch (n.kind) {
      case OpKind::Conv2d:
      case OpKind::AvgPool: {
        const auto ext = [&](std::size_t v) {
          return (v + 2 * static_cast<std::size_t>(n.padding) - static_cast<std::size_t>(n.kernel)) /
                     static_cast<std::size_t>(n.stride) + 1;
        };
        hw[i] = {ext(in.first), ext(in.second)};
        if (n.kind == OpKind::Conv2d)
          total += static_cast<std::uint64_t>(n.kernel) * n.kernel * static_cast<std::uint64_t>(n.in_channels) *
                   static_cast<std::uint64_t>(n.out_channels) * hw[i].first * hw[i].second;
        break;
      }
      case OpKind::Linear:
        total += static_cast<std::uint64_t>(n.in_features) * static_cast<std::uint64_t>(n.out_features);
        break;
      case OpKind::GlobalAvgPool:
      case OpKind::Flatten: hw[i] = {1, 1}; break;
      default: hw[i] = in; break;
    }
  }
  return total;
}

std::uint64_t flops(const Architecture& arch, const SpaceSpec& spec, const ScaleConfig& scale) {
  return flops(build_graph(arch, spec, scale));
}

}  // namespace zc
