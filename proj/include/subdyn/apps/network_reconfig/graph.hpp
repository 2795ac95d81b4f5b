#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>
#include <vector>

#include "subdyn/apps/network_reconfig/network.hpp"
#include "subdyn/core.hpp"
#include "subdyn/rng.hpp"

namespace subdyn::nr {

struct GraphEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  double weight = 0.0;
  int priority = 0;  // lower enters first regardless of weight; −1 forces an edge in
};

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::uint8_t> rank_;
};

namespace detail {

// Strict total order on edges: (priority, weight, min endpoint, max endpoint, index).
inline auto edge_key(const std::vector<GraphEdge>& edges, std::size_t k) {
  const auto& e = edges[k];
  return std::make_tuple(e.priority, e.weight, std::min(e.u, e.v), std::max(e.u, e.v), k);
}

}  // namespace detail

// Prim's algorithm with a binary heap. Edges are compared by the strict order
// above, so the spanning tree is unique and does not depend on the root.
// Returns edge indices in increasing order.
inline std::vector<std::size_t> prim_mst(std::size_t node_count, const std::vector<GraphEdge>& edges) {
  if (node_count == 0) throw DomainError("graph has no nodes");
  std::vector<std::vector<std::size_t>> incident(node_count);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    if (e.u >= node_count || e.v >= node_count) throw DomainError("edge endpoint out of range");
    if (e.u == e.v) continue;
    incident[e.u].push_back(k);
    incident[e.v].push_back(k);
  }
  using Key = decltype(detail::edge_key(edges, 0));
  std::priority_queue<Key, std::vector<Key>, std::greater<>> heap;
  std::vector<bool> in_tree(node_count, false);
  std::vector<std::size_t> tree;
  tree.reserve(node_count - 1);

  auto add_node = [&](std::size_t x) {
    in_tree[x] = true;
    for (auto k : incident[x]) {
      const auto& e = edges[k];
      if (!in_tree[e.u == x ? e.v : e.u]) heap.push(detail::edge_key(edges, k));
    }
  };
  add_node(0);
  while (!heap.empty() && tree.size() + 1 < node_count) {
    const auto k = std::get<4>(heap.top());
    heap.pop();
    const auto& e = edges[k];
    if (in_tree[e.u] && in_tree[e.v]) continue;
    tree.push_back(k);
    add_node(in_tree[e.u] ? e.v : e.u);
  }
  if (tree.size() + 1 != node_count) throw TopologyError("graph is disconnected: no spanning tree");
  std::sort(tree.begin(), tree.end());
  return tree;
}

struct RadialityReport {
  bool radial = false;
  bool edge_count_ok = false;
  bool all_supplied = false;
};

// Radial ⇔ energized edge count = buses − feeders and every bus reaches a
// feeder. Together these force a forest with one feeder per tree.
inline RadialityReport check_radial(const PowerNetwork& net, const SubsetMask& switches) {
  const auto on = net.energized(switches);
  const std::size_t edges = static_cast<std::size_t>(std::count(on.begin(), on.end(), true));
  RadialityReport rep;
  rep.edge_count_ok = edges + net.feeders().size() == net.bus_count();
  DisjointSets ds(net.bus_count());
  for (std::size_t k = 0; k < net.line_count(); ++k) {
    if (on[k]) ds.unite(net.from_index(k), net.to_index(k));
  }
  std::vector<bool> fed(net.bus_count(), false);
  for (auto f : net.feeders()) fed[ds.find(f)] = true;
  rep.all_supplied = true;
  for (std::size_t i = 0; i < net.bus_count(); ++i) rep.all_supplied = rep.all_supplied && fed[ds.find(i)];
  rep.radial = rep.edge_count_ok && rep.all_supplied;
  return rep;
}

inline bool is_radial(const PowerNetwork& net, const SubsetMask& switches) { return check_radial(net, switches).radial; }

inline constexpr double kDefaultBigM = 1e6;

// The network as an MST instance: one edge per line (switched lines carry the
// given weights, static lines are forced in) followed by a chain of virtual
// feeder–feeder edges with weight −big_M.
struct MstInstance {
  std::vector<GraphEdge> edges;
  std::size_t virtual_begin = 0;  // edges[virtual_begin..] are virtual
};

inline MstInstance mst_instance(const PowerNetwork& net, std::span<const double> switch_weights,
                                double big_m = kDefaultBigM) {
  if (switch_weights.size() != net.switch_count()) throw DimensionError("switch weight vector length mismatch");
  MstInstance inst;
  std::vector<double> line_weight(net.line_count(), 0.0);
  std::vector<int> line_priority(net.line_count(), -1);
  for (std::size_t k = 0; k < net.switch_count(); ++k) {
    line_weight[net.switched_lines()[k]] = switch_weights[k];
    line_priority[net.switched_lines()[k]] = 0;
  }
  for (std::size_t l = 0; l < net.line_count(); ++l) {
    inst.edges.push_back({net.from_index(l), net.to_index(l), line_weight[l], line_priority[l]});
  }
  inst.virtual_begin = inst.edges.size();
  const auto& feeders = net.feeders();
  for (std::size_t f = 1; f < feeders.size(); ++f) {
    inst.edges.push_back({feeders[f - 1], feeders[f], -big_m, -1});
  }
  return inst;
}

// Minimum-weight radial switch set: MST over the network with the feeders
// tied together, virtual edges removed afterwards.
inline SubsetMask min_weight_radial(const PowerNetwork& net, std::span<const double> switch_weights,
                                    double big_m = kDefaultBigM) {
  const auto inst = mst_instance(net, switch_weights, big_m);
  const auto tree = prim_mst(net.bus_count(), inst.edges);
  std::vector<std::size_t> position(net.line_count(), net.switch_count());
  for (std::size_t k = 0; k < net.switch_count(); ++k) position[net.switched_lines()[k]] = k;
  SubsetMask s(net.switch_count());
  std::size_t static_in_tree = 0;
  for (auto e : tree) {
    if (e >= inst.virtual_begin) continue;
    if (position[e] < net.switch_count()) {
      s.set(position[e]);
    } else {
      ++static_in_tree;
    }
  }
  const std::size_t statics = net.line_count() - net.switch_count();
  if (static_in_tree != statics) throw TopologyError("static lines close a loop or join two feeders");
  return s;
}

// Radial switch sets of the network as a feasible family. Enumeration visits
// every mask (n <= 24); linear_min is the MST above.
inline FeasibleFamily radial_family(const PowerNetwork& net, double big_m = kDefaultBigM) {
  const std::size_t n = net.switch_count();
  return FeasibleFamily{GroundSet(n),
                        [net](const SubsetMask& s) { return is_radial(net, s); },
                        [net, n](const FeasibleFamily::Visitor& visit) {
                          subdyn::detail::enumerate_all(n, [&](const SubsetMask& s) {
                            if (is_radial(net, s)) visit(s);
                          });
                        },
                        [net, big_m](std::span<const double> w) { return min_weight_radial(net, w, big_m); },
                        false};
}

// Uniform random radial switch set (Wilson's algorithm). Feeders and static
// lines are contracted first, so each spanning tree of the contracted
// multigraph is one radial configuration.
inline SubsetMask uniform_random_radial(const PowerNetwork& net, SeededRng& rng) {
  DisjointSets ds(net.bus_count());
  const auto& feeders = net.feeders();
  for (std::size_t f = 1; f < feeders.size(); ++f) ds.unite(feeders[0], feeders[f]);
  for (std::size_t l = 0; l < net.line_count(); ++l) {
    if (!net.lines()[l].switched && !ds.unite(net.from_index(l), net.to_index(l))) {
      throw TopologyError("static lines close a loop or join two feeders");
    }
  }
  std::vector<std::size_t> super(net.bus_count());
  std::vector<std::size_t> label(net.bus_count(), net.bus_count());
  std::size_t count = 0;
  for (std::size_t i = 0; i < net.bus_count(); ++i) {
    const auto r = ds.find(i);
    if (label[r] == net.bus_count()) label[r] = count++;
    super[i] = label[r];
  }
  // incident[node] = (switch position, other end) pairs, self-loops dropped.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> incident(count);
  for (std::size_t k = 0; k < net.switch_count(); ++k) {
    const auto l = net.switched_lines()[k];
    const auto a = super[net.from_index(l)];
    const auto b = super[net.to_index(l)];
    if (a == b) continue;
    incident[a].emplace_back(k, b);
    incident[b].emplace_back(k, a);
  }
  const std::size_t root = super[feeders[0]];
  {
    DisjointSets reach(count);
    std::size_t joined = 1;
    for (std::size_t a = 0; a < count; ++a) {
      for (const auto& [k, b] : incident[a]) joined += reach.unite(a, b) ? 1 : 0;
    }
    if (joined != count) throw TopologyError("network cannot supply every bus");
  }
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<bool> in_tree(count, false);
  std::vector<std::size_t> next_edge(count, kNone);
  std::vector<std::size_t> next_node(count, kNone);
  in_tree[root] = true;
  for (std::size_t start = 0; start < count; ++start) {
    // Loop-erased random walk, stored as the last exit taken from each node.
    for (std::size_t x = start; !in_tree[x]; x = next_node[x]) {
      const auto& pick = incident[x][rng.below(incident[x].size())];
      next_edge[x] = pick.first;
      next_node[x] = pick.second;
    }
    for (std::size_t x = start; !in_tree[x]; x = next_node[x]) in_tree[x] = true;
  }
  SubsetMask s(net.switch_count());
  for (std::size_t x = 0; x < count; ++x) {
    if (x != root) s.set(next_edge[x]);
  }
  return s;
}

}  // namespace subdyn::nr
