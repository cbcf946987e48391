#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "docsim/error.hpp"
#include "docsim/pool.hpp"
#include "docsim/simjoin.hpp"
#include "docsim/strfmt.hpp"

namespace docsim {

/// Weighted undirected similarity graph. Nodes are primary keys (kept
/// sorted, so node index order equals lexicographic key order); each edge
/// weight is a similarity in (0, 100]. Immutable once built.
struct SimGraph {
  struct Edge {
    int32_t a = 0;  // a < b
    int32_t b = 0;
    double weight = 0.0;
    bool operator==(const Edge&) const = default;
  };

  std::vector<std::string> nodes;
  std::unordered_map<std::string, int32_t> index;
  std::vector<Edge> edges;
  std::vector<std::vector<std::pair<int32_t, double>>> adjacency;

  size_t node_count() const { return nodes.size(); }
  size_t edge_count() const { return edges.size(); }

  int32_t require(const std::string& pk) const {
    auto it = index.find(pk);
    if (it == index.end()) throw DataError("unknown node: " + pk);
    return it->second;
  }

  static SimGraph from_weighted_pairs(
      std::span<const std::tuple<std::string, std::string, double>> pairs,
      std::vector<std::string>* warnings = nullptr);
};

/// Dijkstra edge cost: the distance recovered by inverting the similarity
/// rescaling, 100/S - 1. Nonnegative for all weights in (0, 100].
inline double edge_cost(double weight) { return 100.0 / weight - 1.0; }

inline SimGraph SimGraph::from_weighted_pairs(
    std::span<const std::tuple<std::string, std::string, double>> pairs,
    std::vector<std::string>* warnings) {
  SimGraph g;
  for (const auto& [a, b, w] : pairs) {
    if (a == b) throw DataError("graph edge is a self-loop: " + a);
    if (!(w > 0.0) || w > 100.0)
      throw DataError("graph edge weight out of (0, 100]: " + a + "," + b);
    g.nodes.push_back(a);
    g.nodes.push_back(b);
  }
  std::sort(g.nodes.begin(), g.nodes.end());
  g.nodes.erase(std::unique(g.nodes.begin(), g.nodes.end()), g.nodes.end());
  for (size_t i = 0; i < g.nodes.size(); ++i)
    g.index[g.nodes[i]] = static_cast<int32_t>(i);

  std::unordered_map<uint64_t, size_t> edge_slot;
  for (const auto& [pa, pb, w] : pairs) {
    int32_t a = g.index[pa];
    int32_t b = g.index[pb];
    if (a > b) std::swap(a, b);
    const uint64_t key =
        (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) |
        static_cast<uint32_t>(b);
    auto it = edge_slot.find(key);
    if (it == edge_slot.end()) {
      edge_slot[key] = g.edges.size();
      g.edges.push_back({a, b, w});
    } else if (g.edges[it->second].weight != w) {
      if (warnings)
        warnings->push_back("conflicting weights for pair (" + g.nodes[a] +
                            ", " + g.nodes[b] + "); keeping the maximum");
      g.edges[it->second].weight = std::max(g.edges[it->second].weight, w);
    }
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const Edge& x, const Edge& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });

  g.adjacency.assign(g.nodes.size(), {});
  for (const auto& e : g.edges) {
    g.adjacency[static_cast<size_t>(e.a)].emplace_back(e.b, e.weight);
    g.adjacency[static_cast<size_t>(e.b)].emplace_back(e.a, e.weight);
  }
  for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
  return g;
}

/// Keeps pairs with similarity strictly above the threshold; nodes are the
/// keys appearing in kept pairs. Conflicting duplicate weights keep the
/// maximum and emit a warning.
inline SimGraph build_graph(std::span<const ScoredPair> pairs, double threshold,
                            std::vector<std::string>* warnings = nullptr) {
  if (threshold < 0.0 || threshold > 100.0)
    throw ParamError("build_graph: threshold must be in [0, 100]");
  std::vector<std::tuple<std::string, std::string, double>> kept;
  for (const auto& p : pairs) {
    if (p.similarity > threshold)
      kept.emplace_back(p.left, p.right, p.similarity);
  }
  return SimGraph::from_weighted_pairs(kept, warnings);
}

struct PageRankStats {
  int iterations = 0;
  bool converged = false;
  std::vector<double> sums;       // rank mass after each iteration
  std::vector<double> l1_deltas;  // L1 change per iteration
};

/// Power iteration on the weighted random walk: the transition probability
/// from u to v is weight(u,v) / sum of u's incident weights, each undirected
/// edge acting as two directed edges. Mass from nodes with no edges is
/// redistributed uniformly, which keeps the total rank at exactly one.
inline std::vector<double> pagerank(const SimGraph& g, double damping = 0.85,
                                    double tol = 1e-6, int max_iter = 100,
                                    PageRankStats* stats = nullptr,
                                    unsigned workers = 1) {
  const size_t n = g.node_count();
  if (n == 0) throw DataError("pagerank: empty graph");
  if (damping <= 0.0 || damping >= 1.0)
    throw ParamError("pagerank: damping must be in (0, 1)");

  std::vector<double> wdeg(n, 0.0);
  for (size_t v = 0; v < n; ++v)
    for (const auto& [u, w] : g.adjacency[v]) {
      (void)u;
      wdeg[v] += w;
    }

  std::vector<double> rank(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n, 0.0);
  PageRankStats local;
  for (int it = 0; it < max_iter; ++it) {
    double dangling = 0.0;
    for (size_t v = 0; v < n; ++v)
      if (wdeg[v] == 0.0) dangling += rank[v];
    const double base = (1.0 - damping) / static_cast<double>(n) +
                        damping * dangling / static_cast<double>(n);

    parallel_partitions(n, workers, [&](size_t, size_t lo, size_t hi) {
      for (size_t v = lo; v < hi; ++v) {
        double in_mass = 0.0;
        for (const auto& [u, w] : g.adjacency[v])
          in_mass += rank[static_cast<size_t>(u)] * w /
                     wdeg[static_cast<size_t>(u)];
        next[v] = base + damping * in_mass;
      }
    });

    double delta = 0.0;
    double sum = 0.0;
    for (size_t v = 0; v < n; ++v) {
      delta += std::abs(next[v] - rank[v]);
      sum += next[v];
    }
    rank.swap(next);
    local.iterations = it + 1;
    local.sums.push_back(sum);
    local.l1_deltas.push_back(delta);
    if (delta < tol) {
      local.converged = true;
      break;
    }
  }
  if (stats) *stats = std::move(local);
  return rank;
}

struct PathResult {
  bool reachable = false;
  std::vector<std::string> path;
  double cost = std::numeric_limits<double>::infinity();
};

/// Dijkstra over edge costs 100/weight - 1. Among equal-cost paths the one
/// with fewer hops wins, then the lexicographically smallest node sequence.
inline PathResult min_cost_path(const SimGraph& g, const std::string& source,
                                const std::string& target) {
  const int32_t s = g.require(source);
  const int32_t t = g.require(target);
  if (s == t) return {true, {source}, 0.0};

  struct Label {
    double cost;
    int hops;
    std::vector<int32_t> path;
    bool operator>(const Label& o) const {
      if (cost != o.cost) return cost > o.cost;
      if (hops != o.hops) return hops > o.hops;
      return path > o.path;
    }
  };
  std::priority_queue<Label, std::vector<Label>, std::greater<>> queue;
  std::vector<char> settled(g.node_count(), 0);
  queue.push({0.0, 0, {s}});

  while (!queue.empty()) {
    Label cur = queue.top();
    queue.pop();
    const int32_t v = cur.path.back();
    if (settled[static_cast<size_t>(v)]) continue;
    settled[static_cast<size_t>(v)] = 1;
    if (v == t) {
      PathResult r;
      r.reachable = true;
      r.cost = cur.cost;
      for (int32_t id : cur.path) r.path.push_back(g.nodes[static_cast<size_t>(id)]);
      return r;
    }
    for (const auto& [u, w] : g.adjacency[static_cast<size_t>(v)]) {
      if (settled[static_cast<size_t>(u)]) continue;
      Label ext{cur.cost + edge_cost(w), cur.hops + 1, cur.path};
      ext.path.push_back(u);
      queue.push(std::move(ext));
    }
  }
  return {};
}

/// Connected components, largest first; ties by smallest member. Members are
/// sorted within each component.
inline std::vector<std::vector<std::string>> diffusion_groups(const SimGraph& g) {
  std::vector<char> seen(g.node_count(), 0);
  std::vector<std::vector<int32_t>> comps;
  for (size_t start = 0; start < g.node_count(); ++start) {
    if (seen[start]) continue;
    std::vector<int32_t> comp;
    std::deque<int32_t> frontier{static_cast<int32_t>(start)};
    seen[start] = 1;
    while (!frontier.empty()) {
      const int32_t v = frontier.front();
      frontier.pop_front();
      comp.push_back(v);
      for (const auto& [u, w] : g.adjacency[static_cast<size_t>(v)]) {
        (void)w;
        if (!seen[static_cast<size_t>(u)]) {
          seen[static_cast<size_t>(u)] = 1;
          frontier.push_back(u);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  std::vector<std::vector<std::string>> out;
  out.reserve(comps.size());
  for (const auto& comp : comps) {
    std::vector<std::string> names;
    names.reserve(comp.size());
    for (int32_t v : comp) names.push_back(g.nodes[static_cast<size_t>(v)]);
    out.push_back(std::move(names));
  }
  return out;
}

/// Aggregates PageRank mass by the state prefix of each node key
/// (everything before the first '/'), descending.
inline std::vector<std::pair<std::string, double>> state_rank_mass(
    const SimGraph& g, const std::vector<double>& ranks) {
  if (ranks.size() != g.node_count())
    throw ParamError("state_rank_mass: rank vector size mismatch");
  std::map<std::string, double> mass;
  for (size_t v = 0; v < g.node_count(); ++v) {
    const auto& pk = g.nodes[v];
    mass[pk.substr(0, pk.find('/'))] += ranks[v];
  }
  std::vector<std::pair<std::string, double>> out(mass.begin(), mass.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

// Graph dump: CSV pk1,pk2,weight with lossless weight rendering, edges in
// canonical order. Rebuilding from the dump reproduces the graph exactly.
inline void write_graph_csv(const SimGraph& g, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write graph csv: " + path.string());
  os << "pk1,pk2,weight\n";
  for (const auto& e : g.edges) {
    os << g.nodes[static_cast<size_t>(e.a)] << ','
       << g.nodes[static_cast<size_t>(e.b)] << ',' << format_shortest(e.weight)
       << '\n';
  }
  if (!os) throw DataError("graph csv write failed: " + path.string());
}

inline SimGraph load_graph_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open graph csv: " + path.string());
  std::string line;
  if (!std::getline(is, line) ||
      (line != "pk1,pk2,weight" && line != "pk1,pk2,weight\r"))
    throw DataError("graph csv missing 'pk1,pk2,weight' header: " +
                    path.string());
  std::vector<std::tuple<std::string, std::string, double>> pairs;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw DataError("bad graph csv row: " + line);
    pairs.emplace_back(line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1),
                       std::stod(line.substr(c2 + 1)));
  }
  return SimGraph::from_weighted_pairs(pairs);
}

inline void write_rank_csv(const SimGraph& g, const std::vector<double>& ranks,
                           const std::filesystem::path& path) {
  if (ranks.size() != g.node_count())
    throw ParamError("write_rank_csv: rank vector size mismatch");
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write rank csv: " + path.string());
  os << "pk,rank\n";
  for (size_t v = 0; v < g.node_count(); ++v)
    os << g.nodes[v] << ',' << format_shortest(ranks[v]) << '\n';
}

inline std::string path_to_json(const PathResult& r) {
  nlohmann::ordered_json j;
  if (r.reachable) {
    j["path"] = r.path;
    j["cost"] = r.cost;
  } else {
    j["path"] = nlohmann::ordered_json::array();
    j["cost"] = nullptr;
    j["unreachable"] = true;
  }
  return j.dump();
}

}  // namespace docsim
