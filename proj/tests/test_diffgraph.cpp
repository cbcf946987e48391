#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <set>

#include "docsim/diffgraph.hpp"
#include "docsim/rng.hpp"
#include "oracles.hpp"

using namespace docsim;

namespace {

ScoredPair sp(const std::string& a, const std::string& b, double s) {
  return {a, b, Measure::Cosine, s};
}

SimGraph random_graph(Rng& rng, size_t n, double edge_prob) {
  std::vector<std::tuple<std::string, std::string, double>> edges;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      if (rng.chance(edge_prob)) {
        edges.emplace_back("N" + std::to_string(i), "N" + std::to_string(j),
                           rng.uniform(1.0, 100.0));
      }
    }
  }
  // Every node participates so the graph has exactly n nodes.
  for (size_t i = 0; i + 1 < n; ++i)
    edges.emplace_back("N" + std::to_string(i), "N" + std::to_string(i + 1),
                       rng.uniform(1.0, 100.0));
  return SimGraph::from_weighted_pairs(edges);
}

}  // namespace

TEST_CASE("build_graph thresholds strictly", "[diffgraph]") {
  SECTION("empty input") {
    const auto g = build_graph({}, 50.0);
    CHECK(g.node_count() == 0);
    CHECK(g.edge_count() == 0);
  }
  SECTION("triangle") {
    const std::vector<ScoredPair> pairs{sp("A/1/x", "B/1/y", 80),
                                        sp("A/1/x", "C/1/z", 75),
                                        sp("B/1/y", "C/1/z", 71)};
    const auto g = build_graph(pairs, 70.0);
    CHECK(g.node_count() == 3);
    CHECK(g.edge_count() == 3);
  }
  SECTION("threshold 100 keeps nothing") {
    const std::vector<ScoredPair> pairs{sp("A/1/x", "B/1/y", 100)};
    const auto g = build_graph(pairs, 100.0);
    CHECK(g.node_count() == 0);
    CHECK(g.edge_count() == 0);
  }
  SECTION("exactly-at-threshold pairs are dropped") {
    const std::vector<ScoredPair> pairs{sp("A/1/x", "B/1/y", 70)};
    CHECK(build_graph(pairs, 70.0).edge_count() == 0);
  }
  SECTION("conflicting duplicate weights keep the maximum and warn") {
    const std::vector<ScoredPair> pairs{sp("A/1/x", "B/1/y", 80),
                                        sp("B/1/y", "A/1/x", 90)};
    std::vector<std::string> warnings;
    const auto g = build_graph(pairs, 0.0, &warnings);
    REQUIRE(g.edge_count() == 1);
    CHECK(g.edges[0].weight == 90.0);
    REQUIRE(warnings.size() == 1);
  }
}

TEST_CASE("edge cost inverts the similarity rescaling", "[diffgraph]") {
  CHECK(edge_cost(100.0) == 0.0);
  CHECK(edge_cost(50.0) == 1.0);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const double w = rng.uniform(0.5, 100.0);
    CHECK(edge_cost(w) >= 0.0);
  }
}

TEST_CASE("pagerank symmetry cases", "[diffgraph]") {
  SECTION("two nodes, one edge") {
    const auto g = SimGraph::from_weighted_pairs(
        std::vector<std::tuple<std::string, std::string, double>>{
            {"A/1/x", "B/1/y", 60.0}});
    const auto ranks = pagerank(g);
    REQUIRE(ranks.size() == 2);
    CHECK(ranks[0] == Catch::Approx(0.5).margin(1e-9));
    CHECK(ranks[1] == Catch::Approx(0.5).margin(1e-9));
  }
  SECTION("equal-weight triangle") {
    const auto g = SimGraph::from_weighted_pairs(
        std::vector<std::tuple<std::string, std::string, double>>{
            {"A/1/x", "B/1/y", 80.0},
            {"A/1/x", "C/1/z", 80.0},
            {"B/1/y", "C/1/z", 80.0}});
    for (double r : pagerank(g)) CHECK(r == Catch::Approx(1.0 / 3).margin(1e-9));
  }
  SECTION("empty graph is an error") {
    const SimGraph g;
    REQUIRE_THROWS_AS(pagerank(g), DataError);
  }
}

TEST_CASE("pagerank conserves rank mass every iteration", "[diffgraph]") {
  Rng rng(404);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_graph(rng, 3 + rng.index(10), 0.3);
    PageRankStats stats;
    pagerank(g, 0.85, 1e-10, 100, &stats);
    REQUIRE_FALSE(stats.sums.empty());
    for (double s : stats.sums) CHECK(std::abs(s - 1.0) <= 1e-9);
  }
}

TEST_CASE("pagerank star matches the dense 50-iteration oracle", "[diffgraph]") {
  // 4-node star with equal weights; the library runs exactly 50 iterations.
  const auto g = SimGraph::from_weighted_pairs(
      std::vector<std::tuple<std::string, std::string, double>>{
          {"HUB/1/h", "L1/1/a", 70.0},
          {"HUB/1/h", "L2/1/b", 70.0},
          {"HUB/1/h", "L3/1/c", 70.0}});
  const auto ranks = pagerank(g, 0.85, 1e-300, 50);

  const size_t n = 4;
  oracles::Matrix weights(n, std::vector<double>(n, 0.0));
  const auto hub = static_cast<size_t>(g.require("HUB/1/h"));
  for (const auto& name : {"L1/1/a", "L2/1/b", "L3/1/c"}) {
    const auto leaf = static_cast<size_t>(g.require(name));
    weights[hub][leaf] = weights[leaf][hub] = 70.0;
  }
  const auto expected = oracles::pagerank_oracle(weights, 0.85, 50);
  for (size_t v = 0; v < n; ++v) CHECK(std::abs(ranks[v] - expected[v]) < 1e-8);
  CHECK(ranks[hub] > ranks[(hub + 1) % n]);
}

TEST_CASE("pagerank with automorphic nodes gives equal ranks", "[diffgraph]") {
  // Two leaves attached to the same hub by equal weights are automorphic.
  const auto g = SimGraph::from_weighted_pairs(
      std::vector<std::tuple<std::string, std::string, double>>{
          {"HUB/1/h", "L1/1/a", 55.0},
          {"HUB/1/h", "L2/1/b", 55.0},
          {"L1/1/a", "L2/1/b", 20.0}});
  const auto ranks = pagerank(g);
  CHECK(std::abs(ranks[static_cast<size_t>(g.require("L1/1/a"))] -
                 ranks[static_cast<size_t>(g.require("L2/1/b"))]) < 1e-9);
}

TEST_CASE("min cost path basics", "[diffgraph]") {
  const auto g = SimGraph::from_weighted_pairs(
      std::vector<std::tuple<std::string, std::string, double>>{
          {"A/1/a", "B/1/b", 100.0},
          {"B/1/b", "C/1/c", 50.0},
          {"D/1/d", "E/1/e", 90.0}});

  SECTION("source equals target") {
    const auto r = min_cost_path(g, "A/1/a", "A/1/a");
    REQUIRE(r.reachable);
    CHECK(r.path == std::vector<std::string>{"A/1/a"});
    CHECK(r.cost == 0.0);
  }
  SECTION("weight 100 edges cost nothing") {
    const auto r = min_cost_path(g, "A/1/a", "B/1/b");
    REQUIRE(r.reachable);
    CHECK(r.cost == 0.0);
  }
  SECTION("disconnected nodes are unreachable") {
    const auto r = min_cost_path(g, "A/1/a", "D/1/d");
    CHECK_FALSE(r.reachable);
  }
  SECTION("unknown endpoints") {
    REQUIRE_THROWS_AS(min_cost_path(g, "A/1/a", "Z/9/z"), DataError);
    REQUIRE_THROWS_AS(min_cost_path(g, "Z/9/z", "A/1/a"), DataError);
  }
}

TEST_CASE("dijkstra matches exhaustive enumeration on random graphs",
          "[diffgraph]") {
  Rng rng(2025);
  for (int trial = 0; trial < 60; ++trial) {
    const size_t n = 2 + rng.index(9);
    const auto g = random_graph(rng, n, 0.35);

    std::vector<std::vector<std::pair<int, double>>> adj(g.node_count());
    for (const auto& e : g.edges) {
      adj[static_cast<size_t>(e.a)].emplace_back(e.b, edge_cost(e.weight));
      adj[static_cast<size_t>(e.b)].emplace_back(e.a, edge_cost(e.weight));
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());

    const int src = static_cast<int>(rng.index(g.node_count()));
    const int dst = static_cast<int>(rng.index(g.node_count()));
    const auto got = min_cost_path(g, g.nodes[static_cast<size_t>(src)],
                                   g.nodes[static_cast<size_t>(dst)]);
    const auto expected = oracles::min_cost_path_oracle(adj, src, dst);

    REQUIRE(got.reachable == expected.reachable);
    if (expected.reachable) {
      CHECK(got.cost == expected.cost);
      std::vector<std::string> expected_names;
      for (int id : expected.path)
        expected_names.push_back(g.nodes[static_cast<size_t>(id)]);
      CHECK(got.path == expected_names);
    }
  }
}

TEST_CASE("dijkstra tie-breaks prefer fewer hops then lexicographic paths",
          "[diffgraph]") {
  // Direct A-D costs 1 (weight 50); A-B-D costs 0 + 1 = 1 via a weight-100
  // edge. Equal cost, so the one-hop path wins.
  const auto g = SimGraph::from_weighted_pairs(
      std::vector<std::tuple<std::string, std::string, double>>{
          {"A/1/a", "D/1/d", 50.0},
          {"A/1/a", "B/1/b", 100.0},
          {"B/1/b", "D/1/d", 50.0}});
  const auto r = min_cost_path(g, "A/1/a", "D/1/d");
  REQUIRE(r.reachable);
  CHECK(r.cost == 1.0);
  CHECK(r.path == std::vector<std::string>{"A/1/a", "D/1/d"});

  // Without the direct edge the lexicographically smaller middle node wins.
  const auto g2 = SimGraph::from_weighted_pairs(
      std::vector<std::tuple<std::string, std::string, double>>{
          {"A/1/a", "B/1/b", 50.0},
          {"B/1/b", "D/1/d", 50.0},
          {"A/1/a", "C/1/c", 50.0},
          {"C/1/c", "D/1/d", 50.0}});
  const auto r2 = min_cost_path(g2, "A/1/a", "D/1/d");
  CHECK(r2.path == std::vector<std::string>{"A/1/a", "B/1/b", "D/1/d"});
}

TEST_CASE("an edgeless graph is all singletons", "[diffgraph]") {
  SimGraph g;
  for (int i = 0; i < 5; ++i) g.nodes.push_back("N" + std::to_string(i));
  for (size_t i = 0; i < g.nodes.size(); ++i)
    g.index[g.nodes[i]] = static_cast<int32_t>(i);
  g.adjacency.assign(g.nodes.size(), {});

  const auto groups = diffusion_groups(g);
  REQUIRE(groups.size() == 5);
  for (const auto& grp : groups) CHECK(grp.size() == 1);

  // With no edges everyone is dangling; redistribution keeps the ranks
  // uniform and the mass at one.
  const auto ranks = pagerank(g);
  for (double r : ranks) CHECK(r == Catch::Approx(0.2).margin(1e-9));
}

TEST_CASE("diffusion groups are connected components", "[diffgraph]") {
  SECTION("triangle plus isolated pair") {
    const auto g = SimGraph::from_weighted_pairs(
        std::vector<std::tuple<std::string, std::string, double>>{
            {"A/1/a", "B/1/b", 80.0},
            {"A/1/a", "C/1/c", 80.0},
            {"B/1/b", "C/1/c", 80.0},
            {"X/1/x", "Y/1/y", 75.0}});
    const auto groups = diffusion_groups(g);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].size() == 3);
    CHECK(groups[1].size() == 2);
  }
  SECTION("matches a union-find oracle on random graphs") {
    Rng rng(555);
    for (int trial = 0; trial < 40; ++trial) {
      const auto g = random_graph(rng, 2 + rng.index(30), 0.08);
      const auto groups = diffusion_groups(g);

      oracles::UnionFind uf(g.node_count());
      for (const auto& e : g.edges)
        uf.unite(static_cast<size_t>(e.a), static_cast<size_t>(e.b));
      std::map<size_t, std::set<std::string>> expected;
      for (size_t v = 0; v < g.node_count(); ++v)
        expected[uf.find(v)].insert(g.nodes[v]);

      std::set<std::set<std::string>> got_sets, expected_sets;
      size_t got_total = 0;
      for (const auto& grp : groups) {
        got_sets.insert(std::set<std::string>(grp.begin(), grp.end()));
        got_total += grp.size();
      }
      for (const auto& [root, members] : expected) expected_sets.insert(members);
      CHECK(got_sets == expected_sets);
      CHECK(got_total == g.node_count());
      for (size_t i = 0; i + 1 < groups.size(); ++i)
        CHECK(groups[i].size() >= groups[i + 1].size());
    }
  }
}

TEST_CASE("state rank mass aggregates by key prefix", "[diffgraph]") {
  const auto g = SimGraph::from_weighted_pairs(
      std::vector<std::tuple<std::string, std::string, double>>{
          {"FL/2005/a", "MI/2005/b", 80.0},
          {"FL/2006/c", "MI/2005/b", 80.0}});
  const auto ranks = pagerank(g);
  const auto mass = state_rank_mass(g, ranks);
  REQUIRE(mass.size() == 2);
  double total = 0.0;
  for (const auto& [state, m] : mass) total += m;
  CHECK(std::abs(total - 1.0) < 1e-9);
  CHECK((mass[0].first == "FL" || mass[0].first == "MI"));
  CHECK(mass[0].second >= mass[1].second);
}

TEST_CASE("graph dump round-trips exactly", "[diffgraph]") {
  Rng rng(808);
  const auto g = random_graph(rng, 12, 0.3);
  const auto path = std::filesystem::temp_directory_path() / "docsim_graph.csv";
  write_graph_csv(g, path);
  const auto back = load_graph_csv(path);
  CHECK(back.nodes == g.nodes);
  REQUIRE(back.edges.size() == g.edges.size());
  for (size_t i = 0; i < g.edges.size(); ++i) {
    CHECK(back.edges[i].a == g.edges[i].a);
    CHECK(back.edges[i].b == g.edges[i].b);
    CHECK(back.edges[i].weight == g.edges[i].weight);
  }
  std::filesystem::remove(path);
}

TEST_CASE("path json", "[diffgraph]") {
  PathResult r;
  r.reachable = true;
  r.path = {"A/1/a", "B/1/b"};
  r.cost = 0.25;
  CHECK(path_to_json(r) == R"({"path":["A/1/a","B/1/b"],"cost":0.25})");
  CHECK(path_to_json(PathResult{}) ==
        R"({"path":[],"cost":null,"unreachable":true})");
}
