#include <gtest/gtest.h>

#include <map>

#include "persist/transforms.hpp"
#include "support/test_support.hpp"

namespace {

using namespace persist;
using persist::testing::random_graph;

std::map<Graph, Rational> as_map(const Distribution<Graph>& d) {
  std::map<Graph, Rational> out;
  for (const auto& [g, p] : d) out[g] += p;
  return out;
}

template <class V>
std::map<Graph, V> as_map(const DoobDistribution<Graph, V>& d) {
  std::map<Graph, V> out;
  for (const auto& [g, p] : d.outcomes) out[g] += p;
  return out;
}

AdjacencyLimit random_limit(Vertex window, double p, CounterRng& rng) {
  AdjacencyLimit m(window);
  for (Vertex j = 2; j <= window; ++j)
    for (Vertex i = 1; i < j; ++i) m.set(i, j, rng.bernoulli(p));
  return m;
}

TEST(Doob, ConstantKernelReturnsBaseLaw) {
  CounterRng rng(41);
  for (Vertex n = 1; n <= 4; ++n) {
    const Graph g = random_graph(n, 0.5, rng);
    const auto base = ua_step_distribution(g);
    const auto doob = doob_step_distribution(g, [](const Graph&) { return Rational(1); });
    EXPECT_EQ(doob.row_sum, 1);
    EXPECT_EQ(as_map(doob), as_map(base));
  }
}

TEST(Doob, AllOnesLimitReturnsBaseLaw) {
  const AdjacencyLimit ones(5);
  for (Vertex n = 1; n <= 3; ++n)
    for (const Graph& g : all_graphs(n)) {
      const auto doob = doob_step_distribution(g, [&](const Graph& y) { return ua_extended_kernel_exact(y, ones); });
      EXPECT_EQ(doob.row_sum, 1);
      EXPECT_EQ(as_map(doob), as_map(ua_step_distribution(g)));
    }
}

TEST(Doob, ForbiddenFirstEdgeExample) {
  // From the two-vertex empty graph with M(1,2) = 0 the edge {1,2} never enters.
  AdjacencyLimit m(3);
  m.set(1, 2, false);
  const Graph x(2);
  const auto doob = doob_step_distribution(x, [&](const Graph& y) { return ua_extended_kernel_exact(y, m); });
  EXPECT_EQ(doob.row_sum, 1);
  // {1,3} and {2,3} enter independently with probability 1/3 each.
  for (const auto& [y, p] : doob.outcomes) {
    EXPECT_FALSE(y.has_edge(1, 2));
    const unsigned added = y.edge_count();
    EXPECT_EQ(p, pow(ratio(1, 3), added) * pow(ratio(2, 3), 2 - added));
  }
  EXPECT_EQ(doob.outcomes.size(), 4u);
  EXPECT_EQ(as_map(doob), as_map(ua_conditioned_step_distribution(x, ConditionedChain{m})));
}

TEST(Doob, ExactRowSumsOnSmallStates) {
  CounterRng rng(42);
  for (int rep = 0; rep < 8; ++rep) {
    const AdjacencyLimit m = random_limit(4, 0.6, rng);
    for (Vertex n = 1; n <= 3; ++n)
      for (const Graph& x : all_graphs(n)) {
        if (!m.admits(x)) continue;
        const auto doob = doob_step_distribution(x, [&](const Graph& y) { return ua_extended_kernel_exact(y, m); });
        EXPECT_EQ(doob.row_sum, 1);
      }
  }
}

TEST(Doob, FloatingRowSumsUpToEight) {
  // Near-complete states keep the one-step support small.
  CounterRng rng(43);
  for (Vertex n = 4; n <= 8; ++n) {
    for (int rep = 0; rep < 3; ++rep) {
      const AdjacencyLimit m = random_limit(n + 1, 0.9, rng);
      Graph x(n);
      for (Vertex j = 2; j <= n; ++j)
        for (Vertex i = 1; i < j; ++i)
          if (m(i, j) && rng.bernoulli(0.85)) x.add_edge(i, j);
      const auto doob = doob_step_distribution(x, [&](const Graph& y) { return ua_extended_kernel(y, m); });
      EXPECT_NEAR(doob.row_sum, 1.0, 1e-10) << "n=" << n;
    }
  }
}

TEST(Doob, NullHistoryAndCapAreErrors) {
  AdjacencyLimit m(3);
  m.set(1, 2, false);
  const Graph x = Graph::complete(2);
  EXPECT_THROW(doob_step_distribution(x, [&](const Graph& y) { return ua_extended_kernel(y, m); }), DomainError);
  EXPECT_THROW(doob_step_distribution(Graph::complete(13), [](const Graph&) { return 1.0; }), CapabilityError);
}

TEST(Doob, NonHarmonicWeightReportsRowSum) {
  const Graph x(2);
  const auto doob = doob_step_distribution(x, [](const Graph& y) { return 1.0 + static_cast<double>(y.edge_count()); });
  // E[1 + e(X_3)] = 1 + 3 * (1/3) = 2 against h(x) = 1.
  EXPECT_NEAR(doob.row_sum, 2.0, 1e-14);
}

TEST(Doob, GenericOverBaseDistribution) {
  const UrnState x{1, 2};
  const auto base = polya_step_distribution(x);
  const auto doob = doob_step_distribution(base, x, [](const UrnState& s) { return Rational(s.i + 1); });
  Rational expected = 0;
  for (const auto& [y, p] : base) expected += p * Rational(y.i + 1);
  EXPECT_EQ(doob.row_sum, expected / Rational(2));
}

TEST(ConditionedStep, ExactLawEqualsDoobTransform) {
  CounterRng rng(44);
  for (int rep = 0; rep < 10; ++rep) {
    const AdjacencyLimit m = random_limit(4, 0.5, rng);
    for (Vertex n = 1; n <= 3; ++n)
      for (const Graph& x : all_graphs(n)) {
        if (!m.admits(x)) continue;
        const auto doob = doob_step_distribution(x, [&](const Graph& y) { return ua_extended_kernel_exact(y, m); });
        EXPECT_EQ(as_map(ua_conditioned_step_distribution(x, ConditionedChain{m})), as_map(doob));
      }
  }
}

TEST(ConditionedStep, AllOnesHasZeroTotalVariationToBase) {
  for (Vertex n = 1; n <= 3; ++n)
    for (const Graph& x : all_graphs(n)) {
      const auto cond = as_map(ua_conditioned_step_distribution(x, ConditionedChain{AdjacencyLimit(4)}));
      const auto base = as_map(ua_step_distribution(x));
      Rational tv = 0;
      for (const auto& [y, p] : base) {
        const auto it = cond.find(y);
        const Rational q = it == cond.end() ? Rational(0) : it->second;
        tv += p > q ? p - q : q - p;
      }
      EXPECT_EQ(tv, 0);
      EXPECT_EQ(cond.size(), base.size());
    }
}

TEST(ConditionedStep, AllZerosAddsIsolatedVertices) {
  CounterRng rng(45);
  const AdjacencyLimit zeros = AdjacencyLimit::all_zeros(30);
  Graph g(1);
  for (int t = 0; t < 25; ++t) g = ua_conditioned_step(g, zeros, rng);
  EXPECT_EQ(g.order(), 26u);
  EXPECT_EQ(g.edge_count(), 0u);
}

TEST(ConditionedStep, PairsBeyondWindowUnconstrained) {
  const ConditionedChain chain{AdjacencyLimit::all_zeros(3)};
  EXPECT_FALSE(chain.allowed(1, 3));
  EXPECT_TRUE(chain.allowed(1, 4));
}

TEST(ConditionedStep, RejectsInconsistentState) {
  AdjacencyLimit m(3);
  m.set(1, 2, false);
  CounterRng rng(46);
  EXPECT_THROW(ua_conditioned_step(Graph::complete(2), m, rng), DomainError);
  EXPECT_THROW(ua_conditioned_step_distribution(Graph::complete(2), ConditionedChain{m}), DomainError);
  EXPECT_THROW((ConditionedChain{IsolatedNode{0}}.check_consistent(Graph(2))), DomainError);
}

TEST(ConditionedStep, MarginalFrequenciesMatchLaw) {
  AdjacencyLimit m(4);
  m.set(1, 3, false);
  m.set(2, 4, false);
  const Graph x = Graph::from_edges(3, {{1, 2}});
  const ConditionedChain chain{m};
  const auto law = as_map(ua_conditioned_step_distribution(x, chain));
  std::map<Graph, std::uint64_t> counts;
  constexpr std::uint64_t reps = 40000;
  for (std::uint64_t r = 0; r < reps; ++r) {
    CounterRng rng = CounterRng::stream(47, r);
    ++counts[ua_conditioned_step(x, chain, rng)];
  }
  for (const auto& [y, c] : counts) ASSERT_TRUE(law.count(y)) << format_graph(y);
  for (const auto& [y, p] : law)
    EXPECT_LT(persist::testing::binomial_z(counts[y], reps, to_double(p)), 4.0) << format_graph(y);
}

TEST(IsolatedNode, LimitExamples) {
  EXPECT_EQ(isolated_node_limit(7, 4), AdjacencyLimit(4));
  const AdjacencyLimit m = isolated_node_limit(2, 3);
  EXPECT_FALSE(m(1, 2));
  EXPECT_FALSE(m(2, 3));
  EXPECT_TRUE(m(1, 3));
  const AdjacencyLimit literal = isolated_node_limit(2, 3, IsolationMode::literal);
  EXPECT_FALSE(literal(1, 2));
  EXPECT_TRUE(literal(2, 3));
  EXPECT_TRUE(literal(1, 3));
  EXPECT_THROW(isolated_node_limit(0, 3), DomainError);
}

TEST(IsolatedNode, StaysIsolatedAlongSimulatedRuns) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Vertex xi = 1 + static_cast<Vertex>(seed % 5);
    const ConditionedChain chain{IsolatedNode{xi}};
    const ConditionedRun run = simulate_conditioned(chain, 500, 5000 + seed);
    ASSERT_EQ(run.trajectory.horizon(), 500u);
    ASSERT_EQ(run.forbidden_free.size(), 500u);
    // Replay the states and check the degree of xi independently of the flags.
    std::uint64_t violations = 0;
    std::size_t edges = 0;
    run.trajectory.for_each_state([&](std::uint64_t n, const State& s) {
      const Graph& g = std::get<Graph>(s);
      for (Vertex v = 1; v <= g.order(); ++v)
        if (v != xi && g.has_edge(std::min(v, xi), std::max(v, xi))) ++violations;
      EXPECT_TRUE(run.forbidden_free[n - 1]);
      edges = g.edge_count();
    });
    EXPECT_EQ(violations, 0u) << "seed=" << seed;
    EXPECT_GT(edges, 1000u);
  }
}

TEST(IsolatedNode, LiteralModeLetsLaterNeighboursIn) {
  const ConditionedChain chain{IsolatedNode{2, IsolationMode::literal}};
  const ConditionedRun run = simulate_conditioned(chain, 200, 77);
  const Graph g = std::get<Graph>(run.trajectory.state(200));
  EXPECT_FALSE(g.has_edge(1, 2));
  std::size_t later = 0;
  for (Vertex j = 3; j <= 200; ++j) later += g.has_edge(2, j);
  EXPECT_GT(later, 0u);
}

TEST(Conditioned, LimitTargetMatchesBoundaryOnWindow) {
  CounterRng rng(48);
  const AdjacencyLimit m = random_limit(6, 0.5, rng);
  const ConditionedRun run = simulate_conditioned(ConditionedChain{m}, 300, 49);
  const Graph g = std::get<Graph>(run.trajectory.state(300));
  for (Vertex j = 2; j <= 6; ++j)
    for (Vertex i = 1; i < j; ++i) {
      if (!m(i, j)) {
        EXPECT_FALSE(g.has_edge(i, j));
      }
    }
}

}  // namespace
