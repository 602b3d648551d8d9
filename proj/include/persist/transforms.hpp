#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "persist/chains.hpp"
#include "persist/errors.hpp"
#include "persist/exact.hpp"
#include "persist/graph.hpp"
#include "persist/martin.hpp"
#include "persist/rng.hpp"

namespace persist {

/// One-step law of an h-transformed chain together with its row sum. For a
/// harmonic h the row sum is 1; a different value is reported, not hidden.
template <class S, class V>
struct DoobDistribution {
  std::vector<std::pair<S, V>> outcomes;
  V row_sum{};
};

/// p^h(x, y) = p(x, y) h(y) / h(x) over the finite one-step support `base`.
/// V is the value type of h (double or Rational).
template <class S, class H>
auto doob_step_distribution(const Distribution<S>& base, const S& x, H&& h) {
  using V = std::decay_t<std::invoke_result_t<H&, const S&>>;
  const V hx = h(x);
  if (!(hx > V(0))) throw DomainError("doob transform: h(x) = 0, conditioning on a null history");
  DoobDistribution<S, V> out;
  out.outcomes.reserve(base.size());
  for (const auto& [y, p] : base) {
    const V hy = h(y);
    if (hy == V(0)) continue;
    V w;
    if constexpr (std::is_same_v<V, Rational>) w = p * hy / hx;
    else w = to_double(p) * hy / hx;
    out.row_sum += w;
    out.outcomes.emplace_back(y, std::move(w));
  }
  return out;
}

inline constexpr Vertex kDoobGraphCap = 12;

/// Transform of the uniform attachment chain: enumerates the full one-step
/// support of g (graph order at most kDoobGraphCap, outcome cap applies).
template <class H>
auto doob_step_distribution(const Graph& g, H&& h, const EnumerationLimits& limits = {}) {
  if (g.order() > kDoobGraphCap) throw CapabilityError("doob transform: graph order above enumeration guard");
  return doob_step_distribution(ua_step_distribution(g, limits), g, std::forward<H>(h));
}

// ---------------------------------------------------------------------------
// Conditioned uniform attachment
// ---------------------------------------------------------------------------

enum class IsolationMode {
  both,     // every pair touching xi is forbidden
  literal,  // only pairs {i, xi} with i < xi are forbidden
};

/// Designated node that stays isolated; no window needed.
struct IsolatedNode {
  Vertex xi = 1;
  IsolationMode mode = IsolationMode::both;

  bool forbids(Vertex i, Vertex j) const noexcept {
    return j == xi || (mode == IsolationMode::both && i == xi);
  }
};

/// Window-limited version of the isolated-node target.
inline AdjacencyLimit isolated_node_limit(Vertex xi, Vertex window, IsolationMode mode = IsolationMode::both) {
  if (xi < 1) throw DomainError("isolated_node_limit: xi must be >= 1");
  AdjacencyLimit m(window);
  const IsolatedNode node{xi, mode};
  for (Vertex j = 2; j <= window; ++j)
    for (Vertex i = 1; i < j; ++i)
      if (node.forbids(i, j)) m.set(i, j, false);
  return m;
}

/// Uniform attachment conditioned to converge to a boundary point. Pairs
/// beyond the window of an AdjacencyLimit target are unconstrained.
struct ConditionedChain {
  std::variant<AdjacencyLimit, IsolatedNode> target;

  bool allowed(Vertex i, Vertex j) const {
    return std::visit(
        [&](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, AdjacencyLimit>) return j > t.window() || t(i, j);
          else return !t.forbids(i, j);
        },
        target);
  }

  /// Throws DomainError if g already has a forbidden edge.
  void check_consistent(const Graph& g) const {
    if (const auto* iso = std::get_if<IsolatedNode>(&target); iso && iso->xi < 1) {
      throw DomainError("conditioned chain: xi must be >= 1");
    }
    g.for_each_edge([&](Edge e) {
      if (!allowed(e.i, e.j)) throw DomainError("conditioned chain: state has an edge the target forbids");
    });
  }
};

namespace detail {

inline EdgeAdditions ua_conditioned_advance(Graph& g, const ConditionedChain& chain, CounterRng& rng) {
  g.add_vertex();
  const Vertex n1 = g.order();
  EdgeAdditions d;
  for_each_bernoulli_pair(n1, 1.0 / n1, rng, [&](Edge e) {
    if (chain.allowed(e.i, e.j) && g.add_edge(e.i, e.j)) d.edges.push_back(e);
  });
  return d;
}

}  // namespace detail

/// Only absent pairs with M(i, j) = 1 may enter, each with probability 1/(n+1).
inline Graph ua_conditioned_step(Graph g, const ConditionedChain& chain, CounterRng& rng) {
  chain.check_consistent(g);
  detail::ua_conditioned_advance(g, chain, rng);
  return g;
}

inline Graph ua_conditioned_step(Graph g, const AdjacencyLimit& target, CounterRng& rng) {
  return ua_conditioned_step(std::move(g), ConditionedChain{target}, rng);
}

/// Exact one-step law of the conditioned step.
inline Distribution<Graph> ua_conditioned_step_distribution(const Graph& g, const ConditionedChain& chain,
                                                            const EnumerationLimits& limits = {}) {
  chain.check_consistent(g);
  return ua_step_distribution(g, limits, [&](Edge e) { return chain.allowed(e.i, e.j); });
}

struct ConditionedRun {
  Trajectory trajectory;
  /// forbidden_free[n - 1]: state at time n has no forbidden edge.
  std::vector<bool> forbidden_free;
};

inline ConditionedRun simulate_conditioned(const ConditionedChain& chain, std::uint64_t n_final, std::uint64_t seed) {
  if (n_final < 1) throw DomainError("simulate: n_final must be >= 1");
  CounterRng rng = CounterRng::stream(seed, 0);
  ConditionedRun run{Trajectory(ChainSpec{ChainKind::uniform_attachment, std::nullopt}, seed), {true}};
  Graph g(1);
  for (std::uint64_t t = 2; t <= n_final; ++t) {
    EdgeAdditions d = detail::ua_conditioned_advance(g, chain, rng);
    bool clean = true;
    for (const Edge& e : d.edges) clean = clean && chain.allowed(e.i, e.j);
    run.forbidden_free.push_back(run.forbidden_free.back() && clean);
    run.trajectory.push(std::move(d));
  }
  return run;
}

}  // namespace persist
