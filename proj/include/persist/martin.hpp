#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "persist/chains.hpp"
#include "persist/errors.hpp"
#include "persist/exact.hpp"
#include "persist/graph.hpp"
#include "persist/silhouette.hpp"

namespace persist {

/// Natural-log probability; -inf encodes an impossible event.
struct LogProb {
  double value = 0.0;

  static constexpr LogProb impossible() { return {-std::numeric_limits<double>::infinity()}; }
  bool is_impossible() const noexcept { return std::isinf(value) && value < 0; }
  double prob() const noexcept { return std::exp(value); }

  friend LogProb operator*(LogProb a, LogProb b) noexcept { return {a.value + b.value}; }
  friend auto operator<=>(const LogProb&, const LogProb&) = default;
};

/// Boundary point of the uniform attachment chain restricted to the pairs of
/// [window]: M(i, j) in {0, 1} for 1 <= i < j <= window.
class AdjacencyLimit {
 public:
  /// All bits 1 (the almost-sure limit).
  explicit AdjacencyLimit(Vertex window) : bits_(Graph::complete(check_window(window))) {}

  static AdjacencyLimit all_ones(Vertex window) { return AdjacencyLimit(window); }
  static AdjacencyLimit all_zeros(Vertex window) {
    AdjacencyLimit m(window);
    m.bits_ = Graph(window);
    return m;
  }

  Vertex window() const noexcept { return bits_.order(); }

  bool operator()(Vertex i, Vertex j) const {
    check_pair(i, j);
    return bits_.has_edge(i, j);
  }

  void set(Vertex i, Vertex j, bool bit) {
    check_pair(i, j);
    if (bit == bits_.has_edge(i, j)) return;
    // Graph has no edge removal; rebuild the row pair through a copy.
    Graph g(window());
    bits_.for_each_edge([&](Edge e) {
      if (!(e.i == i && e.j == j)) g.add_edge(e.i, e.j);
    });
    if (bit) g.add_edge(i, j);
    bits_ = std::move(g);
  }

  /// e_j(M) = #{i < j : M(i, j) = 1}.
  std::size_t ones_into(Vertex j) const {
    if (j > window()) throw DomainError("adjacency limit: vertex outside window");
    return edges_into(bits_, j);
  }

  /// The 1-bits as a graph on [window].
  const Graph& as_graph() const noexcept { return bits_; }

  /// True iff every edge of g lies in the window with M = 1.
  bool admits(const Graph& g) const {
    if (g.order() > window()) return false;
    bool ok = true;
    g.for_each_edge([&](Edge e) { ok = ok && bits_.has_edge(e.i, e.j); });
    return ok;
  }

  friend bool operator==(const AdjacencyLimit&, const AdjacencyLimit&) = default;

 private:
  static Vertex check_window(Vertex w) {
    if (w < 2) throw DomainError("adjacency limit window must be >= 2");
    return w;
  }
  void check_pair(Vertex i, Vertex j) const {
    if (i < 1 || i >= j) throw DomainError("adjacency limit: need 1 <= i < j");
    if (j > window()) throw DomainError("adjacency limit: pair outside window");
  }

  Graph bits_;
};

/// Format: optional first line "window W", then lines "i j b". The window is
/// max(W, largest j listed); unlisted pairs default to 1.
inline AdjacencyLimit read_adjacency_limit(std::istream& in) {
  struct Entry {
    long long i, j, b;
  };
  std::vector<Entry> entries;
  long long window = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first == "window") {
      if (!(ls >> window) || window < 2) throw ValidationError("adjacency limit: bad window line");
      continue;
    }
    Entry e{};
    try {
      e.i = std::stoll(first);
    } catch (const std::exception&) {
      throw ValidationError("adjacency limit: bad line \"" + line + "\"");
    }
    std::string rest;
    if (!(ls >> e.j >> e.b) || (ls >> rest)) throw ValidationError("adjacency limit: bad line \"" + line + "\"");
    if (e.i < 1 || e.i >= e.j || (e.b != 0 && e.b != 1)) {
      throw ValidationError("adjacency limit: bad entry \"" + line + "\"");
    }
    window = std::max(window, e.j);
    entries.push_back(e);
  }
  if (window < 2) throw ValidationError("adjacency limit: empty window");
  AdjacencyLimit m(static_cast<Vertex>(window));
  Graph zeros(static_cast<Vertex>(window));
  std::map<std::pair<long long, long long>, long long> seen;
  for (const Entry& e : entries) {
    auto [it, fresh] = seen.emplace(std::pair{e.i, e.j}, e.b);
    if (!fresh && it->second != e.b) throw ValidationError("adjacency limit: conflicting entries");
    if (e.b == 0) zeros.add_edge(static_cast<Vertex>(e.i), static_cast<Vertex>(e.j));
  }
  zeros.for_each_edge([&](Edge e) { m.set(e.i, e.j, false); });
  return m;
}

inline void write_adjacency_limit(std::ostream& out, const AdjacencyLimit& m) {
  out << "window " << m.window() << '\n';
  for (Vertex j = 2; j <= m.window(); ++j)
    for (Vertex i = 1; i < j; ++i) out << i << ' ' << j << ' ' << (m(i, j) ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// Uniform attachment
// ---------------------------------------------------------------------------

namespace detail {

inline bool prefix_edges_contained(const Graph& small, const Graph& big) {
  bool ok = true;
  small.for_each_edge([&](Edge e) { ok = ok && big.has_edge(e.i, e.j); });
  return ok;
}

inline void check_times(const Graph& gm, const Graph& gn) {
  if (gm.order() < 1 || gm.order() >= gn.order()) throw DomainError("need m < n for a transition or kernel");
}

// log(a^e) with a^0 = 1 even for a = 0.
inline double log_power(double log_a, std::size_t e) { return e == 0 ? 0.0 : static_cast<double>(e) * log_a; }

}  // namespace detail

/// P(X_n = G_n | X_m = G_m) for the uniform attachment chain.
inline LogProb ua_transition_prob(const Graph& gm, const Graph& gn) {
  detail::check_times(gm, gn);
  if (!detail::prefix_edges_contained(gm, gn)) return LogProb::impossible();
  const double m = gm.order();
  const double n = gn.order();
  const double log_n = std::log(n);
  double lp = 0;
  for (Vertex j = 2; j <= gm.order(); ++j) {
    const std::size_t en = edges_into(gn, j);
    const std::size_t em = edges_into(gm, j);
    lp += detail::log_power(std::log(n - m) - log_n, en - em);
    lp += detail::log_power(std::log(m) - log_n, j - 1 - en);
  }
  for (Vertex j = gm.order() + 1; j <= gn.order(); ++j) {
    const std::size_t en = edges_into(gn, j);
    lp += detail::log_power(std::log(n - (j - 1)) - log_n, en);
    lp += detail::log_power(std::log(static_cast<double>(j - 1)) - log_n, j - 1 - en);
  }
  return {lp};
}

inline Rational ua_transition_prob_exact(const Graph& gm, const Graph& gn) {
  detail::check_times(gm, gn);
  if (!detail::prefix_edges_contained(gm, gn)) return 0;
  const auto m = static_cast<std::int64_t>(gm.order());
  const auto n = static_cast<std::int64_t>(gn.order());
  Rational p = 1;
  for (Vertex j = 2; j <= gm.order(); ++j) {
    const auto en = static_cast<unsigned>(edges_into(gn, j));
    const auto em = static_cast<unsigned>(edges_into(gm, j));
    p *= pow(ratio(n - m, n), en - em) * pow(ratio(m, n), j - 1 - en);
  }
  for (Vertex j = gm.order() + 1; j <= gn.order(); ++j) {
    const auto en = static_cast<unsigned>(edges_into(gn, j));
    p *= pow(ratio(n - (j - 1), n), en) * pow(ratio(j - 1, n), j - 1 - en);
  }
  return p;
}

/// P(X_n = G_n) = prod_{j=2}^n (1 - (j-1)/n)^{e_j} ((j-1)/n)^{j-1-e_j}.
inline LogProb ua_marginal_prob(const Graph& gn) {
  if (gn.order() < 1) throw DomainError("ua_marginal_prob: empty graph");
  if (gn.order() == 1) return {0.0};
  return ua_transition_prob(Graph(1), gn);
}

inline Rational ua_marginal_prob_exact(const Graph& gn) {
  if (gn.order() < 1) throw DomainError("ua_marginal_prob: empty graph");
  if (gn.order() == 1) return 1;
  return ua_transition_prob_exact(Graph(1), gn);
}

struct UaKernelFactors {
  double k1 = 1;
  double k2 = 1;
  double k3 = 1;
  // Natural logs of the factors; individually they may overflow when m is
  // close to n even though the product is moderate.
  double log_k1 = 0;
  double log_k2 = 0;
  double log_k3 = 0;
  double product() const noexcept { return std::exp(log_k1 + log_k2 + log_k3); }
};

/// The three factors of K(G_m, G_n); meaningful only when the transition is
/// possible (otherwise the kernel is 0).
inline UaKernelFactors ua_kernel_factors(const Graph& gm, const Graph& gn) {
  detail::check_times(gm, gn);
  const double m = gm.order();
  const double n = gn.order();
  UaKernelFactors f;
  double l1 = 0;
  double l2 = 0;
  double l3 = 0;
  for (Vertex j = 2; j <= gm.order(); ++j) {
    const double jj = j;
    const auto em = static_cast<double>(edges_into(gm, j));
    const auto en = static_cast<double>(edges_into(gn, j));
    l1 -= em * std::log1p(-m / n);
    l2 += en * std::log1p(-(m + 1 - jj) / (n + 1 - jj));
    l3 += (en + 1 - jj) * std::log((jj - 1) / m);
  }
  f.log_k1 = l1;
  f.log_k2 = l2;
  f.log_k3 = l3;
  f.k1 = std::exp(l1);
  f.k2 = std::exp(l2);
  f.k3 = std::exp(l3);
  return f;
}

/// Martin kernel K(G_m, G_n) = P(X_n = G_n | X_m = G_m) / P(X_n = G_n).
inline double ua_kernel(const Graph& gm, const Graph& gn) {
  const LogProb t = ua_transition_prob(gm, gn);
  if (t.is_impossible()) return 0.0;
  return std::exp(t.value - ua_marginal_prob(gn).value);
}

inline Rational ua_kernel_exact(const Graph& gm, const Graph& gn) {
  return ua_transition_prob_exact(gm, gn) / ua_marginal_prob_exact(gn);
}

namespace detail {

inline void check_limit_covers(const Graph& gm, const AdjacencyLimit& limit) {
  if (limit.window() < gm.order()) throw DomainError("adjacency limit window does not cover [m]");
}

}  // namespace detail

/// K(G_m, M) = prod_{j=2}^m ((j-1)/m)^{e_j(M) + 1 - j}, and 0 when G_m has an
/// edge where M = 0.
inline double ua_extended_kernel(const Graph& gm, const AdjacencyLimit& limit) {
  detail::check_limit_covers(gm, limit);
  if (!limit.admits(gm)) return 0.0;
  const double m = gm.order();
  double lk = 0;
  for (Vertex j = 2; j <= gm.order(); ++j) {
    const double exponent = static_cast<double>(limit.ones_into(j)) + 1.0 - j;
    lk += exponent * std::log((j - 1) / m);
  }
  return std::exp(lk);
}

inline Rational ua_extended_kernel_exact(const Graph& gm, const AdjacencyLimit& limit) {
  detail::check_limit_covers(gm, limit);
  if (!limit.admits(gm)) return 0;
  const auto m = static_cast<std::int64_t>(gm.order());
  Rational k = 1;
  for (Vertex j = 2; j <= gm.order(); ++j) {
    // Exponent e_j(M) + 1 - j <= 0.
    const auto deficit = static_cast<unsigned>(j - 1 - limit.ones_into(j));
    k *= pow(ratio(m, j - 1), deficit);
  }
  return k;
}

/// P(tau_ij > n) for the edge entry time. The pair gets its first chance on
/// the step into time j and each later step into time l succeeds w.p. 1/l,
/// so P(tau_ij > n) = prod_{l=j}^n (1 - 1/l) = (j - 1) / n.
inline Rational entry_tail_prob(Vertex i, Vertex j, std::uint64_t n) {
  if (i < 1 || i >= j) throw DomainError("entry_tail_prob: need 1 <= i < j");
  if (n + 1 < j) throw DomainError("entry_tail_prob: need n >= j - 1");
  return ratio(j - 1, static_cast<std::int64_t>(n));
}

// ---------------------------------------------------------------------------
// Erdos-Renyi chains
// ---------------------------------------------------------------------------

namespace detail {

inline void check_open_theta(double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("theta must lie in (0,1)");
}

}  // namespace detail

/// theta^e(G) (1 - theta)^(C(n,2) - e(G)).
inline LogProb er_marginal_prob(const Graph& g, double theta) {
  detail::check_open_theta(theta);
  const auto e = static_cast<double>(g.edge_count());
  const auto non = static_cast<double>(Graph::pair_count(g.order())) - e;
  return {e * std::log(theta) + non * std::log1p(-theta)};
}

inline Rational er_marginal_prob_exact(const Graph& g, const Rational& theta) {
  const auto e = static_cast<unsigned>(g.edge_count());
  const auto non = static_cast<unsigned>(Graph::pair_count(g.order()) - g.edge_count());
  return pow(theta, e) * pow(1 - theta, non);
}

/// Martin kernel of the relabeled chain: rho(G_m, G_n) / P(X_m = G_m).
inline double er_kernel(const Graph& gm, const Graph& gn, double theta, EmbeddingLimits limits = {}) {
  detail::check_open_theta(theta);
  if (gm.order() > gn.order()) throw DomainError("er_kernel: need m <= n");
  const double rho = sampling_density(gm, gn, limits);
  if (rho == 0.0) return 0.0;
  return std::exp(std::log(rho) - er_marginal_prob(gm, theta).value);
}

inline Rational er_kernel_exact(const Graph& gm, const Graph& gn, const Rational& theta, EmbeddingLimits limits = {}) {
  if (gm.order() > gn.order()) throw DomainError("er_kernel: need m <= n");
  return sampling_density_exact(gm, gn, limits) / er_marginal_prob_exact(gm, theta);
}

/// Almost-sure limit of rho(H, X_n): theta^e(H) (1 - theta)^(C(v(H),2) - e(H)).
inline double er_limit_value(const Graph& h, double theta) { return er_marginal_prob(h, theta).prob(); }

/// Perfect-memory kernel: 1 / P(Y_m = G_m) on the unique path, else 0.
inline double pm_kernel(const Graph& gm, const Graph& gn, double theta) {
  detail::check_open_theta(theta);
  detail::check_times(gm, gn);
  if (!(induced_prefix(gn, gm.order()) == gm)) return 0.0;
  return std::exp(-er_marginal_prob(gm, theta).value);
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

struct OracleLimits {
  std::uint64_t max_graph_time = 4;
  std::uint64_t max_other_time = 8;
  EnumerationLimits enumeration{};
};

/// P(X_n = y | X_m = x) by pushing the exact one-step law forward from x
/// through every elementary outcome, in exact rational arithmetic.
inline Rational exact_conditional_oracle(const ChainSpec& spec, const State& x, const State& y,
                                         const OracleLimits& limits = {}) {
  spec.validate();
  const std::uint64_t m = time_of(x);
  const std::uint64_t n = time_of(y);
  if (x.index() != start_state(spec.kind).index() || y.index() != x.index()) {
    throw DomainError("oracle: states do not belong to the chain");
  }
  const std::uint64_t cap = is_graph_chain(spec.kind) ? limits.max_graph_time : limits.max_other_time;
  if (n > cap) throw CapabilityError("oracle: target time " + std::to_string(n) + " above enumeration cap");
  if (n < m) return 0;
  std::map<State, Rational> current{{x, Rational(1)}};
  for (std::uint64_t t = m; t < n; ++t) {
    std::map<State, Rational> next;
    for (const auto& [s, p] : current)
      for (auto& [s2, q] : step_distribution(spec, s, limits.enumeration)) next[s2] += p * q;
    current = std::move(next);
  }
  const auto it = current.find(y);
  return it == current.end() ? Rational(0) : it->second;
}

struct KernelEstimate {
  std::optional<double> value;  // nullopt when the unconditional run never hit y
  double std_error = 0;
  std::uint64_t conditional_hits = 0;
  std::uint64_t unconditional_hits = 0;
  std::uint64_t reps = 0;
};

/// Monte-Carlo estimate of K(x, y): reps runs from x and reps runs from the
/// start, each counting arrivals at y. The standard error propagates the two
/// binomial errors through the ratio.
inline KernelEstimate empirical_kernel(const ChainSpec& spec, const State& x, const State& y, std::uint64_t reps,
                                       std::uint64_t seed) {
  spec.validate();
  if (reps < 1) throw DomainError("empirical_kernel: reps must be >= 1");
  const std::uint64_t n = time_of(y);
  if (time_of(x) > n) throw DomainError("empirical_kernel: x is later than y");
  KernelEstimate est;
  est.reps = reps;
  const State start = start_state(spec.kind);
  for (std::uint64_t r = 0; r < reps; ++r) {
    CounterRng a = CounterRng::stream(seed, 2 * r);
    CounterRng b = CounterRng::stream(seed, 2 * r + 1);
    if (run_from(spec, x, n, a) == y) ++est.conditional_hits;
    if (run_from(spec, start, n, b) == y) ++est.unconditional_hits;
  }
  if (est.unconditional_hits == 0) return est;
  const double p1 = static_cast<double>(est.conditional_hits) / static_cast<double>(reps);
  const double p2 = static_cast<double>(est.unconditional_hits) / static_cast<double>(reps);
  const double value = p1 / p2;
  est.value = value;
  double rel = (1 - p2) / static_cast<double>(est.unconditional_hits);
  if (est.conditional_hits > 0) rel += (1 - p1) / static_cast<double>(est.conditional_hits);
  else rel += 1.0 / static_cast<double>(reps) / (p2 * p2);  // one-hit resolution when p1 = 0
  est.std_error = est.conditional_hits > 0 ? value * std::sqrt(rel) : std::sqrt(rel);
  return est;
}

// ---------------------------------------------------------------------------
// Records chain
// ---------------------------------------------------------------------------

/// P(S_n = l | S_m = k) / P(S_n = l), exactly.
inline Rational records_kernel_ratio(std::uint64_t m, std::uint64_t k, std::uint64_t n, std::uint64_t l) {
  if (k < 1 || k > m || m >= n) throw DomainError("records_kernel_ratio: need 1 <= k <= m < n");
  if (l < k || l > k + (n - m)) return 0;
  // Forward DP over the up-steps at times m+1..n.
  std::vector<Rational> dist(n - m + 1, 0);  // index = number of new records
  dist[0] = 1;
  for (std::uint64_t t = m + 1; t <= n; ++t) {
    const Rational up = ratio(1, static_cast<std::int64_t>(t));
    const Rational stay = 1 - up;
    for (std::uint64_t r = t - m; r >= 1; --r) dist[r] = dist[r] * stay + dist[r - 1] * up;
    dist[0] *= stay;
  }
  const auto unconditional = records_distribution(n);
  return dist[l - k] / unconditional[l];
}

}  // namespace persist
