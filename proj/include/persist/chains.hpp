#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "persist/errors.hpp"
#include "persist/exact.hpp"
#include "persist/graph.hpp"
#include "persist/rng.hpp"
#include "persist/tree.hpp"

namespace persist {

enum class ChainKind { polya, records, uniform_attachment, er_memory, er_relabel, bst };

inline std::string_view to_string(ChainKind kind) {
  switch (kind) {
    case ChainKind::polya: return "polya";
    case ChainKind::records: return "records";
    case ChainKind::uniform_attachment: return "uniform-attachment";
    case ChainKind::er_memory: return "er-memory";
    case ChainKind::er_relabel: return "er-relabel";
    case ChainKind::bst: return "bst";
  }
  return "?";
}

inline ChainKind parse_chain_kind(std::string_view name) {
  for (ChainKind k : {ChainKind::polya, ChainKind::records, ChainKind::uniform_attachment, ChainKind::er_memory,
                      ChainKind::er_relabel, ChainKind::bst}) {
    if (name == to_string(k)) return k;
  }
  if (name == "ua") return ChainKind::uniform_attachment;
  throw ValidationError("unknown chain kind \"" + std::string(name) + "\"");
}

inline bool is_graph_chain(ChainKind k) {
  return k == ChainKind::uniform_attachment || k == ChainKind::er_memory || k == ChainKind::er_relabel;
}
inline bool is_er_chain(ChainKind k) { return k == ChainKind::er_memory || k == ChainKind::er_relabel; }

struct ChainSpec {
  ChainKind kind = ChainKind::bst;
  std::optional<double> theta;

  static ChainSpec make(ChainKind kind, std::optional<double> theta = std::nullopt) {
    ChainSpec spec{kind, theta};
    spec.validate();
    return spec;
  }

  void validate() const {
    if (is_er_chain(kind) != theta.has_value()) {
      throw DomainError("theta must be given exactly for the Erdos-Renyi chains");
    }
    if (kind == ChainKind::er_memory && !(*theta >= 0.0 && *theta <= 1.0)) {
      throw DomainError("er-memory needs 0 <= theta <= 1");
    }
    if (kind == ChainKind::er_relabel && !(*theta > 0.0 && *theta < 1.0)) {
      throw DomainError("er-relabel needs 0 < theta < 1");
    }
  }

  friend bool operator==(const ChainSpec&, const ChainSpec&) = default;
};

/// Polya urn after i red and j blue draws; time n = i + j + 1.
struct UrnState {
  std::uint64_t i = 0;
  std::uint64_t j = 0;

  std::uint64_t time() const noexcept { return i + j + 1; }
  friend auto operator<=>(const UrnState&, const UrnState&) = default;
};

/// (n, S_n) for the records chain; 1 <= k <= n.
struct RecordsState {
  std::uint64_t n = 1;
  std::uint64_t k = 1;

  friend auto operator<=>(const RecordsState&, const RecordsState&) = default;
};

using State = std::variant<UrnState, RecordsState, Graph, BinaryTree>;

inline std::uint64_t time_of(const State& s) {
  return std::visit(
      [](const auto& x) -> std::uint64_t {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, UrnState>) return x.time();
        else if constexpr (std::is_same_v<T, RecordsState>) return x.n;
        else if constexpr (std::is_same_v<T, Graph>) return x.order();
        else return x.size();
      },
      s);
}

inline State start_state(ChainKind kind) {
  switch (kind) {
    case ChainKind::polya: return UrnState{};
    case ChainKind::records: return RecordsState{};
    case ChainKind::bst: return BinaryTree{};
    default: return Graph(1);
  }
}

// Per-step randomness as recorded in trajectories.
struct UrnDraw {
  bool red = false;
  friend bool operator==(const UrnDraw&, const UrnDraw&) = default;
};
struct RecordBit {
  bool record = false;
  friend bool operator==(const RecordBit&, const RecordBit&) = default;
};
struct EdgeAdditions {
  std::vector<Edge> edges;
  friend bool operator==(const EdgeAdditions&, const EdgeAdditions&) = default;
};
/// New edges {i, n+1} before relabeling, then the relabeling permutation image.
struct RelabeledAdditions {
  std::vector<Edge> edges;
  std::vector<Vertex> perm;  // 1-based; perm[0] unused
  friend bool operator==(const RelabeledAdditions&, const RelabeledAdditions&) = default;
};
struct ChosenExternal {
  Word word;
  friend bool operator==(const ChosenExternal&, const ChosenExternal&) = default;
};

using Delta = std::variant<std::monostate, UrnDraw, RecordBit, EdgeAdditions, RelabeledAdditions, ChosenExternal>;

namespace detail {

// Visits every pair {i, j} of [n] selected by independent Bernoulli(p)
// trials, in (j, i) order, by geometric skipping over the pair index.
template <class F>
void for_each_bernoulli_pair(Vertex n, double p, CounterRng& rng, F&& f) {
  const std::uint64_t total = Graph::pair_count(n);
  if (total == 0 || p <= 0.0) return;
  std::uint64_t next = 0;       // index of the next untested pair
  std::uint64_t column = 0;     // index of pair {1, j}
  Vertex j = 2;
  for (;;) {
    const std::uint64_t skip = rng.geometric_skip(p);
    if (skip >= total - next) return;
    const std::uint64_t idx = next + skip;
    while (idx >= column + (j - 1)) {
      column += j - 1;
      ++j;
    }
    f(Edge{static_cast<Vertex>(idx - column + 1), j});
    next = idx + 1;
    if (next >= total) return;
  }
}

inline UrnDraw polya_advance(UrnState& s, CounterRng& rng) {
  const bool red = rng.uniform_below(s.i + s.j + 2) < s.i + 1;
  (red ? s.i : s.j) += 1;
  return {red};
}

inline RecordBit records_advance(RecordsState& s, CounterRng& rng) {
  const bool up = rng.uniform_below(s.n + 1) == 0;
  s.n += 1;
  if (up) s.k += 1;
  return {up};
}

inline EdgeAdditions ua_advance(Graph& g, CounterRng& rng) {
  g.add_vertex();
  const Vertex n1 = g.order();
  EdgeAdditions d;
  for_each_bernoulli_pair(n1, 1.0 / n1, rng, [&](Edge e) {
    if (g.add_edge(e.i, e.j)) d.edges.push_back(e);
  });
  return d;
}

inline EdgeAdditions er_memory_advance(Graph& g, double theta, CounterRng& rng) {
  g.add_vertex();
  const Vertex n1 = g.order();
  EdgeAdditions d;
  for (Vertex i = 1; i < n1; ++i) {
    if (rng.bernoulli(theta)) {
      g.add_edge(i, n1);
      d.edges.push_back({i, n1});
    }
  }
  return d;
}

inline RelabeledAdditions er_relabel_advance(Graph& g, double theta, CounterRng& rng) {
  EdgeAdditions added = er_memory_advance(g, theta, rng);
  RelabeledAdditions d{std::move(added.edges), rng.permutation(g.order())};
  g = permute(g, Permutation::from_image(d.perm));
  return d;
}

inline ChosenExternal bst_advance(BinaryTree& t, CounterRng& rng) {
  const auto slot = static_cast<std::size_t>(rng.uniform_below(t.external_count()));
  ChosenExternal d{t.external_word(slot)};
  t.grow(slot);
  return d;
}

}  // namespace detail

inline UrnState polya_step(UrnState s, CounterRng& rng) {
  detail::polya_advance(s, rng);
  return s;
}

inline RecordsState records_step(RecordsState s, CounterRng& rng) {
  detail::records_advance(s, rng);
  return s;
}

/// Uniform attachment: vertex n+1 arrives and every absent pair of [n+1]
/// enters independently with probability 1/(n+1).
inline Graph ua_step(Graph g, CounterRng& rng) {
  detail::ua_advance(g, rng);
  return g;
}

inline Graph er_memory_step(Graph g, double theta, CounterRng& rng) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw DomainError("er_memory_step: theta outside [0,1]");
  detail::er_memory_advance(g, theta, rng);
  return g;
}

inline Graph er_relabel_step(Graph g, double theta, CounterRng& rng) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("er_relabel_step: need 0 < theta < 1");
  detail::er_relabel_advance(g, theta, rng);
  return g;
}

inline BinaryTree bst_chain_step(BinaryTree t, CounterRng& rng) {
  detail::bst_advance(t, rng);
  return t;
}

/// One transition of `spec` applied in place; returns the recorded randomness.
inline Delta advance(const ChainSpec& spec, State& s, CounterRng& rng) {
  switch (spec.kind) {
    case ChainKind::polya: return detail::polya_advance(std::get<UrnState>(s), rng);
    case ChainKind::records: return detail::records_advance(std::get<RecordsState>(s), rng);
    case ChainKind::uniform_attachment: return detail::ua_advance(std::get<Graph>(s), rng);
    case ChainKind::er_memory: return detail::er_memory_advance(std::get<Graph>(s), *spec.theta, rng);
    case ChainKind::er_relabel: return detail::er_relabel_advance(std::get<Graph>(s), *spec.theta, rng);
    case ChainKind::bst: return detail::bst_advance(std::get<BinaryTree>(s), rng);
  }
  return std::monostate{};
}

inline State step(const ChainSpec& spec, State s, CounterRng& rng) {
  advance(spec, s, rng);
  return s;
}

/// Replays one recorded transition.
inline void apply_delta(State& s, const Delta& delta) {
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UrnDraw>) {
          auto& u = std::get<UrnState>(s);
          (d.red ? u.i : u.j) += 1;
        } else if constexpr (std::is_same_v<T, RecordBit>) {
          auto& r = std::get<RecordsState>(s);
          r.n += 1;
          if (d.record) r.k += 1;
        } else if constexpr (std::is_same_v<T, EdgeAdditions>) {
          auto& g = std::get<Graph>(s);
          g.add_vertex();
          for (const Edge& e : d.edges) g.add_edge(e.i, e.j);
        } else if constexpr (std::is_same_v<T, RelabeledAdditions>) {
          auto& g = std::get<Graph>(s);
          g.add_vertex();
          for (const Edge& e : d.edges) g.add_edge(e.i, e.j);
          g = permute(g, Permutation::from_image(d.perm));
        } else if constexpr (std::is_same_v<T, ChosenExternal>) {
          std::get<BinaryTree>(s).grow(d.word);
        }
      },
      delta);
}

/// Exact finite distribution: (outcome, probability) pairs with distinct outcomes.
template <class S>
using Distribution = std::vector<std::pair<S, Rational>>;

struct EnumerationLimits {
  /// Largest number of elementary outcomes enumerated for one transition.
  std::uint64_t max_outcomes = std::uint64_t{1} << 22;
};

namespace detail {

inline void check_outcomes(long double count, const EnumerationLimits& limits) {
  if (count > static_cast<long double>(limits.max_outcomes)) {
    throw CapabilityError("one-step enumeration exceeds the configured outcome cap");
  }
}

template <class S>
Distribution<S> to_distribution(std::map<S, Rational>&& m) {
  Distribution<S> out;
  out.reserve(m.size());
  for (auto& [k, v] : m) out.emplace_back(k, std::move(v));
  return out;
}

}  // namespace detail

/// Exact one-step law of the uniform attachment chain from g. Only pairs with
/// allowed(e) true are tried (defaults to all); the others never enter.
inline Distribution<Graph> ua_step_distribution(const Graph& g, const EnumerationLimits& limits = {},
                                                const std::function<bool(Edge)>& allowed = {}) {
  const Vertex n1 = g.order() + 1;
  std::vector<Edge> absent;
  for (Vertex j = 2; j <= n1; ++j)
    for (Vertex i = 1; i < j; ++i)
      if (j == n1 || !g.has_edge(i, j)) absent.push_back({i, j});
  std::vector<Edge> candidates;
  for (const Edge& e : absent)
    if (!allowed || allowed(e)) candidates.push_back(e);
  detail::check_outcomes(std::ldexp(1.0L, static_cast<int>(candidates.size())), limits);

  const Rational p = ratio(1, n1);
  const Rational q = 1 - p;
  Graph base = g;
  base.add_vertex();
  Distribution<Graph> out;
  out.reserve(std::size_t{1} << candidates.size());
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << candidates.size()); ++mask) {
    Graph y = base;
    unsigned added = 0;
    for (std::size_t b = 0; b < candidates.size(); ++b) {
      if ((mask >> b) & 1u) {
        y.add_edge(candidates[b].i, candidates[b].j);
        ++added;
      }
    }
    out.emplace_back(std::move(y), pow(p, added) * pow(q, static_cast<unsigned>(candidates.size()) - added));
  }
  return out;
}

inline Distribution<Graph> er_memory_step_distribution(const Graph& g, const Rational& theta,
                                                       const EnumerationLimits& limits = {}) {
  const Vertex n = g.order();
  detail::check_outcomes(std::ldexp(1.0L, static_cast<int>(n)), limits);
  Graph base = g;
  base.add_vertex();
  Distribution<Graph> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    Graph y = base;
    unsigned added = 0;
    for (Vertex i = 1; i <= n; ++i) {
      if ((mask >> (i - 1)) & 1u) {
        y.add_edge(i, n + 1);
        ++added;
      }
    }
    out.emplace_back(std::move(y), pow(theta, added) * pow(1 - theta, n - added));
  }
  return out;
}

/// Relabeled chain: every (new-edge subset, permutation of [n+1]) outcome,
/// merged by resulting graph.
inline Distribution<Graph> er_relabel_step_distribution(const Graph& g, const Rational& theta,
                                                        const EnumerationLimits& limits = {}) {
  const Vertex n1 = g.order() + 1;
  long double perms = 1;
  for (Vertex k = 2; k <= n1; ++k) perms *= k;
  detail::check_outcomes(perms * std::ldexp(1.0L, static_cast<int>(n1 - 1)), limits);

  std::vector<Vertex> image(n1 + 1);
  for (Vertex i = 0; i <= n1; ++i) image[i] = i;
  std::vector<Permutation> all;
  do {
    all.push_back(Permutation::from_image(image));
  } while (std::next_permutation(image.begin() + 1, image.end()));
  const Rational per_perm = Rational(1) / Rational(BigInt(all.size()));

  std::map<Graph, Rational> merged;
  for (auto& [y, p] : er_memory_step_distribution(g, theta, limits)) {
    const Rational w = p * per_perm;
    for (const Permutation& pi : all) merged[permute(y, pi)] += w;
  }
  return detail::to_distribution(std::move(merged));
}

inline Distribution<BinaryTree> bst_step_distribution(const BinaryTree& t) {
  std::map<BinaryTree, Rational> merged;
  const Rational w = ratio(1, static_cast<std::int64_t>(t.external_count()));
  for (std::size_t slot = 0; slot < t.external_count(); ++slot) {
    BinaryTree y = t;
    y.grow(slot);
    merged[std::move(y)] += w;
  }
  return detail::to_distribution(std::move(merged));
}

inline Distribution<UrnState> polya_step_distribution(const UrnState& s) {
  const auto total = static_cast<std::int64_t>(s.i + s.j + 2);
  return {{UrnState{s.i + 1, s.j}, ratio(static_cast<std::int64_t>(s.i + 1), total)},
          {UrnState{s.i, s.j + 1}, ratio(static_cast<std::int64_t>(s.j + 1), total)}};
}

inline Distribution<RecordsState> records_step_distribution(const RecordsState& s) {
  const auto n1 = static_cast<std::int64_t>(s.n + 1);
  return {{RecordsState{s.n + 1, s.k}, ratio(n1 - 1, n1)}, {RecordsState{s.n + 1, s.k + 1}, ratio(1, n1)}};
}

/// Exact one-step law of any chain, as a distribution over `State`.
inline Distribution<State> step_distribution(const ChainSpec& spec, const State& s,
                                             const EnumerationLimits& limits = {}) {
  auto lift = [](auto&& dist) {
    Distribution<State> out;
    out.reserve(dist.size());
    for (auto& [y, p] : dist) out.emplace_back(State(std::move(y)), std::move(p));
    return out;
  };
  switch (spec.kind) {
    case ChainKind::polya: return lift(polya_step_distribution(std::get<UrnState>(s)));
    case ChainKind::records: return lift(records_step_distribution(std::get<RecordsState>(s)));
    case ChainKind::uniform_attachment: return lift(ua_step_distribution(std::get<Graph>(s), limits));
    case ChainKind::er_memory:
      return lift(er_memory_step_distribution(std::get<Graph>(s), exact_rational(*spec.theta), limits));
    case ChainKind::er_relabel:
      return lift(er_relabel_step_distribution(std::get<Graph>(s), exact_rational(*spec.theta), limits));
    case ChainKind::bst: return lift(bst_step_distribution(std::get<BinaryTree>(s)));
  }
  return {};
}

/// Recorded run of a chain: the start state plus one delta per transition.
/// States are reconstructed on demand by replaying deltas.
class Trajectory {
 public:
  Trajectory(ChainSpec spec, std::uint64_t seed) : spec_(spec), seed_(seed), deltas_{std::monostate{}} {}

  const ChainSpec& spec() const noexcept { return spec_; }
  std::uint64_t seed() const noexcept { return seed_; }
  /// Time of the last recorded state (the first state has time 1).
  std::uint64_t horizon() const noexcept { return deltas_.size(); }
  /// Randomness consumed to reach time n from n-1 (monostate for n = 1).
  const Delta& delta(std::uint64_t n) const { return deltas_.at(n - 1); }
  const std::vector<Delta>& deltas() const noexcept { return deltas_; }

  void push(Delta d) { deltas_.push_back(std::move(d)); }

  /// State at time n, 1 <= n <= horizon().
  State state(std::uint64_t n) const {
    if (n < 1 || n > horizon()) throw DomainError("trajectory: time outside recorded horizon");
    State s = start_state(spec_.kind);
    for (std::uint64_t t = 2; t <= n; ++t) apply_delta(s, deltas_[t - 1]);
    return s;
  }

  /// Calls f(n, state) for n = 1, ..., horizon() in a single replay.
  template <class F>
  void for_each_state(F&& f) const {
    State s = start_state(spec_.kind);
    f(std::uint64_t{1}, std::as_const(s));
    for (std::uint64_t t = 2; t <= horizon(); ++t) {
      apply_delta(s, deltas_[t - 1]);
      f(t, std::as_const(s));
    }
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  ChainSpec spec_;
  std::uint64_t seed_;
  std::vector<Delta> deltas_;
};

struct SimulationLimits {
  /// Cap on the projected size of recorded edge deltas for graph chains.
  std::uint64_t max_trajectory_bytes = std::uint64_t{1} << 30;
};

inline std::uint64_t projected_trajectory_bytes(const ChainSpec& spec, std::uint64_t n_final) {
  if (!is_graph_chain(spec.kind)) return n_final * 32;
  const long double pairs = static_cast<long double>(n_final) * (n_final - 1) / 2;
  const long double density = spec.kind == ChainKind::uniform_attachment ? 1.0L : static_cast<long double>(*spec.theta);
  long double bytes = pairs * density * sizeof(Edge);
  if (spec.kind == ChainKind::er_relabel) bytes += pairs * 2 * sizeof(Vertex);
  return static_cast<std::uint64_t>(bytes);
}

/// Runs the chain from its canonical start to time n_final with the given stream.
inline Trajectory simulate(const ChainSpec& spec, std::uint64_t n_final, CounterRng rng, std::uint64_t seed,
                           const SimulationLimits& limits = {}) {
  spec.validate();
  if (n_final < 1) throw DomainError("simulate: n_final must be >= 1");
  if (projected_trajectory_bytes(spec, n_final) > limits.max_trajectory_bytes) {
    throw CapabilityError("simulate: projected trajectory size exceeds the configured cap");
  }
  Trajectory tr(spec, seed);
  State s = start_state(spec.kind);
  for (std::uint64_t t = 2; t <= n_final; ++t) tr.push(advance(spec, s, rng));
  return tr;
}

/// Deterministic in (spec, n_final, seed); uses stream 0 of `seed`.
inline Trajectory simulate(const ChainSpec& spec, std::uint64_t n_final, std::uint64_t seed,
                           const SimulationLimits& limits = {}) {
  return simulate(spec, n_final, CounterRng::stream(seed, 0), seed, limits);
}

/// Runs forward from an arbitrary state without recording.
inline State run_from(const ChainSpec& spec, State s, std::uint64_t n_final, CounterRng& rng) {
  while (time_of(s) < n_final) advance(spec, s, rng);
  return s;
}

/// tau_ij: least n with {i, j} in E(states[n]); nullopt if absent throughout.
inline std::optional<std::uint64_t> entry_time(const Trajectory& tr, Vertex i, Vertex j) {
  if (!is_graph_chain(tr.spec().kind)) throw DomainError("entry_time: trajectory is not a graph chain");
  if (i < 1 || i >= j) throw DomainError("entry_time: need 1 <= i < j");
  if (tr.spec().kind != ChainKind::er_relabel) {
    // Edges never leave and keep their labels, so the first delta naming the pair decides.
    for (std::uint64_t n = 2; n <= tr.horizon(); ++n) {
      for (const Edge& e : std::get<EdgeAdditions>(tr.delta(n)).edges)
        if (e.i == i && e.j == j) return n;
    }
    return std::nullopt;
  }
  std::optional<std::uint64_t> found;
  tr.for_each_state([&](std::uint64_t n, const State& s) {
    if (!found && edge_indicator(std::get<Graph>(s), i, j)) found = n;
  });
  return found;
}

}  // namespace persist
