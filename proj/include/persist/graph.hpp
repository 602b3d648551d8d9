#pragma once

#include <algorithm>
#include <bit>
#include <compare>
#include <cstdint>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "persist/errors.hpp"
#include "persist/exact.hpp"

namespace persist {

using Vertex = std::uint32_t;

/// Unordered vertex pair {i, j} stored with i < j.
struct Edge {
  Vertex i = 0;
  Vertex j = 0;

  friend constexpr auto operator<=>(const Edge&, const Edge&) = default;
};

/// Labeled simple graph on the vertex set [n] = {1, ..., n}.
///
/// Adjacency is kept as one bitset row per vertex (bit v-1 of row u is set iff
/// {u, v} is an edge). Rows share a stride that grows geometrically, so
/// appending vertices is amortized O(n / 64).
class Graph {
 public:
  Graph() = default;
  explicit Graph(Vertex n) { resize(n); }

  static Graph from_edges(Vertex n, std::span<const Edge> edges) {
    Graph g(n);
    for (const Edge& e : edges) {
      if (e.i < 1 || e.i >= e.j || e.j > n) {
        throw DomainError("edge {" + std::to_string(e.i) + "," + std::to_string(e.j) +
                          "} is not a pair 1 <= i < j <= " + std::to_string(n));
      }
      if (!g.add_edge(e.i, e.j)) {
        throw DomainError("duplicate edge {" + std::to_string(e.i) + "," + std::to_string(e.j) + "}");
      }
    }
    return g;
  }

  static Graph from_edges(Vertex n, std::initializer_list<Edge> edges) {
    return from_edges(n, std::span<const Edge>(edges.begin(), edges.size()));
  }

  static Graph complete(Vertex n) {
    Graph g(n);
    for (Vertex j = 2; j <= n; ++j)
      for (Vertex i = 1; i < j; ++i) g.add_edge(i, j);
    return g;
  }

  Vertex order() const noexcept { return n_; }
  std::size_t edge_count() const noexcept { return edges_; }
  static constexpr std::size_t pair_count(Vertex n) noexcept {
    return static_cast<std::size_t>(n) * (n == 0 ? 0 : n - 1) / 2;
  }

  /// No range checks; callers guarantee 1 <= i, j <= order().
  bool has_edge(Vertex i, Vertex j) const noexcept {
    return (rows_[row_offset(i) + (j - 1) / 64] >> ((j - 1) % 64)) & 1u;
  }

  /// Inserts {i, j}; returns false if it was already present.
  bool add_edge(Vertex i, Vertex j) noexcept {
    if (has_edge(i, j)) return false;
    set_bit(i, j);
    set_bit(j, i);
    ++edges_;
    return true;
  }

  void add_vertex() { resize(n_ + 1); }

  /// Adjacency row of vertex v, trimmed to words covering [n].
  std::span<const std::uint64_t> row(Vertex v) const noexcept {
    return {rows_.data() + row_offset(v), words()};
  }

  std::size_t words() const noexcept { return (n_ + 63) / 64; }

  /// Calls f(Edge) for every edge in (j, i) lexicographic order of the pair (i < j).
  template <class F>
  void for_each_edge(F&& f) const {
    for (Vertex j = 2; j <= n_; ++j) {
      const std::uint64_t* r = rows_.data() + row_offset(j);
      for (std::size_t w = 0; w * 64 + 1 < j; ++w) {
        std::uint64_t bits = r[w];
        while (bits != 0) {
          const auto i = static_cast<Vertex>(w * 64 + std::countr_zero(bits) + 1);
          if (i >= j) break;
          f(Edge{i, j});
          bits &= bits - 1;
        }
      }
    }
  }

  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    out.reserve(edges_);
    for_each_edge([&](Edge e) { out.push_back(e); });
    std::sort(out.begin(), out.end());
    return out;
  }

  friend bool operator==(const Graph& a, const Graph& b) noexcept {
    if (a.n_ != b.n_ || a.edges_ != b.edges_) return false;
    for (Vertex v = 1; v <= a.n_; ++v) {
      if (!std::equal(a.row(v).begin(), a.row(v).end(), b.row(v).begin())) return false;
    }
    return true;
  }

  /// Total order (by order, then adjacency rows) so graphs can key ordered maps.
  friend std::strong_ordering operator<=>(const Graph& a, const Graph& b) noexcept {
    if (auto c = a.n_ <=> b.n_; c != 0) return c;
    for (Vertex v = 1; v <= a.n_; ++v) {
      auto ra = a.row(v);
      auto rb = b.row(v);
      for (std::size_t w = 0; w < ra.size(); ++w) {
        if (auto c = ra[w] <=> rb[w]; c != 0) return c;
      }
    }
    return std::strong_ordering::equal;
  }

 private:
  std::size_t row_offset(Vertex v) const noexcept { return static_cast<std::size_t>(v - 1) * stride_; }

  void set_bit(Vertex u, Vertex v) noexcept {
    rows_[row_offset(u) + (v - 1) / 64] |= std::uint64_t{1} << ((v - 1) % 64);
  }

  void resize(Vertex n) {
    const std::size_t need = (n + 63) / 64;
    if (need > stride_) {
      std::size_t stride = std::max<std::size_t>(need, stride_ * 2);
      std::vector<std::uint64_t> rows(static_cast<std::size_t>(std::max<Vertex>(n, capacity_rows_)) * stride, 0);
      for (Vertex v = 1; v <= n_; ++v) {
        std::copy_n(rows_.data() + row_offset(v), stride_, rows.data() + static_cast<std::size_t>(v - 1) * stride);
      }
      rows_ = std::move(rows);
      stride_ = stride;
      capacity_rows_ = static_cast<Vertex>(rows_.size() / stride_);
    }
    if (n > capacity_rows_) {
      capacity_rows_ = std::max<Vertex>(n, capacity_rows_ * 2);
      rows_.resize(static_cast<std::size_t>(capacity_rows_) * stride_, 0);
    }
    n_ = n;
  }

  Vertex n_ = 0;
  std::size_t edges_ = 0;
  std::size_t stride_ = 0;
  Vertex capacity_rows_ = 0;
  std::vector<std::uint64_t> rows_;
};

/// Bijection of [n], stored 1-based (image[0] unused).
class Permutation {
 public:
  explicit Permutation(std::vector<Vertex> image_one_based) : image_(std::move(image_one_based)) {
    if (image_.empty()) image_.push_back(0);
    const Vertex n = size();
    std::vector<bool> seen(n + 1, false);
    for (Vertex i = 1; i <= n; ++i) {
      const Vertex v = image_[i];
      if (v < 1 || v > n || seen[v]) throw DomainError("permutation image is not a bijection of [n]");
      seen[v] = true;
    }
  }

  static Permutation identity(Vertex n) {
    std::vector<Vertex> image(n + 1);
    for (Vertex i = 0; i <= n; ++i) image[i] = i;
    return Permutation(std::move(image));
  }

  /// From a 1-based image vector as produced by CounterRng::permutation.
  static Permutation from_image(std::vector<Vertex> image) { return Permutation(std::move(image)); }

  Vertex size() const noexcept { return static_cast<Vertex>(image_.size() - 1); }
  Vertex operator()(Vertex i) const noexcept { return image_[i]; }
  const std::vector<Vertex>& image() const noexcept { return image_; }

  Permutation inverse() const {
    std::vector<Vertex> inv(image_.size(), 0);
    for (Vertex i = 1; i <= size(); ++i) inv[image_[i]] = i;
    return Permutation(std::move(inv));
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<Vertex> image_;
};

/// Psi_m^n: the graph G induces on [m].
inline Graph induced_prefix(const Graph& g, Vertex m) {
  if (m < 1 || m > g.order()) throw DomainError("induced_prefix: need 1 <= m <= v(G)");
  Graph out(m);
  for (Vertex j = 2; j <= m; ++j)
    for (Vertex i = 1; i < j; ++i)
      if (g.has_edge(i, j)) out.add_edge(i, j);
  return out;
}

/// The relabeled graph with edge set {{pi(i), pi(j)} : {i, j} in E(G)}.
inline Graph permute(const Graph& g, const Permutation& pi) {
  if (pi.size() != g.order()) throw DomainError("permute: permutation size differs from v(G)");
  Graph out(g.order());
  g.for_each_edge([&](Edge e) { out.add_edge(pi(e.i), pi(e.j)); });
  return out;
}

/// 1 iff {i, j} in E(G); pairs reaching beyond v(G) are simply absent.
inline bool edge_indicator(const Graph& g, Vertex i, Vertex j) {
  if (i < 1 || i >= j) throw DomainError("edge_indicator: need 1 <= i < j");
  if (j > g.order()) return false;
  return g.has_edge(i, j);
}

/// e_j(G): number of i < j adjacent to j.
inline std::size_t edges_into(const Graph& g, Vertex j) {
  if (j < 2 || j > g.order()) throw DomainError("edges_into: need 2 <= j <= v(G)");
  std::size_t count = 0;
  const auto r = g.row(j);
  const std::size_t full = (j - 1) / 64;
  for (std::size_t w = 0; w < full; ++w) count += std::popcount(r[w]);
  if (const unsigned rest = (j - 1) % 64; rest != 0) {
    count += std::popcount(r[full] & ((std::uint64_t{1} << rest) - 1));
  }
  return count;
}

struct EmbeddingLimits {
  Vertex max_pattern_order = 8;
};

/// t(H, G): number of injections phi: [v(H)] -> [v(G)] with
/// {phi(a), phi(b)} in E(G) <=> {a, b} in E(H).
///
/// Depth-first over partial injections; the candidate set for the next pattern
/// vertex is the intersection of adjacency / non-adjacency rows of the images
/// chosen so far, and the last level is counted with popcount.
inline std::uint64_t embedding_count(const Graph& pattern, const Graph& host, EmbeddingLimits limits = {}) {
  const Vertex k = pattern.order();
  const Vertex n = host.order();
  if (k < 1 || n < 1) throw DomainError("embedding_count: graphs must be nonempty");
  if (k > limits.max_pattern_order) {
    throw CapabilityError("embedding_count: pattern has " + std::to_string(k) + " vertices, guard is " +
                          std::to_string(limits.max_pattern_order));
  }
  if (k > n) return 0;

  const std::size_t words = host.words();
  std::vector<std::uint64_t> valid(words, ~std::uint64_t{0});
  if (n % 64 != 0) valid.back() = (std::uint64_t{1} << (n % 64)) - 1;

  // cand[h] holds the candidate set for pattern vertex h + 1.
  std::vector<std::vector<std::uint64_t>> cand(k, std::vector<std::uint64_t>(words));
  std::vector<Vertex> image(k + 1, 0);
  std::vector<std::uint64_t> used(words, 0);
  std::uint64_t total = 0;

  auto build = [&](Vertex h) {
    // Candidates for pattern vertex h (1-based) given image[1..h-1].
    auto& c = cand[h - 1];
    for (std::size_t w = 0; w < words; ++w) c[w] = valid[w] & ~used[w];
    for (Vertex g = 1; g < h; ++g) {
      const auto r = host.row(image[g]);
      if (pattern.has_edge(g, h)) {
        for (std::size_t w = 0; w < words; ++w) c[w] &= r[w];
      } else {
        for (std::size_t w = 0; w < words; ++w) c[w] &= ~r[w];
      }
    }
  };

  auto recurse = [&](auto&& self, Vertex h) -> void {
    build(h);
    const auto& c = cand[h - 1];
    if (h == k) {
      std::uint64_t level = 0;
      for (std::size_t w = 0; w < words; ++w) level += std::popcount(c[w]);
      if (__builtin_add_overflow(total, level, &total)) throw CapabilityError("embedding_count: count overflows 64 bits");
      return;
    }
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t bits = c[w];
      while (bits != 0) {
        const auto bit = static_cast<unsigned>(std::countr_zero(bits));
        const auto v = static_cast<Vertex>(w * 64 + bit + 1);
        image[h] = v;
        used[w] |= std::uint64_t{1} << bit;
        self(self, h + 1);
        used[w] &= ~(std::uint64_t{1} << bit);
        bits &= bits - 1;
      }
    }
  };
  recurse(recurse, 1);
  return total;
}

/// rho(H, G) = (v(G) - v(H))! / v(G)! * t(H, G).
inline double sampling_density(const Graph& pattern, const Graph& host, EmbeddingLimits limits = {}) {
  if (pattern.order() > host.order()) throw DomainError("sampling_density: v(H) > v(G)");
  long double falling = 1;
  for (Vertex i = 0; i < pattern.order(); ++i) falling *= static_cast<long double>(host.order() - i);
  return static_cast<double>(static_cast<long double>(embedding_count(pattern, host, limits)) / falling);
}

inline Rational sampling_density_exact(const Graph& pattern, const Graph& host, EmbeddingLimits limits = {}) {
  if (pattern.order() > host.order()) throw DomainError("sampling_density: v(H) > v(G)");
  BigInt falling = 1;
  for (Vertex i = 0; i < pattern.order(); ++i) falling *= host.order() - i;
  return Rational(BigInt(embedding_count(pattern, host, limits)), falling);
}

/// Text format: "n m" then m lines "i j" (1 <= i < j <= n).
inline Graph read_graph(std::istream& in) {
  long long n = -1;
  long long m = -1;
  if (!(in >> n >> m) || n < 1 || m < 0) throw ValidationError("graph: expected header \"n m\" with n >= 1");
  if (static_cast<unsigned long long>(m) > Graph::pair_count(static_cast<Vertex>(n))) {
    throw ValidationError("graph: more edges than vertex pairs");
  }
  Graph g(static_cast<Vertex>(n));
  for (long long e = 0; e < m; ++e) {
    long long i = 0;
    long long j = 0;
    if (!(in >> i >> j)) throw ValidationError("graph: expected " + std::to_string(m) + " edge lines");
    if (i < 1 || i >= j || j > n) {
      throw ValidationError("graph: edge " + std::to_string(i) + " " + std::to_string(j) + " out of range");
    }
    if (!g.add_edge(static_cast<Vertex>(i), static_cast<Vertex>(j))) {
      throw ValidationError("graph: duplicate edge " + std::to_string(i) + " " + std::to_string(j));
    }
  }
  std::string rest;
  if (in >> rest) throw ValidationError("graph: trailing data after edge list");
  return g;
}

inline Graph parse_graph(const std::string& text) {
  std::istringstream in(text);
  return read_graph(in);
}

inline void write_graph(std::ostream& out, const Graph& g) {
  out << g.order() << ' ' << g.edge_count() << '\n';
  for (const Edge& e : g.edges()) out << e.i << ' ' << e.j << '\n';
}

inline std::string format_graph(const Graph& g) {
  std::ostringstream out;
  write_graph(out, g);
  return out.str();
}

/// All 2^C(n,2) labeled graphs on [n], in bitmask order over pairs sorted by (j, i).
inline std::vector<Graph> all_graphs(Vertex n) {
  std::vector<Edge> pairs;
  for (Vertex j = 2; j <= n; ++j)
    for (Vertex i = 1; i < j; ++i) pairs.push_back({i, j});
  if (pairs.size() > 20) throw CapabilityError("all_graphs: too many vertex pairs to enumerate");
  std::vector<Graph> out;
  out.reserve(std::size_t{1} << pairs.size());
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << pairs.size()); ++mask) {
    Graph g(n);
    for (std::size_t b = 0; b < pairs.size(); ++b)
      if ((mask >> b) & 1u) g.add_edge(pairs[b].i, pairs[b].j);
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace persist

template <>
struct std::hash<persist::Graph> {
  std::size_t operator()(const persist::Graph& g) const noexcept {
    std::size_t h = g.order();
    for (persist::Vertex v = 1; v <= g.order(); ++v)
      for (std::uint64_t w : g.row(v)) h = h * 0x100000001B3ULL ^ std::hash<std::uint64_t>{}(w);
    return h;
  }
};
