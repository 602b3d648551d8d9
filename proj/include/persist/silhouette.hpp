#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "persist/errors.hpp"
#include "persist/exact.hpp"
#include "persist/rng.hpp"
#include "persist/tree.hpp"

namespace persist {

// ---------------------------------------------------------------------------
// Harmonic numbers and the records law
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kExactHarmonicCap = 10'000;

/// H(n) = 1 + 1/2 + ... + 1/n as an exact rational; H(0) = 0.
inline Rational harmonic_exact(std::uint64_t n) {
  if (n > kExactHarmonicCap) throw CapabilityError("harmonic_exact: n above 10^4, use harmonic()");
  // Sum over a common denominator, reduced once at the end.
  BigInt den = 1;
  BigInt num = 0;
  for (std::uint64_t k = 1; k <= n; ++k) {
    num = num * k + den;
    den *= k;
  }
  return Rational(num, den);
}

/// H(n) in floating point: tabulated below 2^20, asymptotic expansion above.
inline double harmonic(std::uint64_t n) {
  constexpr std::uint64_t kTable = std::uint64_t{1} << 20;
  static const std::vector<double> table = [] {
    std::vector<double> t(kTable);
    long double h = 0;
    t[0] = 0;
    for (std::uint64_t k = 1; k < kTable; ++k) {
      h += 1.0L / static_cast<long double>(k);
      t[k] = static_cast<double>(h);
    }
    return t;
  }();
  if (n < kTable) return table[n];
  const long double x = static_cast<long double>(n);
  const long double inv2 = 1.0L / (x * x);
  return static_cast<double>(std::log(x) + std::numbers::egamma_v<long double> + 0.5L / x -
                             inv2 / 12.0L + inv2 * inv2 / 120.0L);
}

inline constexpr std::uint64_t kRecordsCap = 500;

/// Exact law of S_n = zeta_1 + ... + zeta_n with P(zeta_k = 1) = 1/k.
/// Entry k of the result is P(S_n = k); entry 0 is zero.
inline std::vector<Rational> records_distribution(std::uint64_t n) {
  if (n < 1) throw DomainError("records_distribution: n must be >= 1");
  if (n > kRecordsCap) throw CapabilityError("records_distribution: n above 500");
  // Unsigned Stirling numbers of the first kind: c(t, k) = c(t-1, k-1) + (t-1) c(t-1, k).
  std::vector<BigInt> c(n + 1, 0);
  c[1] = 1;
  BigInt factorial = 1;
  for (std::uint64_t t = 2; t <= n; ++t) {
    for (std::uint64_t k = t; k >= 1; --k) c[k] = c[k - 1] + (t - 1) * c[k];
    factorial *= t;
  }
  std::vector<Rational> pmf(n + 1, 0);
  for (std::uint64_t k = 1; k <= n; ++k) pmf[k] = Rational(c[k], factorial);
  return pmf;
}

// ---------------------------------------------------------------------------
// Boundary function and dyadic integrals of binary trees
// ---------------------------------------------------------------------------

/// B_x(u) = min{k : (u_1, ..., u_k) not in x}.
inline std::size_t boundary_function(const BinaryTree& x, const End& u) {
  int v = 0;
  std::size_t k = 1;
  for (;; ++k) {
    v = x.child(v, u.bit(k));
    if (v == BinaryTree::kNone) return k;
  }
}

struct SilhouetteMass {
  double by_nodes = 0;      // sum over u in x of 2^-|u|
  double by_externals = 0;  // sum over external u of |u| 2^-|u|
};

/// L = integral of B_x against the Haar measure, evaluated both ways.
inline SilhouetteMass silhouette_mass_two_way(const BinaryTree& x) {
  SilhouetteMass m;
  for (std::size_t v = 0; v < x.size(); ++v) m.by_nodes += std::ldexp(1.0, -static_cast<int>(x.depth(static_cast<int>(v))));
  for (const auto& e : x.externals()) {
    const int len = static_cast<int>(x.depth(e.parent)) + 1;
    m.by_externals += len * std::ldexp(1.0, -len);
  }
  return m;
}

inline double silhouette_mass(const BinaryTree& x) { return silhouette_mass_two_way(x).by_nodes; }

/// beta(u) = 1/2 + sum_k (2u_k - 1) / 2^(k+1), the position of u in [0, 1].
inline double beta_map(const End& u) {
  double beta = 0.5;
  const std::size_t len = u.prefix().length();
  for (std::size_t k = 1; k <= len; ++k) beta += (2.0 * u.bit(k) - 1.0) * std::ldexp(1.0, -static_cast<int>(k + 1));
  beta += (2.0 * u.tail() - 1.0) * std::ldexp(1.0, -static_cast<int>(len + 1));
  return beta;
}

/// d(u, v) = 2^(1 - l) with l the first differing coordinate.
inline double end_distance(const End& u, const End& v) {
  const auto l = first_difference(u, v);
  return l ? std::ldexp(1.0, 1 - static_cast<int>(*l)) : 0.0;
}

/// Evaluates Y_n(u) = integral over {v < u} of (B_x(v) - H(n)) for many ends of
/// one tree. {v < u} is the disjoint union of the cylinders A_{u(k)}, k in K(u),
/// and for w in x or external, integral_{A_w} B = |w| 2^-|w| + sum_{v in x,
/// v >= w} 2^-|v|. Cylinders below an external node a carry B = |a|.
class SmoothedSilhouette {
 public:
  explicit SmoothedSilhouette(const BinaryTree& x) : x_(x), harmonic_n_(harmonic(x.size())) {
    mass_.assign(x.size(), 0.0);
    for (std::size_t v = x.size(); v-- > 0;) {
      mass_[v] += std::ldexp(1.0, -static_cast<int>(x.depth(static_cast<int>(v))));
      if (v > 0) mass_[x.parent(static_cast<int>(v))] += mass_[v];
    }
  }

  /// sum_{v in x, v >= node} 2^-|v|.
  double subtree_mass(int node) const { return node == BinaryTree::kNone ? 0.0 : mass_[node]; }

  double operator()(const End& u) const {
    const double h = harmonic_n_;
    double y = 0;
    int v = 0;               // node of (u_1, ..., u_{k-1}) while inside x
    std::size_t exit = 0;    // |a| once the path has left x at the external node a
    const std::size_t explicit_terms = std::max(u.prefix().length(), x_.height() + 1);
    for (std::size_t k = 1; k <= explicit_terms; ++k) {
      const int bit = u.bit(k);
      if (bit == 1) {
        const double cyl = std::ldexp(1.0, -static_cast<int>(k));
        if (exit == 0) {
          // u(k) is in x or external: |u(k)| 2^-|u(k)| + subtree mass.
          y += static_cast<double>(k) * cyl + subtree_mass(x_.child(v, 0));
        } else {
          // A_{u(k)} lies inside A_a where B is constant |a|.
          y += static_cast<double>(exit) * cyl;
        }
        y -= h * cyl;
      }
      if (exit == 0) {
        v = x_.child(v, bit);
        if (v == BinaryTree::kNone) exit = k;
      }
    }
    if (u.tail() == 1) {
      // Every k > K0 is in K(u) and the path has left x by then:
      // sum_{k > K0} (|a| - H) 2^-k = (|a| - H) 2^-K0.
      const auto k0 = static_cast<int>(explicit_terms);
      y += (static_cast<double>(exit) - h) * std::ldexp(1.0, -k0);
    }
    return y;
  }

 private:
  const BinaryTree& x_;
  double harmonic_n_;
  std::vector<double> mass_;
};

inline double smoothed_silhouette(const BinaryTree& x, const End& u) { return SmoothedSilhouette(x)(u); }

/// E[L_{n+1} - H(n+1) | x] - (L_n - H(n)) in exact arithmetic over the
/// one-step law of the BST chain.
inline Rational silhouette_martingale_defect(const BinaryTree& x) {
  auto mass = [](const BinaryTree& t) {
    Rational s = 0;
    for (std::size_t v = 0; v < t.size(); ++v) s += Rational(BigInt(1), BigInt(1) << t.depth(static_cast<int>(v)));
    return s;
  };
  const std::uint64_t n = x.size();
  Rational expected = 0;
  const Rational w = ratio(1, static_cast<std::int64_t>(x.external_count()));
  for (std::size_t slot = 0; slot < x.external_count(); ++slot) {
    BinaryTree y = x;
    y.grow(slot);
    expected += w * (mass(y) - harmonic_exact(n + 1));
  }
  return expected - (mass(x) - harmonic_exact(n));
}

// ---------------------------------------------------------------------------
// xi-tables: truncated models of the limit random measure
// ---------------------------------------------------------------------------

/// C(t) = 1 + (ln t + ln(1 - t)) / 2 on (0, 1).
inline double c_func(double t) {
  if (!(t > 0.0 && t < 1.0)) throw DomainError("c_func: t must lie in (0,1)");
  return 1.0 + 0.5 * (std::log(t) + std::log1p(-t));
}

inline constexpr std::size_t kMaxXiDepth = 24;

/// Split proportions xi_u for all words |u| < depth. Entry u gives the share of
/// the cylinder A_u that falls into A_{u0}.
class XiTable {
 public:
  XiTable(std::size_t depth, double fill) : depth_(depth) {
    if (depth < 1) throw DomainError("xi table depth must be >= 1");
    if (depth > kMaxXiDepth) throw CapabilityError("xi table depth above 24");
    check_value(fill);
    values_.assign((std::size_t{1} << depth) - 1, fill);
  }

  std::size_t depth() const noexcept { return depth_; }

  /// Heap index of a word: 2^|u| - 1 + (u read as a binary number).
  static std::size_t index(const Word& u) {
    std::size_t idx = 0;
    for (std::size_t k = 1; k <= u.length(); ++k) idx = 2 * idx + u.bit(k);
    return (std::size_t{1} << u.length()) - 1 + idx;
  }

  double operator[](const Word& u) const {
    if (u.length() >= depth_) throw DomainError("xi table: word deeper than the table");
    return values_[index(u)];
  }
  void set(const Word& u, double value) {
    if (u.length() >= depth_) throw DomainError("xi table: word deeper than the table");
    check_value(value);
    values_[index(u)] = value;
  }

  /// By heap index (0 = root, children of i are 2i+1 and 2i+2).
  double at(std::size_t heap_index) const { return values_[heap_index]; }
  void set_at(std::size_t heap_index, double value) {
    check_value(value);
    values_.at(heap_index) = value;
  }
  std::size_t entry_count() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }

  friend bool operator==(const XiTable&, const XiTable&) = default;

 private:
  static void check_value(double v) {
    if (!(v > 0.0 && v < 1.0)) throw DomainError("xi values must lie strictly inside (0,1)");
  }

  std::size_t depth_;
  std::vector<double> values_;
};

/// i.i.d. uniform(0,1) entries drawn in heap order.
inline XiTable sample_xi_table(std::size_t depth, CounterRng& rng) {
  if (depth > kMaxXiDepth) throw CapabilityError("sample_xi_table: depth above 24");
  XiTable t(depth, 0.5);
  for (std::size_t i = 0; i < t.entry_count(); ++i) t.set_at(i, rng.uniform01());
  return t;
}

/// X(A_u): product along the path of xi (left) or 1 - xi (right).
inline double cylinder_mass(const XiTable& xt, const Word& u) {
  if (u.length() > xt.depth()) throw DomainError("cylinder_mass: word deeper than the table");
  double mass = 1.0;
  std::size_t idx = 0;
  for (std::size_t k = 1; k <= u.length(); ++k) {
    const double xi = xt.at(idx);
    mass *= u.bit(k) == 0 ? xi : 1.0 - xi;
    idx = 2 * idx + 1 + u.bit(k);
  }
  return mass;
}

/// ln X(A_u) for all |u| = k, in heap order of that level.
inline std::vector<double> level_log_masses(const XiTable& xt, std::size_t k) {
  std::vector<double> level{0.0};
  for (std::size_t len = 0; len < k; ++len) {
    std::vector<double> next(level.size() * 2);
    const std::size_t base = (std::size_t{1} << len) - 1;
    for (std::size_t b = 0; b < level.size(); ++b) {
      const double xi = xt.at(base + b);
      next[2 * b] = level[b] + std::log(xi);
      next[2 * b + 1] = level[b] + std::log1p(-xi);
    }
    level = std::move(next);
  }
  return level;
}

/// L_{inf,k} = sum_{|u| < k} 2^-|u| C(xi_u).
inline double l_infty_partial(const XiTable& xt, std::size_t k) {
  if (k > xt.depth()) throw DomainError("l_infty_partial: k exceeds table depth");
  double total = 0;
  for (std::size_t len = 0; len < k; ++len) {
    const std::size_t base = (std::size_t{1} << len) - 1;
    double level = 0;
    for (std::size_t b = 0; b < (std::size_t{1} << len); ++b) level += c_func(xt.at(base + b));
    total += std::ldexp(level, -static_cast<int>(len));
  }
  return total;
}

/// k + sum_{|u| = k} 2^-k ln X(A_u), i.e. sum_{|u|=k} 2^-k ln(2^k X(A_u)).
inline double kl_identity_rhs(const XiTable& xt, std::size_t k) {
  if (k > xt.depth()) throw DomainError("kl_identity_rhs: k exceeds table depth");
  double sum = 0;
  for (double lm : level_log_masses(xt, k)) sum += lm;
  return static_cast<double>(k) + std::ldexp(sum, -static_cast<int>(k));
}

/// Z_k(u) = X(A_u) / 2^-|u|.
inline double density_path(const XiTable& xt, const Word& u) {
  return std::ldexp(cylinder_mass(xt, u), static_cast<int>(u.length()));
}

/// L_inf(w) truncated to the table: sum_{v >= w, |v| < depth} 2^-|v| C(xi_v).
inline double l_infty_at(const XiTable& xt, const Word& w) {
  if (w.length() >= xt.depth()) return 0.0;
  double total = 0;
  std::size_t first = XiTable::index(w);
  std::size_t count = 1;
  for (std::size_t len = w.length(); len < xt.depth(); ++len) {
    double level = 0;
    for (std::size_t i = first; i < first + count; ++i) level += c_func(xt.at(i));
    total += std::ldexp(level, -static_cast<int>(len));
    first = 2 * first + 1;
    count *= 2;
  }
  return total;
}

namespace detail {

inline void require_depth(std::size_t m, const XiTable& xt) {
  if (m > xt.depth()) throw DomainError("partial sum index exceeds table depth");
}

/// u(k) = (u_1, ..., u_{k-1}, 0).
inline Word left_turn(const End& u, std::size_t k) { return u.head(k - 1).child(0); }

}  // namespace detail

/// Y'_{inf,m}(u) = sum_{k in K(u), k <= m} L_inf(u(k)).
inline double y_prime_partial(const XiTable& xt, const End& u, std::size_t m) {
  detail::require_depth(m, xt);
  double total = 0;
  for (std::size_t k = 1; k <= m; ++k)
    if (u.bit(k) == 1) total += l_infty_at(xt, detail::left_turn(u, k));
  return total;
}

/// Y''_{inf,m}(u) = sum_{k in K(u), k <= m} 2^-k ln(2^k X(A_{u(k)})).
inline double y_doubleprime_partial(const XiTable& xt, const End& u, std::size_t m) {
  detail::require_depth(m, xt);
  double total = 0;
  for (std::size_t k = 1; k <= m; ++k) {
    if (u.bit(k) == 1) {
      const double mass = cylinder_mass(xt, detail::left_turn(u, k));
      total += std::ldexp(static_cast<double>(k) * std::numbers::ln2 + std::log(mass), -static_cast<int>(k));
    }
  }
  return total;
}

/// Table format: one "word value" line per entry, "-" for the root word.
inline XiTable read_xi_table(std::istream& in) {
  std::vector<std::pair<Word, double>> entries;
  std::string word;
  double value = 0;
  std::size_t depth = 0;
  while (in >> word >> value) {
    Word w;
    try {
      w = Word(word == "-" ? std::string() : word);
    } catch (const DomainError&) {
      throw ValidationError("xi table: bad word \"" + word + "\"");
    }
    depth = std::max(depth, w.length() + 1);
    entries.emplace_back(std::move(w), value);
  }
  if (!in.eof()) throw ValidationError("xi table: malformed line");
  if (entries.empty()) throw ValidationError("xi table: no entries");
  if (entries.size() != (std::size_t{1} << depth) - 1) throw ValidationError("xi table: incomplete depth window");
  try {
    XiTable t(depth, 0.5);
    std::vector<bool> seen(t.entry_count(), false);
    for (const auto& [w, v] : entries) {
      if (seen[XiTable::index(w)]) throw ValidationError("xi table: duplicate word " + w.str());
      seen[XiTable::index(w)] = true;
      t.set(w, v);
    }
    return t;
  } catch (const DomainError& e) {
    throw ValidationError(std::string("xi table: ") + e.what());
  }
}

}  // namespace persist
