#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "persist/errors.hpp"

namespace persist {

/// Finite 0-1 word; the empty word is the root of the complete binary tree.
class Word {
 public:
  Word() = default;
  explicit Word(std::string_view bits) : bits_(bits) {
    for (char c : bits_)
      if (c != '0' && c != '1') throw DomainError("word must consist of 0/1 characters");
  }

  std::size_t length() const noexcept { return bits_.size(); }
  bool empty() const noexcept { return bits_.empty(); }
  /// k-th letter, 1-based.
  int bit(std::size_t k) const noexcept { return bits_[k - 1] - '0'; }
  const std::string& str() const noexcept { return bits_; }

  Word child(int b) const {
    Word w = *this;
    w.bits_.push_back(static_cast<char>('0' + b));
    return w;
  }
  Word parent() const {
    if (empty()) throw DomainError("the root has no parent");
    return Word(std::string_view(bits_).substr(0, bits_.size() - 1));
  }
  Word prefix(std::size_t len) const { return Word(std::string_view(bits_).substr(0, len)); }
  bool is_prefix_of(const Word& other) const noexcept {
    return other.bits_.size() >= bits_.size() && other.bits_.compare(0, bits_.size(), bits_) == 0;
  }

  friend Word operator+(const Word& a, const Word& b) {
    Word w = a;
    w.bits_ += b.bits_;
    return w;
  }

  friend auto operator<=>(const Word&, const Word&) = default;

 private:
  std::string bits_;
};

/// Infinite 0-1 sequence given by a finite prefix followed by a constant tail
/// bit. Stored in canonical form (trailing prefix letters equal to the tail
/// are absorbed), so equal sequences compare equal.
class End {
 public:
  End() = default;
  End(Word prefix, int tail_bit) : tail_(tail_bit) {
    if (tail_bit != 0 && tail_bit != 1) throw DomainError("tail bit must be 0 or 1");
    std::string bits = prefix.str();
    while (!bits.empty() && bits.back() - '0' == tail_) bits.pop_back();
    prefix_ = Word(bits);
  }
  static End zeros() { return End(Word(), 0); }
  static End ones() { return End(Word(), 1); }

  /// k-th coordinate, 1-based.
  int bit(std::size_t k) const noexcept { return k <= prefix_.length() ? prefix_.bit(k) : tail_; }
  const Word& prefix() const noexcept { return prefix_; }
  int tail() const noexcept { return tail_; }
  /// The word (u_1, ..., u_k).
  Word head(std::size_t k) const {
    std::string s;
    s.reserve(k);
    for (std::size_t i = 1; i <= k; ++i) s.push_back(static_cast<char>('0' + bit(i)));
    return Word(s);
  }

  friend bool operator==(const End&, const End&) = default;

 private:
  Word prefix_;
  int tail_ = 0;
};

/// First coordinate where u and v differ (1-based), or nullopt if u == v.
inline std::optional<std::size_t> first_difference(const End& u, const End& v) {
  const std::size_t span = std::max(u.prefix().length(), v.prefix().length()) + 1;
  for (std::size_t k = 1; k <= span; ++k)
    if (u.bit(k) != v.bit(k)) return k;
  return std::nullopt;
}

/// The total order on ends: u precedes v iff u_l = 0 and v_l = 1 at the
/// first differing coordinate l.
inline bool precedes(const End& u, const End& v) {
  const auto l = first_difference(u, v);
  return l && u.bit(*l) == 0;
}

/// Finite prefix-stable set of words, grown by attaching external nodes.
class BinaryTree {
 public:
  static constexpr int kNone = -1;

  struct External {
    int parent;
    int side;
  };

  /// The root-only tree {root}.
  BinaryTree() {
    nodes_.push_back(Node{});
    externals_ = {External{0, 0}, External{0, 1}};
    nodes_[0].external_slot = {0, 1};
  }

  /// Validates prefix stability; the root must be present.
  static BinaryTree from_words(std::vector<Word> words) {
    std::sort(words.begin(), words.end(), [](const Word& a, const Word& b) {
      return a.length() != b.length() ? a.length() < b.length() : a < b;
    });
    words.erase(std::unique(words.begin(), words.end()), words.end());
    if (words.empty() || !words.front().empty()) throw DomainError("binary tree must contain the root");
    BinaryTree t;
    for (std::size_t k = 1; k < words.size(); ++k) {
      const Word& w = words[k];
      const int parent = t.find(w.parent());
      if (parent == kNone) throw DomainError("word set is not prefix-stable: missing ancestor of " + w.str());
      t.attach(parent, w.bit(w.length()));
    }
    return t;
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t external_count() const noexcept { return externals_.size(); }

  /// Node index of word w, or kNone.
  int find(const Word& w) const noexcept {
    int v = 0;
    for (std::size_t k = 1; k <= w.length() && v != kNone; ++k) v = nodes_[v].child[w.bit(k)];
    return v;
  }
  bool contains(const Word& w) const noexcept { return find(w) != kNone; }

  int child(int node, int side) const noexcept { return nodes_[node].child[side]; }
  int parent(int node) const noexcept { return nodes_[node].parent; }
  std::size_t depth(int node) const noexcept { return nodes_[node].depth; }

  Word word(int node) const {
    std::string s(nodes_[node].depth, '0');
    for (int v = node; v != 0; v = nodes_[v].parent) s[nodes_[v].depth - 1] = static_cast<char>('0' + nodes_[v].side);
    return Word(s);
  }

  std::size_t height() const noexcept { return height_; }

  const std::vector<External>& externals() const noexcept { return externals_; }
  Word external_word(std::size_t slot) const { return word(externals_[slot].parent).child(externals_[slot].side); }

  std::vector<Word> words() const {
    std::vector<Word> out;
    out.reserve(size());
    for (std::size_t v = 0; v < size(); ++v) out.push_back(word(static_cast<int>(v)));
    std::sort(out.begin(), out.end());
    return out;
  }
  std::vector<Word> external_words() const {
    std::vector<Word> out;
    out.reserve(externals_.size());
    for (std::size_t s = 0; s < externals_.size(); ++s) out.push_back(external_word(s));
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Incorporates external node number `slot`; returns the new node index.
  int grow(std::size_t slot) {
    if (slot >= externals_.size()) throw DomainError("external slot out of range");
    const External e = externals_[slot];
    return attach(e.parent, e.side);
  }

  /// Incorporates the external node w.
  int grow(const Word& w) {
    if (w.empty()) throw DomainError("the root is never external");
    const int p = find(w.parent());
    const int side = w.bit(w.length());
    if (p == kNone || nodes_[p].child[side] != kNone) throw DomainError("word " + w.str() + " is not an external node");
    return attach(p, side);
  }

  /// #x(u) for every node, indexed by node.
  std::vector<std::size_t> subtree_sizes() const {
    std::vector<std::size_t> sizes(size(), 1);
    for (std::size_t v = size(); v-- > 1;) sizes[nodes_[v].parent] += sizes[v];
    return sizes;
  }

  /// #x(u); zero when u is not in x.
  std::size_t subtree_size(const Word& u) const {
    const int v = find(u);
    if (v == kNone) return 0;
    std::size_t count = 0;
    std::vector<int> stack{v};
    while (!stack.empty()) {
      const int w = stack.back();
      stack.pop_back();
      ++count;
      for (int c : nodes_[w].child)
        if (c != kNone) stack.push_back(c);
    }
    return count;
  }

  /// Preorder shape code ("1" per node followed by its two child codes, "0"
  /// for an empty slot). Equal codes iff equal word sets.
  std::string shape_code() const {
    std::string code;
    code.reserve(2 * size() + 1);
    auto visit = [&](auto&& self, int v) -> void {
      if (v == kNone) {
        code.push_back('0');
        return;
      }
      code.push_back('1');
      self(self, nodes_[v].child[0]);
      self(self, nodes_[v].child[1]);
    };
    visit(visit, 0);
    return code;
  }

  friend bool operator==(const BinaryTree& a, const BinaryTree& b) {
    return a.size() == b.size() && a.shape_code() == b.shape_code();
  }
  friend std::strong_ordering operator<=>(const BinaryTree& a, const BinaryTree& b) {
    if (auto c = a.size() <=> b.size(); c != 0) return c;
    return a.shape_code() <=> b.shape_code();
  }

 private:
  struct Node {
    int parent = kNone;
    int side = 0;
    std::uint32_t depth = 0;
    std::array<int, 2> child{kNone, kNone};
    std::array<int, 2> external_slot{kNone, kNone};
  };

  int attach(int parent, int side) {
    const int v = static_cast<int>(nodes_.size());
    const std::uint32_t depth = nodes_[parent].depth + 1;
    nodes_.push_back(Node{parent, side, depth, {kNone, kNone}, {kNone, kNone}});
    nodes_[parent].child[side] = v;
    height_ = std::max<std::size_t>(height_, depth);

    // Swap-remove the consumed external slot, then add the two new ones.
    const int slot = nodes_[parent].external_slot[side];
    const External last = externals_.back();
    externals_[slot] = last;
    nodes_[last.parent].external_slot[last.side] = slot;
    externals_.pop_back();
    nodes_[parent].external_slot[side] = kNone;
    for (int b = 0; b < 2; ++b) {
      nodes_[v].external_slot[b] = static_cast<int>(externals_.size());
      externals_.push_back(External{v, b});
    }
    return v;
  }

  std::vector<Node> nodes_;
  std::vector<External> externals_;
  std::size_t height_ = 0;
};

/// Binary search tree carrying the stored keys (node i holds keys()[i]).
class LabeledTree {
 public:
  LabeledTree() = default;

  const BinaryTree* shape() const noexcept { return keys_.empty() ? nullptr : &tree_; }
  const BinaryTree& tree() const {
    if (keys_.empty()) throw DomainError("empty labeled tree has no shape");
    return tree_;
  }
  std::size_t size() const noexcept { return keys_.size(); }
  const std::vector<double>& keys() const noexcept { return keys_; }

  /// Standard BST insertion: smaller keys go left (0), others right (1).
  /// Returns the node index that received the key.
  int insert(double key) {
    if (keys_.empty()) {
      keys_.push_back(key);
      return 0;
    }
    int v = 0;
    for (;;) {
      if (key == keys_[v]) throw DomainError("bst_insert_key: duplicate key");
      const int side = key < keys_[v] ? 0 : 1;
      const int next = tree_.child(v, side);
      if (next == BinaryTree::kNone) {
        const int w = tree_.grow(tree_.word(v).child(side));
        keys_.push_back(key);
        return w;
      }
      v = next;
    }
  }

 private:
  BinaryTree tree_;
  std::vector<double> keys_;
};

inline LabeledTree bst_insert_key(LabeledTree t, double key) {
  t.insert(key);
  return t;
}

/// Tree text format: one word per line, "-" for the root.
inline BinaryTree read_tree(std::istream& in) {
  std::vector<Word> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    try {
      words.emplace_back(line == "-" ? std::string_view() : std::string_view(line));
    } catch (const DomainError&) {
      throw ValidationError("tree: bad word line \"" + line + "\"");
    }
  }
  try {
    return BinaryTree::from_words(std::move(words));
  } catch (const DomainError& e) {
    throw ValidationError(std::string("tree: ") + e.what());
  }
}

inline void write_tree(std::ostream& out, const BinaryTree& t) {
  for (const Word& w : t.words()) out << (w.empty() ? "-" : w.str()) << '\n';
}

}  // namespace persist
