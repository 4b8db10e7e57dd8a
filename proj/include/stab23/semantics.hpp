// Pure interpretation of an arena state: base tree, active tree, content,
// the normal/safe predicates and per-segment statistics.
//
// Nothing here mutates the arena. The active tree is the fixed point of the
// truncation rules applied to the base tree, higher segments first and, within
// a node, in the order
//   (a) a key pair with high <= low (segments >= 2),
//   (b) a child without keys (segment 1) or without relevant keys,
//   (c) two overlapping relevant keys -- the one at the larger slot index goes;
//       pairs are resolved in lexicographic (left, right) order and two slots
//       naming the same child count as overlapping,
//   (d) a child that is not in the tree,
//   (e) a relevant key of a child lying outside [low, high] of its parent slot.
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "stab23/arena.hpp"
#include "stab23/snapshot.hpp"

namespace stab23 {

struct Item {
  Key key = 0;
  std::vector<std::uint8_t> datum;

  friend bool operator==(const Item&, const Item&) = default;
  friend auto operator<=>(const Item&, const Item&) = default;
};

namespace semantics {

struct TreeNode {
  Link link;
  unsigned segment = 0;
  /// Relevant key (segments >= 2) or occupied item slot (segment 1).
  std::array<bool, kSlotsPerNode> live{};
  /// Index of the child in Tree::nodes, -1 when the link does not name a tree node.
  std::array<int, kSlotsPerNode> child{-1, -1, -1};
  int parent = -1;
  bool present = true;

  std::size_t live_count() const noexcept {
    return static_cast<std::size_t>(std::count(live.begin(), live.end(), true));
  }
};

/// Nodes in breadth-first order from the root; removed nodes keep their
/// entry with `present == false`.
struct Tree {
  std::vector<TreeNode> nodes;

  bool empty() const noexcept { return node_count() == 0; }

  std::size_t node_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.present; }));
  }

  const TreeNode* find(Link l) const noexcept {
    for (const auto& n : nodes)
      if (n.present && n.link == l) return &n;
    return nullptr;
  }

  bool contains(Link l) const noexcept { return find(l) != nullptr; }
};

using BaseTree = Tree;
using ActiveTree = Tree;

/// Same node set and, per node, the same surviving slots.
inline bool same_tree(const Tree& a, const Tree& b) {
  std::vector<std::pair<Link, std::array<bool, kSlotsPerNode>>> x;
  std::vector<std::pair<Link, std::array<bool, kSlotsPerNode>>> y;
  for (const auto& n : a.nodes)
    if (n.present) x.emplace_back(n.link, n.live);
  for (const auto& n : b.nodes)
    if (n.present) y.emplace_back(n.link, n.live);
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  return x == y;
}

inline BaseTree base_tree(const Arena& a) {
  BaseTree t;
  const Link root = a.registers.root;
  if (!a.resolvable(root)) return t;
  t.nodes.push_back(TreeNode{root, root.segment});

  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const Link link = t.nodes[i].link;
    const unsigned seg = t.nodes[i].segment;
    const Node& n = a.node(link);
    for (std::size_t s = 0; s < kSlotsPerNode; ++s) {
      if (seg == 1) {
        t.nodes[i].live[s] = n.slots[s].occupied != 0;
        continue;
      }
      const Link q = n.slots[s].child;
      if (q.is_null()) continue;
      t.nodes[i].live[s] = true;
      if (!a.resolvable(q) || q.segment != seg - 1 || a.node(q).parent != link) continue;
      int existing = -1;
      for (std::size_t e = 0; e < s; ++e) {
        const int c = t.nodes[i].child[e];
        if (c >= 0 && t.nodes[static_cast<std::size_t>(c)].link == q) existing = c;
      }
      if (existing >= 0) {
        t.nodes[i].child[s] = existing;
        continue;
      }
      TreeNode child{q, q.segment};
      child.parent = static_cast<int>(i);
      t.nodes[i].child[s] = static_cast<int>(t.nodes.size());
      t.nodes.push_back(child);
    }
  }
  return t;
}

namespace detail {

/// Item key or key pair of a slot as a closed range.
inline std::pair<Key, Key> slot_range(const Node& n, unsigned segment, std::size_t s) {
  const Slot& sl = n.slots[s];
  return segment == 1 ? std::pair{sl.low, sl.low} : std::pair{sl.low, sl.high};
}

inline bool ranges_overlap(std::pair<Key, Key> x, std::pair<Key, Key> y) {
  return x.first <= y.second && y.first <= x.second;
}

inline void remove_subtree(Tree& t, int idx) {
  std::vector<int> stack{idx};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    auto& n = t.nodes[static_cast<std::size_t>(i)];
    if (!n.present) continue;
    n.present = false;
    for (int c : n.child)
      if (c >= 0) stack.push_back(c);
  }
}

/// Makes slot `s` of node `i` irrelevant; its child leaves the tree unless
/// another surviving slot of the same node still names it.
inline void kill_slot(Tree& t, int i, std::size_t s) {
  auto& n = t.nodes[static_cast<std::size_t>(i)];
  n.live[s] = false;
  if (n.segment == 1) return;
  const int c = n.child[s];
  if (c < 0) return;
  for (std::size_t o = 0; o < kSlotsPerNode; ++o)
    if (n.live[o] && n.child[o] == c) return;
  remove_subtree(t, c);
}

inline bool child_in_tree(const Tree& t, const TreeNode& n, std::size_t s) {
  const int c = n.child[s];
  return c >= 0 && t.nodes[static_cast<std::size_t>(c)].present;
}

/// Applies the highest-priority applicable rule at node `i`; false when none applies.
inline bool apply_first_rule(Tree& t, const Arena& a, int i) {
  const TreeNode& tn = t.nodes[static_cast<std::size_t>(i)];
  const Node& n = a.node(tn.link);
  const unsigned seg = tn.segment;

  if (seg >= 2) {
    for (std::size_t s = 0; s < kSlotsPerNode; ++s)
      if (tn.live[s] && n.slots[s].high <= n.slots[s].low) return kill_slot(t, i, s), true;
    for (std::size_t s = 0; s < kSlotsPerNode; ++s)
      if (tn.live[s] && child_in_tree(t, tn, s) &&
          t.nodes[static_cast<std::size_t>(tn.child[s])].live_count() == 0)
        return kill_slot(t, i, s), true;
  }
  for (std::size_t x = 0; x < kSlotsPerNode; ++x) {
    if (!tn.live[x]) continue;
    for (std::size_t y = x + 1; y < kSlotsPerNode; ++y) {
      if (!tn.live[y]) continue;
      const bool same_child = seg >= 2 && n.slots[x].child == n.slots[y].child;
      if (same_child || ranges_overlap(slot_range(n, seg, x), slot_range(n, seg, y)))
        return kill_slot(t, i, y), true;
    }
  }
  if (seg >= 2) {
    for (std::size_t s = 0; s < kSlotsPerNode; ++s)
      if (tn.live[s] && !child_in_tree(t, tn, s)) return kill_slot(t, i, s), true;
    for (std::size_t s = 0; s < kSlotsPerNode; ++s) {
      if (!tn.live[s]) continue;
      const int c = tn.child[s];
      const TreeNode& cn = t.nodes[static_cast<std::size_t>(c)];
      const Node& child = a.node(cn.link);
      for (std::size_t r = 0; r < kSlotsPerNode; ++r) {
        if (!cn.live[r]) continue;
        const auto [lo, hi] = slot_range(child, cn.segment, r);
        if (lo < n.slots[s].low || hi > n.slots[s].high) return kill_slot(t, c, r), true;
      }
    }
  }
  return false;
}

inline void settle(Tree& t, const Arena& a, int i) {
  while (apply_first_rule(t, a, i)) {
  }
  const TreeNode& tn = t.nodes[static_cast<std::size_t>(i)];
  if (tn.segment >= 2) {
    const auto children = tn.child;
    const auto live = tn.live;
    for (std::size_t s = 0; s < kSlotsPerNode; ++s)
      if (live[s] && children[s] >= 0 && t.nodes[static_cast<std::size_t>(children[s])].present)
        settle(t, a, children[s]);
  }
  // Lower-level removals can only make rule (b) applicable here.
  while (apply_first_rule(t, a, i)) {
  }
}

}  // namespace detail

inline ActiveTree active_tree(const Arena& a) {
  ActiveTree t = base_tree(a);
  if (!t.nodes.empty()) detail::settle(t, a, 0);
  return t;
}

/// Items held by segment-1 nodes of the active tree, sorted.
inline std::vector<Item> content(const Arena& a, const ActiveTree& t) {
  std::vector<Item> items;
  for (const auto& tn : t.nodes) {
    if (!tn.present || tn.segment != 1) continue;
    const Node& n = a.node(tn.link);
    for (std::size_t s = 0; s < kSlotsPerNode; ++s) {
      if (!tn.live[s]) continue;
      auto d = a.datum(tn.link, s);
      items.push_back(Item{n.slots[s].low, {d.begin(), d.end()}});
    }
  }
  std::sort(items.begin(), items.end());
  return items;
}

inline std::vector<Item> content(const Arena& a) { return content(a, active_tree(a)); }

inline std::vector<Key> content_keys(const Arena& a) {
  std::vector<Key> keys;
  const ActiveTree t = active_tree(a);
  for (const auto& tn : t.nodes) {
    if (!tn.present || tn.segment != 1) continue;
    const Node& n = a.node(tn.link);
    for (std::size_t s = 0; s < kSlotsPerNode; ++s)
      if (tn.live[s]) keys.push_back(n.slots[s].low);
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

namespace detail {

// Returns the subtree's [min, max] item key when it is a well-formed 2-3
// subtree with exact ranges and packed, ascending slots.
inline std::optional<std::pair<Key, Key>> check_shape(const Tree& t, const Arena& a, int i, bool is_root) {
  const TreeNode& tn = t.nodes[static_cast<std::size_t>(i)];
  const Node& n = a.node(tn.link);
  const std::size_t count = tn.live_count();
  for (std::size_t s = 0; s < kSlotsPerNode; ++s)
    if (tn.live[s] != (s < count)) return std::nullopt;

  if (tn.segment == 1) {
    if (count < (is_root ? 1u : 2u) || count > 3) return std::nullopt;
    for (std::size_t s = 1; s < count; ++s)
      if (n.slots[s - 1].low >= n.slots[s].low) return std::nullopt;
    return std::pair{n.slots[0].low, n.slots[count - 1].low};
  }
  if (count < 2 || count > 3) return std::nullopt;
  for (std::size_t s = 0; s < count; ++s) {
    if (!child_in_tree(t, tn, s)) return std::nullopt;
    const auto sub = check_shape(t, a, tn.child[s], false);
    if (!sub || sub->first != n.slots[s].low || sub->second != n.slots[s].high) return std::nullopt;
    if (s > 0 && n.slots[s - 1].high >= n.slots[s].low) return std::nullopt;
  }
  return std::pair{n.slots[0].low, n.slots[count - 1].high};
}

}  // namespace detail

/// Base tree equals active tree and it is a 2-3 tree with exact key ranges.
inline bool is_normal(const Arena& a) {
  const BaseTree base = base_tree(a);
  const ActiveTree active = active_tree(a);
  if (!same_tree(base, active)) return false;
  if (active.empty()) return true;
  return detail::check_shape(active, a, 0, true).has_value();
}

/// Number of detached nodes reachable from free[segment] before the chain
/// leaves the segment, reaches a non-detached node or revisits a node.
inline std::size_t free_chain_size(const Arena& a, unsigned segment) {
  std::vector<bool> seen(a.segment_size(segment), false);
  std::size_t size = 0;
  Link l = a.free_head(segment);
  while (a.detached(l, segment) && !seen[l.slot]) {
    seen[l.slot] = true;
    ++size;
    l = a.node(l).free_next;
  }
  return size;
}

struct SegmentStats {
  std::size_t size = 0;  // |S_i|
  std::size_t n = 0;     // active tree nodes
  std::size_t n3 = 0;    // with three children (items at segment 1)
  std::size_t n2 = 0;
  std::size_t n1 = 0;
  std::size_t f = 0;     // free chain size
  std::uint64_t c = 0;   // collection attempts so far

  friend bool operator==(const SegmentStats&, const SegmentStats&) = default;
};

struct Stats {
  std::vector<SegmentStats> segments;  // index i-1 for S_i
  std::size_t base_nodes = 0;          // m-bar when taken at the initial state
  std::size_t items = 0;               // n-bar when taken at the initial state

  const SegmentStats& at(unsigned segment) const { return segments.at(segment - 1); }
};

inline Stats stats(const Arena& a, std::span<const std::uint64_t> attempts = {}) {
  Stats st;
  st.segments.resize(a.pmax());
  for (unsigned seg = 1; seg <= a.pmax(); ++seg) {
    auto& s = st.segments[seg - 1];
    s.size = a.segment_size(seg);
    s.f = free_chain_size(a, seg);
    if (seg - 1 < attempts.size()) s.c = attempts[seg - 1];
  }
  st.base_nodes = base_tree(a).node_count();
  const ActiveTree t = active_tree(a);
  for (const auto& tn : t.nodes) {
    if (!tn.present) continue;
    auto& s = st.segments[tn.segment - 1];
    ++s.n;
    switch (tn.live_count()) {
      case 3: ++s.n3; break;
      case 2: ++s.n2; break;
      case 1: ++s.n1; break;
      default: break;
    }
    if (tn.segment == 1) st.items += tn.live_count();
  }
  return st;
}

/// Normal, and every segment either has all non-tree nodes on its free chain
/// or a free chain at least twice its tree-node count.
inline bool is_safe(const Arena& a) {
  if (!is_normal(a)) return false;
  const Stats st = stats(a);
  return std::all_of(st.segments.begin(), st.segments.end(),
                     [](const SegmentStats& s) { return s.f + s.n == s.size || s.f >= 2 * s.n; });
}

// Snapshot overloads.
inline BaseTree base_tree(const Snapshot& s) { return base_tree(s.arena()); }
inline ActiveTree active_tree(const Snapshot& s) { return active_tree(s.arena()); }
inline std::vector<Item> content(const Snapshot& s) { return content(s.arena()); }
inline bool is_normal(const Snapshot& s) { return is_normal(s.arena()); }
inline bool is_safe(const Snapshot& s) { return is_safe(s.arena()); }
inline Stats stats(const Snapshot& s, std::span<const std::uint64_t> attempts = {}) {
  return stats(s.arena(), attempts);
}

}  // namespace semantics
}  // namespace stab23
