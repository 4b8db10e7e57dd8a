// Shared test fixtures: the worked-example states and an exhaustive rule
// applier used as an oracle for the active tree.
#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stab23/arena.hpp"
#include "stab23/semantics.hpp"

namespace fixtures {

using stab23::Arena;
using stab23::Key;
using stab23::Link;

struct Pair {
  Key low;
  Key high;
  Link child;
};

inline void set_interior(Arena& a, Link l, Link parent, const std::vector<Pair>& pairs) {
  for (std::size_t s = 0; s < stab23::kSlotsPerNode; ++s) a.clear_slot(l, s);
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    a.node(l).slots[s].low = pairs[s].low;
    a.node(l).slots[s].high = pairs[s].high;
    a.node(l).slots[s].child = pairs[s].child;
  }
  a.node(l).parent = parent;
}

inline void set_leaf(Arena& a, Link l, Link parent, const std::vector<Key>& keys) {
  for (std::size_t s = 0; s < stab23::kSlotsPerNode; ++s) a.clear_slot(l, s);
  for (std::size_t s = 0; s < keys.size(); ++s) {
    auto& slot = a.node(l).slots[s];
    slot.low = slot.high = keys[s];
    slot.occupied = 1;
    auto d = a.datum(l, s);
    for (std::size_t b = 0; b < d.size(); ++b) d[b] = static_cast<std::uint8_t>(keys[s] >> (8 * b));
  }
  a.node(l).parent = parent;
}

/// Threads every node not in `used` onto its segment's free list in slot order.
inline void rethread_free_lists(Arena& a, const std::set<Link>& used) {
  for (unsigned seg = 1; seg <= a.pmax(); ++seg) {
    std::vector<Link> free;
    for (std::uint32_t s = 0; s < a.segment_size(seg); ++s) {
      const Link l = Link::at(seg, s);
      if (!used.count(l)) free.push_back(l);
    }
    a.free_head(seg) = free.empty() ? Link::null() : free.front();
    for (std::size_t i = 0; i < free.size(); ++i) {
      auto& n = a.node(free[i]);
      n.parent = Link::null();
      n.free_prev = i == 0 ? Link::null() : free[i - 1];
      n.free_next = i + 1 == free.size() ? Link::null() : free[i + 1];
    }
    for (const Link l : used) {
      if (l.segment != seg) continue;
      a.node(l).free_next = Link::null();
      a.node(l).free_prev = Link::null();
    }
  }
}

inline Link s(unsigned seg, std::uint32_t slot) { return Link::at(seg, slot); }

/// Segment layout of the example tree with implicit leaves (pmax = 3): root
/// at (3,0), interior nodes at (2,0..2), leaves at (1,0..7).
inline Arena sample_arena() {
  Arena a(3);
  set_interior(a, s(3, 0), Link::null(), {{120, 190, s(2, 0)}, {210, 241, s(2, 1)}, {242, 253, s(2, 2)}});
  set_interior(a, s(2, 0), s(3, 0), {{120, 131, s(1, 0)}, {133, 160, s(1, 1)}, {172, 190, s(1, 2)}});
  set_interior(a, s(2, 1), s(3, 0), {{210, 218, s(1, 3)}, {230, 234, s(1, 4)}, {239, 241, s(1, 5)}});
  set_interior(a, s(2, 2), s(3, 0), {{242, 244, s(1, 6)}, {249, 253, s(1, 7)}});
  set_leaf(a, s(1, 0), s(2, 0), {120, 125, 131});
  set_leaf(a, s(1, 1), s(2, 0), {133, 155, 160});
  set_leaf(a, s(1, 2), s(2, 0), {172, 190});
  set_leaf(a, s(1, 3), s(2, 1), {210, 217, 218});
  set_leaf(a, s(1, 4), s(2, 1), {230, 234});
  set_leaf(a, s(1, 5), s(2, 1), {239, 241});
  set_leaf(a, s(1, 6), s(2, 2), {242, 244});
  set_leaf(a, s(1, 7), s(2, 2), {249, 253});
  std::set<Link> used{s(3, 0), s(2, 0), s(2, 1), s(2, 2)};
  for (std::uint32_t i = 0; i < 8; ++i) used.insert(s(1, i));
  rethread_free_lists(a, used);
  a.registers.root = s(3, 0);
  return a;
}

inline const std::vector<Key>& sample_keys() {
  static const std::vector<Key> keys{120, 125, 131, 133, 155, 160, 172, 190, 210, 217,
                                     218, 230, 234, 239, 241, 242, 244, 249, 253};
  return keys;
}

/// The illegitimate-keys example, same layout as sample_arena().
inline Arena skewed_arena() {
  Arena a = sample_arena();
  set_interior(a, s(3, 0), Link::null(), {{120, 160, s(2, 0)}, {210, 238, s(2, 1)}, {242, 260, s(2, 2)}});
  set_interior(a, s(2, 1), s(3, 0), {{210, 217, s(1, 3)}, {220, 228, s(1, 4)}, {225, 238, s(1, 5)}});
  set_interior(a, s(2, 2), s(3, 0), {{90, 100, s(1, 6)}, {249, 260, s(1, 7)}});
  set_leaf(a, s(1, 3), s(2, 1), {201, 205, 218});
  return a;
}

/// Nested rendering of the subtree at `l` through raw relevant slots:
/// leaves as {k,k,...}, interior nodes as [...].
inline std::string shape(const Arena& a, Link l) {
  if (!a.resolvable(l)) return "";
  std::ostringstream o;
  const auto& n = a.node(l);
  if (l.segment == 1) {
    o << '{';
    bool first = true;
    for (const auto& sl : n.slots)
      if (sl.occupied) {
        o << (first ? "" : ",") << sl.low;
        first = false;
      }
    o << '}';
    return o.str();
  }
  o << '[';
  for (const auto& sl : n.slots)
    if (!sl.child.is_null()) o << shape(a, sl.child);
  o << ']';
  return o.str();
}

inline std::string sample_shape() {
  return "[[{120,125,131}{133,155,160}{172,190}][{210,217,218}{230,234}{239,241}][{242,244}{249,253}]]";
}

// ---------------------------------------------------------------------------
// Exhaustive rule applier. Node membership is recomputed from scratch as
// reachability through live slots after every single rule application, and
// the next rule is chosen by scanning every member node.

class BruteForce {
public:
  explicit BruteForce(const Arena& a) : a_(a) {
    for (unsigned seg = 1; seg <= a.pmax(); ++seg)
      for (std::uint32_t i = 0; i < a.segment_size(seg); ++i) {
        const Link l = Link::at(seg, i);
        auto& m = live_[l];
        for (std::size_t s = 0; s < 3; ++s)
          m[s] = seg == 1 ? a.node(l).slots[s].occupied != 0 : !a.node(l).slots[s].child.is_null();
      }
    while (step()) {
    }
  }

  /// (link, live mask) of every member, sorted.
  std::vector<std::pair<Link, std::array<bool, 3>>> result() const {
    std::vector<std::pair<Link, std::array<bool, 3>>> out;
    for (const Link l : members()) out.emplace_back(l, live_.at(l));
    std::sort(out.begin(), out.end());
    return out;
  }

private:
  bool edge(Link p, Link q) const {
    return a_.resolvable(q) && q.segment + 1 == p.segment && a_.node(q).parent == p;
  }

  std::vector<Link> members() const {
    std::vector<Link> out;
    const Link root = a_.registers.root;
    if (!a_.resolvable(root)) return out;
    out.push_back(root);
    for (std::size_t i = 0; i < out.size(); ++i) {
      const Link p = out[i];
      if (p.segment == 1) continue;
      for (std::size_t s = 0; s < 3; ++s) {
        const Link q = a_.node(p).slots[s].child;
        if (live_.at(p)[s] && edge(p, q) && std::find(out.begin(), out.end(), q) == out.end()) out.push_back(q);
      }
    }
    return out;
  }

  std::size_t live_count(Link l) const {
    const auto& m = live_.at(l);
    return static_cast<std::size_t>(std::count(m.begin(), m.end(), true));
  }

  std::pair<Key, Key> range(Link l, std::size_t s) const {
    const auto& sl = a_.node(l).slots[s];
    return l.segment == 1 ? std::pair{sl.low, sl.low} : std::pair{sl.low, sl.high};
  }

  // Candidate: (segment, rule, member order, slot a, slot b) -> what to kill.
  struct Candidate {
    unsigned neg_segment;
    int rule;
    std::size_t order;
    std::size_t x;
    std::size_t y;
    Link target;
    std::size_t slot;
    bool operator<(const Candidate& o) const {
      return std::tie(neg_segment, rule, order, x, y) < std::tie(o.neg_segment, o.rule, o.order, o.x, o.y);
    }
  };

  bool step() {
    const auto mem = members();
    std::set<Link> in(mem.begin(), mem.end());
    std::vector<Candidate> cands;
    for (std::size_t order = 0; order < mem.size(); ++order) {
      const Link p = mem[order];
      const unsigned seg = p.segment;
      const unsigned neg = 1000 - seg;
      const auto& n = a_.node(p);
      const auto& lv = live_.at(p);
      for (std::size_t s = 0; s < 3; ++s) {
        if (!lv[s] || seg == 1) continue;
        const Link q = n.slots[s].child;
        if (n.slots[s].high <= n.slots[s].low) cands.push_back({neg, 0, order, s, 0, p, s});
        if (in.count(q) && edge(p, q) && live_count(q) == 0) cands.push_back({neg, 1, order, s, 0, p, s});
        if (!(in.count(q) && edge(p, q))) cands.push_back({neg, 3, order, s, 0, p, s});
      }
      for (std::size_t x = 0; x < 3; ++x)
        for (std::size_t y = x + 1; y < 3; ++y) {
          if (!lv[x] || !lv[y]) continue;
          const auto rx = range(p, x);
          const auto ry = range(p, y);
          const bool same = seg > 1 && n.slots[x].child == n.slots[y].child;
          if (same || !(rx.second < ry.first || ry.second < rx.first)) cands.push_back({neg, 2, order, x, y, p, y});
        }
      if (seg == 1) continue;
      for (std::size_t s = 0; s < 3; ++s) {
        const Link q = n.slots[s].child;
        if (!lv[s] || !in.count(q) || !edge(p, q)) continue;
        for (std::size_t r = 0; r < 3; ++r) {
          if (!live_.at(q)[r]) continue;
          const auto [lo, hi] = range(q, r);
          if (lo < n.slots[s].low || hi > n.slots[s].high) cands.push_back({neg, 4, order, s, r, q, r});
        }
      }
    }
    if (cands.empty()) return false;
    const Candidate& c = *std::min_element(cands.begin(), cands.end());
    live_[c.target][c.slot] = false;
    return true;
  }

  const Arena& a_;
  std::map<Link, std::array<bool, 3>> live_;
};

inline std::vector<std::pair<Link, std::array<bool, 3>>> semantics_result(const Arena& a) {
  std::vector<std::pair<Link, std::array<bool, 3>>> out;
  for (const auto& tn : stab23::semantics::active_tree(a).nodes)
    if (tn.present) out.emplace_back(tn.link, tn.live);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace fixtures
