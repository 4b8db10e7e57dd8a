// Runtime operations of the available, stabilizing 2-3 tree.
//
// Every public operation descends from the root applying node truncation in
// preorder, performs its action at segment 1, then walks back up tightening
// key ranges, propagating splits, repairing single-child nodes and truncating
// again in postorder. Each public operation finally runs the background
// cleaning budget: a fixed number of free-node collection attempts and a
// fixed number of locate sweep steps.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "stab23/arena.hpp"
#include "stab23/semantics.hpp"
#include "stab23/snapshot.hpp"

namespace stab23 {

enum class ResponseKind : std::uint8_t { Item, Missing, Ack, Full };

/// Why an insert answered "full".
enum class Refusal : std::uint8_t { None, Duplicate, PathEnded, Height, NoDetachedNode };

inline std::string_view to_string(ResponseKind k) {
  switch (k) {
    case ResponseKind::Item: return "item";
    case ResponseKind::Missing: return "missing";
    case ResponseKind::Ack: return "ack";
    case ResponseKind::Full: return "full";
  }
  return "?";
}

inline std::string_view to_string(Refusal r) {
  switch (r) {
    case Refusal::None: return "none";
    case Refusal::Duplicate: return "duplicate";
    case Refusal::PathEnded: return "path-ended";
    case Refusal::Height: return "height";
    case Refusal::NoDetachedNode: return "no-detached-node";
  }
  return "?";
}

struct Response {
  ResponseKind kind = ResponseKind::Missing;
  std::optional<Item> item;
  std::uint64_t visits = 0;  // node reads, background cleaning included
  Refusal refusal = Refusal::None;
};

struct CleaningConfig {
  unsigned locates = 2;
  unsigned attempts = 11;
};

struct AttemptRecord {
  std::uint64_t operation = 0;
  unsigned segment = 0;
};

/// Counters kept outside the arena; they are measurement, not state.
struct Instrumentation {
  std::uint64_t operations = 0;
  std::vector<std::uint64_t> attempts;  // per segment, index i-1
  std::vector<std::uint64_t> splits;    // per segment, index i-1
  bool log_attempts = false;
  std::vector<AttemptRecord> attempt_log;
};

/// Largest i in [1, pmax] with 2^(i-1) dividing count; count = 0 maps to pmax.
inline unsigned cleaning_segment(std::uint64_t count, unsigned pmax) {
  unsigned seg = 1;
  while (seg < pmax && seg <= 63 && count % (std::uint64_t{1} << seg) == 0) ++seg;
  return seg;
}

class StabilizingTree {
public:
  explicit StabilizingTree(Arena arena, CleaningConfig config = {})
      : arena_(std::move(arena)), config_(config) {
    inst_.attempts.assign(arena_.pmax(), 0);
    inst_.splits.assign(arena_.pmax(), 0);
  }
  explicit StabilizingTree(unsigned pmax, CleaningConfig config = {}) : StabilizingTree(Arena(pmax), config) {}

  const Arena& arena() const noexcept { return arena_; }
  /// Mutable access for fault injection.
  Arena& arena() noexcept { return arena_; }
  Snapshot snapshot() const { return Snapshot(arena_); }

  const CleaningConfig& config() const noexcept { return config_; }
  const Instrumentation& instrumentation() const noexcept { return inst_; }
  Instrumentation& instrumentation() noexcept { return inst_; }

  /// Optional CSV trace: kind,key,response,visits,count_before,count_after.
  void set_trace(std::ostream* out) {
    trace_ = out;
    if (trace_) *trace_ << "kind,key,response,visits,count_before,count_after\n";
  }

  Response find(Key k) { return public_op(Mode::Find, k, {}); }
  Response insert(Key k, std::span<const std::uint8_t> datum = {}) { return public_op(Mode::Insert, k, datum); }
  Response remove(Key k) { return public_op(Mode::Delete, k, {}); }
  Response locate(Key k) { return public_op(Mode::Locate, k, {}); }

  /// Visits counted since the start of the current (or last) public operation.
  std::uint64_t visits() const noexcept { return visits_; }

  // Building blocks, public for testing.

  /// Local instantiation of the truncation rules at `p`, followed by slot
  /// compaction (left-packed, ascending).
  void node_truncate(Link p) {
    if (!arena_.resolvable(p)) return;
    const unsigned seg = p.segment;
    if (seg == 1) {
      touch(p);
      EntryList items = read(p);
      EntryList unique;
      for (std::size_t i = 0; i < items.size; ++i) {
        bool dup = false;
        for (std::size_t j = 0; j < unique.size; ++j) dup = dup || unique[j].low == items[i].low;
        if (!dup) unique.push_back(items[i]);
      }
      unique.sort();
      write(p, unique);
      return;
    }

    Node& n = touch(p);
    auto kill = [&](std::size_t s) { n.slots[s].child = Link::null(); };
    auto live = [&](std::size_t s) { return !n.slots[s].child.is_null(); };

    // (a) empty or inverted range
    for (std::size_t s = 0; s < kSlotsPerNode; ++s)
      if (live(s) && n.slots[s].high <= n.slots[s].low) kill(s);
    // (b) a genuine child without keys
    for (std::size_t s = 0; s < kSlotsPerNode; ++s)
      if (live(s) && valid_child(p, n.slots[s].child) && live_count(touch_link(n.slots[s].child)) == 0) kill(s);
    // (c) overlapping ranges, or two slots naming one child
    for (std::size_t x = 0; x < kSlotsPerNode; ++x)
      for (std::size_t y = x + 1; y < kSlotsPerNode; ++y) {
        if (!live(x) || !live(y)) continue;
        const Slot& a = n.slots[x];
        const Slot& b = n.slots[y];
        if (a.child == b.child || (a.low <= b.high && b.low <= a.high)) kill(y);
      }
    // (d) child not in the tree
    for (std::size_t s = 0; s < kSlotsPerNode; ++s)
      if (live(s) && !valid_child(p, n.slots[s].child)) kill(s);
    // (e) child keys outside the parent's range; (b) again for emptied children
    for (std::size_t s = 0; s < kSlotsPerNode; ++s) {
      if (!live(s)) continue;
      const Link q = n.slots[s].child;
      Node& c = touch(q);
      for (std::size_t r = 0; r < kSlotsPerNode; ++r) {
        if (q.segment == 1) {
          if (c.slots[r].occupied && (c.slots[r].low < n.slots[s].low || c.slots[r].low > n.slots[s].high))
            c.slots[r].occupied = 0;
        } else if (!c.slots[r].child.is_null() &&
                   (c.slots[r].low < n.slots[s].low || c.slots[r].high > n.slots[s].high)) {
          c.slots[r].child = Link::null();
        }
      }
      if (live_count(q) == 0) kill(s);
    }

    EntryList entries = read(p);
    entries.sort();
    write(p, entries);
  }

  /// Repairs a node with a single relevant slot: root collapse, merge into a
  /// sibling with at most two keys, or borrowing the nearest key of a sibling
  /// with three. Borrowing is preferred, and the left sibling before the right.
  void merge_collapse(Link p) { merge_collapse(p, arena_.pmax()); }

  /// Upward membership test; false proves p is not in the tree.
  bool intree(Link p) {
    const Link root = arena_.registers.root;
    for (unsigned guard = 0; guard <= arena_.pmax() + 1; ++guard) {
      if (p == root) return true;
      if (!arena_.resolvable(p) || !arena_.resolvable(root)) return false;
      if (p.segment >= root.segment) return false;
      const Link s = touch(p).parent;
      if (!arena_.resolvable(s) || s.segment != p.segment + 1) return false;
      const Node& sn = touch(s);
      bool linked = false;
      for (const Slot& slot : sn.slots) linked = linked || slot.child == p;
      if (!linked) return false;
      p = s;
    }
    return false;
  }

  void collection_attempt(unsigned segment) {
    const std::size_t size = arena_.segment_size(segment);
    auto& cursor = arena_.registers.curnode.at(segment - 1);
    const auto idx = static_cast<std::uint32_t>(cursor % size);
    const Link p = Link::at(segment, idx);
    if (!intree(p)) {
      touch(p).parent = Link::null();
      arena_.move_to_front(p);
    }
    cursor = (idx + 1) % size;
    ++inst_.attempts.at(segment - 1);
    if (inst_.log_attempts) inst_.attempt_log.push_back({inst_.operations, segment});
  }

  void run_cleaning_budget() {
    auto& regs = arena_.registers;
    const std::uint64_t modulus = arena_.count_modulus();
    for (unsigned a = 0; a < config_.attempts; ++a) {
      const std::uint64_t c = regs.count % modulus;
      collection_attempt(cleaning_segment(c, arena_.pmax()));
      regs.count = (c + 1) % modulus;
    }
    for (unsigned l = 0; l < config_.locates; ++l) {
      const Response r = run(Mode::Locate, regs.curkey, {});
      if (r.item && r.item->key != kMaxKey)
        regs.curkey = r.item->key + 1;
      else
        regs.curkey = 0;
    }
  }

  /// Every segment from 1 up to the root's (one above when the root is full
  /// and below pmax) has a detached free-list head.
  bool insert_precheck() {
    const Link root = arena_.registers.root;
    if (!arena_.resolvable(root)) return head_detached(1);
    unsigned top = root.segment;
    if (live_count(touch_link(root)) == kSlotsPerNode && top < arena_.pmax()) ++top;
    for (unsigned seg = 1; seg <= top; ++seg)
      if (!head_detached(seg)) return false;
    return true;
  }

private:
  enum class Mode { Find, Insert, Delete, Locate };

  struct Entry {
    Key low = 0;
    Key high = 0;
    Link child;
    std::array<std::uint8_t, kMaxDatumWidth> datum{};
  };

  struct EntryList {
    std::array<Entry, kSlotsPerNode + 1> e{};
    std::size_t size = 0;

    Entry& operator[](std::size_t i) { return e[i]; }
    const Entry& operator[](std::size_t i) const { return e[i]; }
    void push_back(const Entry& x) { e[size++] = x; }
    void insert(std::size_t pos, const Entry& x) {
      for (std::size_t i = size; i > pos; --i) e[i] = e[i - 1];
      e[pos] = x;
      ++size;
    }
    void erase(std::size_t pos) {
      for (std::size_t i = pos; i + 1 < size; ++i) e[i] = e[i + 1];
      --size;
    }
    void sort() {
      std::stable_sort(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(size),
                       [](const Entry& a, const Entry& b) { return a.low < b.low; });
    }
  };

  Node& touch(Link l) {
    ++visits_;
    return arena_.node(l);
  }
  Link touch_link(Link l) {
    touch(l);
    return l;
  }

  bool valid_child(Link p, Link q) const {
    return arena_.resolvable(q) && q.segment + 1 == p.segment && arena_.node(q).parent == p;
  }

  bool head_detached(unsigned seg) {
    const Link head = arena_.free_head(seg);
    if (arena_.resolvable(head)) touch(head);
    return arena_.detached(head, seg);
  }

  std::size_t live_count(Link l) const {
    const Node& n = arena_.node(l);
    std::size_t c = 0;
    for (const Slot& s : n.slots) c += l.segment == 1 ? (s.occupied != 0) : !s.child.is_null();
    return c;
  }

  EntryList read(Link l) const {
    EntryList out;
    const Node& n = arena_.node(l);
    for (std::size_t s = 0; s < kSlotsPerNode; ++s) {
      const Slot& sl = n.slots[s];
      if (l.segment == 1 ? sl.occupied == 0 : sl.child.is_null()) continue;
      Entry e;
      e.low = sl.low;
      e.high = l.segment == 1 ? sl.low : sl.high;
      e.child = l.segment == 1 ? Link::null() : sl.child;
      auto d = arena_.datum(l, s);
      std::copy(d.begin(), d.end(), e.datum.begin());
      out.push_back(e);
    }
    return out;
  }

  void write(Link l, const EntryList& entries) {
    Node& n = arena_.node(l);
    for (std::size_t s = 0; s < kSlotsPerNode; ++s) {
      arena_.clear_slot(l, s);
      if (s >= entries.size) continue;
      const Entry& e = entries[s];
      Slot& sl = n.slots[s];
      sl.low = e.low;
      if (l.segment == 1) {
        sl.high = e.low;
        sl.occupied = 1;
        auto d = arena_.datum(l, s);
        std::copy_n(e.datum.begin(), d.size(), d.begin());
      } else {
        sl.high = e.high;
        sl.child = e.child;
      }
    }
  }

  /// [min, max] key of a node's live slots.
  std::optional<std::pair<Key, Key>> span(Link l) const {
    const EntryList es = read(l);
    if (es.size == 0) return std::nullopt;
    Key lo = es[0].low;
    Key hi = es[0].high;
    for (std::size_t i = 1; i < es.size; ++i) {
      lo = std::min(lo, es[i].low);
      hi = std::max(hi, es[i].high);
    }
    return std::pair{lo, hi};
  }

  /// Sets a parent entry's range to the child's span. A single-key span
  /// keeps a wider range that still contains it, so the entry survives the
  /// high <= low rule until the child is repaired.
  void tighten(Entry& e) const {
    const auto sp = span(e.child);
    if (!sp) return;
    if (sp->first == sp->second && e.low < e.high && e.low <= sp->first && sp->second <= e.high) return;
    e.low = sp->first;
    e.high = sp->second;
  }

  void tighten_slot(Link p, Link c) {
    Node& n = arena_.node(p);
    for (Slot& s : n.slots) {
      if (s.child != c) continue;
      Entry e;
      e.low = s.low;
      e.high = s.high;
      e.child = c;
      tighten(e);
      s.low = e.low;
      s.high = e.high;
    }
  }

  static std::optional<std::size_t> index_of_child(const EntryList& es, Link c) {
    for (std::size_t i = 0; i < es.size; ++i)
      if (es[i].child == c) return i;
    return std::nullopt;
  }

  // Sibling `r` of the node at `s`, truncated; nullopt when it is not a usable tree node.
  std::optional<Link> usable_sibling(Link s, Link r, unsigned seg) {
    if (!arena_.resolvable(r) || r.segment != seg || touch(r).parent != s) return std::nullopt;
    node_truncate(r);
    if (live_count(r) == 0) return std::nullopt;
    return r;
  }

  void merge_collapse(Link p, unsigned depth_budget) {
    if (!arena_.resolvable(p)) return;
    const unsigned seg = p.segment;
    if (p == arena_.registers.root) {
      if (seg > 1) fix_root();
      return;
    }
    const Link s = touch(p).parent;
    if (!arena_.resolvable(s) || s.segment != seg + 1) return;
    node_truncate(s);
    node_truncate(p);
    if (live_count(p) != 1) return;
    EntryList se = read(s);
    const auto j = index_of_child(se, p);
    if (!j) return;

    const std::optional<Link> left = *j > 0 ? usable_sibling(s, se[*j - 1].child, seg) : std::nullopt;
    const std::optional<Link> right = *j + 1 < se.size ? usable_sibling(s, se[*j + 1].child, seg) : std::nullopt;
    const std::size_t lc = left ? live_count(*left) : 0;
    const std::size_t rc = right ? live_count(*right) : 0;

    EntryList pe = read(p);
    Link moved;
    if (left && lc == kSlotsPerNode) {
      EntryList le = read(*left);
      const Entry m = le[le.size - 1];
      le.erase(le.size - 1);
      pe.insert(0, m);
      write(*left, le);
      write(p, pe);
      moved = adopt(m.child, p);
      tighten(se[*j - 1]);
      tighten(se[*j]);
    } else if (right && rc == kSlotsPerNode) {
      EntryList re = read(*right);
      const Entry m = re[0];
      re.erase(0);
      pe.push_back(m);
      write(*right, re);
      write(p, pe);
      moved = adopt(m.child, p);
      tighten(se[*j]);
      tighten(se[*j + 1]);
    } else if (left) {
      EntryList le = read(*left);
      le.push_back(pe[0]);
      write(*left, le);
      moved = adopt(pe[0].child, *left);
      se.erase(*j);
      tighten(se[*j - 1]);
      arena_.release(p);
    } else if (right) {
      EntryList re = read(*right);
      re.insert(0, pe[0]);
      write(*right, re);
      moved = adopt(pe[0].child, *right);
      se.erase(*j);
      tighten(se[*j]);
      arena_.release(p);
    } else {
      return;
    }
    write(s, se);

    // A moved child may itself have a single slot when it had no sibling.
    if (!moved.is_null() && depth_budget > 0 && live_count(touch_link(moved)) == 1)
      merge_collapse(moved, depth_budget - 1);
  }

  Link adopt(Link child, Link parent) {
    if (child.is_null()) return child;  // item moved between leaves
    touch(child).parent = parent;
    return child;
  }

  /// Root repair after an operation: an empty root empties the tree, a
  /// single-child interior root collapses one level at a time.
  void fix_root() {
    auto& regs = arena_.registers;
    for (unsigned guard = 0; guard <= arena_.pmax(); ++guard) {
      const Link r = regs.root;
      if (!arena_.resolvable(r)) return;
      node_truncate(r);
      const std::size_t n = live_count(r);
      if (n == 0) {
        arena_.release(r);
        regs.root = Link::null();
        return;
      }
      if (r.segment == 1 || n != 1) return;
      const Link c = read(r)[0].child;
      regs.root = c;
      touch(c).parent = Link::null();
      arena_.release(r);
    }
  }

  std::optional<Link> allocate(unsigned seg) {
    const auto l = arena_.allocate(seg);
    if (l) touch(*l);
    return l;
  }

  Entry make_item(Key k, std::span<const std::uint8_t> datum) const {
    Entry e;
    e.low = k;
    e.high = k;
    std::copy_n(datum.begin(), std::min(datum.size(), arena_.datum_width()), e.datum.begin());
    return e;
  }

  Item to_item(const Entry& e) const {
    return Item{e.low, {e.datum.begin(), e.datum.begin() + static_cast<std::ptrdiff_t>(arena_.datum_width())}};
  }

  // Splits a node whose entries overflowed into itself and a new right
  // sibling from the same segment; returns the sibling.
  Link split(Link p, const EntryList& es) {
    const auto fresh = allocate(p.segment);
    if (!fresh) throw ArenaError("allocation failed after a successful insert precheck");
    EntryList lo;
    EntryList hi;
    lo.push_back(es[0]);
    lo.push_back(es[1]);
    hi.push_back(es[2]);
    hi.push_back(es[3]);
    write(p, lo);
    write(*fresh, hi);
    if (p.segment > 1) {
      adopt(hi[0].child, *fresh);
      adopt(hi[1].child, *fresh);
    }
    ++inst_.splits.at(p.segment - 1);
    return *fresh;
  }

  Response run(Mode mode, Key k, std::span<const std::uint8_t> datum) {
    Response resp;
    auto& regs = arena_.registers;

    if (!arena_.resolvable(regs.root)) {
      if (mode != Mode::Insert) return resp;
      const auto leaf = allocate(1);
      if (!leaf) {
        resp.kind = ResponseKind::Full;
        resp.refusal = Refusal::NoDetachedNode;
        return resp;
      }
      EntryList es;
      es.push_back(make_item(k, datum));
      write(*leaf, es);
      arena_.node(*leaf).parent = Link::null();
      regs.root = *leaf;
      resp.kind = ResponseKind::Ack;
      return resp;
    }

    // Preorder descent.
    std::array<Link, Arena::kMaxPmax + 1> path{};
    std::size_t depth = 0;  // index of the last node on the path
    Link p = regs.root;
    for (;;) {
      node_truncate(p);
      path[depth] = p;
      if (p.segment == 1) break;
      const EntryList es = read(p);
      if (es.size == 0) break;
      std::size_t pick = 0;
      if (mode == Mode::Locate) {
        pick = es.size - 1;
        for (std::size_t i = 0; i < es.size; ++i)
          if (es[i].high >= k) {
            pick = i;
            break;
          }
      } else {
        for (std::size_t i = 0; i < es.size; ++i)
          if (es[i].low <= k) pick = i;
      }
      p = es[pick].child;
      ++depth;
    }

    // Action at the leaf.
    Link carry;
    const Link last = path[depth];
    if (last.segment != 1) {
      if (mode == Mode::Insert) {
        resp.kind = ResponseKind::Full;
        resp.refusal = Refusal::PathEnded;
      }
    } else {
      EntryList items = read(last);
      std::size_t pos = 0;
      while (pos < items.size && items[pos].low < k) ++pos;
      const bool found = pos < items.size && items[pos].low == k;
      switch (mode) {
        case Mode::Find:
          if (found) {
            resp.kind = ResponseKind::Item;
            resp.item = to_item(items[pos]);
          }
          break;
        case Mode::Locate:
          if (pos < items.size) {
            resp.kind = ResponseKind::Item;
            resp.item = to_item(items[pos]);
          }
          break;
        case Mode::Delete:
          if (found) {
            resp.kind = ResponseKind::Item;
            resp.item = to_item(items[pos]);
            items.erase(pos);
            write(last, items);
          }
          break;
        case Mode::Insert: {
          resp.kind = ResponseKind::Full;
          if (found) {
            resp.refusal = Refusal::Duplicate;
            break;
          }
          bool all_full = true;
          for (std::size_t d = 0; d <= depth; ++d) all_full = all_full && live_count(path[d]) == kSlotsPerNode;
          if (all_full && regs.root.segment == arena_.pmax()) {
            resp.refusal = Refusal::Height;
            break;
          }
          if (!insert_precheck()) {
            resp.refusal = Refusal::NoDetachedNode;
            break;
          }
          items.insert(pos, make_item(k, datum));
          if (items.size <= kSlotsPerNode)
            write(last, items);
          else
            carry = split(last, items);
          resp.kind = ResponseKind::Ack;
          break;
        }
      }
    }

    // Postorder repair.
    node_truncate(last);
    for (std::size_t d = depth; d-- > 0;) {
      const Link parent = path[d];
      const Link child = path[d + 1];
      touch(parent);
      EntryList es = read(parent);
      const auto at = index_of_child(es, child);
      if (!at) {
        carry = Link::null();
        node_truncate(parent);
        continue;
      }
      if (live_count(child) == 0) {
        es.erase(*at);
        write(parent, es);
        arena_.release(child);
      } else {
        tighten(es[*at]);
        if (!carry.is_null()) {
          Entry e;
          e.child = carry;
          const auto sp = span(carry);
          e.low = sp->first;
          e.high = sp->second;
          es.insert(*at + 1, e);
          adopt(carry, parent);
          if (es.size > kSlotsPerNode) {
            carry = split(parent, es);
          } else {
            write(parent, es);
            carry = Link::null();
          }
        } else {
          write(parent, es);
        }
        if (live_count(parent) > 0 && live_count(child) == 1 && index_of_child(read(parent), child))
          merge_collapse(child, arena_.pmax());
      }
      node_truncate(parent);
    }

    if (!carry.is_null()) {
      const Link old_root = regs.root;
      const auto fresh = allocate(old_root.segment + 1);
      if (!fresh) throw ArenaError("root allocation failed after a successful insert precheck");
      EntryList es;
      for (Link c : {old_root, carry}) {
        const auto sp = span(c);
        Entry e;
        e.child = c;
        e.low = sp->first;
        e.high = sp->second;
        es.push_back(e);
        adopt(c, *fresh);
      }
      write(*fresh, es);
      arena_.node(*fresh).parent = Link::null();
      regs.root = *fresh;
    }
    fix_root();
    return resp;
  }

  Response public_op(Mode mode, Key k, std::span<const std::uint8_t> datum) {
    visits_ = 0;
    const std::uint64_t count_before = arena_.registers.count;
    Response r = run(mode, k, datum);
    run_cleaning_budget();
    r.visits = visits_;
    if (trace_) {
      static constexpr std::string_view kNames[] = {"find", "insert", "delete", "locate"};
      *trace_ << kNames[static_cast<int>(mode)] << ',' << k << ',' << to_string(r.kind) << ',' << r.visits << ','
              << count_before << ',' << arena_.registers.count << '\n';
    }
    ++inst_.operations;
    return r;
  }

  Arena arena_;
  CleaningConfig config_;
  Instrumentation inst_;
  std::uint64_t visits_ = 0;
  std::ostream* trace_ = nullptr;
};

}  // namespace stab23
