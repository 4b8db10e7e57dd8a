// Segmented node arena for the stabilizing 2-3 tree.
//
// Every node of a height-i tree node lives in segment S_i. Each segment owns a
// fixed pool of nodes threaded onto a doubly linked free list. All stored
// fields, including the auxiliary registers, may hold arbitrary values after a
// transient fault; nothing in this header trusts field contents.
#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace stab23 {

using Key = std::uint64_t;
inline constexpr Key kMaxKey = std::numeric_limits<Key>::max();

inline constexpr std::size_t kSlotsPerNode = 3;
inline constexpr std::size_t kMaxDatumWidth = 64;

class ArenaError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Node address: (segment, slot). The all-ones pattern is the null link.
struct Link {
  static constexpr std::uint32_t kNullField = 0xFFFFFFFFu;

  std::uint32_t segment = kNullField;
  std::uint32_t slot = kNullField;

  static constexpr Link null() noexcept { return {}; }
  static constexpr Link at(std::uint32_t segment, std::uint32_t slot) noexcept { return {segment, slot}; }

  constexpr bool is_null() const noexcept { return segment == kNullField && slot == kNullField; }

  constexpr std::uint64_t raw() const noexcept {
    return (static_cast<std::uint64_t>(segment) << 32) | slot;
  }
  static constexpr Link from_raw(std::uint64_t bits) noexcept {
    return {static_cast<std::uint32_t>(bits >> 32), static_cast<std::uint32_t>(bits & 0xFFFFFFFFu)};
  }

  friend constexpr bool operator==(Link, Link) noexcept = default;
  friend constexpr auto operator<=>(Link, Link) noexcept = default;
};

inline std::string to_string(Link l) {
  if (l.is_null()) return "null";
  return "(" + std::to_string(l.segment) + "," + std::to_string(l.slot) + ")";
}

/// One key pair with its child link. At segment 1 the slot stores an item
/// instead: `low` is the item key and `occupied` marks the slot as used.
struct Slot {
  Key low = 0;
  Key high = 0;
  Link child;
  std::uint8_t occupied = 0;

  friend bool operator==(const Slot&, const Slot&) = default;
};

struct Node {
  std::array<Slot, kSlotsPerNode> slots{};
  Link parent;
  Link free_next;
  Link free_prev;

  friend bool operator==(const Node&, const Node&) = default;
};

/// Auxiliary registers. `free[i-1]` heads the free list of S_i and
/// `curnode[i-1]` is the round-robin collection cursor of S_i.
struct Registers {
  Link root;
  std::vector<Link> free;
  Key curkey = 0;
  std::vector<std::uint64_t> curnode;
  std::uint64_t count = 0;

  friend bool operator==(const Registers&, const Registers&) = default;
};

// Fault-injection addressing.
enum class RegisterField : std::uint8_t { Root, Free, Curkey, Curnode, Count };
enum class NodeFieldKind : std::uint8_t { Low, High, Child, Occupied, DatumByte, Parent, FreeNext, FreePrev };

struct RegisterAddress {
  RegisterField field = RegisterField::Root;
  unsigned segment = 0;  // used by Free and Curnode (1-based)
};

struct NodeAddress {
  Link node;
  NodeFieldKind field = NodeFieldKind::Low;
  unsigned slot = 0;        // used by Low/High/Child/Occupied/DatumByte
  unsigned byte_index = 0;  // used by DatumByte
};

using FieldAddress = std::variant<RegisterAddress, NodeAddress>;

class Arena {
public:
  static constexpr unsigned kMaxPmax = 20;  // |S_1| must fit a 32-bit slot index

  explicit Arena(unsigned pmax, std::size_t datum_width = 8) : pmax_(pmax), datum_width_(datum_width) {
    if (pmax == 0) throw ArenaError("pmax must be at least 1");
    if (pmax > kMaxPmax) throw ArenaError("pmax too large: capacity exceeds the link width");
    if (datum_width > kMaxDatumWidth) throw ArenaError("datum width exceeds " + std::to_string(kMaxDatumWidth));

    capacity_ = 1;
    for (unsigned i = 0; i < pmax; ++i) capacity_ *= 3;
    const std::uint64_t block = std::uint64_t{1} << (pmax - 1);
    count_modulus_ = (capacity_ / block) * block;

    sizes_.resize(pmax);
    sizes_[0] = (capacity_ + 1) / 2;
    for (unsigned i = 1; i < pmax; ++i) sizes_[i] = 1 + (sizes_[i - 1] + 1) / 2;

    nodes_.resize(pmax);
    data_.resize(pmax);
    for (unsigned i = 0; i < pmax; ++i) {
      nodes_[i].resize(sizes_[i]);
      data_[i].assign(sizes_[i] * kSlotsPerNode * datum_width_, 0);
    }

    registers.free.assign(pmax, Link::null());
    registers.curnode.assign(pmax, 0);
    for (unsigned seg = 1; seg <= pmax; ++seg) {
      auto& pool = nodes_[seg - 1];
      const auto n = static_cast<std::uint32_t>(pool.size());
      for (std::uint32_t s = 0; s < n; ++s) {
        pool[s].free_prev = s == 0 ? Link::null() : Link::at(seg, s - 1);
        pool[s].free_next = s + 1 == n ? Link::null() : Link::at(seg, s + 1);
      }
      registers.free[seg - 1] = Link::at(seg, 0);
    }
  }

  Registers registers;

  unsigned pmax() const noexcept { return pmax_; }
  /// K = 3^pmax.
  std::uint64_t capacity() const noexcept { return capacity_; }
  /// Modulus of the cleaning counter: the largest multiple of 2^(pmax-1) not above K.
  std::uint64_t count_modulus() const noexcept { return count_modulus_; }
  std::size_t datum_width() const noexcept { return datum_width_; }

  std::size_t segment_size(unsigned segment) const {
    if (segment == 0 || segment > pmax_) throw ArenaError("segment out of range");
    return sizes_[segment - 1];
  }
  std::size_t total_nodes() const noexcept {
    std::size_t total = 0;
    for (auto s : sizes_) total += s;
    return total;
  }

  bool valid_segment(std::uint32_t segment) const noexcept { return segment >= 1 && segment <= pmax_; }

  bool resolvable(Link l) const noexcept {
    return valid_segment(l.segment) && l.slot < sizes_[l.segment - 1];
  }
  bool resolvable_in(Link l, unsigned segment) const noexcept { return l.segment == segment && resolvable(l); }

  Node* resolve(Link l) noexcept { return resolvable(l) ? &nodes_[l.segment - 1][l.slot] : nullptr; }
  const Node* resolve(Link l) const noexcept { return resolvable(l) ? &nodes_[l.segment - 1][l.slot] : nullptr; }

  Node& node(Link l) {
    if (!resolvable(l)) throw ArenaError("unresolvable link " + to_string(l));
    return nodes_[l.segment - 1][l.slot];
  }
  const Node& node(Link l) const {
    if (!resolvable(l)) throw ArenaError("unresolvable link " + to_string(l));
    return nodes_[l.segment - 1][l.slot];
  }

  std::span<std::uint8_t> datum(Link l, std::size_t slot) {
    return {data_.at(l.segment - 1).data() + datum_offset(l, slot), datum_width_};
  }
  std::span<const std::uint8_t> datum(Link l, std::size_t slot) const {
    return {data_.at(l.segment - 1).data() + datum_offset(l, slot), datum_width_};
  }

  Link& free_head(unsigned segment) { return registers.free.at(segment - 1); }
  Link free_head(unsigned segment) const { return registers.free.at(segment - 1); }

  /// Detached: within `segment`, not the root, parent null. Membership of the
  /// free list is the caller's concern (the head is on the list by definition).
  bool detached(Link l, unsigned segment) const noexcept {
    const Node* n = resolvable_in(l, segment) ? resolve(l) : nullptr;
    return n != nullptr && l != registers.root && n->parent.is_null();
  }

  /// Pops the free-list head of `segment` when it is a detached node.
  std::optional<Link> allocate(unsigned segment) {
    if (!valid_segment(segment)) throw ArenaError("segment out of range");
    const Link head = free_head(segment);
    if (!detached(head, segment)) return std::nullopt;
    Node& n = node(head);
    const Link next = n.free_next;
    free_head(segment) = next;
    if (resolvable_in(next, segment) && node(next).free_prev == head) node(next).free_prev = Link::null();
    n.free_next = Link::null();
    n.free_prev = Link::null();
    return head;
  }

  /// Clears a node and pushes it on the front of its segment's free list.
  void release(Link l) {
    if (!resolvable(l)) throw ArenaError("release of unresolvable link " + to_string(l));
    Node& n = node(l);
    n.parent = Link::null();
    for (std::size_t s = 0; s < kSlotsPerNode; ++s) clear_slot(l, s);
    push_front(l);
  }

  /// Moves `l` to the front of its free list. A node whose free links are
  /// consistent with its neighbours is spliced out first, so a member of the
  /// list keeps the list length; any other node is pushed as a new element.
  void move_to_front(Link l) {
    if (!resolvable(l)) throw ArenaError("move_to_front of unresolvable link " + to_string(l));
    const unsigned seg = l.segment;
    Node& n = node(l);
    if (free_head(seg) == l && n.free_prev.is_null()) return;

    const Link prev = n.free_prev;
    const Link next = n.free_next;
    const bool prev_ok = prev.is_null() || (resolvable_in(prev, seg) && prev != l && node(prev).free_next == l);
    const bool next_ok = next.is_null() || (resolvable_in(next, seg) && next != l && node(next).free_prev == l);
    if (prev_ok && next_ok) {
      if (!prev.is_null()) node(prev).free_next = next;
      if (!next.is_null()) node(next).free_prev = prev;
      if (free_head(seg) == l) free_head(seg) = next;
    }
    push_front(l);
  }

  void clear_slot(Link l, std::size_t slot) {
    node(l).slots.at(slot) = Slot{};
    auto d = datum(l, slot);
    std::fill(d.begin(), d.end(), std::uint8_t{0});
  }

  /// Writes a raw value into any register or node field. No validation: link
  /// fields take the raw 64-bit encoding, byte fields the low 8 bits.
  void inject_fault(const FieldAddress& target, std::uint64_t value) {
    if (const auto* reg = std::get_if<RegisterAddress>(&target)) {
      switch (reg->field) {
        case RegisterField::Root: registers.root = Link::from_raw(value); break;
        case RegisterField::Free: registers.free.at(reg->segment - 1) = Link::from_raw(value); break;
        case RegisterField::Curkey: registers.curkey = value; break;
        case RegisterField::Curnode: registers.curnode.at(reg->segment - 1) = value; break;
        case RegisterField::Count: registers.count = value; break;
      }
      return;
    }
    const auto& addr = std::get<NodeAddress>(target);
    Node& n = node(addr.node);
    switch (addr.field) {
      case NodeFieldKind::Low: n.slots.at(addr.slot).low = value; break;
      case NodeFieldKind::High: n.slots.at(addr.slot).high = value; break;
      case NodeFieldKind::Child: n.slots.at(addr.slot).child = Link::from_raw(value); break;
      case NodeFieldKind::Occupied: n.slots.at(addr.slot).occupied = static_cast<std::uint8_t>(value); break;
      case NodeFieldKind::DatumByte:
        datum(addr.node, addr.slot).subspan(addr.byte_index, 1)[0] = static_cast<std::uint8_t>(value);
        break;
      case NodeFieldKind::Parent: n.parent = Link::from_raw(value); break;
      case NodeFieldKind::FreeNext: n.free_next = Link::from_raw(value); break;
      case NodeFieldKind::FreePrev: n.free_prev = Link::from_raw(value); break;
    }
  }

  friend bool operator==(const Arena& a, const Arena& b) {
    return a.pmax_ == b.pmax_ && a.datum_width_ == b.datum_width_ && a.registers == b.registers &&
           a.nodes_ == b.nodes_ && a.data_ == b.data_;
  }

private:
  std::size_t datum_offset(Link l, std::size_t slot) const {
    if (!resolvable(l) || slot >= kSlotsPerNode) throw ArenaError("datum address out of range");
    return (static_cast<std::size_t>(l.slot) * kSlotsPerNode + slot) * datum_width_;
  }

  void push_front(Link l) {
    const unsigned seg = l.segment;
    Node& n = node(l);
    const Link head = free_head(seg);
    n.free_prev = Link::null();
    if (head == l) return;
    n.free_next = head;
    if (resolvable_in(head, seg)) node(head).free_prev = l;
    free_head(seg) = l;
  }

  unsigned pmax_;
  std::size_t datum_width_;
  std::uint64_t capacity_ = 0;
  std::uint64_t count_modulus_ = 0;
  std::vector<std::size_t> sizes_;
  std::vector<std::vector<Node>> nodes_;
  std::vector<std::vector<std::uint8_t>> data_;
};

}  // namespace stab23
