// Immutable arena copies and the deterministic binary snapshot format.
//
// Layout (all integers little-endian, links as 64-bit segment<<32|slot with
// the null link encoded as all ones):
//
//   header    magic "S23A" | u32 version | u32 pmax | u32 datum width
//   registers root | free[1..pmax] | curkey | curnode[1..pmax] | count
//   nodes     for each segment, for each node in slot order:
//               3 x (low | high | child | u8 occupied | datum bytes)
//               parent | free_next | free_prev
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stab23/arena.hpp"

namespace stab23 {

class SnapshotError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class Snapshot {
public:
  static constexpr std::array<std::uint8_t, 4> kMagic{'S', '2', '3', 'A'};
  static constexpr std::uint32_t kFormatVersion = 1;

  explicit Snapshot(const Arena& arena) : arena_(std::make_shared<const Arena>(arena)) {}

  const Arena& arena() const noexcept { return *arena_; }
  Arena restore() const { return *arena_; }

  std::vector<std::uint8_t> bytes() const {
    const Arena& a = *arena_;
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic.begin(), kMagic.end());
    put32(out, kFormatVersion);
    put32(out, a.pmax());
    put32(out, static_cast<std::uint32_t>(a.datum_width()));

    put64(out, a.registers.root.raw());
    for (Link l : a.registers.free) put64(out, l.raw());
    put64(out, a.registers.curkey);
    for (auto c : a.registers.curnode) put64(out, c);
    put64(out, a.registers.count);

    for (unsigned seg = 1; seg <= a.pmax(); ++seg) {
      for (std::uint32_t s = 0; s < a.segment_size(seg); ++s) {
        const Link l = Link::at(seg, s);
        const Node& n = a.node(l);
        for (std::size_t i = 0; i < kSlotsPerNode; ++i) {
          put64(out, n.slots[i].low);
          put64(out, n.slots[i].high);
          put64(out, n.slots[i].child.raw());
          out.push_back(n.slots[i].occupied);
          auto d = a.datum(l, i);
          out.insert(out.end(), d.begin(), d.end());
        }
        put64(out, n.parent.raw());
        put64(out, n.free_next.raw());
        put64(out, n.free_prev.raw());
      }
    }
    return out;
  }

  static Snapshot from_bytes(std::span<const std::uint8_t> in) {
    Reader r{in};
    for (auto m : kMagic)
      if (r.u8() != m) throw SnapshotError("bad snapshot magic");
    const auto version = r.u32();
    if (version != kFormatVersion)
      throw SnapshotError("snapshot version " + std::to_string(version) + " is not supported");
    const auto pmax = r.u32();
    const auto width = r.u32();
    Arena a(pmax, width);

    a.registers.root = Link::from_raw(r.u64());
    for (auto& l : a.registers.free) l = Link::from_raw(r.u64());
    a.registers.curkey = r.u64();
    for (auto& c : a.registers.curnode) c = r.u64();
    a.registers.count = r.u64();

    for (unsigned seg = 1; seg <= pmax; ++seg) {
      for (std::uint32_t s = 0; s < a.segment_size(seg); ++s) {
        const Link l = Link::at(seg, s);
        Node& n = a.node(l);
        for (std::size_t i = 0; i < kSlotsPerNode; ++i) {
          n.slots[i].low = r.u64();
          n.slots[i].high = r.u64();
          n.slots[i].child = Link::from_raw(r.u64());
          n.slots[i].occupied = r.u8();
          for (auto& b : a.datum(l, i)) b = r.u8();
        }
        n.parent = Link::from_raw(r.u64());
        n.free_next = Link::from_raw(r.u64());
        n.free_prev = Link::from_raw(r.u64());
      }
    }
    if (!r.done()) throw SnapshotError("trailing bytes after snapshot");
    return Snapshot(a);
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw SnapshotError("cannot open " + path + " for writing");
    const auto b = bytes();
    f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    if (!f) throw SnapshotError("write failed: " + path);
  }

  static Snapshot load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw SnapshotError("cannot open " + path);
    std::vector<std::uint8_t> b((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_bytes(b);
  }

  friend bool operator==(const Snapshot& a, const Snapshot& b) { return a.arena() == b.arena(); }

private:
  static void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  static void put64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  struct Reader {
    std::span<const std::uint8_t> in;
    std::size_t pos = 0;

    std::uint8_t u8() {
      if (pos >= in.size()) throw SnapshotError("truncated snapshot");
      return in[pos++];
    }
    std::uint32_t u32() {
      std::uint32_t v = 0;
      for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
      return v;
    }
    std::uint64_t u64() {
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
      return v;
    }
    bool done() const { return pos == in.size(); }
  };

  std::shared_ptr<const Arena> arena_;
};

}  // namespace stab23
