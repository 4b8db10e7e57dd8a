// Differential testing and measurement: an ordered-map oracle, seeded history
// generation, seeded corruption, and the availability, allocation-rate,
// split-rate and convergence verdicts.
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stab23/arena.hpp"
#include "stab23/ops.hpp"
#include "stab23/semantics.hpp"

namespace stab23::harness {

enum class OpKind : std::uint8_t { Find, Insert, Delete, Locate };

inline std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::Find: return "find";
    case OpKind::Insert: return "insert";
    case OpKind::Delete: return "delete";
    case OpKind::Locate: return "locate";
  }
  return "?";
}

struct Invocation {
  OpKind kind = OpKind::Find;
  Key key = 0;
  std::vector<std::uint8_t> datum;

  friend bool operator==(const Invocation&, const Invocation&) = default;
};

/// Little-endian key bytes; gives every generated item a checkable datum.
inline std::vector<std::uint8_t> datum_for(Key k) {
  std::vector<std::uint8_t> d(8);
  for (int i = 0; i < 8; ++i) d[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(k >> (8 * i));
  return d;
}

inline Response apply(StabilizingTree& t, const Invocation& inv) {
  switch (inv.kind) {
    case OpKind::Find: return t.find(inv.key);
    case OpKind::Insert: return t.insert(inv.key, inv.datum);
    case OpKind::Delete: return t.remove(inv.key);
    case OpKind::Locate: return t.locate(inv.key);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Oracle

class Oracle {
public:
  /// `tree_response` is the tree's answer to an insert; a refusal by the tree
  /// is mirrored so that key sets stay comparable.
  ResponseKind apply(const Invocation& inv, std::optional<ResponseKind> tree_response = std::nullopt) {
    switch (inv.kind) {
      case OpKind::Find: return map_.count(inv.key) ? ResponseKind::Item : ResponseKind::Missing;
      case OpKind::Locate: return map_.lower_bound(inv.key) != map_.end() ? ResponseKind::Item : ResponseKind::Missing;
      case OpKind::Delete: return map_.erase(inv.key) ? ResponseKind::Item : ResponseKind::Missing;
      case OpKind::Insert:
        if (map_.count(inv.key) || tree_response == ResponseKind::Full) return ResponseKind::Full;
        map_.emplace(inv.key, inv.datum);
        return ResponseKind::Ack;
    }
    return ResponseKind::Missing;
  }

  std::optional<Key> successor(Key k) const {
    auto it = map_.lower_bound(k);
    if (it == map_.end()) return std::nullopt;
    return it->first;
  }

  std::vector<Key> keys() const {
    std::vector<Key> out;
    out.reserve(map_.size());
    for (const auto& [k, d] : map_) out.push_back(k);
    return out;
  }
  std::size_t size() const noexcept { return map_.size(); }
  const std::map<Key, std::vector<std::uint8_t>>& items() const noexcept { return map_; }

private:
  std::map<Key, std::vector<std::uint8_t>> map_;
};

// ---------------------------------------------------------------------------
// Histories

enum class Profile : std::uint8_t { Mixed, InsertHeavy, DeleteHeavy, ReadHeavy };

inline Profile parse_profile(std::string_view name) {
  if (name == "mixed") return Profile::Mixed;
  if (name == "insert-heavy") return Profile::InsertHeavy;
  if (name == "delete-heavy") return Profile::DeleteHeavy;
  if (name == "read-heavy") return Profile::ReadHeavy;
  throw std::invalid_argument("unknown profile: " + std::string(name));
}

inline std::string_view to_string(Profile p) {
  switch (p) {
    case Profile::Mixed: return "mixed";
    case Profile::InsertHeavy: return "insert-heavy";
    case Profile::DeleteHeavy: return "delete-heavy";
    case Profile::ReadHeavy: return "read-heavy";
  }
  return "?";
}

/// Operation weights out of 100: insert, delete, find, locate.
inline std::array<unsigned, 4> profile_weights(Profile p) {
  switch (p) {
    case Profile::Mixed: return {35, 30, 25, 10};
    case Profile::InsertHeavy: return {75, 10, 10, 5};
    case Profile::DeleteHeavy: return {25, 55, 15, 5};
    case Profile::ReadHeavy: return {10, 10, 60, 20};
  }
  return {25, 25, 25, 25};
}

/// Deterministic per (seed, profile, length, key_space); keys are uniform in [0, key_space).
inline std::vector<Invocation> generate_history(std::uint64_t seed, Profile profile, std::size_t length,
                                                Key key_space = 1000) {
  if (key_space == 0) throw std::invalid_argument("key space must be positive");
  std::mt19937_64 rng(seed);
  const auto w = profile_weights(profile);
  std::vector<Invocation> out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const unsigned roll = static_cast<unsigned>(rng() % 100);
    Invocation inv;
    inv.key = rng() % key_space;
    if (roll < w[0]) {
      inv.kind = OpKind::Insert;
      inv.datum = datum_for(inv.key);
    } else if (roll < w[0] + w[1]) {
      inv.kind = OpKind::Delete;
    } else if (roll < w[0] + w[1] + w[2]) {
      inv.kind = OpKind::Find;
    } else {
      inv.kind = OpKind::Locate;
    }
    out.push_back(std::move(inv));
  }
  return out;
}

struct HistoryEntry {
  Invocation invocation;
  Response response;
  std::size_t content_before = 0;
  std::size_t content_after = 0;
  std::vector<Key> content;  // content keys after the operation, when recorded
};

struct History {
  std::vector<Key> initial_content;
  std::vector<HistoryEntry> entries;
};

/// Replays `stream` on `t`, recording responses and (optionally) content after each step.
inline History record(StabilizingTree& t, const std::vector<Invocation>& stream, bool keep_content = true) {
  History h;
  h.initial_content = semantics::content_keys(t.arena());
  std::size_t before = h.initial_content.size();
  h.entries.reserve(stream.size());
  for (const auto& inv : stream) {
    HistoryEntry e;
    e.invocation = inv;
    e.response = apply(t, inv);
    e.content_before = before;
    auto keys = semantics::content_keys(t.arena());
    e.content_after = keys.size();
    before = keys.size();
    if (keep_content) e.content = std::move(keys);
    h.entries.push_back(std::move(e));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Corruption

enum Scope : unsigned {
  kScopeKeys = 1u << 0,
  kScopeLinks = 1u << 1,
  kScopeRegisters = 1u << 2,
  kScopeFreeLists = 1u << 3,
  kScopeAll = kScopeKeys | kScopeLinks | kScopeRegisters | kScopeFreeLists,
};

/// Comma-separated subset of keys, links, registers, freelists; "all" or "full" for every scope.
inline unsigned parse_scope(std::string_view text) {
  unsigned scope = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string_view part = text.substr(start, end - start);
    if (part == "keys")
      scope |= kScopeKeys;
    else if (part == "links")
      scope |= kScopeLinks;
    else if (part == "registers")
      scope |= kScopeRegisters;
    else if (part == "freelists")
      scope |= kScopeFreeLists;
    else if (part == "all" || part == "full")
      scope |= kScopeAll;
    else
      throw std::invalid_argument("unknown corruption scope: " + std::string(part));
    start = end + 1;
  }
  return scope;
}

inline std::string scope_name(unsigned scope) {
  if (scope == kScopeAll) return "all";
  std::string out;
  auto add = [&](unsigned bit, const char* name) {
    if (!(scope & bit)) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(kScopeKeys, "keys");
  add(kScopeLinks, "links");
  add(kScopeRegisters, "registers");
  add(kScopeFreeLists, "freelists");
  return out.empty() ? "none" : out;
}

struct CorruptionSpec {
  std::uint64_t seed = 0;
  unsigned scope = kScopeAll;
  double intensity = 0.1;  // probability that any one field in scope is rewritten
  Key key_space = 1000;    // plausible key values are drawn from [0, key_space)
};

namespace detail {

inline Link random_link(std::mt19937_64& rng, const Arena& a, std::optional<unsigned> near_segment = std::nullopt) {
  const unsigned roll = static_cast<unsigned>(rng() % 8);
  if (roll == 0) return Link::null();
  if (roll == 1) return Link::from_raw(rng());
  if (roll == 2) return Link::at(static_cast<std::uint32_t>(rng() % (a.pmax() + 2)), static_cast<std::uint32_t>(rng() % 64));
  unsigned seg = static_cast<unsigned>(1 + rng() % a.pmax());
  if (near_segment && roll >= 5) seg = *near_segment;
  if (seg < 1 || seg > a.pmax()) seg = 1;
  return Link::at(seg, static_cast<std::uint32_t>(rng() % a.segment_size(seg)));
}

inline Key random_key(std::mt19937_64& rng, Key key_space) {
  return rng() % 4 == 0 ? rng() : rng() % key_space;
}

}  // namespace detail

/// Rewrites each field in scope with probability `intensity`. Deterministic per CorruptionSpec and state.
inline void inject_corruption(Arena& a, const CorruptionSpec& spec) {
  if (spec.intensity <= 0.0 || spec.scope == 0) return;
  std::mt19937_64 rng(spec.seed);
  auto hit = [&] { return static_cast<double>(rng() % 1000000) / 1000000.0 < spec.intensity; };
  const unsigned pmax = a.pmax();

  if (spec.scope & kScopeRegisters) {
    if (hit()) a.inject_fault(RegisterAddress{RegisterField::Root, 0}, detail::random_link(rng, a).raw());
    if (hit()) a.inject_fault(RegisterAddress{RegisterField::Curkey, 0}, detail::random_key(rng, spec.key_space));
    for (unsigned seg = 1; seg <= pmax; ++seg)
      if (hit()) a.inject_fault(RegisterAddress{RegisterField::Curnode, seg}, rng() % 2 ? rng() : rng() % 64);
    if (hit()) a.inject_fault(RegisterAddress{RegisterField::Count, 0}, rng() % 2 ? rng() : rng() % a.capacity());
  }
  if (spec.scope & kScopeFreeLists) {
    for (unsigned seg = 1; seg <= pmax; ++seg)
      if (hit()) a.inject_fault(RegisterAddress{RegisterField::Free, seg}, detail::random_link(rng, a, seg).raw());
  }

  for (unsigned seg = 1; seg <= pmax; ++seg) {
    for (std::uint32_t s = 0; s < a.segment_size(seg); ++s) {
      const Link l = Link::at(seg, s);
      for (unsigned slot = 0; slot < kSlotsPerNode; ++slot) {
        if (spec.scope & kScopeKeys) {
          const Slot cur = a.node(l).slots[slot];
          auto perturb = [&](Key old) {
            return rng() % 2 ? old + rng() % 16 - 8 : detail::random_key(rng, spec.key_space);
          };
          if (hit()) a.inject_fault(NodeAddress{l, NodeFieldKind::Low, slot}, perturb(cur.low));
          if (hit()) a.inject_fault(NodeAddress{l, NodeFieldKind::High, slot}, perturb(cur.high));
          if (hit()) a.inject_fault(NodeAddress{l, NodeFieldKind::Occupied, slot}, rng() % 3 ? rng() % 2 : rng());
          if (a.datum_width() > 0 && hit())
            a.inject_fault(NodeAddress{l, NodeFieldKind::DatumByte, slot,
                                       static_cast<unsigned>(rng() % a.datum_width())},
                           rng());
        }
        if ((spec.scope & kScopeLinks) && hit())
          a.inject_fault(NodeAddress{l, NodeFieldKind::Child, slot},
                         detail::random_link(rng, a, seg > 1 ? std::optional(seg - 1) : std::nullopt).raw());
      }
      if ((spec.scope & kScopeLinks) && hit())
        a.inject_fault(NodeAddress{l, NodeFieldKind::Parent},
                       detail::random_link(rng, a, seg < pmax ? std::optional(seg + 1) : std::nullopt).raw());
      if (spec.scope & kScopeFreeLists) {
        if (hit()) a.inject_fault(NodeAddress{l, NodeFieldKind::FreeNext}, detail::random_link(rng, a, seg).raw());
        if (hit()) a.inject_fault(NodeAddress{l, NodeFieldKind::FreePrev}, detail::random_link(rng, a, seg).raw());
      }
    }
  }
}

/// Inserts random keys from [0, key_space) until `items` inserts were acknowledged
/// or `items * 4` attempts were made.
inline void populate(StabilizingTree& t, std::uint64_t seed, std::size_t items, Key key_space) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::size_t acked = 0;
  for (std::size_t tries = 0; acked < items && tries < items * 4 + 16; ++tries) {
    const Key k = rng() % key_space;
    if (t.insert(k, datum_for(k)).kind == ResponseKind::Ack) ++acked;
  }
}

// ---------------------------------------------------------------------------
// Availability

struct VisitBound {
  std::uint64_t c = 0;
  std::uint64_t d = 0;
  std::uint64_t limit(unsigned pmax) const { return c * pmax + d; }
};

/// The (C, D) pair used by the acceptance suite and the tools.
inline constexpr VisitBound kDefaultVisitBound{64, 64};

enum class ViolationKind : std::uint8_t { Malformed, LostItem, Visits, OverCapacity, ContentGain };

inline std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::Malformed: return "malformed";
    case ViolationKind::LostItem: return "lost-item";
    case ViolationKind::Visits: return "visits";
    case ViolationKind::OverCapacity: return "over-capacity";
    case ViolationKind::ContentGain: return "content-gain";
  }
  return "?";
}

struct Violation {
  std::size_t index = 0;  // operation index in the history
  ViolationKind kind = ViolationKind::Malformed;
  std::string detail;
};

/// Checks (i) response well-formedness against the content before the
/// operation, (ii) that every acknowledged key stays in the content until a
/// delete returns it, (iii) the visit bound, (iv) no ack at or above
/// capacity, and that content never gains a key other than an acked insert.
/// Needs a history recorded with content.
inline std::vector<Violation> check_availability(const History& h, unsigned pmax, std::uint64_t capacity,
                                                 VisitBound bound) {
  std::vector<Violation> out;
  std::set<Key> acked;
  const std::vector<Key>* before = &h.initial_content;
  auto in = [](const std::vector<Key>& v, Key k) { return std::binary_search(v.begin(), v.end(), k); };

  for (std::size_t i = 0; i < h.entries.size(); ++i) {
    const HistoryEntry& e = h.entries[i];
    const Invocation& inv = e.invocation;
    const Response& r = e.response;
    auto report = [&](ViolationKind kind, std::string msg) { out.push_back({i, kind, std::move(msg)}); };
    const std::string op = std::string(to_string(inv.kind)) + "(" + std::to_string(inv.key) + ")";

    // (i)
    const bool has_item = r.item.has_value();
    switch (inv.kind) {
      case OpKind::Find:
      case OpKind::Delete:
        if (r.kind != ResponseKind::Item && r.kind != ResponseKind::Missing)
          report(ViolationKind::Malformed, op + " answered " + std::string(to_string(r.kind)));
        else if ((r.kind == ResponseKind::Item) != in(*before, inv.key))
          report(ViolationKind::Malformed, op + " disagrees with the content");
        else if (has_item != (r.kind == ResponseKind::Item) || (has_item && r.item->key != inv.key))
          report(ViolationKind::Malformed, op + " returned a wrong item");
        break;
      case OpKind::Locate:
        // Exact successors need exact ranges; on arbitrary states only soundness is required.
        if (r.kind != ResponseKind::Item && r.kind != ResponseKind::Missing)
          report(ViolationKind::Malformed, op + " answered " + std::string(to_string(r.kind)));
        else if (has_item != (r.kind == ResponseKind::Item) ||
                 (has_item && (r.item->key < inv.key || !in(*before, r.item->key))))
          report(ViolationKind::Malformed, op + " returned a key outside the content or below k");
        break;
      case OpKind::Insert:
        if (r.kind != ResponseKind::Ack && r.kind != ResponseKind::Full)
          report(ViolationKind::Malformed, op + " answered " + std::string(to_string(r.kind)));
        else if ((r.kind == ResponseKind::Full) == (r.refusal == Refusal::None))
          report(ViolationKind::Malformed, op + " refusal reason inconsistent");
        else if (r.refusal == Refusal::Duplicate && !in(*before, inv.key))
          report(ViolationKind::Malformed, op + " refused as duplicate of an absent key");
        else if (r.kind == ResponseKind::Ack && in(*before, inv.key))
          report(ViolationKind::Malformed, op + " acked a key already present");
        break;
    }

    // (ii) and content gain
    if (inv.kind == OpKind::Delete && r.kind == ResponseKind::Item) acked.erase(inv.key);
    if (inv.kind == OpKind::Insert && r.kind == ResponseKind::Ack) acked.insert(inv.key);
    for (Key k : acked)
      if (!in(e.content, k)) report(ViolationKind::LostItem, "acked key " + std::to_string(k) + " missing after " + op);
    for (Key k : e.content)
      if (!in(*before, k) && !(inv.kind == OpKind::Insert && r.kind == ResponseKind::Ack && k == inv.key))
        report(ViolationKind::ContentGain, "key " + std::to_string(k) + " appeared after " + op);
    std::erase_if(acked, [&](Key k) { return !in(e.content, k); });

    // (iii)
    if (r.visits > bound.limit(pmax))
      report(ViolationKind::Visits, op + " took " + std::to_string(r.visits) + " visits");
    // (iv)
    if (r.kind == ResponseKind::Ack && e.content_before >= capacity)
      report(ViolationKind::OverCapacity, op + " acked with content at capacity");

    before = &e.content;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Allocation rate

struct AllocRateViolation {
  std::size_t window_start = 0;
  std::size_t window = 0;  // k
  unsigned segment = 0;
  std::uint64_t observed = 0;
  std::uint64_t bound = 0;
};

/// For every window of k <= max_window consecutive operations and every
/// segment i: attempts in S_i >= floor(attempts_per_op * k / 2^i). Returns
/// the tightest failing window per (k, i), empty when the bound holds.
inline std::vector<AllocRateViolation> check_alloc_rate(const std::vector<AttemptRecord>& log, std::size_t operations,
                                                        unsigned pmax, unsigned attempts_per_op = 11,
                                                        std::size_t max_window = 100) {
  std::vector<std::vector<std::uint64_t>> prefix(pmax, std::vector<std::uint64_t>(operations + 1, 0));
  for (const auto& rec : log)
    if (rec.segment >= 1 && rec.segment <= pmax && rec.operation < operations)
      ++prefix[rec.segment - 1][rec.operation + 1];
  for (auto& p : prefix)
    for (std::size_t i = 1; i <= operations; ++i) p[i] += p[i - 1];

  std::vector<AllocRateViolation> out;
  for (unsigned seg = 1; seg <= pmax; ++seg) {
    for (std::size_t k = 1; k <= std::min(max_window, operations); ++k) {
      const std::uint64_t bound = (std::uint64_t{attempts_per_op} * k) >> seg;
      std::optional<AllocRateViolation> worst;
      for (std::size_t s = 0; s + k <= operations; ++s) {
        const std::uint64_t got = prefix[seg - 1][s + k] - prefix[seg - 1][s];
        if (got < bound && (!worst || got < worst->observed)) worst = AllocRateViolation{s, k, seg, got, bound};
      }
      if (worst) out.push_back(*worst);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split rate

struct SplitRateViolation {
  std::size_t t = 0;
  unsigned segment = 0;
  std::uint64_t observed = 0;
  std::uint64_t bound = 0;
};

/// `splits[t-1][i-1]` is the cumulative split count in S_i after t operations;
/// `initial_nodes[i-1]` is the initial active-tree node count of S_i.
inline std::vector<SplitRateViolation> check_split_rate(const std::vector<std::vector<std::uint64_t>>& splits,
                                                        const std::vector<std::size_t>& initial_nodes) {
  std::vector<SplitRateViolation> out;
  for (std::size_t t = 1; t <= splits.size(); ++t) {
    for (unsigned seg = 1; seg <= initial_nodes.size(); ++seg) {
      const std::uint64_t n = initial_nodes[seg - 1];
      if (t <= n) continue;
      const std::uint64_t per = std::uint64_t{1} << seg;
      const std::uint64_t bound = n + (t - n + per - 1) / per;
      const std::uint64_t got = splits[t - 1].at(seg - 1);
      if (got > bound) out.push_back({t, seg, got, bound});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convergence

struct ConvergenceReport {
  std::size_t m_bar = 0;  // initial base-tree nodes
  std::size_t n_bar = 0;  // initial items
  std::optional<std::size_t> ops_to_normal;
  std::optional<std::size_t> ops_to_safe;
  std::size_t n_at_normal = 0;  // items when the state first became normal
  std::size_t items_lost = 0;
  std::uint64_t max_visits = 0;
  std::size_t violations = 0;            // availability violations plus closure breaks
  std::size_t closure_breaks = 0;        // normal at some index, not normal later
  std::vector<std::vector<std::uint64_t>> attempts;  // cumulative c_i after each operation
  std::vector<Violation> details;
};

/// Replays `stream`, checking normality and safety after every operation.
/// Index t counts operations applied, 0 being the initial state.
inline ConvergenceReport measure_convergence(StabilizingTree& t, const std::vector<Invocation>& stream,
                                             VisitBound bound) {
  ConvergenceReport rep;
  const Arena& a = t.arena();
  const auto initial = semantics::content_keys(a);
  rep.m_bar = semantics::base_tree(a).node_count();
  rep.n_bar = initial.size();

  bool normal_seen = false;
  auto observe = [&](std::size_t index) {
    const bool normal = semantics::is_normal(a);
    if (normal && !rep.ops_to_normal) {
      rep.ops_to_normal = index;
      rep.n_at_normal = semantics::content(a).size();
    }
    if (normal_seen && !normal) ++rep.closure_breaks;
    normal_seen = normal_seen || normal;
    if (!rep.ops_to_safe && normal && semantics::is_safe(a)) rep.ops_to_safe = index;
  };
  observe(0);

  History h;
  h.initial_content = initial;
  std::set<Key> deleted;
  std::size_t before = initial.size();
  for (std::size_t i = 0; i < stream.size(); ++i) {
    HistoryEntry e;
    e.invocation = stream[i];
    e.response = apply(t, stream[i]);
    e.content = semantics::content_keys(a);
    e.content_before = before;
    e.content_after = e.content.size();
    before = e.content_after;
    rep.max_visits = std::max(rep.max_visits, e.response.visits);
    if (e.invocation.kind == OpKind::Delete && e.response.kind == ResponseKind::Item) deleted.insert(e.invocation.key);
    h.entries.push_back(std::move(e));
    rep.attempts.push_back(t.instrumentation().attempts);
    observe(i + 1);
  }

  const std::vector<Key>& final_content = h.entries.empty() ? initial : h.entries.back().content;
  for (Key k : initial)
    if (!deleted.count(k) && !std::binary_search(final_content.begin(), final_content.end(), k)) ++rep.items_lost;

  rep.details = check_availability(h, a.pmax(), a.capacity(), bound);
  rep.violations = rep.details.size() + rep.closure_breaks;
  return rep;
}

inline constexpr std::string_view kConvergenceCsvHeader =
    "seed,pmax,K,scope,intensity,m_bar,n_bar,ops_to_normal,ops_to_safe,items_lost,max_visits,violations";

/// One CSV row; runs that never converged report -1.
inline std::string csv_row(std::uint64_t seed, unsigned pmax, std::uint64_t capacity, const CorruptionSpec& spec,
                           const ConvergenceReport& r) {
  std::ostringstream out;
  auto opt = [&](const std::optional<std::size_t>& v) {
    if (v)
      out << *v;
    else
      out << -1;
  };
  out << seed << ',' << pmax << ',' << capacity << ',' << scope_name(spec.scope) << ',' << spec.intensity << ','
      << r.m_bar << ',' << r.n_bar << ',';
  opt(r.ops_to_normal);
  out << ',';
  opt(r.ops_to_safe);
  out << ',' << r.items_lost << ',' << r.max_visits << ',' << r.violations;
  return out.str();
}

}  // namespace stab23::harness
