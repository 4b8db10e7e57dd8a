// Acceptance suite. Prints one PASS/FAIL line per criterion; exit status is
// nonzero when any selected criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "fixtures.hpp"
#include "stab23/harness.hpp"
#include "stab23/ops.hpp"
#include "stab23/semantics.hpp"

using namespace stab23;
using namespace stab23::harness;

namespace {

constexpr VisitBound kVisits = kDefaultVisitBound;
// Stabilization slopes for criterion 6.
constexpr double kNormalSlope = 2.0;
constexpr double kSafeSlope = 2.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

// A tree populated from empty and then corrupted, with counters reset so the
// measured stream starts at operation 0.
struct CorruptedStart {
  StabilizingTree tree;
  CorruptionSpec spec;
};

CorruptedStart corrupted_start(std::uint64_t seed, unsigned pmax, unsigned scope, double intensity, double fill) {
  StabilizingTree t(pmax);
  const Key space = 2 * t.arena().capacity();
  populate(t, seed, static_cast<std::size_t>(fill * static_cast<double>(t.arena().capacity())), space);
  const CorruptionSpec spec{seed * 7919 + 1, scope, intensity, space};
  inject_corruption(t.arena(), spec);
  auto& inst = t.instrumentation();
  inst.operations = 0;
  inst.attempt_log.clear();
  std::fill(inst.attempts.begin(), inst.attempts.end(), 0);
  std::fill(inst.splits.begin(), inst.splits.end(), 0);
  return {std::move(t), spec};
}

// Runs until the state is safe; returns false if it never gets there.
bool drive_to_safe(StabilizingTree& t, std::uint64_t seed, std::size_t budget) {
  const auto stream = generate_history(seed, Profile::Mixed, budget, 2 * t.arena().capacity());
  for (const auto& inv : stream) {
    if (semantics::is_safe(t.arena())) return true;
    apply(t, inv);
  }
  return semantics::is_safe(t.arena());
}

// ---------------------------------------------------------------------------

Outcome skewed_active_tree() {
  const Arena a = fixtures::skewed_arena();
  using Row = std::pair<Link, std::array<bool, 3>>;
  std::vector<Row> expected = {
      {Link::at(1, 0), {true, true, true}},
      {Link::at(1, 1), {true, true, true}},
      {Link::at(2, 0), {true, true, false}},
      {Link::at(3, 0), {true, false, false}},
  };
  std::sort(expected.begin(), expected.end());
  const auto got = fixtures::semantics_result(a);
  const auto keys = semantics::content_keys(a);
  const std::vector<Key> want = {120, 125, 131, 133, 155, 160};

  std::ostringstream d;
  d << "content {";
  for (std::size_t i = 0; i < keys.size(); ++i) d << (i ? "," : "") << keys[i];
  d << "}, active nodes " << got.size() << " (expected " << expected.size() << ")";
  return {got == expected && keys == want, d.str()};
}

Outcome refusal_example() {
  const std::string target = fixtures::sample_shape();
  std::vector<Key> order = fixtures::sample_keys();
  std::mt19937_64 rng(1);
  for (std::size_t attempt = 1; attempt <= 200000; ++attempt) {
    std::shuffle(order.begin(), order.end(), rng);
    StabilizingTree t(3);
    bool ok = true;
    for (Key k : order) ok = ok && t.insert(k).kind == ResponseKind::Ack;
    if (!ok || fixtures::shape(t.arena(), t.arena().registers.root) != target) continue;
    const Response r = t.insert(123);
    const bool unchanged = semantics::content_keys(t.arena()) == fixtures::sample_keys();
    return {r.kind == ResponseKind::Full && unchanged,
            "shape found after " + std::to_string(attempt) + " orders; insert(123) -> " +
                std::string(to_string(r.kind)) + " (" + std::string(to_string(r.refusal)) + ")"};
  }
  return {false, "no insertion order reproduced the shape"};
}

Outcome differential_oracle() {
  std::atomic<std::size_t> mismatches{0};
  std::atomic<std::size_t> ops{0};
  std::atomic<std::size_t> refusals{0};
  std::mutex mu;
  std::string first;
  const std::vector<unsigned> sizes = {3, 5};
  constexpr std::size_t kStreams = 10;
  constexpr std::size_t kLength = 5000;
  parallel_for(sizes.size() * kStreams, [&](std::size_t job) {
    const unsigned pmax = sizes[job % sizes.size()];
    StabilizingTree t(pmax);
    Oracle o;
    const Key space = 2 * t.arena().capacity();
    const Profile prof = static_cast<Profile>(job % 4);
    std::size_t bad = 0;
    std::size_t i = 0;
    auto fail = [&](const std::string& why) {
      ++bad;
      std::lock_guard lk(mu);
      if (first.empty()) first = "pmax " + std::to_string(pmax) + " op " + std::to_string(i) + ": " + why;
    };
    for (const auto& inv : generate_history(1000 + job, prof, kLength, space)) {
      const bool present = o.items().count(inv.key) > 0;
      const auto succ = o.successor(inv.key);
      const auto expect_datum = present ? o.items().at(inv.key) : std::vector<std::uint8_t>{};
      const Response r = apply(t, inv);
      const ResponseKind want = o.apply(inv, r.kind);
      if (inv.kind == OpKind::Insert && r.kind == ResponseKind::Full) {
        // Duplicate refusals must name a present key; others are the capacity rule.
        if ((r.refusal == Refusal::Duplicate) != present) fail("wrong refusal reason");
        if (!present) ++refusals;
      } else if (r.kind != want) {
        fail(std::string(to_string(inv.kind)) + " answered " + std::string(to_string(r.kind)));
      } else if (r.kind == ResponseKind::Item) {
        const Key k = inv.kind == OpKind::Locate ? *succ : inv.key;
        if (r.item->key != k) fail("wrong item key");
        if (inv.kind != OpKind::Locate && r.item->datum != expect_datum) fail("wrong datum");
      }
      if (semantics::content_keys(t.arena()) != o.keys()) fail("content differs from oracle");
      ++i;
    }
    mismatches += bad;
    ops += kLength;
  });
  return {mismatches == 0, std::to_string(ops.load()) + " ops, " + std::to_string(mismatches.load()) +
                               " mismatches, " + std::to_string(refusals.load()) + " capacity refusals" +
                               (first.empty() ? "" : "; first: " + first)};
}

struct FuzzResults {
  std::size_t runs = 0;
  std::size_t availability = 0;
  std::size_t alloc_rate = 0;
  std::vector<std::uint64_t> max_visits;  // per pmax
  std::string first_availability;
  std::string first_alloc;
  bool done = false;
};

// Criteria 4 and 5 share the same runs.
const FuzzResults& availability_fuzz() {
  static FuzzResults res;
  if (res.done) return res;
  constexpr std::size_t kStates = 1000;
  constexpr std::size_t kOps = 1000;
  const double intensities[] = {0.01, 0.05, 0.1, 0.3, 1.0};
  res.max_visits.assign(8, 0);
  std::mutex mu;
  parallel_for(kStates, [&](std::size_t trial) {
    std::mt19937_64 rng(trial);
    const unsigned pmax = 2 + static_cast<unsigned>(trial % 4);
    const unsigned scope = 1 + static_cast<unsigned>(rng() % kScopeAll);
    const double intensity = intensities[rng() % 5];
    const double fill = static_cast<double>(rng() % 101) / 100.0;
    auto start = corrupted_start(trial, pmax, scope, intensity, fill);
    StabilizingTree& t = start.tree;
    t.instrumentation().log_attempts = true;
    const auto stream = generate_history(trial ^ 0xabcdef, static_cast<Profile>(rng() % 4), kOps,
                                         2 * t.arena().capacity());
    const History h = record(t, stream);
    const auto v = check_availability(h, pmax, t.arena().capacity(), kVisits);
    const auto ar = check_alloc_rate(t.instrumentation().attempt_log, kOps, pmax);
    std::uint64_t mv = 0;
    for (const auto& e : h.entries) mv = std::max(mv, e.response.visits);

    std::lock_guard lk(mu);
    ++res.runs;
    res.availability += v.size();
    res.alloc_rate += ar.size();
    res.max_visits[pmax] = std::max(res.max_visits[pmax], mv);
    if (!v.empty() && res.first_availability.empty())
      res.first_availability = "trial " + std::to_string(trial) + " op " + std::to_string(v[0].index) + ": " +
                               v[0].detail;
    if (!ar.empty() && res.first_alloc.empty())
      res.first_alloc = "trial " + std::to_string(trial) + " k=" + std::to_string(ar[0].window) + " i=" +
                        std::to_string(ar[0].segment) + " got " + std::to_string(ar[0].observed) + " < " +
                        std::to_string(ar[0].bound);
  });
  res.done = true;
  return res;
}

Outcome availability() {
  const auto& r = availability_fuzz();
  std::ostringstream d;
  d << r.runs << " corrupted states x 1000 ops, " << r.availability << " violations, bound " << kVisits.c
    << "*pmax+" << kVisits.d << ", max visits";
  for (unsigned p = 2; p < r.max_visits.size(); ++p)
    if (r.max_visits[p]) d << " p" << p << "=" << r.max_visits[p];
  if (!r.first_availability.empty()) d << "; first: " << r.first_availability;
  return {r.runs == 1000 && r.availability == 0, d.str()};
}

Outcome alloc_rate() {
  const auto& r = availability_fuzz();
  std::string d = std::to_string(r.runs) + " runs, windows k<=100, " + std::to_string(r.alloc_rate) + " violations";
  if (!r.first_alloc.empty()) d += "; first: " + r.first_alloc;
  return {r.runs == 1000 && r.alloc_rate == 0, d};
}

Outcome linearity() {
  const std::vector<unsigned> sizes = {3, 5, 8};
  constexpr std::size_t kTrials = 16;
  struct Row {
    unsigned pmax = 0;
    double m = 0, to_normal = 0;  // m_bar and ops_to_normal
    double n = 0, to_safe = 0;    // n at the normal point and ops_to_safe - ops_to_normal
    bool converged = false;
    std::size_t violations = 0;
  };
  std::vector<Row> rows(sizes.size() * kTrials);
  parallel_for(rows.size(), [&](std::size_t job) {
    const unsigned pmax = sizes[job % sizes.size()];
    std::mt19937_64 rng(500 + job);
    // Light full-scope corruption of a well-filled tree keeps a sizeable base tree to clean up.
    const double intensities[] = {0.002, 0.005, 0.01, 0.02, 0.05};
    const double intensity = intensities[rng() % 5];
    auto start = corrupted_start(500 + job, pmax, kScopeAll, intensity, 0.5 + 0.1 * static_cast<double>(rng() % 5));
    StabilizingTree& t = start.tree;
    const std::size_t m = semantics::base_tree(t.arena()).node_count();
    const std::size_t n = semantics::content(t.arena()).size();
    // Past this length the ceiling has already failed.
    const auto length = static_cast<std::size_t>(kNormalSlope * static_cast<double>(m) + kSafeSlope * static_cast<double>(m + n)) + 256;
    const auto stream = generate_history(900 + job, Profile::Mixed, length, 2 * t.arena().capacity());
    const auto rep = measure_convergence(t, stream, kVisits);
    Row& row = rows[job];
    row.pmax = pmax;
    row.violations = rep.violations + rep.items_lost;
    row.converged = rep.ops_to_normal && rep.ops_to_safe;
    row.m = static_cast<double>(std::max<std::size_t>(rep.m_bar, 1));
    row.n = static_cast<double>(std::max<std::size_t>(rep.n_at_normal, 1));
    if (row.converged) {
      row.to_normal = static_cast<double>(*rep.ops_to_normal);
      row.to_safe = static_cast<double>(*rep.ops_to_safe - *rep.ops_to_normal);
    }
  });

  bool pass = true;
  std::ostringstream d;
  d << "c=" << fmt(kNormalSlope) << " c'=" << fmt(kSafeSlope) << ";";
  std::vector<double> fitted;
  for (unsigned pmax : sizes) {
    double worst_n = 0, worst_s = 0, sxy = 0, sxx = 0, sxy_s = 0, sxx_s = 0;
    bool conv = true;
    std::size_t viol = 0;
    for (const auto& r : rows) {
      if (r.pmax != pmax) continue;
      worst_n = std::max(worst_n, r.to_normal / r.m);
      worst_s = std::max(worst_s, r.to_safe / r.n);
      sxy += r.m * r.to_normal;
      sxx += r.m * r.m;
      sxy_s += r.n * r.to_safe;
      sxx_s += r.n * r.n;
      conv = conv && r.converged;
      viol += r.violations;
    }
    // Least-squares slope through the origin.
    fitted.push_back(sxy / sxx);
    pass = pass && conv && viol == 0 && worst_n <= kNormalSlope && worst_s <= kSafeSlope;
    d << " p" << pmax << ": normal/m max " << fmt(worst_n) << " fit " << fmt(sxy / sxx) << ", safe/n max "
      << fmt(worst_s) << " fit " << fmt(sxy_s / sxx_s) << (conv ? "" : " NOT CONVERGED") << ";";
    if (viol) d << " violations " << viol << ";";
  }
  const auto [lo, hi] = std::minmax_element(fitted.begin(), fitted.end());
  const double spread = *lo > 0 ? *hi / *lo : 0;
  pass = pass && *lo > 0 && spread < 2.0;
  d << " normal fit spread " << fmt(spread) << "x";
  return {pass, d.str()};
}

Outcome closure() {
  constexpr std::size_t kPairs = 10000;
  std::size_t broken = 0;
  std::size_t pairs = 0;
  std::mt19937_64 rng(77);
  // Normal states reached from empty and from converged corruption.
  for (std::size_t run = 0; pairs < kPairs; ++run) {
    const unsigned pmax = 2 + static_cast<unsigned>(run % 4);
    StabilizingTree t(pmax);
    if (run % 2) {
      auto start = corrupted_start(3000 + run, pmax, kScopeAll, 0.1, 0.6);
      t = std::move(start.tree);
    }
    const auto stream = generate_history(4000 + run, static_cast<Profile>(run % 4), 500, 2 * t.arena().capacity());
    for (const auto& inv : stream) {
      const bool normal = semantics::is_normal(t.arena());
      apply(t, inv);
      if (!normal) continue;
      ++pairs;
      broken += !semantics::is_normal(t.arena());
      if (pairs == kPairs) break;
    }
  }
  return {broken == 0, std::to_string(pairs) + " pairs, " + std::to_string(broken) + " left the normal states"};
}

Outcome safe_insert() {
  constexpr std::size_t kTrials = 200;
  std::atomic<std::size_t> trials{0}, failures{0}, height{0}, dup{0}, unsafe{0};
  std::mutex mu;
  std::string first;
  parallel_for(kTrials, [&](std::size_t trial) {
    const unsigned pmax = 2 + static_cast<unsigned>(trial % 4);
    std::mt19937_64 rng(6000 + trial);
    StabilizingTree t(pmax);
    const Key space = 2 * t.arena().capacity();
    if (trial % 2) {
      auto start = corrupted_start(6000 + trial, pmax, kScopeAll, 0.1, 0.5);
      t = std::move(start.tree);
      if (!drive_to_safe(t, 7000 + trial, 20 * t.arena().capacity())) {
        ++unsafe;
        return;
      }
    } else {
      populate(t, 6000 + trial, rng() % t.arena().capacity(), space);
    }
    if (!semantics::is_safe(t.arena())) {
      ++unsafe;
      return;
    }
    const std::size_t n = semantics::content(t.arena()).size();
    // n items means n operations; an empty safe state asks for none.
    const auto stream = generate_history(8000 + trial, Profile::InsertHeavy, n, space);
    for (const auto& inv : stream) {
      const std::size_t before = semantics::content(t.arena()).size();
      const Response r = apply(t, inv);
      if (r.kind != ResponseKind::Full || before >= t.arena().capacity()) continue;
      if (r.refusal == Refusal::Duplicate) {
        ++dup;
      } else if (r.refusal == Refusal::Height) {
        ++height;
      } else {
        ++failures;
        std::lock_guard lk(mu);
        if (first.empty())
          first = "trial " + std::to_string(trial) + " insert(" + std::to_string(inv.key) + ") " +
                  std::string(to_string(r.refusal));
      }
    }
    ++trials;
  });
  std::string d = std::to_string(trials.load()) + " safe starts, " + std::to_string(failures.load()) +
                  " allocation refusals below K; allowed: " + std::to_string(dup.load()) + " duplicate, " +
                  std::to_string(height.load()) + " height";
  if (unsafe) d += "; " + std::to_string(unsafe.load()) + " starts never became safe";
  if (!first.empty()) d += "; first: " + first;
  return {failures == 0 && unsafe == 0, d};
}

Outcome split_rate() {
  constexpr std::size_t kTrials = 100;
  std::atomic<std::size_t> violations{0}, ops{0}, total_splits{0};
  std::mutex mu;
  std::string first;
  parallel_for(kTrials, [&](std::size_t trial) {
    const unsigned pmax = 2 + static_cast<unsigned>(trial % 4);
    StabilizingTree t(pmax);
    const Key space = 4 * t.arena().capacity();
    if (trial % 2) {
      auto start = corrupted_start(9000 + trial, pmax, kScopeAll, 0.1, 0.3);
      t = std::move(start.tree);
      if (!drive_to_safe(t, 9500 + trial, 20 * t.arena().capacity())) {
        ++violations;
        return;
      }
    } else {
      populate(t, 9000 + trial, t.arena().capacity() / 4, space);
    }
    const auto active = semantics::active_tree(t.arena());
    std::vector<std::size_t> initial(pmax, 0);
    for (const auto& tn : active.nodes)
      if (tn.present) ++initial[tn.segment - 1];
    const std::size_t n = semantics::content(t.arena()).size();
    auto& splits = t.instrumentation().splits;
    std::fill(splits.begin(), splits.end(), 0);

    std::vector<std::vector<std::uint64_t>> trajectory;
    const auto stream = generate_history(9900 + trial, Profile::InsertHeavy, 10 * std::max<std::size_t>(n, 1), space);
    for (const auto& inv : stream) {
      apply(t, inv);
      trajectory.push_back(splits);
    }
    const auto v = check_split_rate(trajectory, initial);
    violations += v.size();
    ops += stream.size();
    for (auto c : splits) total_splits += c;
    if (!v.empty()) {
      std::lock_guard lk(mu);
      if (first.empty())
        first = "trial " + std::to_string(trial) + " t=" + std::to_string(v[0].t) + " i=" + std::to_string(v[0].segment) +
                " splits " + std::to_string(v[0].observed) + " > " + std::to_string(v[0].bound);
    }
  });
  std::string d = std::to_string(kTrials) + " safe starts, " + std::to_string(ops.load()) + " ops, " +
                  std::to_string(total_splits.load()) + " splits, " + std::to_string(violations.load()) + " violations";
  if (!first.empty()) d += "; first: " + first;
  return {violations == 0, d};
}

Outcome brute_force() {
  constexpr std::size_t kSnapshots = 10000;
  std::size_t mismatches = 0;
  std::mt19937_64 rng(10);
  for (std::size_t i = 0; i < kSnapshots; ++i) {
    const unsigned pmax = 1 + static_cast<unsigned>(rng() % 2);
    StabilizingTree t(pmax);
    populate(t, rng(), rng() % (t.arena().capacity() + 1), 40);
    Arena a = t.arena();
    inject_corruption(a, {rng(), 1 + static_cast<unsigned>(rng() % kScopeAll),
                          0.02 + 0.5 * static_cast<double>(rng() % 100) / 100, 40});
    mismatches += fixtures::semantics_result(a) != fixtures::BruteForce(a).result();
  }
  return {mismatches == 0, std::to_string(kSnapshots) + " snapshots, " + std::to_string(mismatches) + " mismatches"};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "skewed-key active tree", skewed_active_tree},
    {2, "refusal example", refusal_example},
    {3, "differential oracle", differential_oracle},
    {4, "availability fuzz", availability},
    {5, "allocation rate", alloc_rate},
    {6, "stabilization linearity", linearity},
    {7, "normal-state closure", closure},
    {8, "safe-state inserts", safe_insert},
    {9, "split rate", split_rate},
    {10, "semantics brute force", brute_force},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> selected;
  app.add_option("-c,--criterion", selected, "criterion number(s) to run; all when omitted")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  bool all_pass = true;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = c.run();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
